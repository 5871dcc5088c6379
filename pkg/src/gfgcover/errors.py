"""Shared exception types."""


class BudgetExceededError(RuntimeError):
    """A bounded search hit its cap before exhausting the space."""


class PairCollisionError(ValueError):
    """Two formally distinct inputs became equal after rewriting."""
