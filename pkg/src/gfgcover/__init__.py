"""Covers, elevations and homological torsion for graphs of free groups
with cyclic edge groups."""

__version__ = "0.1.0"
