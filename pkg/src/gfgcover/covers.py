"""Precovers and covers of graphs of free groups with cyclic edge groups.

A precover assigns finite-index data to lifts of the base vertices: a coset
table for each lift of a free vertex, and a bare index for each lift of a
cyclic vertex (the rank-one free group has exactly one subgroup per index,
so nothing more is needed).  Every total edge realizes one elevation of the
base edge word on each of its two sides, with matching degrees.  Elevations
that no total edge realizes are hanging slots, the loose ends available for
splicing.

The data is deliberately rotation-free: a total edge records which two
elevations it joins but not which of the finitely many circle rotations
glues them.  Rotations never change ranks, Euler characteristics, degrees
or abelianizations, which is everything computed here; where a concrete
gluing is needed (``lift_word``), the rotation pairing the least coset of
one cycle with the least coset of the other is used throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

from .cosets import (
    CosetTable,
    Elevation,
    cyclic_table,
    elevations,
    enumerate_subgroups,
    prescribe_degrees,
    subgroup_rank,
    whole_group_table,
)
from .errors import BudgetExceededError
from .gog import (
    GogWord,
    GraphOfGroups,
    SerreGraph,
    enumerate_closed_words,
    ensure_valid,
    euler_characteristic,
    is_nontrivial,
    pair_of,
    reverse_edge,
)
from .homology import (
    AbelianGroup,
    TowerLedger,
    class_image,
    h1,
    ledger_check,
    ledger_update,
    p_rank,
    quotient_by,
    torsion_exponent,
)
from .words import Word

DEFAULT_BUDGET = 200_000


@dataclass(frozen=True)
class ElevationRef:
    """Names one elevation: a total vertex, the tau-oriented base edge whose
    word elevates there, and the least coset of the elevation's cycle.

    At cyclic lifts the single elevation of each end is the full cycle, so
    ``least`` is always 0 there.
    """

    vertex: str
    edge: str
    least: int


@dataclass(frozen=True)
class HangingSlot:
    """An elevation no total edge realizes.

    ``edge`` is the oriented base edge whose tau end the slot sits over, so
    two slots can be spliced exactly when their edges are mutual reverses
    and their degrees agree.
    """

    vertex: str
    edge: str
    side: str
    degree: int
    least: int

    @property
    def ref(self) -> ElevationRef:
        return ElevationRef(self.vertex, self.edge, self.least)


class PrecoverMorphism:
    """A partial cover of a graph of groups, given by explicit lift data.

    Arguments:
      base: the target graph of groups (validated, connected).
      vertex_map: total vertex name -> base vertex name.
      vertex_data: coset table per lift of a free vertex.
      cyclic_index: subgroup index per lift of a cyclic vertex.
      pairs: total pair name -> (base pair name, fwd_ref, bwd_ref) where
        fwd_ref is the elevation realized at tau of the forward orientation
        and bwd_ref the one at tau of the reverse orientation.

    The total graph of groups, the hanging slots and the per-base-vertex
    index sums are derived.  Instances are treated as immutable: every
    operation builds a new morphism.
    """

    def __init__(
        self,
        base: GraphOfGroups,
        vertex_map: Dict[str, str],
        vertex_data: Dict[str, CosetTable],
        cyclic_index: Dict[str, int],
        pairs: Dict[str, Tuple[str, ElevationRef, ElevationRef]],
        basepoint: Optional[str] = None,
    ):
        ensure_valid(base)
        self.base = base
        self.vertex_map = dict(vertex_map)
        self.vertex_data = dict(vertex_data)
        self.cyclic_index = dict(cyclic_index)
        self.pair_spec = {q: (bp, f, b) for q, (bp, f, b) in pairs.items()}
        if not self.vertex_map:
            raise ValueError("a morphism needs at least one total vertex")

        gr = base.graph
        for v, b in self.vertex_map.items():
            if b not in gr.vertices:
                raise ValueError("lift %r of unknown base vertex %r" % (v, b))
            kind = base.vertex_kind[b]
            if kind == "free":
                t = self.vertex_data.get(v)
                if t is None:
                    raise ValueError("free lift %r has no coset table" % v)
                if t.rank != base.rank(b):
                    raise ValueError("table rank mismatch at %r" % v)
            else:
                d = self.cyclic_index.get(v)
                if not isinstance(d, int) or d < 1:
                    raise ValueError("cyclic lift %r has no index" % v)
        for v in self.vertex_data:
            if v not in self.vertex_map:
                raise ValueError("table for unknown lift %r" % v)
        for v in self.cyclic_index:
            if v not in self.vertex_map:
                raise ValueError("index for unknown lift %r" % v)

        self._elev_cache: Dict[Tuple[str, str], List[Elevation]] = {}
        total_pairs: Dict[str, Tuple[str, str]] = {}
        edge_words: Dict[str, Word] = {}
        self.edge_map: Dict[str, str] = {}
        self.edge_assignment: Dict[str, ElevationRef] = {}
        for q in sorted(self.pair_spec):
            if q.startswith("~"):
                raise ValueError("pair name %r may not start with '~'" % q)
            bp, fwd, bwd = self.pair_spec[q]
            if bp not in gr.pairs:
                raise ValueError("total pair %r over unknown base pair %r" % (q, bp))
            if fwd.edge != bp or bwd.edge != reverse_edge(bp):
                raise ValueError("ref orientation mismatch at pair %r" % q)
            for ref, end in ((fwd, bp), (bwd, reverse_edge(bp))):
                if ref.vertex not in self.vertex_map:
                    raise ValueError("pair %r realized at unknown lift %r" % (q, ref.vertex))
                if self.vertex_map[ref.vertex] != gr.tau(end):
                    raise ValueError("pair %r: lift %r is not over %r" % (q, ref.vertex, gr.tau(end)))
                if self._elev_by_ref(ref) is None:
                    raise ValueError("pair %r names a nonexistent elevation %r" % (q, ref))
            total_pairs[q] = (bwd.vertex, fwd.vertex)
            self.edge_map[q] = bp
            self.edge_map["~" + q] = reverse_edge(bp)
            self.edge_assignment[q] = fwd
            self.edge_assignment["~" + q] = bwd
            edge_words[q] = self._elev_by_ref(fwd).local.canonical
            edge_words["~" + q] = self._elev_by_ref(bwd).local.canonical

        names = sorted(self.vertex_map)
        graph = SerreGraph(names, total_pairs)
        ranks = {}
        kinds = {}
        for v in names:
            b = self.vertex_map[v]
            kinds[v] = base.vertex_kind[b]
            if kinds[v] == "free":
                ranks[v] = subgroup_rank(self.vertex_data[v])
            else:
                ranks[v] = 1
        if basepoint is None:
            over_base = sorted(v for v in names if self.vertex_map[v] == base.base_vertex)
            basepoint = over_base[0] if over_base else names[0]
        elif self.vertex_map.get(basepoint) != base.base_vertex:
            raise ValueError("basepoint %r is not a lift of %r" % (basepoint, base.base_vertex))
        self.total = GraphOfGroups(graph, ranks, kinds, edge_words, basepoint)

        realized: Dict[ElevationRef, List[str]] = {}
        for d, ref in self.edge_assignment.items():
            realized.setdefault(ref, []).append(d)
        self._realized = realized
        self.realizing: Dict[ElevationRef, str] = {
            ref: sorted(ds)[0] for ref, ds in realized.items()
        }

        slots = []
        for v in names:
            b = self.vertex_map[v]
            side = kinds[v]
            for e in gr.oriented_edges():
                if gr.tau(e) != b:
                    continue
                for el in self.elevs(v, e):
                    ref = ElevationRef(v, e, el.cycle[0])
                    if ref not in realized:
                        slots.append(HangingSlot(v, e, side, el.degree, el.cycle[0]))
        self.hanging: Tuple[HangingSlot, ...] = tuple(
            sorted(slots, key=lambda s: (s.vertex, s.edge, s.least))
        )

        sums = {b: 0 for b in gr.vertices}
        for v in names:
            sums[self.vertex_map[v]] += self.vertex_index(v)
        self.sums: Dict[str, int] = sums
        self._precover_problems: Optional[List[str]] = None

    def vertex_table(self, v: str) -> CosetTable:
        """Coset table of a lift; cyclic lifts materialize theirs on demand."""
        t = self.vertex_data.get(v)
        if t is not None:
            return t
        return cyclic_table(self.cyclic_index[v])

    def vertex_index(self, v: str) -> int:
        t = self.vertex_data.get(v)
        return t.size if t is not None else self.cyclic_index[v]

    def lifts_over(self, b: str) -> List[str]:
        return sorted(v for v in self.vertex_map if self.vertex_map[v] == b)

    def elevs(self, v: str, e: str) -> List[Elevation]:
        key = (v, e)
        out = self._elev_cache.get(key)
        if out is None:
            out = elevations(self.vertex_table(v), self.base.edge_word(e))
            self._elev_cache[key] = out
        return out

    def _elev_by_ref(self, ref: ElevationRef) -> Optional[Elevation]:
        for el in self.elevs(ref.vertex, ref.edge):
            if el.cycle[0] == ref.least:
                return el
        return None

    def __repr__(self):
        return "<PrecoverMorphism %d vertices, %d pairs, %d hanging>" % (
            len(self.vertex_map),
            len(self.pair_spec),
            len(self.hanging),
        )


def identity_cover(g: GraphOfGroups) -> PrecoverMorphism:
    """The degree-one cover: one lift of everything."""
    vertex_map = {}
    vertex_data = {}
    cyclic_index = {}
    for v in g.graph.vertices:
        name = v + "@0"
        vertex_map[name] = v
        if g.vertex_kind[v] == "free":
            vertex_data[name] = whole_group_table(g.rank(v))
        else:
            cyclic_index[name] = 1
    pairs = {}
    for p in sorted(g.graph.pairs):
        fwd = ElevationRef(g.graph.tau(p) + "@0", p, 0)
        bwd = ElevationRef(g.graph.iota(p) + "@0", reverse_edge(p), 0)
        pairs[p + "@0"] = (p, fwd, bwd)
    return PrecoverMorphism(g, vertex_map, vertex_data, cyclic_index, pairs)


def with_basepoint(m: PrecoverMorphism, v: str) -> PrecoverMorphism:
    """The same morphism with a chosen lift of the base vertex marked."""
    return PrecoverMorphism(
        m.base, m.vertex_map, m.vertex_data, m.cyclic_index, m.pair_spec, basepoint=v
    )


def rename_total(m: PrecoverMorphism, suffix: str) -> PrecoverMorphism:
    """Append a suffix to every total vertex and pair name."""
    if not suffix:
        raise ValueError("empty suffix")

    def rv(v: str) -> str:
        return v + suffix

    def rr(ref: ElevationRef) -> ElevationRef:
        return replace(ref, vertex=rv(ref.vertex))

    return PrecoverMorphism(
        m.base,
        {rv(v): b for v, b in m.vertex_map.items()},
        {rv(v): t for v, t in m.vertex_data.items()},
        {rv(v): d for v, d in m.cyclic_index.items()},
        {q + suffix: (bp, rr(f), rr(b)) for q, (bp, f, b) in m.pair_spec.items()},
    )


def validate_precover(m: PrecoverMorphism) -> List[str]:
    """Degree-matched edges, each elevation realized at most once."""
    if m._precover_problems is not None:
        return list(m._precover_problems)
    problems = []
    for q in sorted(m.pair_spec):
        bp, fwd, bwd = m.pair_spec[q]
        df = m._elev_by_ref(fwd).degree
        db = m._elev_by_ref(bwd).degree
        if df != db:
            problems.append("degree mismatch at edge %r (%d vs %d)" % (q, df, db))
    for ref, ds in sorted(m._realized.items(), key=lambda kv: sorted(kv[1])[0]):
        if len(ds) > 1:
            problems.append(
                "elevation %r realized by %d edges" % (ref, len(ds))
            )
    m._precover_problems = list(problems)
    return problems


def validate_cover(m: PrecoverMorphism) -> List[str]:
    """A precover with nothing hanging and uniform index sums."""
    problems = validate_precover(m)
    for s in m.hanging:
        problems.append("hanging slot at (%r, %r)" % (s.vertex, s.edge))
    if len(set(m.sums.values())) > 1:
        problems.append("unequal index sums: %r" % (m.sums,))
    return problems


def ensure_precover(m: PrecoverMorphism) -> None:
    problems = validate_precover(m)
    if problems:
        raise ValueError("; ".join(problems))


def ensure_cover(m: PrecoverMorphism) -> None:
    problems = validate_cover(m)
    if problems:
        raise ValueError("; ".join(problems))


def degree(m: PrecoverMorphism) -> int:
    """Covering degree of a connected cover."""
    ensure_cover(m)
    if not m.total.graph.is_connected():
        raise ValueError("degree of a disconnected cover is not defined")
    return next(iter(m.sums.values()))


def predegree(m: PrecoverMorphism) -> int:
    """Largest per-base-vertex index sum: the least possible degree of a
    cover containing this precover."""
    ensure_precover(m)
    return max(m.sums.values())


def _same_base(g1: GraphOfGroups, g2: GraphOfGroups) -> bool:
    if g1 is g2:
        return True
    return (
        g1.graph.vertices == g2.graph.vertices
        and g1.graph.pairs == g2.graph.pairs
        and g1.vertex_rank == g2.vertex_rank
        and g1.vertex_kind == g2.vertex_kind
        and {e: w.letters for e, w in g1.edge_words.items()}
        == {e: w.letters for e, w in g2.edge_words.items()}
        and g1.base_vertex == g2.base_vertex
    )


def splice(
    ms: Sequence[PrecoverMorphism],
    matches: Sequence[Tuple[Tuple[int, int], Tuple[int, int]]],
) -> PrecoverMorphism:
    """Union of the morphisms with selected hanging slots glued in pairs.

    ``matches`` lists ((i, k), (j, l)): slot k of ms[i] against slot l of
    ms[j].  Matched slots must lie over mutually reverse orientations of
    the same base pair and have equal degrees; no slot may be used twice.
    An empty match list is the disjoint union.
    """
    if not ms:
        raise ValueError("nothing to splice")
    base = ms[0].base
    for m in ms[1:]:
        if not _same_base(m.base, base):
            raise ValueError("splice of morphisms over different bases")
    for m in ms:
        ensure_precover(m)

    vertex_map: Dict[str, str] = {}
    vertex_data: Dict[str, CosetTable] = {}
    cyclic_index: Dict[str, int] = {}
    pairs: Dict[str, Tuple[str, ElevationRef, ElevationRef]] = {}
    for m in ms:
        clash = set(vertex_map) & set(m.vertex_map)
        if clash:
            raise ValueError("total vertex name clash: %s" % sorted(clash))
        clash = set(pairs) & set(m.pair_spec)
        if clash:
            raise ValueError("total pair name clash: %s" % sorted(clash))
        vertex_map.update(m.vertex_map)
        vertex_data.update(m.vertex_data)
        cyclic_index.update(m.cyclic_index)
        pairs.update(m.pair_spec)

    used: Set[Tuple[int, int]] = set()
    counter = 0
    for (i, k), (j, l) in matches:
        for key in ((i, k), (j, l)):
            if not (0 <= key[0] < len(ms)) or not (0 <= key[1] < len(ms[key[0]].hanging)):
                raise ValueError("no such slot %r" % (key,))
            if key in used:
                raise ValueError("slot %r used twice" % (key,))
            used.add(key)
        s1 = ms[i].hanging[k]
        s2 = ms[j].hanging[l]
        if s1.edge != reverse_edge(s2.edge):
            raise ValueError(
                "orbit mismatch: slots over %r and %r" % (s1.edge, s2.edge)
            )
        if s1.degree != s2.degree:
            raise ValueError(
                "degree mismatch: %d vs %d over %r" % (s1.degree, s2.degree, s1.edge)
            )
        bp = pair_of(s1.edge)
        if s1.edge == bp:
            fwd, bwd = s1.ref, s2.ref
        else:
            fwd, bwd = s2.ref, s1.ref
        while "%s@s%d" % (bp, counter) in pairs:
            counter += 1
        pairs["%s@s%d" % (bp, counter)] = (bp, fwd, bwd)
        counter += 1

    return PrecoverMorphism(base, vertex_map, vertex_data, cyclic_index, pairs)


def _retarget(
    pairs: Dict[str, Tuple[str, ElevationRef, ElevationRef]],
    rename: Dict[Tuple[str, str], str],
) -> Dict[str, Tuple[str, ElevationRef, ElevationRef]]:
    """Rename ref vertices keyed by (old vertex, incident oriented total edge)."""
    out = {}
    for q, (bp, fwd, bwd) in pairs.items():
        nf = rename.get((fwd.vertex, q))
        nb = rename.get((bwd.vertex, "~" + q))
        if nf is not None:
            fwd = replace(fwd, vertex=nf)
        if nb is not None:
            bwd = replace(bwd, vertex=nb)
        out[q] = (bp, fwd, bwd)
    return out


def split_cyclic(
    m: PrecoverMorphism, v: str, part: Sequence[str]
) -> PrecoverMorphism:
    """Split a cyclic lift in two along a partition of its incident edges.

    ``part`` lists oriented total edge ids (tau at v) kept by the first
    copy; the rest go to the second.  Both copies keep the index, and both
    inherit every peripheral end, so the ends moved away reopen as hanging
    slots on the other copy.
    """
    if m.total.vertex_kind.get(v) != "cyclic":
        raise ValueError("split of a non-cyclic vertex %r" % v)
    incident = [d for d in m.edge_assignment if m.edge_assignment[d].vertex == v]
    part = list(part)
    for d in part:
        if d not in incident:
            raise ValueError("edge %r is not incident to %r" % (d, v))
    rest = [d for d in incident if d not in part]
    if not part or not rest:
        raise ValueError("both parts of a split must be non-empty")
    v1, v2 = v + ".1", v + ".2"
    for name in (v1, v2):
        if name in m.vertex_map:
            raise ValueError("name %r already in use" % name)

    vertex_map = dict(m.vertex_map)
    b = vertex_map.pop(v)
    vertex_map[v1] = b
    vertex_map[v2] = b
    cyclic_index = dict(m.cyclic_index)
    d0 = cyclic_index.pop(v)
    cyclic_index[v1] = d0
    cyclic_index[v2] = d0
    rename = {(v, d): (v1 if d in part else v2) for d in incident}
    pairs = _retarget(m.pair_spec, rename)
    return PrecoverMorphism(m.base, vertex_map, m.vertex_data, cyclic_index, pairs)


def merge_cyclic(m: PrecoverMorphism, v1: str, v2: str) -> PrecoverMorphism:
    """Merge two cyclic lifts of equal index over the same base vertex.

    The merged vertex keeps the first name and both edge sets.  Inverse to
    ``split_cyclic`` along the partition the two vertices record.
    """
    for v in (v1, v2):
        if m.total.vertex_kind.get(v) != "cyclic":
            raise ValueError("merge of a non-cyclic vertex %r" % v)
    if v1 == v2:
        raise ValueError("merge needs two distinct vertices")
    if m.vertex_map[v1] != m.vertex_map[v2]:
        raise ValueError("merge of lifts over different base vertices")
    if m.cyclic_index[v1] != m.cyclic_index[v2]:
        raise ValueError(
            "index mismatch: %d vs %d" % (m.cyclic_index[v1], m.cyclic_index[v2])
        )
    vertex_map = dict(m.vertex_map)
    vertex_map.pop(v2)
    cyclic_index = dict(m.cyclic_index)
    cyclic_index.pop(v2)
    incident = [d for d in m.edge_assignment if m.edge_assignment[d].vertex == v2]
    rename = {(v2, d): v1 for d in incident}
    pairs = _retarget(m.pair_spec, rename)
    return PrecoverMorphism(m.base, vertex_map, m.vertex_data, cyclic_index, pairs)


def detach_edge(m: PrecoverMorphism, q: str) -> PrecoverMorphism:
    """Remove a total edge joining a cyclic and a free lift.

    Both orientations go together; the two elevations it realized reopen
    as hanging slots.
    """
    q = pair_of(q)
    if q not in m.pair_spec:
        raise ValueError("unknown total pair %r" % q)
    kinds = {
        m.total.vertex_kind[m.total.graph.iota(q)],
        m.total.vertex_kind[m.total.graph.tau(q)],
    }
    if kinds != {"cyclic", "free"}:
        raise ValueError("edge %r does not join a cyclic and a free vertex" % q)
    pairs = dict(m.pair_spec)
    pairs.pop(q)
    return PrecoverMorphism(m.base, m.vertex_map, m.vertex_data, m.cyclic_index, pairs)


# ---------------------------------------------------------------------------
# Matching engine: closing open elevation ends deterministically.


@lru_cache(maxsize=None)
def _tables(rank: int, idx: int) -> Tuple[CosetTable, ...]:
    return tuple(enumerate_subgroups(rank, idx))


def _tick(counter: List[int], cap: Optional[int]) -> None:
    counter[0] += 1
    if cap is not None and counter[0] > cap:
        raise BudgetExceededError("search budget exceeded (%d nodes)" % cap)


def _check_base_shape(g: GraphOfGroups) -> None:
    gr = g.graph
    for p in gr.pairs:
        kinds = {g.vertex_kind[gr.iota(p)], g.vertex_kind[gr.tau(p)]}
        if kinds == {"cyclic"}:
            raise ValueError("unsupported base: pair %r joins two cyclic vertices" % p)


def _close_open_ends(
    base: GraphOfGroups,
    pools: Dict[str, List[Tuple[ElevationRef, int]]],
    demands: Sequence[Tuple[str, int, Tuple[str, ...]]],
    budgets: Dict[str, int],
    taken_names: Set[str],
    counter: List[int],
    cap: Optional[int],
) -> Iterator[Tuple[Dict[str, Tuple[str, int]], List[Tuple[str, ElevationRef, ElevationRef]]]]:
    """Yield every way to close all open elevation ends.

    ``pools`` holds the open free-side elevations per oriented base edge
    (keyed by the edge whose tau end they realize).  ``demands`` are
    existing cyclic lifts with unrealized ends; ``budgets`` caps the total
    index of new cyclic lifts per base cyclic vertex, exactly.  Yields
    (new cyclic lifts as name -> (base vertex, index), new pair triples).
    """
    gr = base.graph
    consumed: Set[ElevationRef] = set()
    new_cyclic: Dict[str, Tuple[str, int]] = {}
    out_pairs: List[Tuple[str, ElevationRef, ElevationRef]] = []

    demand_steps: List[Tuple[str, int, str]] = []
    for lift, d, ends in sorted(demands):
        for e in sorted(ends):
            demand_steps.append((lift, d, e))

    cyclic_vs = sorted(
        v for v in gr.vertices if base.vertex_kind[v] == "cyclic"
    )
    ends_of = {
        c: sorted(e for e in gr.oriented_edges() if gr.tau(e) == c)
        for c in cyclic_vs
    }
    free_pairs = sorted(
        p
        for p in gr.pairs
        if base.vertex_kind[gr.iota(p)] == "free"
        and base.vertex_kind[gr.tau(p)] == "free"
    )

    def fresh_name(c: str) -> str:
        i = 0
        while True:
            name = "%s@%d" % (c, i)
            if name not in taken_names and name not in new_cyclic:
                return name
            i += 1

    def open_entries(e: str) -> List[Tuple[ElevationRef, int]]:
        return [(r, d) for (r, d) in pools.get(e, []) if r not in consumed]

    def emit(bp: str, cyc_end: str, cyc_ref: ElevationRef, far_ref: ElevationRef):
        if cyc_end == bp:
            out_pairs.append((bp, cyc_ref, far_ref))
        else:
            out_pairs.append((bp, far_ref, cyc_ref))

    def do_demands(i: int) -> Iterator[None]:
        if i == len(demand_steps):
            yield from do_cyclic(0, 0)
            return
        lift, d, e = demand_steps[i]
        far = open_entries(reverse_edge(e))
        for ref, dd in far:
            if dd != d:
                continue
            _tick(counter, cap)
            consumed.add(ref)
            emit(pair_of(e), e, ElevationRef(lift, e, 0), ref)
            yield from do_demands(i + 1)
            out_pairs.pop()
            consumed.remove(ref)

    def do_cyclic(ci: int, spent: int) -> Iterator[None]:
        if ci == len(cyclic_vs):
            yield from do_pairs(0)
            return
        c = cyclic_vs[ci]
        ends = ends_of[c]
        anchor_pool = open_entries(reverse_edge(ends[0])) if ends else []
        if not anchor_pool:
            if spent != budgets.get(c, 0):
                return
            for e in ends[1:]:
                if open_entries(reverse_edge(e)):
                    return
            yield from do_cyclic(ci + 1, 0)
            return
        ref0, d = anchor_pool[0]
        if spent + d > budgets.get(c, 0):
            return
        name = fresh_name(c)
        consumed.add(ref0)
        new_cyclic[name] = (c, d)
        emit(pair_of(ends[0]), ends[0], ElevationRef(name, ends[0], 0), ref0)

        def fill(j: int) -> Iterator[None]:
            if j == len(ends):
                yield from do_cyclic(ci, spent + d)
                return
            e = ends[j]
            for ref, dd in open_entries(reverse_edge(e)):
                if dd != d:
                    continue
                _tick(counter, cap)
                consumed.add(ref)
                emit(pair_of(e), e, ElevationRef(name, e, 0), ref)
                yield from fill(j + 1)
                out_pairs.pop()
                consumed.remove(ref)

        yield from fill(1)
        out_pairs.pop()
        del new_cyclic[name]
        consumed.remove(ref0)

    def do_pairs(pi: int) -> Iterator[None]:
        if pi == len(free_pairs):
            yield new_cyclic.copy(), list(out_pairs)
            return
        p = free_pairs[pi]
        fwd_open = open_entries(p)
        bwd_open = open_entries(reverse_edge(p))
        if not fwd_open:
            if bwd_open:
                return
            yield from do_pairs(pi + 1)
            return
        x, dx = fwd_open[0]
        for y, dy in bwd_open:
            if dy != dx:
                continue
            _tick(counter, cap)
            consumed.add(x)
            if y != x:
                consumed.add(y)
            out_pairs.append((p, x, y))
            yield from do_pairs(pi)
            out_pairs.pop()
            consumed.discard(y)
            consumed.discard(x)

    yield from do_demands(0)


def _free_pool(
    base: GraphOfGroups,
    lifts: Dict[str, Tuple[str, CosetTable]],
) -> Dict[str, List[Tuple[ElevationRef, int]]]:
    """All elevations at the given free lifts, keyed by oriented base edge."""
    gr = base.graph
    pools: Dict[str, List[Tuple[ElevationRef, int]]] = {}
    for name in sorted(lifts):
        b, table = lifts[name]
        for e in gr.oriented_edges():
            if gr.tau(e) != b:
                continue
            for el in elevations(table, base.edge_word(e)):
                pools.setdefault(e, []).append(
                    (ElevationRef(name, e, el.cycle[0]), el.degree)
                )
    return pools


def _vertex_multisets(
    rank: int, total: int
) -> List[Tuple[Tuple[int, int, CosetTable], ...]]:
    """Multisets of (index, catalog position, table) summing to total."""
    entries = []
    for i in range(1, total + 1):
        for pos, t in enumerate(_tables(rank, i)):
            entries.append((i, pos, t))
    out: List[Tuple[Tuple[int, int, CosetTable], ...]] = []

    def rec(start: int, left: int, acc: List[Tuple[int, int, CosetTable]]):
        if left == 0:
            out.append(tuple(acc))
            return
        for k in range(start, len(entries)):
            i, pos, t = entries[k]
            if i > left:
                continue
            acc.append(entries[k])
            rec(k, left - i, acc)
            acc.pop()

    rec(0, total, [])
    return out


def enumerate_covers(
    g: GraphOfGroups, max_index: int, cap: Optional[int] = None
) -> Iterator[PrecoverMorphism]:
    """Connected covers of degree at most max_index, one per isomorphism
    class, in ascending degree.

    Free lifts run over the subgroup catalog; cyclic lifts are created to
    order while matching elevation ends.  Raises BudgetExceededError when
    the search exceeds ``cap`` nodes.
    """
    ensure_valid(g)
    _check_base_shape(g)
    gr = g.graph
    free_vs = sorted(v for v in gr.vertices if g.vertex_kind[v] == "free")
    cyclic_vs = sorted(v for v in gr.vertices if g.vertex_kind[v] == "cyclic")
    counter = [0]

    for n in range(1, max_index + 1):
        found: List[PrecoverMorphism] = []
        per_vertex = [_vertex_multisets(g.rank(v), n) for v in free_vs]
        for combo in itertools.product(*per_vertex):
            _tick(counter, cap)
            lifts: Dict[str, Tuple[str, CosetTable]] = {}
            for v, multiset in zip(free_vs, combo):
                for i, (_, _, t) in enumerate(multiset):
                    lifts["%s@%d" % (v, i)] = (v, t)
            pools = _free_pool(g, lifts)
            budgets = {c: n for c in cyclic_vs}
            taken = set(lifts)
            for new_cyclic, triples in _close_open_ends(
                g, pools, [], budgets, taken, counter, cap
            ):
                vertex_map = {name: b for name, (b, _) in lifts.items()}
                vertex_data = {name: t for name, (_, t) in lifts.items()}
                cyclic_index = {}
                for name, (c, d) in new_cyclic.items():
                    vertex_map[name] = c
                    cyclic_index[name] = d
                pairs = {}
                seq: Dict[str, int] = {}
                for bp, fwd, bwd in triples:
                    k = seq.get(bp, 0)
                    seq[bp] = k + 1
                    pairs["%s@%d" % (bp, k)] = (bp, fwd, bwd)
                m = PrecoverMorphism(g, vertex_map, vertex_data, cyclic_index, pairs)
                assert not validate_cover(m), validate_cover(m)
                if not m.total.graph.is_connected():
                    continue
                assert euler_characteristic(m.total) == n * euler_characteristic(g)
                if any(isomorphic(m, other) for other in found):
                    continue
                found.append(m)
                yield m


# ---------------------------------------------------------------------------
# Isomorphism of morphisms over a common base.


def _table_iso_maps(t1: CosetTable, t2: CosetTable) -> Iterator[Tuple[int, ...]]:
    """Equivariant coset bijections (not required to fix coset 0)."""
    if t1.size != t2.size or t1.rank != t2.rank:
        return
    n = t1.size
    letters = [x for i in range(1, t1.rank + 1) for x in (i, -i)]
    for s0 in range(n):
        sigma: List[Optional[int]] = [None] * n
        sigma[0] = s0
        queue = [0]
        ok = True
        while queue and ok:
            i = queue.pop()
            for x in letters:
                j = t1.act(i, x)
                sj = t2.act(sigma[i], x)
                if sigma[j] is None:
                    sigma[j] = sj
                    queue.append(j)
                elif sigma[j] != sj:
                    ok = False
                    break
        if ok and len(set(sigma)) == n:
            yield tuple(sigma)  # type: ignore[arg-type]


def isomorphic(m1: PrecoverMorphism, m2: PrecoverMorphism) -> bool:
    """Whether two morphisms differ only by renaming lifts compatibly.

    Searches for a fiberwise bijection: a table isomorphism per free lift
    and an index-preserving matching of cyclic lifts, carrying every edge
    assignment of one morphism onto the other.  Basepoints are ignored.
    """
    if m1 is m2:
        return True
    if not _same_base(m1.base, m2.base):
        return False
    inv1 = sorted((b, m1.total.vertex_kind[v], m1.vertex_index(v)) for v, b in m1.vertex_map.items())
    inv2 = sorted((b, m2.total.vertex_kind[v], m2.vertex_index(v)) for v, b in m2.vertex_map.items())
    if inv1 != inv2:
        return False
    cnt1 = sorted(bp for bp, _, _ in m1.pair_spec.values())
    cnt2 = sorted(bp for bp, _, _ in m2.pair_spec.values())
    if cnt1 != cnt2:
        return False
    h1_keys = sorted((s.edge, s.side, s.degree) for s in m1.hanging)
    h2_keys = sorted((s.edge, s.side, s.degree) for s in m2.hanging)
    if h1_keys != h2_keys:
        return False

    base_vs = sorted(m1.base.graph.vertices)
    groups = [(b, m1.lifts_over(b), m2.lifts_over(b)) for b in base_vs]
    for b, l1, l2 in groups:
        if len(l1) != len(l2):
            return False

    lookup2 = {
        (m2.edge_map[d], ref.vertex, ref.least): d
        for d, ref in m2.edge_assignment.items()
    }

    phi: Dict[str, Tuple[str, Optional[Tuple[int, ...]]]] = {}

    def edges_match() -> bool:
        for q, (bp, fwd, bwd) in m1.pair_spec.items():
            keys = []
            for ref, end in ((fwd, bp), (bwd, reverse_edge(bp))):
                target, sigma = phi[ref.vertex]
                if sigma is None:
                    least = 0
                else:
                    el = m1._elev_by_ref(ref)
                    least = min(sigma[c] for c in el.cycle)
                keys.append((end, target, least))
            d2 = lookup2.get(keys[0])
            if d2 is None:
                return False
            if lookup2.get(keys[1]) != reverse_edge(d2):
                return False
        return True

    def assign(gi: int, li: int, used: Set[str]) -> bool:
        if gi == len(groups):
            return edges_match()
        b, l1, l2 = groups[gi]
        if li == len(l1):
            return assign(gi + 1, 0, set())
        v = l1[li]
        kind = m1.total.vertex_kind[v]
        for w in l2:
            if w in used:
                continue
            if kind == "cyclic":
                if m1.cyclic_index[v] != m2.cyclic_index[w]:
                    continue
                phi[v] = (w, None)
                used.add(w)
                if assign(gi, li + 1, used):
                    return True
                used.remove(w)
                del phi[v]
            else:
                for sigma in _table_iso_maps(m1.vertex_data[v], m2.vertex_data[w]):
                    phi[v] = (w, sigma)
                    used.add(w)
                    if assign(gi, li + 1, used):
                        return True
                    used.remove(w)
                    del phi[v]
        return False

    return assign(0, 0, set())


# ---------------------------------------------------------------------------
# Completion.


def complete(
    m: PrecoverMorphism, bound: int, cap: Optional[int] = None
) -> Optional[PrecoverMorphism]:
    """Extend a precover to a cover by adding at most ``bound`` total index.

    Searches degrees in ascending order; within a degree, new free lifts
    run over the subgroup catalog and open ends are matched exactly as in
    cover enumeration.  Hanging slots of the input may be glued to each
    other, to new lifts, or to new cyclic vertices.  Returns None when no
    completion exists within the bound.
    """
    ensure_precover(m)
    if not validate_cover(m):
        return m
    g = m.base
    _check_base_shape(g)
    gr = g.graph
    free_vs = sorted(v for v in gr.vertices if g.vertex_kind[v] == "free")
    cyclic_vs = sorted(v for v in gr.vertices if g.vertex_kind[v] == "cyclic")
    counter = [0]

    hang_pool: Dict[str, List[Tuple[ElevationRef, int]]] = {}
    demands: List[Tuple[str, int, Tuple[str, ...]]] = []
    open_cyclic: Dict[str, List[str]] = {}
    for s in m.hanging:
        if s.side == "free":
            hang_pool.setdefault(s.edge, []).append((s.ref, s.degree))
        else:
            open_cyclic.setdefault(s.vertex, []).append(s.edge)
    for v in sorted(open_cyclic):
        demands.append((v, m.cyclic_index[v], tuple(sorted(open_cyclic[v]))))

    def fresh_free(b: str, k: int) -> str:
        i = k
        while "%s+%d" % (b, i) in m.vertex_map:
            i += 1
        return "%s+%d" % (b, i)

    d0 = max(m.sums.values())
    for target in itertools.count(d0):
        added = sum(target - m.sums[b] for b in gr.vertices)
        if added > bound:
            return None
        per_vertex = [
            _vertex_multisets(g.rank(v), target - m.sums[v]) for v in free_vs
        ]
        for combo in itertools.product(*per_vertex):
            _tick(counter, cap)
            new_free: Dict[str, Tuple[str, CosetTable]] = {}
            for v, multiset in zip(free_vs, combo):
                for i, (_, _, t) in enumerate(multiset):
                    new_free[fresh_free(v, i)] = (v, t)
            pools = _free_pool(g, new_free)
            for e, entries in hang_pool.items():
                pools.setdefault(e, [])
                pools[e] = sorted(
                    pools[e] + entries, key=lambda rd: (rd[0].vertex, rd[0].least)
                )
            budgets = {c: target - m.sums[c] for c in cyclic_vs}
            taken = set(m.vertex_map) | set(new_free)
            for new_cyclic, triples in _close_open_ends(
                g, pools, demands, budgets, taken, counter, cap
            ):
                vertex_map = dict(m.vertex_map)
                vertex_data = dict(m.vertex_data)
                cyclic_index = dict(m.cyclic_index)
                for name, (b, t) in new_free.items():
                    vertex_map[name] = b
                    vertex_data[name] = t
                for name, (c, d) in new_cyclic.items():
                    vertex_map[name] = c
                    cyclic_index[name] = d
                pairs = dict(m.pair_spec)
                seq: Dict[str, int] = {}
                for bp, fwd, bwd in triples:
                    k = seq.get(bp, 0)
                    while "%s+%d" % (bp, k) in pairs:
                        k += 1
                    seq[bp] = k + 1
                    pairs["%s+%d" % (bp, k)] = (bp, fwd, bwd)
                out = PrecoverMorphism(g, vertex_map, vertex_data, cyclic_index, pairs)
                assert not validate_cover(out), validate_cover(out)
                return out
    return None


# ---------------------------------------------------------------------------
# Torsion pieces and chains.


@dataclass(frozen=True)
class TorsionPiece:
    """A split cover whose homology shows p-torsion against its boundary.

    ``morphism`` is a cover with one cyclic lift split in two; ``c1`` keeps
    a single incident edge and ``c2`` the rest.  ``certificate`` is the
    first homology of the piece with both boundary classes killed; its
    p-part is what chaining copies multiplies up.
    """

    morphism: PrecoverMorphism
    c1: str
    c2: str
    prime: int
    certificate: AbelianGroup

    @property
    def boundary_index(self) -> int:
        return self.morphism.cyclic_index[self.c1]


def _ensure_prime(p: int) -> None:
    if p < 2 or any(p % q == 0 for q in range(2, int(p**0.5) + 1)):
        raise ValueError("%d is not prime" % p)


def _is_cut_vertex(gr: SerreGraph, v: str) -> bool:
    others = [u for u in gr.vertices if u != v]
    if not others:
        return True
    seen = {others[0]}
    queue = [others[0]]
    while queue:
        u = queue.pop()
        for e in gr.star(u):
            w = gr.tau(e)
            if w != v and w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) != len(others)


def find_torsion_piece(
    g: GraphOfGroups, p: int, max_index: int, cap: Optional[int] = None
) -> Optional[TorsionPiece]:
    """Search small covers for a cyclic lift whose splitting certifies
    p-torsion.

    Scans covers in enumeration order; in each, splits every non-cut
    cyclic lift along every one-against-the-rest partition of its incident
    edges and tests whether killing the two boundary classes leaves
    p-torsion in first homology.  Returns the first hit, or None.
    """
    _ensure_prime(p)
    ensure_valid(g)
    for m in enumerate_covers(g, max_index, cap):
        for v in sorted(m.cyclic_index):
            incident = sorted(
                d for d, ref in m.edge_assignment.items() if ref.vertex == v
            )
            if len(incident) < 2:
                continue
            if _is_cut_vertex(m.total.graph, v):
                continue
            for d in incident:
                piece = split_cyclic(m, v, [d])
                a = h1(piece)
                q = quotient_by(
                    a,
                    [
                        class_image(piece, v + ".1"),
                        class_image(piece, v + ".2"),
                    ],
                )
                if p_rank(q, p) >= 1:
                    return TorsionPiece(piece, v + ".1", v + ".2", p, q)
    return None


def chain(piece: TorsionPiece, copies: int) -> PrecoverMorphism:
    """Concatenate copies of a torsion piece end to end.

    Copy i's single-edge boundary vertex is merged with copy i+1's other
    boundary vertex, leaving one open boundary on each end of the chain.
    One copy is the piece itself.
    """
    if copies < 1:
        raise ValueError("need at least one copy")
    if copies == 1:
        return piece.morphism
    parts = [rename_total(piece.morphism, "#%d" % i) for i in range(1, copies + 1)]
    out = splice(parts, [])
    for i in range(1, copies):
        out = merge_cyclic(out, "%s#%d" % (piece.c1, i), "%s#%d" % (piece.c2, i + 1))
    return out


# ---------------------------------------------------------------------------
# Walking words through a cover.


@dataclass(frozen=True)
class InSubgroup:
    """The lifted walk closes up at the basepoint."""


@dataclass(frozen=True)
class ExitsAt:
    """The lifted walk leaves the subgroup.

    ``position`` counts fully traversed segments (syllables and crossings
    alternate, starting with a syllable); a walk that survives every
    segment but ends away from the basepoint reports the total segment
    count.  ``vertex`` and ``coset`` locate the walk when it stopped.
    """

    position: int
    vertex: str
    coset: int


def lift_word(m: PrecoverMorphism, gw: GogWord):
    """Trace a closed base word through the total space.

    Returns InSubgroup when the walk from the basepoint lift closes up,
    ExitsAt otherwise.  On precovers the walk can also stop mid-way at a
    hanging slot; the crossing uses the canonical rotation, matching cycle
    positions counted from the least coset on both sides.
    """
    ensure_precover(m)
    problems = gw.validate_on(m.base)
    if problems:
        raise ValueError("; ".join(problems))
    if not gw.is_closed(m.base):
        raise ValueError("only closed words can be tested for membership")
    start = m.total.base_vertex
    if m.vertex_map[start] != gw.start:
        raise ValueError(
            "word starts at %r but the basepoint lift is over %r"
            % (gw.start, m.vertex_map[start])
        )
    v, c = start, 0
    position = 0
    for i, syl in enumerate(gw.syllables):
        if not syl.is_identity():
            c = m.vertex_table(v).act_word(c, syl)
        position += 1
        if i < len(gw.crossings):
            e = gw.crossings[i]
            end = reverse_edge(e)
            el = None
            for cand in m.elevs(v, end):
                if c in cand.cycle:
                    el = cand
                    break
            ref = ElevationRef(v, end, el.cycle[0])
            d_rev = m.realizing.get(ref)
            if d_rev is None:
                return ExitsAt(position, v, c)
            d = reverse_edge(d_rev)
            ref2 = m.edge_assignment[d]
            el2 = m._elev_by_ref(ref2)
            pos = el.cycle.index(c)
            v, c = ref2.vertex, el2.cycle[pos]
            position += 1
    if v == start and c == 0:
        return InSubgroup()
    return ExitsAt(position, v, c)


# ---------------------------------------------------------------------------
# Towers.


@dataclass(frozen=True)
class TowerBounds:
    """Search limits for tower construction, all small by design."""

    max_cover_index: int = 4
    max_piece_index: int = 4
    complete_bound: int = 24
    max_word_length: int = 6
    max_beta: int = 16
    max_alpha_retries: int = 4


@dataclass(frozen=True)
class TowerStep:
    step: int
    prime: int
    relative_degree: int
    total_degree: int
    alpha: int
    beta: int
    piece_predegree: int
    exponents: Dict[int, int]
    excluded_word: str
    excluded: bool
    exclusion_note: str
    site_distance: int


@dataclass(frozen=True)
class TowerReport:
    """Everything a tower run produced, failures included.

    ``status`` is "ok" or "failed:<stage>:<reason>"; steps lists only the
    completed steps and the ledger carries the verified ratio data.
    """

    base: GraphOfGroups
    primes: Tuple[int, ...]
    requested_steps: int
    steps: Tuple[TowerStep, ...]
    ledger: TowerLedger
    base_exponents: Dict[int, int]
    status: str

    @property
    def completed_steps(self) -> int:
        return len(self.steps)

    def to_csv(self) -> str:
        cols = ["step", "prime", "degree"]
        for p in self.primes:
            cols.append("e_%d" % p)
        for p in self.primes:
            cols.append("ratio_%d" % p)
        cols.append("status")
        lines = [",".join(cols)]

        def fmt_ratio(e: int, deg: int) -> str:
            fr = Fraction(e, deg)
            return "%d/%d" % (fr.numerator, fr.denominator)

        row = ["0", "", "1"]
        for p in self.primes:
            row.append(str(self.base_exponents.get(p, 0)))
        for p in self.primes:
            row.append(fmt_ratio(self.base_exponents.get(p, 0), 1))
        row.append("base")
        lines.append(",".join(row))

        for st in self.steps:
            row = [str(st.step), str(st.prime), str(st.total_degree)]
            for p in self.primes:
                row.append(str(st.exponents[p]) if p in st.exponents else "")
            for p in self.primes:
                if p in st.exponents:
                    row.append(fmt_ratio(st.exponents[p], st.total_degree))
                else:
                    row.append("")
            row.append("ok")
            lines.append(",".join(row))

        if self.status != "ok":
            row = [str(len(self.steps) + 1), "", ""]
            row.extend([""] * (2 * len(self.primes)))
            row.append(self.status.replace(",", ";"))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


class _StageFailure(Exception):
    def __init__(self, stage: str, reason: str):
        super().__init__("%s: %s" % (stage, reason))
        self.stage = stage
        self.reason = reason


def _nth_nontrivial_word(
    g: GraphOfGroups, n: int, max_length: int
) -> Optional[GogWord]:
    count = 0
    for gw in enumerate_closed_words(g, max_length):
        if is_nontrivial(g, gw):
            count += 1
            if count == n:
                return gw
    return None


def _build_connector(
    base: GraphOfGroups, u: str, d: int
) -> Optional[PrecoverMorphism]:
    """A single lift of the free vertex u on which every peripheral word
    elevates with degree exactly d; all its elevations hang."""
    gr = base.graph
    targets = []
    for e in gr.oriented_edges():
        if gr.tau(e) == u:
            targets.append(base.edge_word(e))
    if not targets:
        return None
    res = prescribe_degrees(base.rank(u), targets, [d] * len(targets))
    if res is None or res.scale != 1:
        return None
    for w in targets:
        if any(el.degree != d for el in elevations(res.table, w)):
            return None
    name = u + "@A"
    return PrecoverMorphism(base, {name: u}, {name: res.table}, {}, {})


def _tower_step(
    b: GraphOfGroups,
    n: int,
    p: int,
    tracked: Sequence[int],
    bounds: TowerBounds,
    budget: Optional[int],
    ledger: TowerLedger,
    degree_so_far: int,
) -> Tuple[TowerStep, PrecoverMorphism, TowerLedger]:
    word = _nth_nontrivial_word(b, n, bounds.max_word_length)

    piece = find_torsion_piece(b, p, bounds.max_piece_index, cap=budget)
    if piece is None:
        raise _StageFailure(
            "piece", "no p=%d torsion piece within index %d" % (p, bounds.max_piece_index)
        )
    d_p = piece.boundary_index
    h = predegree(piece.morphism)
    k_p = min(piece.morphism.sums.values())
    c_base = piece.morphism.vertex_map[piece.c1]
    e1 = next(
        ref.edge
        for ref in piece.morphism.edge_assignment.values()
        if ref.vertex == piece.c1
    )
    gr = b.graph
    ends_c = sorted(e for e in gr.oriented_edges() if gr.tau(e) == c_base)
    far = {gr.iota(e) for e in ends_c}
    if len(far) != 1:
        raise _StageFailure(
            "assembly", "boundary vertex %r meets several free vertices" % c_base
        )
    u = far.pop()

    chosen = None
    fallback = None
    for cover in enumerate_covers(b, bounds.max_cover_index, cap=budget):
        sites = []
        for q, (bp, fwd, bwd) in sorted(cover.pair_spec.items()):
            if bp != pair_of(e1):
                continue
            cyc_ref = fwd if cover.total.vertex_kind[fwd.vertex] == "cyclic" else bwd
            if cover.cyclic_index.get(cyc_ref.vertex) != d_p:
                continue
            free_ref = bwd if cyc_ref is fwd else fwd
            dist = cover.total.graph.distance(
                cover.total.base_vertex, free_ref.vertex
            )
            sites.append((-dist, q))
        if not sites:
            continue
        sites.sort()
        site = sites[0][1]
        dist = -sites[0][0]
        if word is not None and isinstance(lift_word(cover, word), ExitsAt):
            chosen = (cover, site, dist, True)
            break
        if fallback is None:
            fallback = (cover, site, dist, False)
    if chosen is None:
        chosen = fallback
    if chosen is None:
        raise _StageFailure(
            "site",
            "no cover of index <= %d detaches at a cyclic lift of index %d over %r"
            % (bounds.max_cover_index, d_p, c_base),
        )
    cover, site, site_distance, excluded_in_l = chosen
    ell = degree(cover)

    connector = _build_connector(b, u, d_p)
    if connector is None:
        raise _StageFailure(
            "connector",
            "no finite quotient gives every peripheral word at %r degree %d" % (u, d_p),
        )
    n_a = connector.vertex_data[u + "@A"].size

    growth = 2 ** (n + 1) * h - k_p
    if growth <= 0:
        raise _StageFailure("assembly", "piece predegree too small to meet the bound")

    beta = None
    alpha0 = None
    for cand in range(1, bounds.max_beta + 1):
        a0 = max(1, -(-(cand * ell + n_a) // (cand * growth)))
        if n == 1:
            beta, alpha0 = cand, a0
            break
        d_pred = cand * ell + cand * a0 * k_p + n_a
        if Fraction(cand * ell, d_pred) >= 1 - Fraction(1, 2**n):
            beta, alpha0 = cand, a0
            break
    if beta is None:
        raise _StageFailure(
            "assembly", "no copy count keeps enough of the previous cover"
        )
    if beta > 1:
        raise _StageFailure(
            "assembly", "step needs %d detached copies; only one is supported" % beta
        )

    detached = rename_total(detach_edge(cover, site), "!L")
    last_error = None
    for alpha in range(alpha0, alpha0 + bounds.max_alpha_retries + 1):
        body = rename_total(chain(piece, alpha), "!K")
        conn = rename_total(connector, "!C")
        tail_c2 = (piece.c2 + ("#1" if alpha > 1 else "")) + "!K"
        head_c1 = (piece.c1 + ("#%d" % alpha if alpha > 1 else "")) + "!K"
        parts = [detached, body, conn]

        def slot_index(part: int, vertex_pred, edge: str) -> Optional[int]:
            for i, s in enumerate(parts[part].hanging):
                if s.edge == edge and vertex_pred(s.vertex):
                    return i
            return None

        matches = []
        i_free = slot_index(
            0, lambda v: detached.total.vertex_kind[v] == "free", reverse_edge(e1)
        )
        i_cyc = slot_index(
            0, lambda v: detached.total.vertex_kind[v] == "cyclic", e1
        )
        j_tail = slot_index(1, lambda v: v == tail_c2, e1)
        if i_free is None or i_cyc is None or j_tail is None:
            last_error = "detached slots not found"
            continue
        matches.append(((0, i_free), (1, j_tail)))
        used_conn = set()

        def conn_slot(edge: str) -> Optional[int]:
            for i, s in enumerate(parts[2].hanging):
                if s.edge == edge and i not in used_conn:
                    used_conn.add(i)
                    return i
            return None

        j_conn = conn_slot(reverse_edge(e1))
        if j_conn is None:
            last_error = "connector lacks a boundary elevation"
            continue
        matches.append(((0, i_cyc), (2, j_conn)))
        ok = True
        for e in ends_c:
            if e == e1:
                continue
            j_head = slot_index(1, lambda v: v == head_c1, e)
            j_c = conn_slot(reverse_edge(e))
            if j_head is None or j_c is None:
                ok = False
                last_error = "chain head slots not found"
                break
            matches.append(((1, j_head), (2, j_c)))
        if not ok:
            continue

        try:
            asm = splice(parts, matches)
        except ValueError as exc:
            last_error = str(exc)
            continue
        cover_n = complete(asm, bounds.complete_bound, cap=budget)
        if cover_n is None:
            last_error = "no completion within added index %d" % bounds.complete_bound
            continue
        if not cover_n.total.graph.is_connected():
            last_error = "assembled cover is disconnected"
            continue
        cover_n = with_basepoint(cover_n, cover.total.base_vertex + "!L")
        rel = degree(cover_n)
        a = h1(cover_n)
        exps = {q: torsion_exponent(a, q) for q in tracked}
        trial = TowerLedger(intro=dict(ledger.intro), rows=list(ledger.rows))
        try:
            ledger_update(
                trial,
                step=n,
                prime=p,
                degree=degree_so_far * rel,
                exponents=exps,
                piece_predegree=h,
            )
        except ValueError as exc:
            last_error = str(exc)
            continue
        problems = ledger_check(trial)
        if problems:
            last_error = problems[0]
            continue
        excluded = False
        note = ""
        if word is None:
            note = "no nontrivial closed word within length %d" % bounds.max_word_length
        else:
            res = lift_word(cover_n, word)
            excluded = isinstance(res, ExitsAt)
            if not excluded:
                if excluded_in_l:
                    note = "word re-enters after assembly"
                else:
                    note = "word lifts into every candidate cover of index <= %d" % (
                        bounds.max_cover_index
                    )
        step = TowerStep(
            step=n,
            prime=p,
            relative_degree=rel,
            total_degree=degree_so_far * rel,
            alpha=alpha,
            beta=beta,
            piece_predegree=h,
            exponents=exps,
            excluded_word=str(word) if word is not None else "",
            excluded=excluded,
            exclusion_note=note,
            site_distance=site_distance,
        )
        return step, cover_n, trial
    raise _StageFailure("completion", last_error or "assembly failed")


def build_tower(
    g: GraphOfGroups,
    primes: Sequence[int],
    steps: int,
    bounds: Optional[TowerBounds] = None,
    budget: Optional[int] = None,
) -> TowerReport:
    """Grow a tower of covers, one new prime per step, ledgered throughout.

    Each step finds a torsion piece for its prime in the current base,
    chains enough copies, splices the chain into a detached excluding
    cover through a prescribed-degree connector, completes, measures the
    torsion exponents and updates the ledger.  Stops early with a
    "failed:<stage>:<reason>" status when any stage finds nothing within
    its bounds; completed steps stay in the report.
    """
    ensure_valid(g)
    if steps < 0:
        raise ValueError("steps must be >= 0")
    primes = tuple(primes)
    for p in primes:
        _ensure_prime(p)
    if len(primes) < steps:
        raise ValueError("need one prime per step")
    if bounds is None:
        bounds = TowerBounds()
    if budget is None:
        budget = DEFAULT_BUDGET

    base_h1 = h1(g)
    base_exps = {p: torsion_exponent(base_h1, p) for p in primes}
    ledger = TowerLedger()
    done: List[TowerStep] = []
    current = g
    total_degree = 1
    status = "ok"
    for n in range(1, steps + 1):
        try:
            step, cover_n, ledger = _tower_step(
                current,
                n,
                primes[n - 1],
                primes[:n],
                bounds,
                budget,
                ledger,
                total_degree,
            )
        except _StageFailure as exc:
            status = "failed:%s:%s" % (exc.stage, exc.reason)
            break
        except BudgetExceededError as exc:
            status = "failed:budget:%s" % exc
            break
        done.append(step)
        current = cover_n.total
        total_degree = step.total_degree
    if status == "ok" and done:
        problems = ledger_check(ledger)
        if problems:
            status = "failed:ledger:%s" % problems[0]
    return TowerReport(
        base=g,
        primes=primes,
        requested_steps=steps,
        steps=tuple(done),
        ledger=ledger,
        base_exponents=base_exps,
        status=status,
    )
