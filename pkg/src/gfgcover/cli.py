"""Command-line workbench: document files in, reports and documents out.

One structured-text (YAML) document format carries every object the
library builds.  A document is a mapping with ``format_version`` and a
``kind`` deciding the payload:

  gog            graph of groups: vertices, oriented edges, base vertex
  morphism       precover or cover over an embedded base gog
  torsion-piece  a morphism bundled with its boundary vertices and prime
  tower-config   a base gog plus tower parameters

Words and permutations are explicit integer arrays throughout, so the
files stay diffable and independent of any in-memory representation.
Subcommands print either CSV (fixed column order, LF, UTF-8) or a new
document; both are byte-deterministic for fixed inputs and flags.

Exit codes: 0 success, 1 invalid input, 2 a bounded search found nothing.
``GFGCOVER_BUDGET`` sets the default node budget for the searching
subcommands; an explicit ``--cap``/``--budget`` flag wins.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Dict, List, Optional

import yaml

from .cosets import CosetTable, elevations
from .covers import (
    ElevationRef,
    PrecoverMorphism,
    TorsionPiece,
    TowerBounds,
    _ensure_prime,
    build_tower,
    chain,
    complete,
    degree,
    enumerate_covers,
    find_torsion_piece,
    validate_cover,
    validate_precover,
)
from .errors import BudgetExceededError
from .gog import (
    GraphOfGroups,
    SerreGraph,
    euler_characteristic,
    reverse_edge,
    validate,
)
from .homology import h1, p_rank, quotient_by, class_image
from .words import Word

FORMAT_VERSION = 1
BUDGET_VAR = "GFGCOVER_BUDGET"


class SchemaError(ValueError):
    """A document violates the schema; the message names the field."""


def _fail(path: str, message: str) -> None:
    raise SchemaError("%s: %s" % (path, message))


def _expect(data, types, path: str):
    if not isinstance(data, types):
        names = types.__name__ if isinstance(types, type) else "/".join(
            t.__name__ for t in types
        )
        _fail(path, "expected %s, got %s" % (names, type(data).__name__))
    return data


def _get(data: dict, key: str, types, path: str, default=_fail):
    if key not in data:
        if default is not _fail:
            return default
        _fail(path, "missing field %r" % key)
    return _expect(data[key], types, "%s.%s" % (path, key))


def _word(data, rank: int, path: str) -> Word:
    letters = _expect(data, list, path)
    for i, a in enumerate(letters):
        if not isinstance(a, int) or a == 0 or abs(a) > rank:
            _fail("%s[%d]" % (path, i), "letters must be nonzero, magnitude <= %d" % rank)
    return Word(tuple(letters), rank)


def _table(data, rank: int, path: str) -> CosetTable:
    rows = _expect(data, list, path)
    if len(rows) != rank:
        _fail(path, "need %d permutation rows, got %d" % (rank, len(rows)))
    perms = []
    for i, row in enumerate(rows):
        row = _expect(row, list, "%s[%d]" % (path, i))
        if not all(isinstance(a, int) for a in row):
            _fail("%s[%d]" % (path, i), "permutations are integer arrays")
        perms.append(tuple(row))
    try:
        return CosetTable(rank, tuple(perms))
    except ValueError as exc:
        _fail(path, str(exc))


# ---------------------------------------------------------------------------
# gog payload


def gog_from_payload(data: dict, path: str = "document") -> GraphOfGroups:
    vertices = _get(data, "vertices", list, path)
    ranks: Dict[str, int] = {}
    kinds: Dict[str, str] = {}
    names = []
    for i, item in enumerate(vertices):
        vp = "%s.vertices[%d]" % (path, i)
        item = _expect(item, dict, vp)
        name = _get(item, "name", str, vp)
        kind = _get(item, "kind", str, vp)
        if kind not in ("free", "cyclic"):
            _fail(vp + ".kind", "must be 'free' or 'cyclic'")
        rank = _get(item, "rank", int, vp, default=1)
        names.append(name)
        ranks[name] = rank
        kinds[name] = kind
    edges = _get(data, "edges", list, path)
    tau: Dict[str, str] = {}
    words: Dict[str, list] = {}
    order: Dict[str, int] = {}
    for i, item in enumerate(edges):
        ep = "%s.edges[%d]" % (path, i)
        item = _expect(item, dict, ep)
        name = _get(item, "name", str, ep)
        if name in tau:
            _fail(ep, "edge %r listed twice" % name)
        to = _get(item, "to", str, ep)
        if to not in ranks:
            _fail(ep + ".to", "unknown vertex %r" % to)
        tau[name] = to
        words[name] = _get(item, "word", list, ep)
        order[name] = i
    pairs = {}
    for name in tau:
        partner = reverse_edge(name)
        if partner not in tau:
            _fail(
                "%s.edges" % path,
                "edge %r has no involution partner %r" % (name, partner),
            )
        if not name.startswith("~"):
            pairs[name] = (tau[partner], tau[name])
    graph = SerreGraph(names, pairs)
    edge_words = {
        name: _word(words[name], ranks[tau[name]], "%s.edges[%d].word" % (path, order[name]))
        for name in tau
    }
    base = _get(data, "base_vertex", str, path)
    g = GraphOfGroups(graph, ranks, kinds, edge_words, base)
    problems = validate(g)
    if problems:
        _fail(path, "; ".join(problems))
    return g


def gog_to_payload(g: GraphOfGroups) -> dict:
    vertices = []
    for v in g.graph.vertices:
        item = {"name": v, "kind": g.vertex_kind[v]}
        if g.vertex_kind[v] == "free":
            item["rank"] = g.rank(v)
        vertices.append(item)
    edges = [
        {"name": e, "to": g.graph.tau(e), "word": list(g.edge_word(e).letters)}
        for e in g.graph.oriented_edges()
    ]
    return {"vertices": vertices, "base_vertex": g.base_vertex, "edges": edges}


# ---------------------------------------------------------------------------
# morphism payload


def _ref_from_payload(data, path: str) -> ElevationRef:
    data = _expect(data, dict, path)
    return ElevationRef(
        _get(data, "vertex", str, path),
        _get(data, "edge", str, path),
        _get(data, "least", int, path),
    )


def _ref_to_payload(ref: ElevationRef) -> dict:
    return {"vertex": ref.vertex, "edge": ref.edge, "least": ref.least}


def morphism_from_payload(
    data: dict, base: GraphOfGroups, path: str = "document.morphism"
) -> PrecoverMorphism:
    data = _expect(data, dict, path)
    vertex_map: Dict[str, str] = {}
    vertex_data: Dict[str, CosetTable] = {}
    cyclic_index: Dict[str, int] = {}
    for i, item in enumerate(_get(data, "vertices", list, path)):
        vp = "%s.vertices[%d]" % (path, i)
        item = _expect(item, dict, vp)
        name = _get(item, "name", str, vp)
        over = _get(item, "over", str, vp)
        if over not in base.graph.vertices:
            _fail(vp + ".over", "unknown base vertex %r" % over)
        vertex_map[name] = over
        if base.vertex_kind[over] == "free":
            vertex_data[name] = _table(
                _get(item, "table", list, vp), base.rank(over), vp + ".table"
            )
        else:
            cyclic_index[name] = _get(item, "index", int, vp)
    pairs = {}
    for i, item in enumerate(_get(data, "edges", list, path)):
        ep = "%s.edges[%d]" % (path, i)
        item = _expect(item, dict, ep)
        name = _get(item, "name", str, ep)
        pairs[name] = (
            _get(item, "over", str, ep),
            _ref_from_payload(_get(item, "fwd", dict, ep), ep + ".fwd"),
            _ref_from_payload(_get(item, "bwd", dict, ep), ep + ".bwd"),
        )
    basepoint = _get(data, "basepoint", str, path, default=None)
    try:
        return PrecoverMorphism(
            base, vertex_map, vertex_data, cyclic_index, pairs, basepoint=basepoint
        )
    except ValueError as exc:
        _fail(path, str(exc))


def morphism_to_payload(m: PrecoverMorphism) -> dict:
    vertices = []
    for v in sorted(m.vertex_map):
        item = {"name": v, "over": m.vertex_map[v]}
        if v in m.vertex_data:
            item["table"] = [list(row) for row in m.vertex_data[v].action]
        else:
            item["index"] = m.cyclic_index[v]
        vertices.append(item)
    edges = [
        {
            "name": q,
            "over": m.pair_spec[q][0],
            "fwd": _ref_to_payload(m.pair_spec[q][1]),
            "bwd": _ref_to_payload(m.pair_spec[q][2]),
        }
        for q in sorted(m.pair_spec)
    ]
    return {
        "vertices": vertices,
        "basepoint": m.total.base_vertex,
        "edges": edges,
    }


# ---------------------------------------------------------------------------
# documents


def load_document(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise SchemaError("%s: %s" % (path, exc.strerror or exc))
    except yaml.YAMLError as exc:
        raise SchemaError("%s: %s" % (path, exc))
    data = _expect(data, dict, path)
    version = _get(data, "format_version", int, path)
    if version != FORMAT_VERSION:
        _fail(path + ".format_version", "unknown format_version %r" % version)
    kind = _get(data, "kind", str, path)
    if kind not in ("gog", "morphism", "torsion-piece", "tower-config"):
        _fail(path + ".kind", "unknown kind %r" % kind)
    return data


def save_document(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)


def document_for_gog(g: GraphOfGroups) -> dict:
    out = {"format_version": FORMAT_VERSION, "kind": "gog"}
    out.update(gog_to_payload(g))
    return out


def document_for_morphism(m: PrecoverMorphism) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "morphism",
        "base": gog_to_payload(m.base),
        "morphism": morphism_to_payload(m),
    }


def document_for_piece(piece: TorsionPiece) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "torsion-piece",
        "prime": piece.prime,
        "c1": piece.c1,
        "c2": piece.c2,
        "base": gog_to_payload(piece.morphism.base),
        "morphism": morphism_to_payload(piece.morphism),
    }


def parse_document(data: dict, path: str):
    """Turn a loaded document into library objects, per its kind."""
    kind = data["kind"]
    if kind == "gog":
        return gog_from_payload(data, path)
    base = gog_from_payload(_get(data, "base", dict, path), path + ".base")
    if kind == "tower-config":
        return base
    m = morphism_from_payload(
        _get(data, "morphism", dict, path), base, path + ".morphism"
    )
    if kind == "morphism":
        return m
    prime = _get(data, "prime", int, path)
    try:
        _ensure_prime(prime)
    except ValueError as exc:
        _fail(path + ".prime", str(exc))
    c1 = _get(data, "c1", str, path)
    c2 = _get(data, "c2", str, path)
    for v in (c1, c2):
        if v not in m.cyclic_index:
            _fail(path, "boundary vertex %r is not a cyclic lift" % v)
    incident = [d for d, ref in m.edge_assignment.items() if ref.vertex == c1]
    if len(incident) != 1:
        _fail(path + ".c1", "must carry exactly one incident edge")
    a = h1(m)
    cert = quotient_by(a, [class_image(m, c1), class_image(m, c2)])
    return TorsionPiece(m, c1, c2, prime, cert)


# ---------------------------------------------------------------------------
# subcommands


def _default_budget() -> Optional[int]:
    raw = os.environ.get(BUDGET_VAR)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise SchemaError("%s: expected an integer, got %r" % (BUDGET_VAR, raw))


def _budget(flag: Optional[int]) -> Optional[int]:
    return flag if flag is not None else _default_budget()


def _print_csv(header: List[str], rows: List[List[str]]) -> None:
    out = sys.stdout
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(row) + "\n")


def _word_cell(w: Word) -> str:
    return " ".join(str(a) for a in w.letters)


def cmd_validate(args) -> int:
    data = load_document(args.file)
    obj = parse_document(data, args.file)
    if isinstance(obj, GraphOfGroups):
        problems = validate(obj)
    elif isinstance(obj, TorsionPiece):
        problems = validate_precover(obj.morphism)
        if p_rank(obj.certificate, obj.prime) < 1:
            problems = problems + [
                "certificate has no %d-torsion" % obj.prime
            ]
    else:
        problems = validate_precover(obj)
        if not problems:
            hangings = len(obj.hanging)
            if hangings:
                print("precover with %d hanging slots" % hangings)
    for p in problems:
        print(p)
    if problems:
        return 1
    print("ok")
    return 0


def cmd_h1(args) -> int:
    data = load_document(args.file)
    obj = parse_document(data, args.file)
    if isinstance(obj, TorsionPiece):
        obj = obj.morphism
    print(h1(obj))
    return 0


def cmd_elevations(args) -> int:
    data = load_document(args.file)
    g = parse_document(data, args.file)
    if not isinstance(g, GraphOfGroups):
        raise SchemaError("%s: elevations needs a gog document" % args.file)
    v = args.vertex
    if g.vertex_kind.get(v) != "free":
        raise SchemaError("--vertex: %r is not a free vertex" % v)
    try:
        rows = yaml.safe_load(args.table)
    except yaml.YAMLError as exc:
        raise SchemaError("--table: %s" % exc)
    table = _table(rows, g.rank(v), "--table")
    out = []
    for e in g.graph.oriented_edges():
        if g.graph.tau(e) != v:
            continue
        for el in elevations(table, g.edge_word(e)):
            out.append(
                [e, str(el.degree), str(el.cycle[0]), _word_cell(el.rep),
                 _word_cell(el.local.canonical)]
            )
    _print_csv(["edge", "degree", "least", "rep", "local"], out)
    return 0


def cmd_enumerate_covers(args) -> int:
    data = load_document(args.file)
    g = parse_document(data, args.file)
    if not isinstance(g, GraphOfGroups):
        raise SchemaError("%s: enumerate-covers needs a gog document" % args.file)
    rows = []
    for m in enumerate_covers(g, args.max_index, cap=_budget(args.cap)):
        problems = validate_cover(m)
        if problems:
            raise AssertionError("enumerated cover failed validation: %s" % problems)
        rows.append(
            [str(degree(m)), str(euler_characteristic(m.total)), str(h1(m))]
        )
    _print_csv(["degree", "chi", "h1"], rows)
    return 0


def cmd_torsion_piece(args) -> int:
    data = load_document(args.file)
    g = parse_document(data, args.file)
    if not isinstance(g, GraphOfGroups):
        raise SchemaError("%s: torsion-piece needs a gog document" % args.file)
    piece = find_torsion_piece(g, args.prime, args.max_index, cap=_budget(args.cap))
    if piece is None:
        print("no torsion piece within index %d" % args.max_index, file=sys.stderr)
        return 2
    sys.stdout.write(save_document(document_for_piece(piece)))
    return 0


def cmd_chain(args) -> int:
    data = load_document(args.file)
    piece = parse_document(data, args.file)
    if not isinstance(piece, TorsionPiece):
        raise SchemaError("%s: chain needs a torsion-piece document" % args.file)
    out = chain(piece, args.copies)
    sys.stdout.write(save_document(document_for_morphism(out)))
    return 0


def cmd_complete(args) -> int:
    data = load_document(args.file)
    m = parse_document(data, args.file)
    if isinstance(m, TorsionPiece):
        m = m.morphism
    if not isinstance(m, PrecoverMorphism):
        raise SchemaError("%s: complete needs a morphism document" % args.file)
    out = complete(m, args.bound, cap=_budget(args.cap))
    if out is None:
        print("no completion within added index %d" % args.bound, file=sys.stderr)
        return 2
    sys.stdout.write(save_document(document_for_morphism(out)))
    return 0


def _parse_bounds(raw: Optional[str]) -> Optional[TowerBounds]:
    if raw is None:
        return None
    fields = {}
    allowed = set(TowerBounds.__dataclass_fields__)
    for part in raw.split(","):
        if not part:
            continue
        key, sep, value = part.partition("=")
        if not sep or key not in allowed:
            raise SchemaError("--bounds: expected name=value with names %s" % sorted(allowed))
        try:
            fields[key] = int(value)
        except ValueError:
            raise SchemaError("--bounds: %r is not an integer" % value)
    return TowerBounds(**fields)


def cmd_tower(args) -> int:
    data = load_document(args.file)
    g = parse_document(data, args.file)
    if not isinstance(g, GraphOfGroups):
        raise SchemaError("%s: tower needs a gog or tower-config document" % args.file)
    steps = args.steps
    primes = args.primes
    bounds = _parse_bounds(args.bounds)
    budget = _budget(args.budget)
    if data["kind"] == "tower-config":
        if steps is None:
            steps = _get(data, "steps", int, args.file)
        if primes is None:
            primes = _get(data, "primes", list, args.file)
        if bounds is None and "bounds" in data:
            overrides = _expect(data["bounds"], dict, args.file + ".bounds")
            allowed = set(TowerBounds.__dataclass_fields__)
            bad = set(overrides) - allowed
            if bad:
                _fail(args.file + ".bounds", "unknown fields %s" % sorted(bad))
            bounds = TowerBounds(**overrides)
        if budget is None:
            budget = _get(data, "budget", int, args.file, default=None)
    if steps is None or primes is None:
        raise SchemaError("tower needs --steps and --primes (or a tower-config document)")
    report = build_tower(g, primes, steps, bounds=bounds, budget=budget)
    sys.stdout.write(report.to_csv())
    return 0 if report.status == "ok" else 2


def _primes_flag(raw: str) -> List[int]:
    try:
        return [int(p) for p in raw.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated integer list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfgcover",
        description="Covers, torsion pieces and tower reports for graphs of free groups with cyclic edges.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("file", help="input document")
        p.set_defaults(fn=fn)
        return p

    add("validate", cmd_validate, help="check a gog or morphism document")
    add("h1", cmd_h1, help="print first homology")

    p = add("elevations", cmd_elevations, help="CSV of elevations at a free vertex")
    p.add_argument("--vertex", required=True)
    p.add_argument("--table", required=True, help="permutation rows, e.g. '[[1,0],[0,1]]'")

    p = add("enumerate-covers", cmd_enumerate_covers, help="CSV census of covers")
    p.add_argument("--max-index", type=int, required=True)
    p.add_argument("--cap", type=int)

    p = add("torsion-piece", cmd_torsion_piece, help="search covers for a torsion piece")
    p.add_argument("--prime", type=int, required=True)
    p.add_argument("--max-index", type=int, required=True)
    p.add_argument("--cap", type=int)

    p = add("chain", cmd_chain, help="concatenate copies of a torsion piece")
    p.add_argument("--copies", type=int, required=True)

    p = add("complete", cmd_complete, help="extend a precover to a cover")
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--cap", type=int)

    p = add("tower", cmd_tower, help="run the tower builder, print its CSV report")
    p.add_argument("--steps", type=int)
    p.add_argument("--primes", type=_primes_flag)
    p.add_argument("--bounds", help="comma-separated name=value TowerBounds overrides")
    p.add_argument("--budget", type=int)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except BudgetExceededError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
