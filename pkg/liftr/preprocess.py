"""Rewrite (query, database) pairs into the constant-free, ranked form the
engine expects. Both transformations preserve the probability exactly."""

from __future__ import annotations

import itertools
from collections.abc import Iterator, Sequence
from fractions import Fraction
from typing import TypeVar

import networkx as nx
from loguru import logger

from .exceptions import ParamsError, ResourceCap, UnsupportedArity
from .logic import (
    Atom,
    Clause,
    CnfQuery,
    Const,
    Literal,
    Predicate,
    Term,
    Var,
    membership_literal,
    order_literal,
)
from .pdb import ZERO, Pdb, Relation
from .settings import Settings, get_settings

T = TypeVar("T")

SHATTER_LIMIT = 1000


def weak_orderings(items: Sequence[T]) -> Iterator[tuple[tuple[T, ...], ...]]:
    """Ordered set partitions: 3 for two items, 13 for three."""
    items = list(items)
    if not items:
        yield ()
        return
    for size in range(1, len(items) + 1):
        for first in itertools.combinations(items, size):
            rest = [i for i in items if i not in first]
            for tail in weak_orderings(rest):
                yield (first, *tail)


def slice_name(name: str, position: int, arity: int, constant: str) -> str:
    return f"{name}@{constant}" if position == arity - 1 else f"{name}@{constant}:{position + 1}"


def residual_name(name: str, position: int, arity: int, constant: str) -> str:
    return f"{name}~{constant}" if position == arity - 1 else f"{name}~{constant}:{position + 1}"


def _next_constant(q: CnfQuery) -> tuple[Predicate, int, str] | None:
    found = [
        (literal.predicate.name, literal.predicate.arity, pos, t.name, literal.predicate)
        for c in q.clauses
        for literal in c.relation_literals
        for pos, t in enumerate(literal.args)
        if isinstance(t, Const)
    ]
    if not found:
        return None
    *_, pos, constant, pred = min(found, key=lambda f: f[:4])
    return pred, pos, constant


def _split_clause(c: Clause, pred: Predicate, pos: int, constant: str) -> list[Clause]:
    pivots = sorted(
        {
            literal.args[pos]
            for literal in c.relation_literals
            if literal.predicate == pred and isinstance(literal.args[pos], Var)
        },
        key=lambda t: t.name,
    )
    clauses = [c]
    for v in pivots:
        assert isinstance(v, Var)
        expanded = []
        for d in clauses:
            expanded.append(d.substitute({v: Const(constant)}))
            expanded.append(Clause.of(d.literals | {membership_literal(v, [constant])}))
        clauses = [d for d in expanded if not d.tautology]
    return clauses


def _split(q: CnfQuery, db: Pdb, pred: Predicate, pos: int, constant: str) -> tuple[CnfQuery, Pdb]:
    arity = pred.arity
    piece = Predicate(slice_name(pred.name, pos, arity, constant), arity - 1)
    rest = Predicate(residual_name(pred.name, pos, arity, constant), arity)

    def rename(literal: Literal) -> Literal:
        if literal.is_guard or literal.predicate != pred:
            return literal
        args = literal.args
        if args[pos] == Const(constant):
            return Literal(Atom(piece, args[:pos] + args[pos + 1 :]), literal.positive)
        return Literal(Atom(rest, args), literal.positive)

    clauses = [
        Clause.of(rename(i) for i in d.literals)
        for c in q.clauses
        for d in _split_clause(c, pred, pos, constant)
    ]

    domain = db.domain.constants
    piece_rows: dict[tuple[str, ...], Fraction] = {}
    for args in itertools.product(domain, repeat=arity - 1):
        full = args[:pos] + (constant,) + args[pos:]
        p = db.probability(pred, full)
        if p != ZERO:
            piece_rows[args] = p
    original = db.relations.get(pred.name)
    if original is None:
        rest_relation = Relation(rest.name, arity)
    else:
        rest_rows = {k: v for k, v in original.rows.items() if k[pos] != constant}
        if original.default != ZERO or original.sym not in (None, ZERO):
            for args in itertools.product(domain, repeat=arity - 1):
                rest_rows[args[:pos] + (constant,) + args[pos:]] = ZERO
        rest_relation = Relation(rest.name, arity, rest_rows, original.default, original.sym)
    logger.debug("split {} at position {} on {}: {} + {}", pred.name, pos + 1, constant, piece.name, rest.name)
    db = db.with_relations(
        [Relation(piece.name, piece.arity, piece_rows), rest_relation], drop=[pred.name]
    )
    return CnfQuery.of(clauses), db


def shatter(q: CnfQuery, db: Pdb) -> tuple[CnfQuery, Pdb]:
    """Remove constants from relation atoms by slicing relations on them."""
    for _ in range(SHATTER_LIMIT):
        target = _next_constant(q)
        if target is None:
            return q, db
        q, db = _split(q, db, *target)
    raise ResourceCap(f"shattering did not reach a fixpoint in {SHATTER_LIMIT} splits")


def _clause_graph(c: Clause) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(v.name for v in c.variables)
    for literal in c.literals:
        if literal.is_guard:
            if literal.predicate.is_order and not literal.positive:
                left, right = literal.args
                graph.add_edge(left.name, right.name)
            continue
        names = [t.name for t in literal.args]
        graph.add_edges_from(zip(names, names[1:]))
    return graph


def is_ranked(q: CnfQuery) -> bool:
    """Constant-free, no repeated variable inside an atom, and per clause the
    argument orders (plus order guards) admit a consistent variable order."""
    for c in q.clauses:
        for literal in c.relation_literals:
            args = literal.args
            if any(isinstance(t, Const) for t in args) or len(set(args)) != len(args):
                return False
        if not nx.is_directed_acyclic_graph(_clause_graph(c)):
            return False
    return True


def derived_name(name: str, code: str) -> str:
    return f"{name}#{code}"


def _rank_clause(c: Clause, derived: dict[str, tuple[Predicate, str]]) -> list[Clause]:
    names = sorted(c.variables)
    out: list[Clause] = []
    for ordering in weak_orderings(names):
        block_of = {v: i for i, block in enumerate(ordering) for v in block}
        rename: dict[Var, Term] = {v: names[block_of[v]] for v in names}
        literals: list[Literal] = []
        vacuous = False
        for literal in c.literals:
            pred = literal.predicate
            if pred.is_order:
                left, right = literal.args
                holds = block_of[left] < block_of[right]  # type: ignore[index]
                if holds == literal.positive:
                    vacuous = True
                    break
                continue
            if literal.is_guard or pred.arity < 2:
                literals.append(literal.substitute(rename))
                continue
            blocks = [block_of[t] for t in literal.args]  # type: ignore[index]
            distinct = sorted(set(blocks))
            code = "".join(str(distinct.index(b) + 1) for b in blocks)
            target = Predicate(derived_name(pred.name, code), len(distinct))
            derived[target.name] = (Predicate(pred.name, pred.arity), code)
            args = tuple(names[b] for b in distinct)
            literals.append(Literal(Atom(target, args), literal.positive))
        if vacuous:
            continue
        chain = [
            order_literal(names[i], names[i + 1], positive=False) for i in range(len(ordering) - 1)
        ]
        clause = Clause.of(literals + chain)
        if not clause.tautology:
            out.append(clause)
    return out


def _derived_relation(db: Pdb, name: str, root: Predicate, code: str) -> Relation:
    width = len(set(code))
    rows: dict[tuple[str, ...], Fraction] = {}
    for combo in itertools.combinations(db.domain.constants, width):
        full = tuple(combo[int(d) - 1] for d in code)
        p = db.probability(root, full)
        if p != ZERO:
            rows[combo] = p
    return Relation(name, width, rows)


def rank(q: CnfQuery, db: Pdb, settings: Settings | None = None) -> tuple[CnfQuery, Pdb]:
    """Expand each clause over the weak orderings of its variables so every atom
    lists distinct variables in increasing order; tuples move to derived
    relations ``R#<ranks>`` (``R#12`` increasing, ``R#11`` diagonal, ``R#21``
    decreasing)."""
    settings = settings or get_settings()
    if q.has_constants:
        raise ParamsError("rank expects a constant-free query; shatter it first")
    if is_ranked(q):
        return q, db
    wide = sorted(
        {i.predicate for c in q.clauses for i in c.relation_literals if i.predicate.arity > settings.rank_arity_cap},
        key=lambda p: p.name,
    )
    if wide:
        raise UnsupportedArity(
            f"ranking {', '.join(map(str, wide))} exceeds the arity cap {settings.rank_arity_cap}"
        )
    derived: dict[str, tuple[Predicate, str]] = {}
    clauses = [r for c in q.sorted_clauses for r in _rank_clause(c, derived)]
    roots = {root.name for root, _ in derived.values()}
    relations = [_derived_relation(db, name, root, code) for name, (root, code) in sorted(derived.items())]
    logger.debug("ranked {} into {} derived relation(s)", sorted(roots), len(relations))
    return CnfQuery.of(clauses), db.with_relations(relations, drop=roots)


def prepare(q: CnfQuery, db: Pdb, settings: Settings | None = None) -> tuple[CnfQuery, Pdb]:
    """Shatter, then rank, whatever the engine cannot take as it is."""
    if q.has_constants:
        q, db = shatter(q, db)
    if not is_ranked(q):
        q, db = rank(q, db, settings)
    return q, db
