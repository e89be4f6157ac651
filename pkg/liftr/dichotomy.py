"""Safe/hard classification of queries.

A query is safe when the engine lifts it on a symbolic run. For two-variable
("Type-1") queries a failure is a hardness verdict. These queries are built from
left unaries ``R(x)``, binaries ``S(x,y)`` and right unaries ``T(y)``. For
such queries the module also reports why the engine got stuck, in terms of the
query's Boolean formula ``F`` over its symbols:

* splittable: ``F`` implies a clause over one left and one right unary, i.e.
  one of ``F[a/U, b/V]`` is unsatisfiable;
* decomposable: ``F`` splits into symbol-disjoint parts, one holding every left
  unary and the other every right unary;
* immediately unsafe: neither of the above;
* forbidden: immediately unsafe, while every single rewrite ``F[0/Z]`` or
  ``F[1/Z]`` is safe.
"""

from __future__ import annotations

import enum
import itertools
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import networkx as nx
from loguru import logger

from .engine import EvalTrace, Fail, Success, evaluate
from .entail import is_satisfiable_query
from .exceptions import AmbiguousSide, MultipleUnaries
from .logic import CnfQuery, Const, Domain, Predicate, Side, Var, assign_symbol
from .pdb import Pdb, Relation
from .preprocess import prepare
from .settings import Settings, get_settings

HALF = Fraction(1, 2)

Rewrite = tuple[tuple[str, bool], ...]


class Verdict(str, enum.Enum):
    SAFE_PTIME = "SafePtime"
    HARD_SHARP_P = "HardSharpP"
    OUT_OF_FRAGMENT = "OutOfFragment"


@dataclass
class Diagnostics:
    splittable: Optional[bool] = None
    decomposable: Optional[bool] = None
    immediately_unsafe: Optional[bool] = None
    unsafe_rewrites: list[Rewrite] = field(default_factory=list)
    subject: Optional[CnfQuery] = None
    note: str = ""


@dataclass
class Classification:
    verdict: Verdict
    witness: Union[EvalTrace, CnfQuery]
    trace: EvalTrace
    diagnostics: Optional[Diagnostics] = None


def _clause_sides(q: CnfQuery) -> dict[Predicate, set[Side]]:
    found: dict[Predicate, set[Side]] = {}
    for c in q.clauses:
        binaries = [i for i in c.relation_literals if i.predicate.arity == 2]
        for literal in c.relation_literals:
            if literal.predicate.arity != 1:
                continue
            (v,) = literal.args
            seen = found.setdefault(literal.predicate, set())
            for b in binaries:
                if b.args[0] == v:
                    seen.add(Side.LEFT)
                if b.args[1] == v:
                    seen.add(Side.RIGHT)
    return found


def infer_sides(q: CnfQuery, sides: Mapping[str, Side] | None = None) -> dict[Predicate, Side]:
    """Side of every relation symbol: annotation first, then co-occurrence with
    a binary atom, then the ``x``/``y`` variable naming convention.

    :raises AmbiguousSide: if a unary symbol is still undecided.
    """
    sides = dict(sides or {})
    co_occurrence = _clause_sides(q)
    result: dict[Predicate, Side] = {}
    for pred in sorted(q.relation_symbols, key=lambda p: p.name):
        annotated = sides.get(pred.name) or pred.side
        if annotated is not None:
            result[pred] = Side(annotated)
            continue
        if pred.arity == 2:
            result[pred] = Side.BINARY
            continue
        if pred.arity != 1:
            result[pred] = Side.OTHER
            continue
        seen = co_occurrence.get(pred, set())
        if len(seen) == 1:
            result[pred] = seen.pop()
            continue
        if not seen:
            names = {
                i.args[0].name[:1]
                for c in q.clauses
                for i in c.relation_literals
                if i.predicate == pred and isinstance(i.args[0], Var)
            }
            if names == {"x"}:
                result[pred] = Side.LEFT
                continue
            if names == {"y"}:
                result[pred] = Side.RIGHT
                continue
        raise AmbiguousSide(f"cannot tell whether {pred} is a left or a right unary; annotate it")
    return result


def is_type1(q: CnfQuery, sides: Mapping[str, Side] | None = None) -> bool:
    """Every clause uses at most one left and one right variable, binary atoms
    ``S(left, right)`` and unary atoms on the matching side."""
    if q.is_true or q.is_false or q.has_guards:
        return False
    for c in q.clauses:
        for literal in c.relation_literals:
            arity = literal.predicate.arity
            if arity not in (1, 2) or any(isinstance(t, Const) for t in literal.args):
                return False
            if arity == 2 and literal.args[0] == literal.args[1]:
                return False
    try:
        kinds = infer_sides(q, sides)
    except AmbiguousSide:
        return False
    if any(k is Side.OTHER or (k is Side.BINARY) != (p.arity == 2) for p, k in kinds.items()):
        return False
    for c in q.clauses:
        if len(c.variables) > 2:
            return False
        left: set[object] = set()
        right: set[object] = set()
        for literal in c.relation_literals:
            kind = kinds[literal.predicate]
            if kind is Side.BINARY:
                left.add(literal.args[0])
                right.add(literal.args[1])
            elif kind is Side.LEFT:
                left.add(literal.args[0])
            else:
                right.add(literal.args[0])
        if len(left) > 1 or len(right) > 1 or left & right:
            return False
    return True


def _unaries(q: CnfQuery, sides: Mapping[str, Side] | None) -> tuple[list[Predicate], list[Predicate]]:
    kinds = infer_sides(q, sides)
    left = sorted((p for p, k in kinds.items() if k is Side.LEFT), key=lambda p: p.name)
    right = sorted((p for p, k in kinds.items() if k is Side.RIGHT), key=lambda p: p.name)
    return left, right


def splittable(q: CnfQuery, sides: Mapping[str, Side] | None = None, settings: Settings | None = None) -> bool:
    """Whether one of the four restrictions ``F[a/U, b/V]`` is unsatisfiable.

    :raises MultipleUnaries: with more than one left or right unary symbol.
    """
    settings = settings or get_settings()
    left, right = _unaries(q, sides)
    if len(left) > 1 or len(right) > 1:
        raise MultipleUnaries(
            f"splittable needs a single left and right unary, got {[p.name for p in left + right]}"
        )
    if not left or not right:
        return False
    (u,), (v,) = left, right
    for a, b in itertools.product((False, True), repeat=2):
        restricted = assign_symbol(assign_symbol(q, u, a), v, b)
        if not is_satisfiable_query(restricted, 1, settings):
            logger.debug("F[{}/{}, {}/{}] is unsatisfiable", int(a), u.name, int(b), v.name)
            return True
    return False


def decomposable(q: CnfQuery, sides: Mapping[str, Side] | None = None) -> bool:
    """Whether the clauses split into symbol-disjoint groups separating every
    left unary from every right unary."""
    left, right = _unaries(q, sides)
    if not left or not right:
        return False
    graph = nx.Graph()
    graph.add_nodes_from(q.relation_symbols)
    for c in q.clauses:
        symbols = sorted({i.predicate for i in c.relation_literals}, key=lambda p: p.name)
        graph.add_edges_from(zip(symbols, symbols[1:]))
    for component in nx.connected_components(graph):
        if component & set(left) and component & set(right):
            return False
    return True


def immediately_unsafe(
    q: CnfQuery, sides: Mapping[str, Side] | None = None, settings: Settings | None = None
) -> bool:
    left, right = _unaries(q, sides)
    if not left or not right:
        return False
    return not splittable(q, sides, settings) and not decomposable(q, sides)


def unsafe_rewrites(
    q: CnfQuery,
    depth: int | None = None,
    sides: Mapping[str, Side] | None = None,
    settings: Settings | None = None,
) -> list[Rewrite]:
    """Breadth-first search for sequences of symbol assignments leading to an
    immediately unsafe Type-1 query; the empty sequence stands for ``q`` itself."""
    settings = settings or get_settings()
    if depth is None:
        depth = settings.rewrite_depth
    found: list[Rewrite] = []
    seen = {q.key}
    todo: deque[tuple[CnfQuery, Rewrite]] = deque([(q, ())])
    while todo:
        current, path = todo.popleft()
        try:
            if is_type1(current, sides) and immediately_unsafe(current, sides, settings):
                found.append(path)
        except (MultipleUnaries, AmbiguousSide):
            pass
        if len(path) >= depth:
            continue
        for pred in sorted(current.relation_symbols, key=lambda p: p.name):
            for value in (False, True):
                nxt = assign_symbol(current, pred, value)
                if nxt.key in seen or nxt.is_false or nxt.is_true:
                    continue
                seen.add(nxt.key)
                todo.append((nxt, (*path, (pred.name, value))))
    return found


def generic_pdb(q: CnfQuery, size: int) -> Pdb:
    """Every tuple of every relation symbol of ``q`` with probability 1/2."""
    constants = sorted(
        {t.name for c in q.clauses for i in c.relation_literals for t in i.args if isinstance(t, Const)}
        | {m for c in q.clauses for i in c.guard_literals for m in i.predicate.members}
    )
    fresh = [f"c{i}" for i in range(1, size + 1) if f"c{i}" not in constants]
    relations = {p.name: Relation(p.name, p.arity, default=HALF) for p in q.relation_symbols}
    return Pdb(Domain(tuple(constants + fresh)), relations)


def _prepared(q: CnfQuery, settings: Settings) -> tuple[CnfQuery, Pdb]:
    return prepare(q, generic_pdb(q, settings.symbolic_domain_size), settings)


def is_safe(q: CnfQuery, settings: Settings | None = None) -> bool:
    settings = settings or get_settings()
    prepared, db = _prepared(q, settings)
    return isinstance(evaluate(prepared, db, settings, symbolic=True), Success)


def is_forbidden(
    q: CnfQuery, sides: Mapping[str, Side] | None = None, settings: Settings | None = None
) -> bool:
    settings = settings or get_settings()
    if not immediately_unsafe(q, sides, settings):
        return False
    for pred in sorted(q.relation_symbols, key=lambda p: p.name):
        for value in (False, True):
            if not is_safe(assign_symbol(q, pred, value), settings):
                return False
    return True


def _diagnose(q: CnfQuery, sides: Mapping[str, Side] | None, settings: Settings) -> Diagnostics:
    diagnostics = Diagnostics(subject=q)
    try:
        diagnostics.decomposable = decomposable(q, sides)
        diagnostics.splittable = splittable(q, sides, settings)
        diagnostics.immediately_unsafe = not diagnostics.splittable and not diagnostics.decomposable
    except MultipleUnaries as e:
        diagnostics.note = str(e)
    diagnostics.unsafe_rewrites = unsafe_rewrites(q, settings.rewrite_depth, sides, settings)
    return diagnostics


def classify(
    q: CnfQuery, sides: Mapping[str, Side] | None = None, settings: Settings | None = None
) -> Classification:
    """Run the engine symbolically; a failure on a Type-1 query is a hardness verdict."""
    settings = settings or get_settings()
    prepared, db = _prepared(q, settings)
    result = evaluate(prepared, db, settings, symbolic=True)
    if isinstance(result, Success):
        return Classification(Verdict.SAFE_PTIME, result.trace, result.trace)
    assert isinstance(result, Fail)
    if not is_type1(q, sides):
        return Classification(Verdict.OUT_OF_FRAGMENT, result.stuck, result.trace)
    subject = result.stuck if is_type1(result.stuck, sides) else q
    diagnostics = _diagnose(subject, sides, settings)
    logger.info("{} is hard; stuck at {}", q, result.stuck)
    return Classification(Verdict.HARD_SHARP_P, result.stuck, result.trace, diagnostics)
