"""Symmetric probabilities: one weight per predicate instead of one per tuple.

``pr_H`` is the binomially weighted closed form for
``H = (!R(x) | S(x,y) | !T(y))``::

    sum over k, l of C(n,k) C(n,l) r^k (1-r)^(n-k) t^l (1-t)^(n-l) s^(k*l)

where k (l) counts the constants in R (T): every pair in R x T needs S. It is
pinned to the ground oracle. A printed variant without the binomial factors and
with ``1 - s^(k*l)`` does not match the oracle already at n = 1, so it is not
offered.

``pr_Q4`` evaluates the typed query
``S(x1,y1) | !S(x1,y2) | !S(x2,y1) | S(x2,y2)`` (x over n1 left elements, y over
n2 right elements) through the mutual f/g recurrence on the minimal elements
of the partial order the query induces.
"""

from __future__ import annotations

import functools
from collections.abc import Mapping
from fractions import Fraction
from math import comb

from loguru import logger

from .engine import Fail, evaluate
from .exceptions import LiftFailure, ParamsError
from .logic import (
    Clause,
    CnfQuery,
    Domain,
    Literal,
    Predicate,
    Var,
    clause,
    lit,
    membership_literal,
    query,
)
from .pdb import ONE, ZERO, Pdb, Relation, check_probability
from .settings import Settings

H_QUERY = query(clause(lit("R", "x", positive=False), lit("S", "x", "y"), lit("T", "y", positive=False)))


def _fix_unary(q: CnfQuery, unary: Predicate, members: frozenset[str]) -> CnfQuery:
    """Replace every ``unary(v)`` by the deterministic ``v in members``."""
    clauses = []
    for c in q.clauses:
        literals: list[Literal] = []
        for literal in c.literals:
            if literal.predicate == unary and not literal.is_guard:
                literal = membership_literal(literal.args[0], members, literal.positive)
            literals.append(literal)
        clauses.append(Clause.of(literals))
    return CnfQuery.of(clauses)


def atom_count_eval(
    q: CnfQuery,
    weights: Mapping[Predicate, Fraction],
    n: int,
    unary: Predicate,
    settings: Settings | None = None,
) -> Fraction:
    """Sum over the size k of ``unary``'s extension.

    Under symmetric weights the conditional probability only depends on k, so
    the first k constants stand in for every k-subset.

    :param q: a query with symmetric weights for every relation symbol.
    :param weights: probability per predicate.
    :param n: domain size.
    :param unary: the unary predicate whose cardinality is summed out.
    :raises LiftFailure: when the engine cannot lift a conditioned query.
    """
    if unary.arity != 1 or unary not in q.relation_symbols:
        raise ParamsError(f"{unary} is not a unary symbol of {q}")
    if n < 0:
        raise ParamsError(f"domain size must be >= 0, got {n}")
    w = check_probability(Fraction(weights[unary]), f"{unary.name}: ")
    domain = Domain.sized(n)
    rest = {p: Fraction(v) for p, v in weights.items() if p != unary}
    db = Pdb.symmetric(domain, rest)
    total = ZERO
    for k in range(n + 1):
        factor = comb(n, k) * w**k * (ONE - w) ** (n - k)
        if factor == ZERO:
            continue
        conditioned = _fix_unary(q, unary, frozenset(domain.constants[:k]))
        result = evaluate(conditioned, db, settings)
        if isinstance(result, Fail):
            raise LiftFailure(result.stuck, f"atom counting over {unary.name} at k={k}")
        logger.debug("|{}| = {}: {}", unary.name, k, result.prob)
        total += factor * result.prob
    return total


def pr_H(n: int, r: Fraction, s: Fraction, t: Fraction) -> Fraction:
    """Pr(H) on n constants with Pr(R)=r, Pr(S)=s, Pr(T)=t."""
    if n < 0:
        raise ParamsError(f"domain size must be >= 0, got {n}")
    r, s, t = (check_probability(Fraction(v)) for v in (r, s, t))
    return sum(
        (
            comb(n, k) * comb(n, l) * r**k * (ONE - r) ** (n - k) * t**l * (ONE - t) ** (n - l) * s ** (k * l)
            for k in range(n + 1)
            for l in range(n + 1)  # noqa: E741
        ),
        ZERO,
    )


def pr_Q4(n1: int, n2: int, p: Fraction) -> Fraction:
    """Pr of the typed four-literal query on an n1 x n2 relation with Pr(S)=p.

    ``f`` counts orders whose minimal elements are all on the left, ``g`` those
    with minimal elements all on the right.
    """
    if n1 < 0 or n2 < 0:
        raise ParamsError(f"sizes must be >= 0, got {n1}, {n2}")
    p = check_probability(Fraction(p))
    if n1 == 0 or n2 == 0:
        return ONE

    @functools.lru_cache(maxsize=None)
    def f(a: int, b: int) -> Fraction:
        if b == 0:
            return ONE
        return sum((comb(a, k) * p ** (k * b) * g(a - k, b) for k in range(1, a + 1)), ZERO)

    @functools.lru_cache(maxsize=None)
    def g(a: int, b: int) -> Fraction:
        if a == 0:
            return ONE
        return sum((comb(b, l) * (ONE - p) ** (a * l) * f(a, b - l) for l in range(1, b + 1)), ZERO)  # noqa: E741

    return f(n1, n2) + g(n1, n2)


def h_instance(n: int, r: Fraction, s: Fraction, t: Fraction) -> tuple[CnfQuery, Pdb]:
    """H with its symmetric database, ready for the oracle."""
    weights = {
        Predicate("R", 1): Fraction(r),
        Predicate("S", 2): Fraction(s),
        Predicate("T", 1): Fraction(t),
    }
    return H_QUERY, Pdb.symmetric(n, weights)


def typed_q4_instance(n1: int, n2: int, p: Fraction) -> tuple[CnfQuery, Pdb]:
    """The typed query over ``L1..Ln1`` and ``R1..Rn2``; membership guards keep
    x-variables on the left sort and y-variables on the right one."""
    p = check_probability(Fraction(p))
    left = tuple(f"L{i}" for i in range(1, n1 + 1))
    right = tuple(f"R{i}" for i in range(1, n2 + 1))
    literals = [
        membership_literal(Var(v), left, positive=False) for v in ("x1", "x2")
    ] + [
        membership_literal(Var(v), right, positive=False) for v in ("y1", "y2")
    ]
    literals += [
        lit("S", "x1", "y1"),
        lit("S", "x1", "y2", positive=False),
        lit("S", "x2", "y1", positive=False),
        lit("S", "x2", "y2"),
    ]
    q = CnfQuery.of([Clause.of(literals)])
    rows = {(a, b): p for a in left for b in right}
    db = Pdb(Domain(left + right), {"S": Relation("S", 2, rows)})
    return q, db

