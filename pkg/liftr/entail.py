"""Implication, equivalence and disconnected prime implicates of CNF queries.

``implies`` decides q => q2 with the small-model property of universal
sentences: a countermodel, if any, lives on the constants of both queries plus
as many fresh elements as the falsified clause of q2 has variables. The
grounding is handed to the DPLL search of the oracle module.

Resolution only proposes implicates; each one is confirmed by ``implies``.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from loguru import logger

from .logic import (
    Clause,
    CnfQuery,
    Const,
    Literal,
    Term,
    Var,
    connected_components,
    subsumes,
)
from .oracle import is_satisfiable
from .settings import Settings, get_settings

_FRESH = "_e"


@dataclass(frozen=True)
class ImplicateCandidate:
    clause: Clause
    components: tuple[Clause, ...]

    def __str__(self) -> str:
        return " v ".join(map(str, self.components))


def _constants(*queries: CnfQuery | Clause) -> list[str]:
    names: set[str] = set()
    for q in queries:
        clauses = (q,) if isinstance(q, Clause) else q.clauses
        for c in clauses:
            for literal in c.literals:
                names.update(t.name for t in literal.args if isinstance(t, Const))
                names.update(literal.predicate.members)
    return sorted(names)


class _Grounder:
    """Propositional encoding over constants plus fresh, linearly ordered elements."""

    def __init__(self, constants: Sequence[str], fresh: int) -> None:
        self.fresh = [f"{_FRESH}{i}" for i in range(fresh)]
        self.elements = [*constants, *self.fresh]
        self.rank = {e: i for i, e in enumerate(self.fresh)}
        self.index: dict[tuple[str, tuple[str, ...]], int] = {}

    def guard(self, literal: Literal) -> bool | None:
        pred = literal.predicate
        names = tuple(t.name for t in literal.args)
        value: bool | None = None
        if pred.is_order:
            left, right = names
            if left == right:
                value = False
            elif left in self.rank and right in self.rank:
                value = self.rank[left] < self.rank[right]
        elif pred.is_membership:
            value = names[0] in pred.members
        if value is None:
            return None
        return value if literal.positive else not value

    def encode(self, literal: Literal) -> int:
        key = (literal.predicate.name, tuple(t.name for t in literal.args))
        i = self.index.get(key)
        if i is None:
            i = self.index[key] = len(self.index) + 1
        return i if literal.positive else -i

    def instances(self, c: Clause) -> Iterable[list[Literal] | None]:
        """Ground instances of a clause; ``None`` stands for a satisfied instance."""
        variables = sorted(c.variables)
        for values in itertools.product(self.elements, repeat=len(variables)):
            mapping: dict[Var, Term] = {v: Const(x) for v, x in zip(variables, values)}
            out: list[Literal] | None = []
            for literal in c.sorted_literals:
                g = literal.substitute(mapping)
                value = self.guard(g) if g.is_guard else None
                if value is True:
                    out = None
                    break
                if value is None:
                    out.append(g)
            yield out

    def clauses(self, q: CnfQuery) -> list[frozenset[int]]:
        result = []
        for c in q.sorted_clauses:
            for instance in self.instances(c):
                if instance is not None:
                    result.append(frozenset(self.encode(i) for i in instance))
        return result


def _countermodel(q: CnfQuery, d: Clause, constants: list[str], size: int, budget: int) -> bool:
    grounder = _Grounder(constants, size)
    base = grounder.clauses(q)
    for instance in grounder.instances(d):
        if instance is None:
            continue
        units = [frozenset([-grounder.encode(i)]) for i in instance]
        if is_satisfiable(base + units, budget):
            return True
    return False


def _guarded(*queries: CnfQuery) -> bool:
    return any(bool(c.guard_literals) for q in queries for c in q.clauses)


def syntactically_implies(q: CnfQuery, q2: CnfQuery) -> bool:
    return all(any(subsumes(c, d) for c in q.clauses) for d in q2.clauses)


def implies(q: CnfQuery, q2: CnfQuery, settings: Settings | None = None) -> bool:
    """Whether every model of ``q`` is a model of ``q2``."""
    settings = settings or get_settings()
    if q.is_false or q2.is_true or syntactically_implies(q, q2):
        return True
    constants = _constants(q, q2)
    guarded = _guarded(q, q2)
    budget = settings.sat_node_budget
    if q2.is_false:
        sizes = range(0 if constants else 1, 2) if guarded else (1,)
        return not any(_countermodel(q, Clause(frozenset()), constants, s, budget) for s in sizes)
    for d in q2.sorted_clauses:
        k = max(1, len(d.variables))
        # guards tell fresh elements from clones, so every smaller domain is tried
        sizes = range(0 if constants else 1, k + 1) if guarded else (k,)
        for size in sizes:
            if _countermodel(q, d, constants, size, budget):
                return False
    return True


def equivalent(q: CnfQuery, q2: CnfQuery, settings: Settings | None = None) -> bool:
    if q.key == q2.key:
        return True
    return implies(q, q2, settings) and implies(q2, q, settings)


def is_satisfiable_query(q: CnfQuery, size: int = 1, settings: Settings | None = None) -> bool:
    """Satisfiability over ``size`` fresh elements (plus the query's constants)."""
    settings = settings or get_settings()
    if q.is_false:
        return False
    grounder = _Grounder(_constants(q), size)
    return is_satisfiable(grounder.clauses(q), settings.sat_node_budget)


def unify(left: Sequence[Term], right: Sequence[Term]) -> dict[Var, Term] | None:
    theta: dict[Var, Term] = {}

    def walk(t: Term) -> Term:
        while isinstance(t, Var) and t in theta:
            t = theta[t]
        return t

    for a, b in zip(left, right):
        a, b = walk(a), walk(b)
        if a == b:
            continue
        if isinstance(a, Var):
            theta[a] = b
        elif isinstance(b, Var):
            theta[b] = a
        else:
            return None
    return {v: walk(v) for v in theta}


def _tidy(c: Clause) -> Clause:
    """Strip the apart-marker from variables whose base name is free again."""
    names = {v.name for v in c.variables}
    mapping: dict[Var, Term] = {}
    for v in sorted(c.variables):
        base = v.name.rstrip("'")
        if base != v.name and base not in names:
            mapping[v] = Var(base)
            names.add(base)
    return c.substitute(mapping) if mapping else c


def resolvents(c1: Clause, c2: Clause) -> list[Clause]:
    """Binary resolvents of two clauses, standardized apart first."""
    taken = {v.name for v in c1.variables | c2.variables}
    apart: dict[Var, Term] = {}
    for v in sorted(c2.variables & c1.variables):
        name = v.name
        while name in taken:
            name += "'"
        taken.add(name)
        apart[v] = Var(name)
    if apart:
        c2 = c2.substitute(apart)
    out = []
    for l1 in c1.relation_literals:
        for l2 in c2.relation_literals:
            if l1.predicate != l2.predicate or l1.positive == l2.positive:
                continue
            theta = unify(l1.args, l2.args)
            if theta is None:
                continue
            rest = (c1.literals - {l1}) | (c2.literals - {l2})
            r = Clause.of(i.substitute(theta) for i in rest)
            if not r.tautology:
                out.append(_tidy(r))
    return out


def factors(c: Clause) -> list[Clause]:
    out = []
    for l1, l2 in itertools.combinations(c.relation_literals, 2):
        if l1.predicate != l2.predicate or l1.positive != l2.positive:
            continue
        theta = unify(l1.args, l2.args)
        if theta is not None:
            f = c.substitute(theta)
            if not f.tautology and len(f) < len(c):
                out.append(f)
    return out


def resolution(clauses: Sequence[Clause], settings: Settings | None = None) -> list[Clause]:
    """Bounded saturation: derivation depth, clause length and closure size are capped."""
    settings = settings or get_settings()
    if not clauses:
        return []
    bound = settings.clause_length_bound or max(len(c.relation_literals) for c in clauses)
    known: dict[str, Clause] = {c.key: c for c in clauses}
    frontier = list(clauses)
    for depth in range(settings.resolution_depth):
        fresh: list[Clause] = []

        def admit(r: Clause) -> None:
            if len(r.relation_literals) > bound or r.key in known:
                return
            if any(subsumes(k, r) for k in known.values()):
                return
            known[r.key] = r
            fresh.append(r)

        pool = list(known.values())
        for c1 in frontier:
            if len(known) >= settings.max_resolvents:
                break
            for f in factors(c1):
                admit(f)
            for c2 in pool:
                for r in resolvents(c1, c2):
                    admit(r)
                if len(known) >= settings.max_resolvents:
                    break
        if len(known) >= settings.max_resolvents:
            logger.debug("resolution stopped at {} clauses (depth {})", len(known), depth + 1)
            break
        if not fresh:
            break
        frontier = fresh
    return sorted(known.values(), key=lambda c: (len(c), c.key))


def disconnected_prime_implicates(
    q: CnfQuery, settings: Settings | None = None
) -> list[ImplicateCandidate]:
    """Disconnected clauses implied by ``q`` whose components each subsume a clause
    of ``q`` while none is implied by ``q`` on its own."""
    settings = settings or get_settings()
    if q.is_true or q.is_false:
        return []
    found: list[ImplicateCandidate] = []
    for c in resolution(q.sorted_clauses, settings):
        components = connected_components(c)
        if len(components) < 2:
            continue
        if not all(any(subsumes(d, qc) for qc in q.clauses) for d in components):
            continue
        if any(implies(q, CnfQuery.of([d]), settings) for d in components):
            continue
        if c not in q.clauses and not implies(q, CnfQuery.of([c]), settings):
            continue
        found.append(ImplicateCandidate(c, tuple(components)))
    minimal = [
        a
        for a in found
        if not any(
            b is not a and subsumes(b.clause, a.clause) and not subsumes(a.clause, b.clause)
            for b in found
        )
    ]
    logger.debug("{} disconnected implicate(s) for {}", len(minimal), q)
    return minimal
