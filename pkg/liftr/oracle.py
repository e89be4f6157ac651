"""Reference semantics: ground a query over the database domain and count.

``wmc`` is an exact weighted model counter using Shannon expansion with
connected-component decomposition and a subformula cache. ``naive_wmc``
enumerates every world and only serves as a cross-check on small inputs.
"""

from __future__ import annotations

import itertools
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass
from fractions import Fraction
from math import prod

import networkx as nx
from loguru import logger

from .exceptions import ResourceCap
from .logic import CnfQuery, Const, Predicate, guard_value
from .pdb import ONE, ZERO, Pdb
from .settings import Settings, get_settings

GroundAtom = tuple[Predicate, tuple[str, ...]]
ClauseSet = frozenset[frozenset[int]]


@dataclass(frozen=True)
class GroundCnf:
    """Propositional CNF over indexed ground atoms (1-based, signed literals)."""

    atoms: tuple[GroundAtom, ...]
    clauses: ClauseSet
    weights: tuple[Fraction, ...]
    instantiations: int = 0

    def weight(self, literal: int) -> Fraction:
        w = self.weights[abs(literal) - 1]
        return w if literal > 0 else ONE - w

    @property
    def used_atoms(self) -> frozenset[int]:
        return frozenset(abs(i) for c in self.clauses for i in c)

    def describe(self, index: int) -> str:
        pred, args = self.atoms[index - 1]
        return f"{pred.name}({','.join(args)})" if args else pred.name


def ground(q: CnfQuery, db: Pdb) -> GroundCnf:
    """Instantiate every clause over the domain, folding in 0/1 probabilities."""
    index: dict[GroundAtom, int] = {}
    weights: list[Fraction] = []
    clauses: set[frozenset[int]] = set()
    instantiations = 0
    constants = db.domain.constants
    for c in q.sorted_clauses:
        variables = sorted(c.variables)
        for values in itertools.product(constants, repeat=len(variables)):
            instantiations += 1
            mapping = {v: Const(x) for v, x in zip(variables, values)}
            literals: set[int] = set()
            satisfied = False
            for literal in c.sorted_literals:
                ground_literal = literal.substitute(mapping)
                if ground_literal.is_guard:
                    if guard_value(ground_literal, db.domain):
                        satisfied = True
                        break
                    continue
                p = db.atom_probability(ground_literal.atom)
                if p == ZERO or p == ONE:
                    if (p == ONE) == ground_literal.positive:
                        satisfied = True
                        break
                    continue
                key = (ground_literal.predicate, tuple(t.name for t in ground_literal.args))
                i = index.get(key)
                if i is None:
                    i = index[key] = len(index) + 1
                    weights.append(p)
                signed = i if ground_literal.positive else -i
                if -signed in literals:
                    satisfied = True
                    break
                literals.add(signed)
            if not satisfied:
                clauses.add(frozenset(literals))
    atoms = tuple(sorted(index, key=index.__getitem__))
    return GroundCnf(atoms, frozenset(clauses), tuple(weights), instantiations)


def _condition(clauses: ClauseSet, literal: int) -> ClauseSet:
    return frozenset(c - {-literal} for c in clauses if literal not in c)


def _components(clauses: ClauseSet) -> list[ClauseSet]:
    graph = nx.Graph()
    for c in clauses:
        members = sorted(c, key=abs)
        graph.add_node(abs(members[0]))
        graph.add_edges_from((abs(a), abs(b)) for a, b in zip(members, members[1:]))
    if nx.number_connected_components(graph) == 1:
        return [clauses]
    owner = {a: n for n, comp in enumerate(nx.connected_components(graph)) for a in comp}
    parts: dict[int, set[frozenset[int]]] = {}
    for c in clauses:
        parts.setdefault(owner[abs(next(iter(c)))], set()).add(c)
    return [frozenset(p) for p in parts.values()]


class _Counter:
    def __init__(self, g: GroundCnf) -> None:
        self.g = g
        self.cache: dict[ClauseSet, Fraction] = {}

    def count(self, clauses: ClauseSet) -> Fraction:
        if not clauses:
            return ONE
        if frozenset() in clauses:
            return ZERO
        cached = self.cache.get(clauses)
        if cached is not None:
            return cached
        parts = _components(clauses)
        if len(parts) > 1:
            result = prod((self.count(p) for p in parts), start=ONE)
        else:
            occurrences = Counter(abs(i) for c in clauses for i in c)
            var = max(occurrences, key=lambda v: (occurrences[v], -v))
            w = self.g.weights[var - 1]
            result = w * self.count(_condition(clauses, var)) + (ONE - w) * self.count(
                _condition(clauses, -var)
            )
        self.cache[clauses] = result
        return result


def wmc(g: GroundCnf, settings: Settings | None = None) -> Fraction:
    settings = settings or get_settings()
    if frozenset() in g.clauses:
        return ZERO
    used = len(g.used_atoms)
    if used > settings.atom_budget:
        raise ResourceCap(f"grounding has {used} atoms, budget is {settings.atom_budget}")
    return _Counter(g).count(g.clauses)


def naive_wmc(g: GroundCnf, settings: Settings | None = None) -> Fraction:
    settings = settings or get_settings()
    used = sorted(g.used_atoms)
    if len(used) > settings.naive_atom_budget:
        raise ResourceCap(
            f"grounding has {len(used)} atoms, enumeration budget is {settings.naive_atom_budget}"
        )
    total = ZERO
    for values in itertools.product((True, False), repeat=len(used)):
        world = dict(zip(used, values))
        if all(any(world[abs(i)] == (i > 0) for i in c) for c in g.clauses):
            total += prod((g.weight(a if world[a] else -a) for a in used), start=ONE)
    return total


def pr_oracle(q: CnfQuery, db: Pdb, settings: Settings | None = None, naive: bool = False) -> Fraction:
    g = ground(q, db)
    logger.debug(
        "grounded {} instantiations into {} clauses over {} atoms",
        g.instantiations,
        len(g.clauses),
        len(g.used_atoms),
    )
    return naive_wmc(g, settings) if naive else wmc(g, settings)


def _assign(clauses: list[frozenset[int]], literal: int) -> list[frozenset[int]]:
    return [c - {-literal} for c in clauses if literal not in c]


def is_satisfiable(clauses: Iterable[Iterable[int]], node_budget: int | None = None) -> bool:
    """DPLL with unit propagation over signed-integer clauses."""
    budget = node_budget or get_settings().sat_node_budget
    nodes = 0

    def dpll(current: list[frozenset[int]]) -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise ResourceCap(f"satisfiability search exceeded {budget} nodes")
        while True:
            if not current:
                return True
            if any(not c for c in current):
                return False
            unit = next((c for c in current if len(c) == 1), None)
            if unit is None:
                break
            current = _assign(current, next(iter(unit)))
        occurrences = Counter(abs(i) for c in current for i in c)
        var = max(occurrences, key=lambda v: (occurrences[v], -v))
        return dpll(_assign(current, var)) or dpll(_assign(current, -var))

    return dpll([frozenset(c) for c in clauses])


def to_dimacs(g: GroundCnf) -> str:
    """DIMACS-style dump with one ``w <atom> <probability>`` line per atom."""
    lines = [f"c {i} {g.describe(i)}" for i in range(1, len(g.atoms) + 1)]
    lines.append(f"p cnf {len(g.atoms)} {len(g.clauses)}")
    lines.extend(f"w {i} {w}" for i, w in enumerate(g.weights, start=1))
    for c in sorted(g.clauses, key=lambda c: (len(c), sorted(c, key=abs))):
        lines.append(" ".join(str(i) for i in sorted(c, key=abs)) + " 0")
    return "\n".join(lines) + "\n"
