"""The lifted evaluation recursion.

For a query ``Q`` the engine tries, in this order:

0. a single ground literal: read its probability;
1. rewrite ``Q`` as a union of CNFs by distributing its disconnected clauses
   (or a disconnected implicate) and, on success, evaluate the union with
   2. decomposable disjunction over symbol-disjoint blocks, else
   3. inclusion/exclusion over equivalence classes of subset conjunctions,
      skipping classes whose coefficients cancel to zero;
4. decomposable conjunction of symbol-disjoint clause groups;
6. decomposable universal quantification over a separator variable;
7. on an explicit database, instantiate a negated literal over a sparsely
   listed relation at its listed tuples;

and otherwise reports where it got stuck.
"""

from __future__ import annotations

import enum
import itertools
import threading
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from math import prod
from typing import Any, Optional, Union

import networkx as nx
from loguru import logger
from networkx.utils import UnionFind

from .entail import disconnected_prime_implicates, equivalent, implies, syntactically_implies
from .exceptions import LiftFailure, ParamsError
from .logic import (
    FALSE,
    Atom,
    Clause,
    CnfQuery,
    Const,
    Domain,
    Literal,
    Predicate,
    UnionCnf,
    Var,
    connected_components,
    find_separator,
    guard_value,
    membership_literal,
)
from .pdb import ONE, ZERO, Pdb
from .settings import Settings, get_settings
from .tasks import ThreadGroup

RAW_PRODUCT_LIMIT = 4096


class TraceKind(str, enum.Enum):
    CONSTANT = "Constant"
    GROUND_LITERAL = "GroundLiteral"
    DECOMPOSABLE_DISJUNCTION = "DecomposableDisjunction"
    INCLUSION_EXCLUSION = "InclusionExclusion"
    DECOMPOSABLE_CONJUNCTION = "DecomposableConjunction"
    DECOMPOSABLE_UNIVERSAL = "DecomposableUniversal"
    CLOSED_WORLD = "ClosedWorldExpansion"
    FAIL = "Fail"


@dataclass
class EvalTrace:
    kind: TraceKind
    query: Union[CnfQuery, UnionCnf]
    coefficient: Optional[int] = None
    value: Optional[Fraction] = None
    children: list[EvalTrace] = field(default_factory=list)
    groups: list[tuple[CnfQuery, int]] = field(default_factory=list)
    separators: list[tuple[str, str]] = field(default_factory=list)
    note: str = ""

    def walk(self) -> list[EvalTrace]:
        nodes = [self]
        for child in self.children:
            nodes.extend(child.walk())
        return nodes


@dataclass(frozen=True)
class IeTermGroup:
    representative: CnfQuery
    members: tuple[frozenset[int], ...]
    net_coefficient: int


@dataclass(frozen=True)
class Success:
    prob: Fraction
    trace: EvalTrace


@dataclass(frozen=True)
class Fail:
    stuck: CnfQuery
    trace: EvalTrace
    reason: str = ""


EvalResult = Union[Success, Fail]


class _Stuck(Exception):
    def __init__(self, stuck: CnfQuery, reason: str) -> None:
        self.stuck = stuck
        self.reason = reason
        super().__init__(reason)


def _symbol_blocks(parts: Sequence[CnfQuery]) -> list[list[int]]:
    """Indices of ``parts`` grouped by shared relation symbols, in first-index order."""
    graph = nx.Graph()
    graph.add_nodes_from(range(len(parts)))
    owner: dict[Predicate, int] = {}
    for i, part in enumerate(parts):
        for symbol in part.relation_symbols:
            if symbol in owner:
                graph.add_edge(owner[symbol], i)
            else:
                owner[symbol] = i
    return sorted((sorted(c) for c in nx.connected_components(graph)), key=lambda b: b[0])


def independent_partition(parts: Sequence[CnfQuery]) -> tuple[CnfQuery, CnfQuery] | None:
    """First symbol-sharing component against the rest, or None if connected."""
    if len(parts) < 2:
        return None
    blocks = _symbol_blocks(parts)
    if len(blocks) < 2:
        return None
    first = set(blocks[0])
    left = CnfQuery.of(c for i in sorted(first) for c in parts[i].clauses)
    right = CnfQuery.of(c for i, p in enumerate(parts) if i not in first for c in p.clauses)
    return left, right


def _drop_redundant(disjuncts: list[CnfQuery]) -> list[CnfQuery]:
    """In a disjunction, a disjunct implying another one is redundant."""
    kept = []
    for i, d in enumerate(disjuncts):
        redundant = False
        for j, e in enumerate(disjuncts):
            if i == j or not syntactically_implies(d, e):
                continue
            if j < i or not syntactically_implies(e, d):
                redundant = True
                break
        if not redundant:
            kept.append(d)
    return kept


def _distribute(
    q: CnfQuery, selected: Sequence[tuple[Clause, Sequence[Clause]]], cap: int
) -> list[CnfQuery] | None:
    if prod(len(comps) for _, comps in selected) > RAW_PRODUCT_LIMIT:
        return None
    chosen = {c for c, _ in selected}
    rest = [c for c in q.clauses if c not in chosen]
    found: dict[tuple[str, ...], CnfQuery] = {}
    for choice in itertools.product(*(comps for _, comps in selected)):
        d = CnfQuery.of([*rest, *choice])
        if not d.is_false:
            found.setdefault(d.key, d)
    disjuncts = _drop_redundant(sorted(found.values(), key=lambda d: d.key))
    if len(disjuncts) > cap:
        return None
    return disjuncts


def union_cnf_rewrite(q: CnfQuery, settings: Settings | None = None) -> UnionCnf | None:
    """Write ``q`` as a disjunction of CNFs by distributing its disconnected
    clauses; fall back to the first disconnected implicate when it has none."""
    settings = settings or get_settings()
    if q.is_true or q.is_false:
        return None
    selected = []
    for c in q.sorted_clauses:
        components = connected_components(c)
        if len(components) > 1:
            selected.append((c, components))
    if not selected:
        implicates = disconnected_prime_implicates(q, settings)
        if not implicates:
            return None
        first = implicates[0]
        selected = [(first.clause, list(first.components))]
    cap = settings.max_union_disjuncts
    disjuncts = _distribute(q, selected, cap)
    if disjuncts is None and len(selected) > 1:
        disjuncts = _distribute(q, selected[:1], cap)
    if not disjuncts or len(disjuncts) < 2:
        return None
    return UnionCnf(tuple(disjuncts))


def _subset_classes(
    disjuncts: Sequence[CnfQuery], settings: Settings
) -> list[tuple[CnfQuery, list[frozenset[int]], int]]:
    m = len(disjuncts)
    classes: dict[tuple[str, ...], tuple[CnfQuery, list[frozenset[int]], list[int]]] = {}
    for r in range(1, m + 1):
        sign = 1 if r % 2 else -1
        for subset in itertools.combinations(range(m), r):
            conj = CnfQuery.of(c for i in subset for c in disjuncts[i].clauses)
            _, members, coef = classes.setdefault(conj.key, (conj, [], [0]))
            members.append(frozenset(i + 1 for i in subset))
            coef[0] += sign
    ordered = list(classes.values())
    merged = UnionFind(range(len(ordered)))
    for i, j in itertools.combinations(range(len(ordered)), 2):
        a, b = ordered[i][0], ordered[j][0]
        if merged[i] == merged[j] or a.relation_symbols != b.relation_symbols:
            continue
        if equivalent(a, b, settings):
            merged.union(i, j)
    out = []
    for block in merged.to_sets():
        idx = sorted(block)
        members = [s for i in idx for s in ordered[i][1]]
        coefficient = sum(ordered[i][2][0] for i in idx)
        out.append((ordered[idx[0]][0], members, coefficient))
    # smallest member subset first: size, then indices
    out.sort(key=lambda item: min((len(s), sorted(s)) for s in item[1]))
    return out


def group_ie_terms(
    disjuncts: UnionCnf | Sequence[CnfQuery],
    settings: Settings | None = None,
    keep_cancelled: bool = False,
) -> list[IeTermGroup]:
    """Group the inclusion/exclusion terms of a union by equivalence.

    The sum of ``net_coefficient * Pr(representative)`` over the groups equals
    the textbook alternating sum over all non-empty subsets of disjuncts.
    """
    settings = settings or get_settings()
    parts = list(disjuncts)
    if not parts:
        raise ParamsError("inclusion/exclusion needs at least one disjunct")
    groups = [
        IeTermGroup(rep, tuple(sorted(members, key=lambda s: (len(s), sorted(s)))), coefficient)
        for rep, members, coefficient in _subset_classes(parts, settings)
    ]
    if keep_cancelled:
        return groups
    return [g for g in groups if g.net_coefficient != 0]


def mobius_coefficients(
    disjuncts: UnionCnf | Sequence[CnfQuery], settings: Settings | None = None
) -> list[tuple[CnfQuery, int]]:
    """Coefficients from the Möbius function of the implication lattice of the
    subset conjunctions: each class contributes -mu(class, top)."""
    settings = settings or get_settings()
    reps = [g.representative for g in group_ie_terms(disjuncts, settings, keep_cancelled=True)]
    above: dict[int, list[int]] = {
        i: [j for j, b in enumerate(reps) if j != i and implies(a, b, settings)]
        for i, a in enumerate(reps)
    }
    mu: dict[int, int] = {}

    def mobius(i: int) -> int:
        if i not in mu:
            mu[i] = -(1 + sum(mobius(j) for j in above[i]))
        return mu[i]

    return [(rep, -mobius(i)) for i, rep in enumerate(reps)]


def depth_cap(q: CnfQuery, domain_size: int) -> int:
    base = len(q.relation_symbols) * max(1, q.max_arity) * max(1, domain_size) + len(q)
    # a rewrite level may precede every productive step
    return 2 * base + 2


def _specialize_name(pred: Predicate, pattern: Sequence[Const | None]) -> str:
    name = pred.name
    for i, t in enumerate(pattern):
        if t is not None:
            name += f"@{t.name}" if i == pred.arity - 1 else f"@{t.name}:{i + 1}"
    return name


def specialize(c: Clause, domain: Domain) -> Clause:
    """Replace constant-bearing relation atoms by slices and constant order
    guards by membership guards."""
    if c.tautology:
        return c
    literals: list[Literal] = []
    for literal in c.literals:
        pred = literal.predicate
        args = literal.args
        if pred.is_order:
            left, right = args
            if isinstance(left, Const) and isinstance(right, Var):
                literal = membership_literal(right, domain.after(left.name), literal.positive)
            elif isinstance(left, Var) and isinstance(right, Const):
                literal = membership_literal(left, domain.before(right.name), literal.positive)
        elif not pred.is_guard and any(isinstance(t, Const) for t in args):
            pattern = tuple(t if isinstance(t, Const) else None for t in args)
            free = tuple(t for t in args if not isinstance(t, Const))
            piece = Predicate(_specialize_name(pred, pattern), len(free), origin=(pred, pattern))
            literal = Literal(Atom(piece, free), literal.positive)
        literals.append(literal)
    return Clause.of(literals, domain)


DERIVED_MARKS = frozenset("#@~")


def listed_support(db: Pdb, pred: Predicate) -> list[tuple[str, ...]] | None:
    """Tuples of a relation that may be true when the database lists it sparsely
    with default 0; None when an unlisted tuple can be true or the relation was
    derived by shattering or ranking."""
    if DERIVED_MARKS & set(pred.name):
        return None
    relation = db.relations.get(pred.name)
    if relation is None or relation.default != ZERO or relation.sym not in (None, ZERO):
        return None
    if len(relation.rows) >= len(db.domain) ** pred.arity:
        return None
    return sorted(args for args, p in relation.rows.items() if p != ZERO)


def _match(args: Sequence[Var | Const], row: tuple[str, ...]) -> dict[Var, Const] | None:
    mapping: dict[Var, Const] = {}
    for t, value in zip(args, row):
        if isinstance(t, Const):
            if t.name != value:
                return None
        elif mapping.setdefault(t, Const(value)).name != value:
            return None
    return mapping


def closed_world_expand(q: CnfQuery, db: Pdb, settings: Settings | None = None) -> CnfQuery | None:
    """Replace a clause holding a negated literal over a sparsely listed relation
    by its specialized instances at the listed tuples; at any other tuple the
    literal is certainly true. Picks the smallest support, at most
    ``atom_budget`` rows."""
    settings = settings or get_settings()
    best: tuple[Clause, Literal, list[tuple[str, ...]]] | None = None
    for c in q.sorted_clauses:
        for literal in c.relation_literals:
            if literal.positive or literal.atom.is_ground:
                continue
            support = listed_support(db, literal.predicate)
            if support is None or len(support) > settings.atom_budget:
                continue
            if best is None or len(support) < len(best[2]):
                best = (c, literal, support)
    if best is None:
        return None
    c, literal, support = best
    instances = []
    for row in support:
        mapping = _match(literal.args, row)
        if mapping is not None:
            instance = specialize(c.substitute(mapping), db.domain)
            if not instance.tautology:
                instances.append(instance)
    logger.debug("closed-world expansion of {} over {} listed tuple(s)", literal, len(support))
    return CnfQuery.of([*(d for d in q.clauses if d != c), *instances])


class Engine:
    """Evaluates queries against one database; results are cached per query."""

    def __init__(self, db: Pdb, settings: Settings | None = None, symbolic: bool = False) -> None:
        self.db = db
        self.settings = settings or get_settings()
        self.symbolic = symbolic
        self._memo: dict[tuple[str, ...], EvalTrace] = {}
        self._lock = threading.Lock()
        self._cap = 0

    def evaluate(self, q: CnfQuery) -> EvalResult:
        self._cap = depth_cap(q, len(self.db.domain))
        root = EvalTrace(TraceKind.FAIL, q)
        try:
            value = self._eval(q, 0, root)
        except _Stuck as e:
            logger.info("stuck on {}: {}", e.stuck, e.reason)
            return Fail(e.stuck, root, e.reason)
        return Success(value, root)

    def _child(self, parent: EvalTrace, q: CnfQuery, depth: int, coefficient: int | None = None) -> Fraction:
        node = EvalTrace(TraceKind.FAIL, q, coefficient)
        parent.children.append(node)
        return self._eval(q, depth + 1, node)

    def _fail(self, node: EvalTrace, q: CnfQuery, reason: str) -> _Stuck:
        node.kind = TraceKind.FAIL
        node.note = reason
        return _Stuck(q, reason)

    def _decide_guards(self, q: CnfQuery) -> CnfQuery:
        """Resolve guard-only clauses and membership guards against the domain."""
        domain = self.db.domain
        everything = frozenset(domain.constants)
        clauses: list[Clause] = []
        for c in q.clauses:
            literals: list[Literal] = []
            satisfied = False
            for literal in c.literals:
                if literal.predicate.is_membership:
                    members = literal.predicate.members & everything
                    if members == everything:
                        satisfied = literal.positive
                        if satisfied:
                            break
                        continue
                    if members != literal.predicate.members:
                        literal = membership_literal(literal.args[0], members, literal.positive)
                literals.append(literal)
            if satisfied:
                continue
            d = Clause.of(literals, domain)
            if d.tautology:
                continue
            if d.relation_literals or d.is_empty:
                clauses.append(d)
                continue
            variables = sorted(d.variables)
            holds = all(
                any(guard_value(i.substitute(dict(zip(variables, values))), domain) for i in d.literals)
                for values in itertools.product(
                    [Const(x) for x in domain.constants], repeat=len(variables)
                )
            )
            if not holds:
                return FALSE
        return CnfQuery.of(clauses)

    def _eval(self, q: CnfQuery, depth: int, node: EvalTrace) -> Fraction:
        if depth > self._cap:
            raise self._fail(node, q, f"recursion depth cap {self._cap} reached")
        if q.has_guards:
            q = self._decide_guards(q)
            node.query = q
        key = q.key
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            node.kind, node.value, node.children = hit.kind, hit.value, hit.children
            node.groups, node.separators, node.note = hit.groups, hit.separators, "cached"
            assert hit.value is not None
            return hit.value
        value = self._steps(q, depth, node)
        node.value = value
        with self._lock:
            self._memo[key] = node
        return value

    def _steps(self, q: CnfQuery, depth: int, node: EvalTrace) -> Fraction:
        if q.is_true or q.is_false:
            node.kind = TraceKind.CONSTANT
            return ONE if q.is_true else ZERO
        # Step 0
        if len(q) == 1:
            (c,) = q.clauses
            if len(c) == 1 and c.is_ground:
                (literal,) = c.literals
                node.kind = TraceKind.GROUND_LITERAL
                p = self.db.atom_probability(literal.atom)
                return p if literal.positive else ONE - p
        # Steps 1-3
        union = union_cnf_rewrite(q, self.settings)
        if union is not None:
            logger.debug("union of {} disjuncts for {}", len(union), q)
            return self._union(list(union), depth, node)
        # Steps 4/5
        parts = [CnfQuery(frozenset([c])) for c in q.sorted_clauses]
        split = independent_partition(parts)
        if split is not None:
            node.kind = TraceKind.DECOMPOSABLE_CONJUNCTION
            left, right = split
            return self._child(node, left, depth) * self._child(node, right, depth)
        # Step 6
        separator = find_separator(q)
        if separator is not None:
            return self._universal(q, separator, depth, node)
        # Step 7
        if not self.symbolic:
            expanded = closed_world_expand(q, self.db, self.settings)
            if expanded is not None:
                node.kind = TraceKind.CLOSED_WORLD
                return self._child(node, expanded, depth)
        raise self._fail(node, q, "no step applies")

    def _union(self, disjuncts: list[CnfQuery], depth: int, node: EvalTrace) -> Fraction:
        if len(disjuncts) == 1:
            return self._child(node, disjuncts[0], depth)
        blocks = _symbol_blocks(disjuncts)
        if len(blocks) > 1:
            node.kind = TraceKind.DECOMPOSABLE_DISJUNCTION
            miss = ONE
            for block in blocks:
                members = [disjuncts[i] for i in block]
                if len(members) == 1:
                    p = self._child(node, members[0], depth)
                else:
                    sub = EvalTrace(TraceKind.FAIL, UnionCnf(tuple(members)))
                    node.children.append(sub)
                    p = self._union(members, depth + 1, sub)
                    sub.value = p
                miss *= ONE - p
            return ONE - miss
        groups = group_ie_terms(disjuncts, self.settings, keep_cancelled=True)
        node.kind = TraceKind.INCLUSION_EXCLUSION
        node.groups = [(g.representative, g.net_coefficient) for g in groups]
        live = [g for g in groups if g.net_coefficient != 0]
        if len(live) < len(groups):
            logger.debug("{} inclusion/exclusion group(s) cancelled", len(groups) - len(live))
        values = self._children(
            node, [(g.representative, g.net_coefficient) for g in live], depth
        )
        return sum((g.net_coefficient * v for g, v in zip(live, values)), ZERO)

    def _children(
        self, node: EvalTrace, items: list[tuple[CnfQuery, int | None]], depth: int
    ) -> list[Fraction]:
        if depth > 0 or self.settings.workers <= 0 or len(items) < 2:
            return [self._child(node, q, depth, coefficient) for q, coefficient in items]
        nodes = [EvalTrace(TraceKind.FAIL, q, coefficient) for q, coefficient in items]
        node.children.extend(nodes)
        with ThreadGroup(max_workers=self.settings.workers) as tg:
            for (q, _), child in zip(items, nodes):
                tg.soonify(self._eval)(q, depth + 1, child)
        for result in tg.results:
            if isinstance(result, BaseException):
                raise result
        return list(tg.results)

    def _universal(self, q: CnfQuery, separator: dict[Clause, Var], depth: int, node: EvalTrace) -> Fraction:
        node.kind = TraceKind.DECOMPOSABLE_UNIVERSAL
        node.separators = [(str(c), v.name) for c, v in separator.items()]
        domain = self.db.domain
        constants = list(domain.constants)
        if self.symbolic and not q.has_guards:
            constants = constants[:1]
        items: list[tuple[CnfQuery, int | None]] = []
        for a in constants:
            clauses = [specialize(c.substitute({v: Const(a)}), domain) for c, v in separator.items()]
            items.append((CnfQuery.of(clauses), None))
        values = self._children(node, items, depth)
        if len(values) < len(domain):
            # the representative stands for every constant of a symmetric database
            return values[0] ** len(domain)
        return prod(values, start=ONE)


def evaluate(
    q: CnfQuery, db: Pdb, settings: Settings | None = None, symbolic: bool = False
) -> EvalResult:
    """Run the lifted recursion; ``q`` should already be shattered and ranked."""
    return Engine(db, settings, symbolic).evaluate(q)


def probability(q: CnfQuery, db: Pdb, settings: Settings | None = None) -> Fraction:
    result = evaluate(q, db, settings)
    if isinstance(result, Fail):
        raise LiftFailure(result.stuck)
    return result.prob


def _query_text(q: CnfQuery | UnionCnf) -> str:
    return str(q)


def render_trace(trace: EvalTrace, indent: str = "  ") -> str:
    """Indented, human-readable trace."""
    lines: list[str] = []

    def visit(node: EvalTrace, level: int) -> None:
        pad = indent * level
        coefficient = "" if node.coefficient is None else f"[{node.coefficient:+d}] "
        value = "" if node.value is None else f" = {node.value}"
        lines.append(f"{pad}{coefficient}{node.kind.value}{value}: {_query_text(node.query)}")
        if node.note and node.kind is TraceKind.FAIL:
            lines.append(f"{pad}{indent}! {node.note}")
        for rep, coefficient in node.groups:
            if coefficient == 0:
                lines.append(f"{pad}{indent}[0] cancelled: {rep}")
        for child in node.children:
            visit(child, level + 1)

    visit(trace, 0)
    return "\n".join(lines)


def trace_lines(trace: EvalTrace) -> list[str]:
    """One tab-separated line per node: depth, kind, coefficient, query."""
    lines: list[str] = []

    def visit(node: EvalTrace, level: int) -> None:
        coefficient = "" if node.coefficient is None else str(node.coefficient)
        lines.append(f"{level}\t{node.kind.value}\t{coefficient}\t{_query_text(node.query)}")
        for rep, c in node.groups:
            if c == 0:
                lines.append(f"{level + 1}\tCancelled\t0\t{rep}")
        for child in node.children:
            visit(child, level + 1)

    visit(trace, 0)
    return lines


def trace_to_dict(trace: EvalTrace) -> dict[str, Any]:
    data: dict[str, Any] = {"kind": trace.kind.value, "query": _query_text(trace.query)}
    if trace.coefficient is not None:
        data["coefficient"] = trace.coefficient
    if trace.value is not None:
        data["value"] = {"numerator": str(trace.value.numerator), "denominator": str(trace.value.denominator)}
    if trace.groups:
        data["groups"] = [{"query": str(rep), "coefficient": c} for rep, c in trace.groups]
    if trace.separators:
        data["separators"] = [{"clause": c, "variable": v} for c, v in trace.separators]
    if trace.note:
        data["note"] = trace.note
    data["children"] = [trace_to_dict(child) for child in trace.children]
    return data


__all__ = (
    "Engine",
    "EvalResult",
    "EvalTrace",
    "Fail",
    "IeTermGroup",
    "Success",
    "TraceKind",
    "closed_world_expand",
    "evaluate",
    "group_ie_terms",
    "independent_partition",
    "listed_support",
    "mobius_coefficients",
    "probability",
    "render_trace",
    "trace_lines",
    "trace_to_dict",
    "union_cnf_rewrite",
)
