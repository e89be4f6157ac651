"""First-order CNF over relational vocabularies.

Queries are conjunctions of universally quantified clauses. Variables are
scoped per clause, so two clauses may reuse the name ``x`` without sharing it.

Besides relation symbols the clause language knows two deterministic guard
predicates, both interpreted by the domain rather than by the database:

* the order guard ``x < y`` (binary), true iff x precedes y in the domain order;
* the membership guard ``x in {A,B}`` (unary), true iff x is one of the listed
  constants.

A negative guard restricts where a clause applies: ``(x >= y | R(x,y))`` only
constrains pairs with x < y.
"""

from __future__ import annotations

import enum
import itertools
import re
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import networkx as nx

from .exceptions import ArityMismatch, ParamsError, UndeclaredConstant

ORDER = "<"
IN_PREFIX = "in{"
_BARE_CONSTANT = re.compile(r"^[A-Z][\w@#:~']*$")


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Const:
    name: str

    def __str__(self) -> str:
        if _BARE_CONSTANT.match(self.name):
            return self.name
        return f"'{self.name}'"


Term = Union[Var, Const]


def term_key(term: Term) -> tuple[int, str]:
    return (0, term.name) if isinstance(term, Var) else (1, term.name)


class Side(str, enum.Enum):
    """Symbol kinds of two-variable queries: R(x), S(x,y), T(y)."""

    LEFT = "left"
    RIGHT = "right"
    BINARY = "binary"
    OTHER = "other"


@dataclass(frozen=True)
class Predicate:
    """A relation symbol.

    :param side: optional kind annotation, ignored by equality.
    :param origin: for slices created during evaluation, the predicate they were
        cut from and the pattern of fixed positions (``None`` marks a free
        position). Ignored by equality; the database resolves it lazily.
    """

    name: str
    arity: int
    side: Optional[Side] = field(default=None, compare=False)
    origin: Optional[tuple[Predicate, tuple[Optional[Const], ...]]] = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        if self.arity < 0:
            raise ParamsError(f"negative arity for {self.name}")
        if self.side in (Side.LEFT, Side.RIGHT) and self.arity != 1:
            raise ArityMismatch(f"{self.name}/{self.arity} cannot be a {self.side.value} unary")
        if self.side is Side.BINARY and self.arity != 2:
            raise ArityMismatch(f"{self.name}/{self.arity} cannot be binary")

    @property
    def is_order(self) -> bool:
        return self.name == ORDER

    @property
    def is_membership(self) -> bool:
        return self.name.startswith(IN_PREFIX)

    @property
    def is_guard(self) -> bool:
        return self.is_order or self.is_membership

    @cached_property
    def members(self) -> frozenset[str]:
        if not self.is_membership:
            return frozenset()
        inner = self.name[len(IN_PREFIX) : -1]
        return frozenset(i for i in inner.split(",") if i)

    def with_side(self, side: Side | None) -> Predicate:
        return Predicate(self.name, self.arity, side, self.origin)

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"


ORDER_GUARD = Predicate(ORDER, 2)


def membership_guard(members: Iterable[str]) -> Predicate:
    return Predicate(IN_PREFIX + ",".join(sorted(set(members))) + "}", 1)


@dataclass(frozen=True)
class Atom:
    predicate: Predicate
    args: tuple[Term, ...] = ()

    def __post_init__(self) -> None:
        if len(self.args) != self.predicate.arity:
            raise ArityMismatch(
                f"{self.predicate.name} expects {self.predicate.arity} arguments, got {len(self.args)}"
            )

    @property
    def variables(self) -> tuple[Var, ...]:
        return tuple(t for t in self.args if isinstance(t, Var))

    @property
    def is_ground(self) -> bool:
        return all(isinstance(t, Const) for t in self.args)

    def substitute(self, mapping: Mapping[Var, Term]) -> Atom:
        if not mapping:
            return self
        args = tuple(mapping.get(t, t) if isinstance(t, Var) else t for t in self.args)
        return Atom(self.predicate, args)

    def __str__(self) -> str:
        if not self.args:
            return self.predicate.name
        return f"{self.predicate.name}({','.join(map(str, self.args))})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    @property
    def predicate(self) -> Predicate:
        return self.atom.predicate

    @property
    def args(self) -> tuple[Term, ...]:
        return self.atom.args

    @property
    def is_guard(self) -> bool:
        return self.atom.predicate.is_guard

    def negate(self) -> Literal:
        return Literal(self.atom, not self.positive)

    def substitute(self, mapping: Mapping[Var, Term]) -> Literal:
        return Literal(self.atom.substitute(mapping), self.positive)

    def sort_key(self) -> tuple:
        return (
            self.is_guard,
            self.predicate.name,
            self.predicate.arity,
            tuple(term_key(t) for t in self.args),
            not self.positive,
        )

    def __str__(self) -> str:
        pred = self.predicate
        if pred.is_order:
            op = "<" if self.positive else ">="
            return f"{self.args[0]} {op} {self.args[1]}"
        if pred.is_membership:
            op = "in" if self.positive else "notin"
            members = ",".join(str(Const(m)) for m in sorted(pred.members))
            return f"{self.args[0]} {op} {{{members}}}"
        return ("" if self.positive else "!") + str(self.atom)


def atom(name: str, *args: Term | str) -> Atom:
    """Shorthand used by tests and builders: lowercase strings are variables."""
    terms = tuple(
        a if isinstance(a, (Var, Const)) else (Var(a) if a[:1].islower() else Const(a))
        for a in args
    )
    return Atom(Predicate(name, len(terms)), terms)


def lit(name: str, *args: Term | str, positive: bool = True) -> Literal:
    return Literal(atom(name, *args), positive)


def order_literal(left: Term, right: Term, positive: bool = True) -> Literal:
    return Literal(Atom(ORDER_GUARD, (left, right)), positive)


def membership_literal(term: Term, members: Iterable[str], positive: bool = True) -> Literal:
    return Literal(Atom(membership_guard(members), (term,)), positive)


def guard_value(literal: Literal, domain: Domain | None = None) -> bool | None:
    """Truth value of a guard literal when it is decided without a model."""
    pred = literal.predicate
    args = literal.args
    value: bool | None = None
    if pred.is_order:
        left, right = args
        if left == right:
            value = False
        elif domain is not None and isinstance(left, Const) and isinstance(right, Const):
            value = domain.index(left.name) < domain.index(right.name)
    elif pred.is_membership:
        if not pred.members:
            value = False
        elif isinstance(args[0], Const):
            value = args[0].name in pred.members
    if value is None:
        return None
    return value if literal.positive else not value


@dataclass(frozen=True)
class Domain:
    """Ordered list of constants; the order interprets ``<`` guards."""

    constants: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.constants)) != len(self.constants):
            raise ParamsError(f"duplicate constants in domain: {self.constants}")

    @classmethod
    def sized(cls, n: int, prefix: str = "c") -> Domain:
        return cls(tuple(f"{prefix}{i}" for i in range(1, n + 1)))

    @cached_property
    def _positions(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.constants)}

    def index(self, constant: str) -> int:
        try:
            return self._positions[constant]
        except KeyError:
            raise UndeclaredConstant(f"{constant!r} is not in the domain") from None

    def after(self, constant: str) -> frozenset[str]:
        return frozenset(self.constants[self.index(constant) + 1 :])

    def before(self, constant: str) -> frozenset[str]:
        return frozenset(self.constants[: self.index(constant)])

    def __contains__(self, constant: object) -> bool:
        return constant in self._positions

    def __iter__(self) -> Iterator[str]:
        return iter(self.constants)

    def __len__(self) -> int:
        return len(self.constants)


def _simplify(literals: Iterable[Literal], domain: Domain | None) -> frozenset[Literal] | None:
    """Drop false guards; ``None`` signals a tautology."""
    kept: set[Literal] = set()
    for literal in literals:
        if literal.is_guard:
            value = guard_value(literal, domain)
            if value is True:
                return None
            if value is False:
                continue
        if literal.negate() in kept:
            return None
        kept.add(literal)
    return frozenset(kept)


@dataclass(frozen=True)
class Clause:
    literals: frozenset[Literal]
    tautology: bool = False

    @classmethod
    def of(cls, literals: Iterable[Literal], domain: Domain | None = None) -> Clause:
        simplified = _simplify(literals, domain)
        if simplified is None:
            return TAUTOLOGY
        return cls(simplified)

    @cached_property
    def variables(self) -> frozenset[Var]:
        return frozenset(v for literal in self.literals for v in literal.atom.variables)

    @cached_property
    def relation_literals(self) -> tuple[Literal, ...]:
        return tuple(i for i in self.sorted_literals if not i.is_guard)

    @cached_property
    def guard_literals(self) -> tuple[Literal, ...]:
        return tuple(i for i in self.sorted_literals if i.is_guard)

    @cached_property
    def sorted_literals(self) -> tuple[Literal, ...]:
        return tuple(sorted(self.literals, key=Literal.sort_key))

    @property
    def is_empty(self) -> bool:
        return not self.literals and not self.tautology

    @property
    def is_ground(self) -> bool:
        return not self.variables

    @cached_property
    def key(self) -> str:
        """Canonical text, invariant under renaming of variables."""
        if self.tautology:
            return "TAUTOLOGY"
        ordered = sorted(self.variables, key=self._signature)
        groups = [list(g) for _, g in itertools.groupby(ordered, key=self._signature)]
        best: str | None = None
        for choice in itertools.product(*(itertools.permutations(g) for g in groups)):
            flat = [v for g in choice for v in g]
            mapping = {v: Var(f"_{i}") for i, v in enumerate(flat)}
            text = " | ".join(sorted(str(i.substitute(mapping)) for i in self.literals))
            if best is None or text < best:
                best = text
        return best or ""

    def _signature(self, var: Var) -> str:
        marks = sorted(
            f"{'+' if i.positive else '-'}{i.predicate.name}/{pos}"
            for i in self.literals
            for pos, t in enumerate(i.args)
            if t == var
        )
        return ";".join(marks)

    def substitute(self, mapping: Mapping[Var, Term], domain: Domain | None = None) -> Clause:
        if self.tautology:
            return self
        return Clause.of((i.substitute(mapping) for i in self.literals), domain)

    def __str__(self) -> str:
        if self.tautology:
            return "TRUE"
        return "(" + " | ".join(map(str, self.sorted_literals)) + ")"

    def __len__(self) -> int:
        return len(self.literals)


TAUTOLOGY = Clause(frozenset(), tautology=True)
EMPTY_CLAUSE = Clause(frozenset())


def clause(*literals: Literal) -> Clause:
    return Clause.of(literals)


def match_args(
    pattern: Sequence[Term], target: Sequence[Term], theta: dict[Var, Term]
) -> dict[Var, Term] | None:
    """One-way matching of pattern variables onto target terms, extending theta."""
    result = dict(theta)
    for p, t in zip(pattern, target):
        if isinstance(p, Var):
            bound = result.get(p)
            if bound is None:
                result[p] = t
            elif bound != t:
                return None
        elif p != t:
            return None
    return result


def _literal_implies(a: Literal, b: Literal, theta: dict[Var, Term]) -> dict[Var, Term] | None:
    pa, pb = a.predicate, b.predicate
    if a.positive != b.positive:
        return None
    if pa.is_membership and pb.is_membership:
        wider = pa.members <= pb.members if a.positive else pb.members <= pa.members
        return match_args(a.args, b.args, theta) if wider else None
    if pa != pb:
        return None
    return match_args(a.args, b.args, theta)


def subsumes(c: Clause, d: Clause) -> bool:
    """θ-subsumption: some instance of ``c`` entails ``d`` literal by literal."""
    if c.tautology:
        return d.tautology
    if d.tautology:
        return True
    targets = d.sorted_literals
    candidates = []
    for literal in c.sorted_literals:
        options = [t for t in targets if _literal_implies(literal, t, {}) is not None]
        if not options:
            return False
        candidates.append((literal, options))
    candidates.sort(key=lambda item: len(item[1]))

    def search(i: int, theta: dict[Var, Term]) -> bool:
        if i == len(candidates):
            return True
        literal, options = candidates[i]
        for target in options:
            extended = _literal_implies(literal, target, theta)
            if extended is not None and search(i + 1, extended):
                return True
        return False

    return search(0, {})


def _unit_simplify(work: set[Clause]) -> bool:
    units = sorted(
        (c for c in work if len(c.literals) == 1 and not c.sorted_literals[0].is_guard),
        key=lambda c: c.key,
    )
    changed = False
    for unit in units:
        if unit not in work:
            continue
        (u,) = unit.literals
        for other in sorted(work, key=lambda c: c.key):
            if other is unit or other == unit:
                continue
            dead = {
                m
                for m in other.literals
                if not m.is_guard
                and m.positive != u.positive
                and m.predicate == u.predicate
                and match_args(u.args, m.args, {}) is not None
            }
            if dead:
                work.discard(other)
                work.add(Clause.of(other.literals - dead))
                changed = True
    return changed


def normalize(clauses: Iterable[Clause]) -> frozenset[Clause]:
    """Drop tautologies, apply unit resolution, remove subsumed clauses."""
    work = {c for c in clauses if not c.tautology}
    while True:
        if any(c.is_empty for c in work):
            return frozenset([EMPTY_CLAUSE])
        changed = _unit_simplify(work)
        if any(c.is_empty for c in work):
            return frozenset([EMPTY_CLAUSE])
        kept: list[Clause] = []
        for c in sorted(work, key=lambda c: (len(c), c.key, str(c))):
            if not any(subsumes(k, c) for k in kept):
                kept.append(c)
        if len(kept) != len(work):
            changed = True
        work = set(kept)
        if not changed:
            return frozenset(work)


@dataclass(frozen=True)
class CnfQuery:
    clauses: frozenset[Clause]

    @classmethod
    def of(cls, clauses: Iterable[Clause]) -> CnfQuery:
        return cls(normalize(clauses))

    @property
    def is_true(self) -> bool:
        return not self.clauses

    @property
    def is_false(self) -> bool:
        return EMPTY_CLAUSE in self.clauses

    @cached_property
    def key(self) -> tuple[str, ...]:
        return tuple(sorted(c.key for c in self.clauses))

    @cached_property
    def sorted_clauses(self) -> tuple[Clause, ...]:
        return tuple(sorted(self.clauses, key=lambda c: (c.key, str(c))))

    @cached_property
    def relation_symbols(self) -> frozenset[Predicate]:
        return relation_symbols(self)

    @property
    def has_guards(self) -> bool:
        return any(c.guard_literals for c in self.clauses)

    @property
    def has_constants(self) -> bool:
        return any(
            isinstance(t, Const) for c in self.clauses for i in c.relation_literals for t in i.args
        )

    @property
    def max_arity(self) -> int:
        return max((p.arity for p in self.relation_symbols), default=0)

    def conjoin(self, *others: CnfQuery | Clause) -> CnfQuery:
        clauses = set(self.clauses)
        for other in others:
            if isinstance(other, Clause):
                clauses.add(other)
            else:
                clauses |= other.clauses
        return CnfQuery.of(clauses)

    def __str__(self) -> str:
        if self.is_true:
            return "TRUE"
        if self.is_false:
            return "FALSE"
        return " & ".join(map(str, self.sorted_clauses))

    def __len__(self) -> int:
        return len(self.clauses)


TRUE = CnfQuery(frozenset())
FALSE = CnfQuery(frozenset([EMPTY_CLAUSE]))


def query(*clauses: Clause) -> CnfQuery:
    return CnfQuery.of(clauses)


@dataclass(frozen=True)
class UnionCnf:
    disjuncts: tuple[CnfQuery, ...]

    def __post_init__(self) -> None:
        if not self.disjuncts:
            raise ParamsError("a union needs at least one disjunct")

    def __len__(self) -> int:
        return len(self.disjuncts)

    def __iter__(self) -> Iterator[CnfQuery]:
        return iter(self.disjuncts)

    def __str__(self) -> str:
        return " OR ".join(f"[{d}]" for d in self.disjuncts)


def substitute(c: Clause, var: Var, constant: Const, domain: Domain | None = None) -> Clause:
    return c.substitute({var: constant}, domain)


def connected_components(c: Clause) -> list[Clause]:
    """Split a clause into variable-connected groups of literals."""
    if c.tautology or not c.literals:
        return [c]
    graph = nx.Graph()
    literals = c.sorted_literals
    graph.add_nodes_from(range(len(literals)))
    by_var: dict[Var, list[int]] = {}
    for i, literal in enumerate(literals):
        for v in literal.atom.variables:
            by_var.setdefault(v, []).append(i)
    for members in by_var.values():
        graph.add_edges_from(zip(members, members[1:]))
    parts = [Clause(frozenset(literals[i] for i in comp)) for comp in nx.connected_components(graph)]
    return sorted(parts, key=lambda p: (str(p), p.key))


def is_disconnected(c: Clause) -> bool:
    return len(connected_components(c)) > 1


def relation_symbols(q: CnfQuery | Clause | Iterable[Clause]) -> frozenset[Predicate]:
    if isinstance(q, Clause):
        clauses: Iterable[Clause] = (q,)
    elif isinstance(q, CnfQuery):
        clauses = q.clauses
    else:
        clauses = q
    return frozenset(i.predicate for c in clauses for i in c.relation_literals)


def _positions(literal: Literal, var: Var) -> frozenset[int]:
    return frozenset(i for i, t in enumerate(literal.args) if t == var)


def find_separator(q: CnfQuery) -> dict[Clause, Var] | None:
    """One variable per clause occurring in every relation atom of its clause,
    with atoms of the same relation agreeing on a shared separator position.

    The first valid assignment in clause order, then variable name, wins.
    """
    clauses = q.sorted_clauses
    if not clauses:
        return None
    options: list[list[Var]] = []
    for c in clauses:
        atoms = c.relation_literals
        if not atoms:
            return None
        common = set(c.variables)
        for literal in atoms:
            common &= set(literal.atom.variables)
        if not common:
            return None
        options.append(sorted(common))

    def search(i: int, allowed: dict[Predicate, frozenset[int]]) -> list[Var] | None:
        if i == len(clauses):
            return []
        for var in options[i]:
            narrowed = dict(allowed)
            for literal in clauses[i].relation_literals:
                positions = _positions(literal, var)
                current = narrowed.get(literal.predicate)
                positions = positions if current is None else current & positions
                if not positions:
                    break
                narrowed[literal.predicate] = positions
            else:
                rest = search(i + 1, narrowed)
                if rest is not None:
                    return [var, *rest]
        return None

    found = search(0, {})
    if found is None:
        return None
    return dict(zip(clauses, found))


def verify_separator(q: CnfQuery, separator: Mapping[Clause, Var]) -> bool:
    if set(separator) != set(q.clauses):
        return False
    allowed: dict[Predicate, frozenset[int]] = {}
    for c, var in separator.items():
        for literal in c.relation_literals:
            positions = _positions(literal, var)
            if not positions:
                return False
            allowed[literal.predicate] = allowed.get(literal.predicate, positions) & positions
            if not allowed[literal.predicate]:
                return False
    return True


def assign_symbol(q: CnfQuery, predicate: Predicate, value: bool) -> CnfQuery:
    """Rewrite ``q`` with every atom of ``predicate`` fixed to ``value``."""
    clauses = []
    for c in q.clauses:
        kept = []
        satisfied = False
        for literal in c.literals:
            if literal.predicate == predicate and not literal.is_guard:
                if literal.positive == value:
                    satisfied = True
                    break
                continue
            kept.append(literal)
        if not satisfied:
            clauses.append(Clause.of(kept))
    return CnfQuery.of(clauses)


def standardize_apart(c: Clause, suffix: str) -> Clause:
    return c.substitute({v: Var(f"{v.name}{suffix}") for v in c.variables})


def rename_predicates(q: CnfQuery, mapping: Mapping[str, Predicate]) -> CnfQuery:
    clauses = []
    for c in q.clauses:
        literals = []
        for literal in c.literals:
            target = mapping.get(literal.predicate.name)
            if target is not None and not literal.is_guard:
                literal = Literal(Atom(target, literal.args), literal.positive)
            literals.append(literal)
        clauses.append(Clause.of(literals))
    return CnfQuery.of(clauses)
