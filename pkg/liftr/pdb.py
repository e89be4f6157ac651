from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from .exceptions import ArityMismatch, ProbabilityOutOfRange, UndeclaredConstant, UnknownPredicate
from .logic import Atom, CnfQuery, Const, Domain, Predicate

ZERO = Fraction(0)
ONE = Fraction(1)


def check_probability(value: Fraction, where: str = "") -> Fraction:
    if not ZERO <= value <= ONE:
        raise ProbabilityOutOfRange(f"{where}probability {value} is outside [0, 1]")
    return value


@dataclass(frozen=True)
class Relation:
    """Tuple probabilities of one relation: explicit rows, then the symmetric
    weight, then the default.

    ``arity`` is None for a relation given only a default or symmetric weight;
    it then takes the arity of whichever query atom reads it.
    """

    name: str
    arity: int | None
    rows: Mapping[tuple[str, ...], Fraction] = field(default_factory=dict)
    default: Fraction = ZERO
    sym: Fraction | None = None

    def probability(self, args: tuple[str, ...]) -> Fraction:
        if self.arity is not None and len(args) != self.arity:
            raise ArityMismatch(f"{self.name} expects {self.arity} arguments, got {len(args)}")
        value = self.rows.get(args)
        if value is not None:
            return value
        if self.sym is not None:
            return self.sym
        return self.default


@dataclass(frozen=True)
class Pdb:
    """A tuple-independent probabilistic database over an ordered domain."""

    domain: Domain
    relations: Mapping[str, Relation] = field(default_factory=dict)

    def relation(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise UnknownPredicate(f"{name} is not declared in the database") from None

    def probability(self, predicate: Predicate, args: Iterable[str] = ()) -> Fraction:
        args = tuple(args)
        known = self.relations.get(predicate.name)
        if known is not None:
            return known.probability(args)
        if predicate.origin is not None:
            root, pattern = predicate.origin
            rest = iter(args)
            full = tuple(next(rest) if p is None else p.name for p in pattern)
            return self.probability(root, full)
        return ZERO

    def atom_probability(self, a: Atom) -> Fraction:
        if not a.is_ground:
            raise UndeclaredConstant(f"{a} is not ground")
        return self.probability(a.predicate, (t.name for t in a.args))

    def with_relations(self, relations: Iterable[Relation], drop: Iterable[str] = ()) -> Pdb:
        dropped = set(drop)
        merged = {k: v for k, v in self.relations.items() if k not in dropped}
        merged.update({r.name: r for r in relations})
        return Pdb(self.domain, merged)

    def check(self, q: CnfQuery) -> None:
        """Reject queries whose symbols or constants the database does not know."""
        for c in q.clauses:
            for literal in c.literals:
                for t in literal.args:
                    if isinstance(t, Const) and t.name not in self.domain:
                        raise UndeclaredConstant(f"{t.name!r} in {c} is not in the domain")
                if literal.is_guard:
                    for m in literal.predicate.members:
                        if m not in self.domain:
                            raise UndeclaredConstant(f"{m!r} in {c} is not in the domain")
                    continue
                pred = literal.predicate
                known = self.relations.get(pred.name)
                if known is None:
                    raise UnknownPredicate(f"{pred.name} is used by the query but not declared")
                if known.arity is not None and known.arity != pred.arity:
                    raise ArityMismatch(
                        f"{pred.name} has arity {known.arity} in the database and {pred.arity} in the query"
                    )

    @classmethod
    def symmetric(cls, domain: Domain | int, weights: Mapping[Predicate, Fraction]) -> Pdb:
        if isinstance(domain, int):
            domain = Domain.sized(domain)
        relations = {
            p.name: Relation(p.name, p.arity, sym=check_probability(Fraction(w), f"{p.name}: "))
            for p, w in weights.items()
        }
        return cls(domain, relations)
