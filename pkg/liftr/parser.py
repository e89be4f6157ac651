"""Text formats for queries and probabilistic databases.

Query files::

    # Prof/Advises/Student, entered as a DNF and negated on load
    mode: dnf
    side Prof left
    Prof(x) & Advises(x,y) & Student(y)

CNF (the default mode) separates clauses by ``&`` or newlines and literals by
``|``. Variables start lowercase; constants are capitalized or quoted. Guards are
written ``x < y``, ``x >= y``, ``x in {A,B}`` and ``x notin {A,B}``.

Database files::

    domain = Anne, Bob, Charlie      # or: domain size 5  (c1..c5)
    pred Advises/2
    default Advises = 0
    sym Friend = 1/2
    Advises(Anne,Bob) = 0.7
"""

from __future__ import annotations

import re
from collections.abc import Iterator
from dataclasses import dataclass, field
from fractions import Fraction

from loguru import logger

from .exceptions import ArityMismatch, ParseError, UndeclaredConstant
from .logic import (
    Atom,
    Clause,
    CnfQuery,
    Const,
    Domain,
    Literal,
    Predicate,
    Side,
    Term,
    Var,
    membership_literal,
    order_literal,
)
from .pdb import Pdb, Relation, check_probability

IDENT = r"[A-Za-z_][\w@#:~']*"
_TOKEN = re.compile(
    rf"""
    (?P<ws>[ \t\r]+)
  | (?P<newline>\n)
  | (?P<quoted>'[^'\n]*')
  | (?P<ident>{IDENT})
  | (?P<op>>=|<|\(|\)|,|\||&|!|~|¬|\{{|\}})
    """,
    re.VERBOSE,
)
_COMMENT = re.compile(r"(^|(?<=\s))#.*$", re.MULTILINE)
_DIRECTIVE = re.compile(r"^\s*(mode\s*:|side\s)", re.IGNORECASE)
_NEGATIONS = ("!", "~", "¬")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def _strip_comments(text: str) -> str:
    return _COMMENT.sub("", text)


def tokenize(text: str, first_line: int = 1) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = first_line, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(line, pos - line_start + 1, "a token")
        kind = m.lastgroup or ""
        if kind == "newline":
            tokens.append(Token("newline", "\n", line, pos - line_start + 1))
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class QuerySource:
    """A parsed query file. ``negated`` is set when the text was a DNF whose
    negation ``query`` holds, so Pr(text) = 1 - Pr(query)."""

    query: CnfQuery
    negated: bool = False
    sides: dict[str, Side] = field(default_factory=dict)


class _QueryParser:
    def __init__(self, tokens: list[Token], dnf: bool) -> None:
        self.tokens = tokens
        self.i = 0
        self.dnf = dnf
        self.depth = 0
        self.arities: dict[str, int] = {}

    @property
    def current(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        token = self.tokens[self.i]
        self.i += 1
        return token

    def skip_newlines(self) -> None:
        while self.current.kind == "newline":
            self.i += 1

    def expect(self, text: str) -> Token:
        self.skip_inner_newlines()
        token = self.current
        if token.text != text:
            raise ParseError(token.line, token.col, repr(text))
        return self.advance()

    def skip_inner_newlines(self) -> None:
        if self.depth > 0:
            self.skip_newlines()

    def fail(self, expected: str) -> ParseError:
        return ParseError(self.current.line, self.current.col, expected)

    def items(self) -> list[list[Literal]]:
        """Top-level items: CNF clauses, or DNF conjunctive terms."""
        outer = "|" if self.dnf else "&"
        inner = "&" if self.dnf else "|"
        items: list[list[Literal]] = []
        self.skip_newlines()
        while self.current.kind != "eof":
            items.append(self.group(inner))
            if self.current.text == outer or self.current.kind == "newline":
                self.advance()
                self.skip_newlines()
            elif self.current.kind != "eof":
                raise self.fail(f"{outer!r} or a new line")
        return items

    def group(self, inner: str) -> list[Literal]:
        if self.current.text == "(":
            self.advance()
            self.depth += 1
            self.skip_newlines()
            literals: list[Literal] = []
            if self.current.text != ")":
                literals.append(self.literal())
                self.skip_newlines()
                while self.current.text == inner:
                    self.advance()
                    self.skip_newlines()
                    literals.append(self.literal())
                    self.skip_newlines()
            self.expect(")")
            self.depth -= 1
            return literals
        literals = [self.literal()]
        while self.current.text == inner:
            self.advance()
            literals.append(self.literal())
        return literals

    def term(self) -> Term:
        self.skip_inner_newlines()
        token = self.current
        if token.kind == "quoted":
            self.advance()
            return Const(token.text[1:-1])
        if token.kind == "ident":
            self.advance()
            return Var(token.text) if token.text[0].islower() else Const(token.text)
        raise self.fail("a variable or constant")

    def constant_set(self) -> list[str]:
        self.expect("{")
        members: list[str] = []
        while self.current.text != "}":
            t = self.term()
            if not isinstance(t, Const):
                raise ParseError(self.tokens[self.i - 1].line, self.tokens[self.i - 1].col, "a constant")
            members.append(t.name)
            if self.current.text == ",":
                self.advance()
            elif self.current.text != "}":
                raise self.fail("',' or '}'")
        self.advance()
        return members

    def literal(self) -> Literal:
        positive = True
        while self.current.text in _NEGATIONS:
            self.advance()
            positive = not positive
        token = self.current
        if token.kind == "quoted":
            left = self.term()
            return self.guard(left, positive, token)
        if token.kind != "ident":
            raise self.fail("a literal")
        self.advance()
        follow = self.current
        if follow.text == "(":
            self.advance()
            args: list[Term] = []
            if self.current.text != ")":
                args.append(self.term())
                while self.current.text == ",":
                    self.advance()
                    args.append(self.term())
            self.expect(")")
            return Literal(Atom(self.predicate(token, len(args)), tuple(args)), positive)
        if follow.text in ("<", ">=") or (follow.kind == "ident" and follow.text in ("in", "notin")):
            left: Term = Var(token.text) if token.text[0].islower() else Const(token.text)
            return self.guard(left, positive, token)
        return Literal(Atom(self.predicate(token, 0), ()), positive)

    def guard(self, left: Term, positive: bool, token: Token) -> Literal:
        op = self.advance()
        if op.text in ("<", ">="):
            right = self.term()
            if not (isinstance(left, Var) and isinstance(right, Var)):
                raise ParseError(token.line, token.col, "variables on both sides of an order guard")
            return order_literal(left, right, positive == (op.text == "<"))
        if op.text in ("in", "notin"):
            members = self.constant_set()
            return membership_literal(left, members, positive == (op.text == "in"))
        raise ParseError(op.line, op.col, "'<', '>=', 'in' or 'notin'")

    def predicate(self, token: Token, arity: int) -> Predicate:
        known = self.arities.setdefault(token.text, arity)
        if known != arity:
            raise ArityMismatch(
                f"line {token.line}: {token.text} used with arity {arity} and {known}"
            )
        return Predicate(token.text, arity)


def _split_directives(text: str) -> tuple[str, bool | None, dict[str, Side]]:
    mode: bool | None = None
    sides: dict[str, Side] = {}
    body: list[str] = []
    for number, raw in enumerate(_strip_comments(text).split("\n"), start=1):
        if not _DIRECTIVE.match(raw):
            body.append(raw)
            continue
        body.append("")
        words = raw.replace(":", " ").split()
        if words[0].lower() == "mode":
            if len(words) != 2 or words[1].lower() not in ("dnf", "cnf"):
                raise ParseError(number, 1, "'mode: dnf' or 'mode: cnf'")
            mode = words[1].lower() == "dnf"
        else:
            if len(words) != 3:
                raise ParseError(number, 1, "'side <Predicate> left|right|binary'")
            try:
                sides[words[1]] = Side(words[2].lower())
            except ValueError:
                raise ParseError(number, raw.index(words[2]) + 1, "left, right, binary or other") from None
    return "\n".join(body), mode, sides


def _apply_sides(literals: list[Literal], sides: dict[str, Side]) -> list[Literal]:
    if not sides:
        return literals
    out = []
    for literal in literals:
        side = sides.get(literal.predicate.name)
        if side is not None and not literal.is_guard:
            literal = Literal(Atom(literal.predicate.with_side(side), literal.args), literal.positive)
        out.append(literal)
    return out


def load_query(text: str, dnf: bool = False) -> QuerySource:
    """Parse a query file, honouring ``mode:`` and ``side`` directives."""
    body, mode, sides = _split_directives(text)
    if mode is not None:
        dnf = mode
    parser = _QueryParser(tokenize(body), dnf)
    items = [_apply_sides(i, sides) for i in parser.items()]
    if dnf:
        # not (exists t1 or t2 ...) == forall (not t1) and (not t2) ...
        clauses = [Clause.of(literal.negate() for literal in term) for term in items]
    else:
        clauses = [Clause.of(c) for c in items]
    q = CnfQuery.of(clauses)
    logger.debug("parsed {} clause(s), dnf={}: {}", len(q), dnf, q)
    return QuerySource(q, negated=dnf, sides=sides)


def parse_query(text: str, dnf: bool = False) -> CnfQuery:
    return load_query(text, dnf).query


def serialize_query(q: CnfQuery) -> str:
    sides = sorted(
        {
            (i.predicate.name, i.predicate.side.value)
            for c in q.clauses
            for i in c.relation_literals
            if i.predicate.side is not None
        }
    )
    lines = [f"side {name} {side}" for name, side in sides]
    if q.is_false:
        lines.append("()")
    else:
        lines.extend(str(c) for c in q.sorted_clauses)
    return "\n".join(lines) + ("\n" if lines else "")


_NUMBER = r"[+-]?(?:\d+(?:/\d+)?|\d*\.\d+)"
_CONST = rf"(?:{IDENT}|'[^']*')"
_PDB_DOMAIN = re.compile(r"^domain\s*=\s*(?P<items>.*)$")
_PDB_SIZE = re.compile(r"^domain\s+size\s+(?P<n>\d+)$")
_PDB_PRED = re.compile(rf"^pred\s+(?P<name>{IDENT})\s*/\s*(?P<arity>\d+)$")
_PDB_SETTING = re.compile(rf"^(?P<kind>default|sym)\s+(?P<name>{IDENT})\s*=\s*(?P<p>\S+)$")
_PDB_ROW = re.compile(
    rf"^(?P<name>{IDENT})\s*(?:\((?P<args>[^)]*)\))?\s*=\s*(?P<p>\S+)$"
)


def _probability(text: str, line: int, col: int, where: str) -> Fraction:
    if not re.fullmatch(_NUMBER, text):
        raise ParseError(line, col, "a probability such as 7/10 or 0.7")
    return check_probability(Fraction(text), f"line {line}, {where}: ")


def _constant(text: str) -> str:
    text = text.strip()
    return text[1:-1] if text.startswith("'") else text


def parse_pdb(text: str) -> Pdb:
    constants: list[str] | None = None
    arities: dict[str, int] = {}
    defaults: dict[str, Fraction] = {}
    syms: dict[str, Fraction] = {}
    rows: dict[str, dict[tuple[str, ...], Fraction]] = {}
    row_lines: dict[str, int] = {}

    def declare(name: str, arity: int, line: int) -> None:
        known = arities.setdefault(name, arity)
        if known != arity:
            raise ArityMismatch(f"line {line}: {name} declared with arity {known}, used with {arity}")

    for number, raw in enumerate(_strip_comments(text).split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        col = raw.index(line[0]) + 1
        if m := _PDB_SIZE.match(line):
            if constants is not None:
                raise ParseError(number, col, "a single domain declaration")
            constants = list(Domain.sized(int(m["n"])).constants)
        elif m := _PDB_DOMAIN.match(line):
            if constants is not None:
                raise ParseError(number, col, "a single domain declaration")
            items = [i for i in m["items"].split(",") if i.strip()]
            for item in items:
                if not re.fullmatch(_CONST, item.strip()):
                    raise ParseError(number, col + line.index(item.strip()), "a constant name")
            constants = [_constant(i) for i in items]
        elif m := _PDB_PRED.match(line):
            declare(m["name"], int(m["arity"]), number)
        elif m := _PDB_SETTING.match(line):
            value = _probability(m["p"], number, col + m.start("p"), m["name"])
            (defaults if m["kind"] == "default" else syms)[m["name"]] = value
        elif m := _PDB_ROW.match(line):
            raw_args = (m["args"] or "").strip()
            args = tuple(_constant(a) for a in raw_args.split(",")) if raw_args else ()
            declare(m["name"], len(args), number)
            value = _probability(m["p"], number, col + m.start("p"), m["name"])
            rows.setdefault(m["name"], {})[args] = value
            row_lines.setdefault(m["name"], number)
        else:
            raise ParseError(number, col, "a domain, pred, default, sym or tuple line")

    domain = Domain(tuple(constants or ()))
    for name, table in rows.items():
        for args in table:
            for c in args:
                if c not in domain:
                    raise UndeclaredConstant(f"line {row_lines[name]}: {c!r} is not in the domain")
    names = dict.fromkeys([*arities, *defaults, *syms])
    relations = {
        name: Relation(
            name, arities.get(name), rows.get(name, {}), defaults.get(name, Fraction(0)), syms.get(name)
        )
        for name in names
    }
    return Pdb(domain, relations)


def _rows_in_order(relation: Relation, domain: Domain) -> Iterator[tuple[tuple[str, ...], Fraction]]:
    def order(args: tuple[str, ...]) -> tuple[int, ...]:
        return tuple(domain.index(a) if a in domain else len(domain) for a in args)

    for args in sorted(relation.rows, key=order):
        yield args, relation.rows[args]


def serialize_pdb(db: Pdb) -> str:
    constants = db.domain.constants
    if constants and constants == Domain.sized(len(constants)).constants:
        lines = [f"domain size {len(constants)}"]
    else:
        lines = ["domain = " + ", ".join(str(Const(c)) for c in constants)]
    for name in sorted(db.relations):
        relation = db.relations[name]
        if relation.arity is not None:
            lines.append(f"pred {name}/{relation.arity}")
        if relation.default:
            lines.append(f"default {name} = {relation.default}")
        if relation.sym is not None:
            lines.append(f"sym {name} = {relation.sym}")
        for args, value in _rows_in_order(relation, db.domain):
            text = ",".join(str(Const(a)) for a in args)
            lines.append(f"{name}({text}) = {value}" if args else f"{name} = {value}")
    return "\n".join(lines) + "\n"
