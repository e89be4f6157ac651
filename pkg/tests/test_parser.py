from fractions import Fraction

import pytest

from liftr.exceptions import (
    ArityMismatch,
    ParseError,
    ProbabilityOutOfRange,
    UndeclaredConstant,
    UnknownPredicate,
)
from liftr.logic import Predicate, Side, Var, clause, lit, membership_literal, order_literal, query
from liftr.oracle import pr_oracle
from liftr.parser import load_query, parse_pdb, parse_query, serialize_pdb, serialize_query, tokenize
from liftr.reduction import GadgetParams, Pp2Cnf, build_gadget

from .main import ADVISORS_PDB, ADVISORS_QUERY, HARD_CORPUS, QW, SAFE_CORPUS, advisors, q, random_pdb


class TestQuery:
    def test_cnf(self):
        parsed = parse_query("R(x) | !S(x,y)\nS(x,y) | T(y)")
        expected = query(
            clause(lit("R", "x"), lit("S", "x", "y", positive=False)),
            clause(lit("S", "x", "y"), lit("T", "y")),
        )
        assert parsed == expected

    def test_ampersand_and_parentheses(self):
        assert parse_query("(R(x) | S(x,y)) & (S(x,y) | T(y))") == parse_query("R(x) | S(x,y)\nS(x,y) | T(y)")

    def test_clause_spans_lines_inside_parentheses(self):
        assert parse_query("(R(x) |\n S(x,y))") == parse_query("R(x) | S(x,y)")

    def test_negation_symbols(self):
        assert parse_query("~R(x)") == parse_query("!R(x)") == parse_query("¬R(x)")
        assert parse_query("!!R(x)") == parse_query("R(x)")

    def test_comments(self):
        assert parse_query("# header\nR(x)  # trailing\n") == parse_query("R(x)")

    def test_guards(self):
        parsed = parse_query("x >= y | R(x,y)\nz notin {A,B} | T(z)")
        x, y, z = Var("x"), Var("y"), Var("z")
        assert parsed == query(
            clause(order_literal(x, y, positive=False), lit("R", "x", "y")),
            clause(membership_literal(z, ["A", "B"], positive=False), lit("T", "z")),
        )

    def test_constants(self):
        parsed = parse_query("Advises(Anne, 'bob')")
        (c,) = parsed.clauses
        assert str(c) == "(Advises(Anne,'bob'))"
        assert parsed.has_constants

    def test_dnf_mode(self):
        source = load_query(ADVISORS_QUERY)
        assert source.negated
        assert source.query == parse_query("!Prof(x) | !Advises(x,y) | !Student(y)")
        flag = load_query("Prof(x) & Advises(x,y) & Student(y)", dnf=True)
        assert flag.query == source.query and flag.negated
        assert load_query("mode: cnf\nR(x)", dnf=True).negated is False

    def test_dnf_terms(self):
        source = load_query("R(x) & S(x,y) | T(y)", dnf=True)
        assert source.query == parse_query("!R(x) | !S(x,y)\n!T(y)")

    def test_side_directive(self):
        source = load_query("side Prof left\n!Prof(x) | Advises(x,y)")
        assert source.sides == {"Prof": Side.LEFT}
        prof = next(p for p in source.query.relation_symbols if p.name == "Prof")
        assert prof.side is Side.LEFT

    @pytest.mark.parametrize(
        "text,line,col",
        [
            ("R(x) | | S(x)", 1, 8),
            ("R(x\n", 1, 4),
            ("R(x) S(x)", 1, 6),
            ("R(x)\nside R upward", 2, 8),
        ],
    )
    def test_parse_error_position(self, text, line, col):
        with pytest.raises(ParseError) as e:
            parse_query(text)
        assert (e.value.line, e.value.col) == (line, col)

    def test_arity_mismatch(self):
        with pytest.raises(ArityMismatch):
            parse_query("R(x) | R(x,y)")

    def test_serialize(self):
        qw = parse_query(QW)
        assert parse_query(serialize_query(qw)) == qw
        sided = load_query("side R left\nR(x) | x in {A}").query
        text = serialize_query(sided)
        assert text.splitlines()[0] == "side R left"
        assert load_query(text).query == sided

    def test_tokenize(self):
        tokens = tokenize("R(x) | !S\nT")
        assert [t.text for t in tokens] == ["R", "(", "x", ")", "|", "!", "S", "\n", "T", ""]
        assert (tokens[-2].line, tokens[-2].col) == (2, 1)


class TestPdb:
    def test_advisors(self):
        db = advisors()
        assert db.domain.constants == ("Anne", "Bob", "Charlie")
        assert db.probability(Predicate("Advises", 2), ("Anne", "Bob")) == Fraction(7, 10)
        assert db.probability(Predicate("Advises", 2), ("Bob", "Anne")) == 0
        assert db.probability(Predicate("Prof", 1), ("Charlie",)) == Fraction(1, 10)

    def test_defaults_and_symmetric(self):
        db = parse_pdb("domain size 2\npred R/1\npred S/2\ndefault R = 1/4\nsym S = 0.5\nS(c1,c1) = 1")
        assert db.domain.constants == ("c1", "c2")
        assert db.probability(Predicate("R", 1), ("c2",)) == Fraction(1, 4)
        assert db.probability(Predicate("S", 2), ("c1", "c2")) == Fraction(1, 2)
        assert db.probability(Predicate("S", 2), ("c1", "c1")) == 1

    def test_weight_without_declaration(self):
        db = parse_pdb("domain size 2\nsym R = 1/2")
        assert db.relation("R").arity is None
        assert db.probability(Predicate("R", 1), ("c1",)) == Fraction(1, 2)
        db.check(parse_query("R(x)"))
        db.check(parse_query("R(x,y)"))
        assert serialize_pdb(db) == "domain size 2\nsym R = 1/2\n"
        assert pr_oracle(parse_query("R(x)"), db) == Fraction(1, 4)

    def test_round_trip(self):
        db = advisors()
        assert parse_pdb(serialize_pdb(db)) == db
        sized = random_pdb(q("R(x) | S(x,y)"), 2)
        assert serialize_pdb(sized).startswith("domain size 2\n")
        assert parse_pdb(serialize_pdb(sized)) == sized

    def test_numeric_constants_round_trip(self):
        phi = Pp2Cnf.parse(2, "1-2")
        gadget = build_gadget(phi, GadgetParams(Fraction(1, 2), Fraction(1, 3), Fraction(2, 3), Fraction(1, 4)))
        text = serialize_pdb(gadget)
        assert text.startswith("domain = '1', '2'\n")
        assert parse_pdb(text) == gadget

    def test_errors(self):
        with pytest.raises(ProbabilityOutOfRange):
            parse_pdb("domain = A\nR(A) = 3/2")
        with pytest.raises(ParseError):
            parse_pdb("domain = A\nR(A) = often")
        with pytest.raises(UndeclaredConstant):
            parse_pdb("domain = A\nR(B) = 1/2")
        with pytest.raises(ArityMismatch):
            parse_pdb("domain = A\npred R/2\nR(A) = 1/2")
        with pytest.raises(ParseError) as e:
            parse_pdb("domain = A\ndomain size 3")
        assert e.value.line == 2

    def test_check(self):
        db = parse_pdb(ADVISORS_PDB)
        db.check(parse_query("!Prof(x) | !Advises(x,y) | !Student(y)"))
        with pytest.raises(UnknownPredicate):
            db.check(parse_query("Teaches(x)"))
        with pytest.raises(ArityMismatch):
            db.check(parse_query("Prof(x,y)"))
        with pytest.raises(UndeclaredConstant):
            db.check(parse_query("Prof(Dave)"))


@pytest.mark.parametrize(
    "text",
    [
        *SAFE_CORPUS.values(),
        *HARD_CORPUS.values(),
        "!Prof(Anne) | !Advises(Anne,y) | !Student(y)",
        "x >= y | R(x,y)\nx notin {A,B} | S(x)",
        "R('lower case', x)",
    ],
)
def test_serialize_query_round_trip(text):
    parsed = q(text)
    assert parse_query(serialize_query(parsed)) == parsed
