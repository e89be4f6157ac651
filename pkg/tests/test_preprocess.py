from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftr.exceptions import ParamsError, UnsupportedArity
from liftr.logic import Predicate
from liftr.oracle import pr_oracle
from liftr.parser import parse_pdb
from liftr.preprocess import is_ranked, prepare, rank, shatter, slice_name, weak_orderings

from .main import RANKING_EXAMPLE, TWEETS, advisors, q, random_pdb

RANKED_EXAMPLE = """
R#12(x,y) | S#12(x,y) | x >= y
!R#12(x,y) | !S#21(x,y) | x >= y
R#11(x) | S#11(x)
!R#11(x) | !S#11(x)
R#21(x,y) | S#21(x,y) | x >= y
!R#21(x,y) | !S#12(x,y) | x >= y
"""
WITH_CONSTANTS = [
    "R(x,'c1') | !R('c1',x)",
    "R('c1') | S(x,y)\n!S(x,'c2') | T(x)",
    "!R(x) | S(x,'c1') | S('c2',x)",
]
UNRANKED = [RANKING_EXAMPLE, "R(x,x) | !S(x,y)", "R(x,y) | !R(y,x)", "R(x,y,z) | !T(z)\nR(x,x,y)"]


def test_weak_orderings():
    assert len(list(weak_orderings("ab"))) == 3
    assert len(list(weak_orderings("abc"))) == 13
    assert list(weak_orderings([])) == [()]


def test_names():
    assert slice_name("R", 1, 2, "A") == "R@A"
    assert slice_name("R", 0, 2, "A") == "R@A:1"


class TestShatter:
    def test_removes_constants(self):
        shattered, db = shatter(q("Advises(Anne,y) | !Student(y)"), advisors())
        assert not shattered.has_constants
        slice_ = db.relation("Advises@Anne:1")
        assert slice_.arity == 1
        assert slice_.rows == {("Bob",): Fraction(7, 10)}
        assert db.probability(Predicate("Advises~Anne:1", 2), ("Anne", "Bob")) == 0
        assert db.probability(Predicate("Advises~Anne:1", 2), ("Bob", "Charlie")) == Fraction(1, 10)

    def test_membership_guards(self):
        shattered, _ = shatter(q("R(x) | !R('c1')"), random_pdb(q("R(x)"), 2))
        assert shattered.has_guards

    @pytest.mark.parametrize("text", WITH_CONSTANTS)
    @pytest.mark.parametrize("seed", range(5))
    def test_preserves_probability(self, text, seed):
        query_ = q(text)
        db = random_pdb(query_, 3, seed)
        assert pr_oracle(*shatter(query_, db)) == pr_oracle(query_, db)

    def test_advisors(self):
        query_ = q("!Prof(Anne) | !Advises(Anne,y) | !Student(y)")
        db = advisors()
        assert pr_oracle(*shatter(query_, db)) == pr_oracle(query_, db)


class TestRank:
    def test_ranking_example(self):
        ranked, db = rank(q(RANKING_EXAMPLE), random_pdb(q(RANKING_EXAMPLE), 2))
        assert ranked == q(RANKED_EXAMPLE)
        assert is_ranked(ranked)
        assert {"R#12", "R#11", "R#21", "S#12", "S#11", "S#21"} <= set(db.relations)
        assert "R" not in db.relations

    def test_derived_rows(self):
        db = parse_pdb("domain size 2\nR(c1,c2) = 1/3\nR(c2,c1) = 1/5\nR(c2,c2) = 1/7")
        _, ranked = rank(q("R(x,y) | !R(y,x)"), db)
        assert ranked.relation("R#12").rows == {("c1", "c2"): Fraction(1, 3)}
        assert ranked.relation("R#21").rows == {("c1", "c2"): Fraction(1, 5)}
        assert ranked.relation("R#11").rows == {("c2",): Fraction(1, 7)}

    def test_is_ranked(self):
        assert is_ranked(q(TWEETS))
        for text in UNRANKED:
            assert not is_ranked(q(text))
        assert not is_ranked(q("R('c1')"))

    @pytest.mark.parametrize("text", UNRANKED)
    @given(seed=st.integers(0, 10**6), size=st.integers(1, 3))
    @settings(max_examples=10, deadline=None)
    def test_preserves_probability(self, text, seed, size):
        query_ = q(text)
        db = random_pdb(query_, size, seed)
        assert pr_oracle(*rank(query_, db)) == pr_oracle(query_, db)

    def test_errors(self):
        with pytest.raises(ParamsError):
            rank(q("R(x,'c1')"), random_pdb(q("R(x,y)"), 2))
        wide = q("R(x,y,z,w) | !R(w,z,y,x)")
        with pytest.raises(UnsupportedArity):
            rank(wide, random_pdb(wide, 1))


@pytest.mark.parametrize("text", [*WITH_CONSTANTS, RANKING_EXAMPLE])
def test_prepare(text):
    query_ = q(text)
    db = random_pdb(query_, 2, seed=7)
    prepared, db2 = prepare(query_, db)
    assert is_ranked(prepared)
    assert pr_oracle(prepared, db2) == pr_oracle(query_, db)
