from fractions import Fraction

import pytest

from liftr.dichotomy import (
    Verdict,
    classify,
    decomposable,
    generic_pdb,
    immediately_unsafe,
    infer_sides,
    is_forbidden,
    is_safe,
    is_type1,
    splittable,
    unsafe_rewrites,
)
from liftr.engine import EvalTrace
from liftr.exceptions import AmbiguousSide, MultipleUnaries
from liftr.logic import Predicate, Side

from .main import H, H1, HARD_CORPUS, QW, TWEETS, TWEETS_Q1, q

SPLITTABLE = "R(x) | S(x,y)\n!S(x,y) | T(y)"
DECOMPOSABLE = "R(x) | S1(x,y)\nS2(x,y) | T(y)"
PATH = "R(x) | S(x,y)\nS(x,y) | U(y,z)\nU(y,z) | T(z)"


@pytest.mark.parametrize("name", sorted(HARD_CORPUS))
def test_hard_corpus(name):
    query_ = q(HARD_CORPUS[name])
    assert is_type1(query_)
    result = classify(query_)
    assert result.verdict is Verdict.HARD_SHARP_P
    assert result.diagnostics is not None
    assert not is_safe(query_)


@pytest.mark.parametrize("text", [TWEETS, TWEETS_Q1, QW, SPLITTABLE])
def test_safe(text):
    result = classify(q(text))
    assert result.verdict is Verdict.SAFE_PTIME
    assert isinstance(result.witness, EvalTrace)
    assert is_safe(q(text))


def test_out_of_fragment():
    path = q(PATH)
    assert not is_type1(path)
    assert classify(path).verdict is Verdict.OUT_OF_FRAGMENT


def test_h1_diagnostics():
    diagnostics = classify(q(H1)).diagnostics
    assert diagnostics.immediately_unsafe
    assert diagnostics.splittable is False
    assert diagnostics.decomposable is False
    assert diagnostics.unsafe_rewrites[0] == ()


class TestSides:
    def test_tweets(self):
        sides = {p.name: s for p, s in infer_sides(q(TWEETS)).items()}
        assert sides == {"Tweets": Side.LEFT, "Follows": Side.BINARY, "Leader": Side.RIGHT}

    def test_variable_names(self):
        sides = infer_sides(q("R(x)\nT(y)"))
        assert sides[Predicate("R", 1)] is Side.LEFT
        assert sides[Predicate("T", 1)] is Side.RIGHT

    def test_annotation_wins(self):
        assert infer_sides(q("R(z)"), {"R": Side.RIGHT}) == {Predicate("R", 1): Side.RIGHT}

    @pytest.mark.parametrize("text", ["R(z)", "R(x) | S(x,y)\nR(y) | S(x,y)"])
    def test_ambiguous(self, text):
        with pytest.raises(AmbiguousSide):
            infer_sides(q(text))
        assert not is_type1(q(text))


@pytest.mark.parametrize(
    "text",
    ["R(x,x)", "R(x,y,z)", "x >= y | S(x,y)", "R(x) | S(x,y) | S(z,y)", "R('c1') | S(x,y)"],
)
def test_not_type1(text):
    assert not is_type1(q(text))


class TestProperties:
    def test_splittable(self):
        assert splittable(q(SPLITTABLE))
        assert not splittable(q(H1))
        assert not splittable(q(H))
        assert not splittable(q("S(x,y)"))

    def test_decomposable(self):
        assert decomposable(q(DECOMPOSABLE))
        assert not decomposable(q(H1))
        assert not immediately_unsafe(q(DECOMPOSABLE))

    def test_immediately_unsafe(self):
        assert immediately_unsafe(q(H1))
        assert immediately_unsafe(q(H))
        assert not immediately_unsafe(q(SPLITTABLE))

    def test_multiple_unaries(self):
        text = "R1(x) | S(x,y)\nR2(x) | S(x,y) | T(y)"
        with pytest.raises(MultipleUnaries):
            splittable(q(text))
        assert not decomposable(q(text))

    def test_unsafe_rewrites(self):
        assert unsafe_rewrites(q(TWEETS)) == []
        found = unsafe_rewrites(q(H1), depth=1)
        assert found[0] == ()

    def test_forbidden(self):
        assert is_forbidden(q(H))
        assert is_forbidden(q(H1))
        assert not is_forbidden(q(TWEETS))


def test_generic_pdb():
    db = generic_pdb(q("R('A') | S(x,y)"), 2)
    assert db.domain.constants == ("A", "c1", "c2")
    assert db.probability(Predicate("S", 2), ("c1", "A")) == Fraction(1, 2)
