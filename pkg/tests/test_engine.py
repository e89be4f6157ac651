import json
from fractions import Fraction

import pytest

from liftr.engine import (
    Fail,
    Success,
    TraceKind,
    closed_world_expand,
    depth_cap,
    evaluate,
    group_ie_terms,
    independent_partition,
    listed_support,
    mobius_coefficients,
    probability,
    render_trace,
    specialize,
    trace_lines,
    trace_to_dict,
    union_cnf_rewrite,
)
from liftr.exceptions import LiftFailure, ParamsError
from liftr.logic import (
    TAUTOLOGY,
    Const,
    Domain,
    Predicate,
    Var,
    clause,
    lit,
    membership_literal,
    CnfQuery,
    order_literal,
    query,
)
from liftr.oracle import pr_oracle
from liftr.parser import load_query, parse_pdb
from liftr.preprocess import prepare
from liftr.settings import Settings
from liftr.timing import Timer

from .main import (
    ADVISORS_QUERY,
    H3,
    HARD_CORPUS,
    QW,
    RANKING_EXAMPLE,
    SAFE_CORPUS,
    TWEETS,
    TWEETS_Q1,
    TWEETS_Q2,
    advisors,
    q,
    random_pdb,
)


def lifted(text, db, settings=None):
    prepared, db = prepare(q(text), db, settings)
    return evaluate(prepared, db, settings)


@pytest.mark.parametrize("name", sorted(SAFE_CORPUS))
@pytest.mark.parametrize("size", [1, 2])
@pytest.mark.parametrize("seed", range(20))
def test_matches_oracle(name, size, seed):
    text = SAFE_CORPUS[name]
    db = random_pdb(q(text), size, seed)
    result = lifted(text, db)
    assert isinstance(result, Success), render_trace(result.trace)
    assert result.prob == pr_oracle(q(text), db)


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(SAFE_CORPUS))
@pytest.mark.parametrize("seed", range(20))
def test_matches_oracle_size_three(name, seed):
    text = SAFE_CORPUS[name]
    db = random_pdb(q(text), 3, seed, denominator=7)
    result = lifted(text, db)
    assert isinstance(result, Success)
    assert result.prob == pr_oracle(q(text), db)


def test_advisors():
    source = load_query(ADVISORS_QUERY)
    prepared, db = prepare(source.query, advisors())
    result = evaluate(prepared, db)
    assert isinstance(result, Success)
    assert 1 - result.prob == Fraction(63, 200)


@pytest.mark.parametrize("name", sorted(HARD_CORPUS))
def test_hard_queries_fail(name):
    text = HARD_CORPUS[name]
    result = lifted(text, random_pdb(q(text), 2))
    assert isinstance(result, Fail)
    assert result.reason
    assert any(node.kind is TraceKind.FAIL for node in result.trace.walk())
    with pytest.raises(LiftFailure):
        probability(q(text), random_pdb(q(text), 2))


def test_constants_and_single_literal():
    db = parse_pdb("domain = A, B\nR(A) = 3/10")
    result = evaluate(query(clause(lit("R", "A"))), db)
    assert isinstance(result, Success)
    assert result.prob == Fraction(3, 10)
    assert result.trace.kind is TraceKind.GROUND_LITERAL
    assert probability(query(), db) == 1
    assert probability(query(clause()), db) == 0


class TestUnion:
    def test_tweets_rewrite(self):
        union = union_cnf_rewrite(q(TWEETS))
        assert union is not None
        assert {d.key for d in union} == {q(TWEETS_Q1).key, q(TWEETS_Q2).key}

    def test_connected_query_has_none(self):
        assert union_cnf_rewrite(q(H3)) is None
        assert union_cnf_rewrite(q("R(x)")) is None

    def test_disconnected_clause(self):
        union = union_cnf_rewrite(q("R(x) | T(y)"))
        assert union is not None and len(union) == 2

    def test_qw_groups(self):
        union = union_cnf_rewrite(q(QW))
        assert union is not None and len(union) == 3
        groups = group_ie_terms(union)
        assert len(groups) == 5
        assert sum(g.net_coefficient for g in groups) == 1
        everything = group_ie_terms(union, keep_cancelled=True)
        (cancelled,) = [g for g in everything if g.net_coefficient == 0]
        assert cancelled.representative.key == q(H3).key
        assert len(cancelled.members) == 2

    def test_mobius_agrees(self):
        union = union_cnf_rewrite(q(QW))
        assert union is not None
        by_key = {g.representative.key: g.net_coefficient for g in group_ie_terms(union, keep_cancelled=True)}
        assert {rep.key: c for rep, c in mobius_coefficients(union)} == by_key

    @pytest.mark.parametrize("seed", range(3))
    def test_cancelled_terms_are_neutral(self, seed):
        union = union_cnf_rewrite(q(QW))
        assert union is not None
        parts = list(union)
        db = random_pdb(q(QW), 2, seed)

        def conjunction(subset):
            return CnfQuery.of(c for i in subset for c in parts[i].clauses)

        everything = group_ie_terms(union, keep_cancelled=True)
        (cancelled,) = [g for g in everything if g.net_coefficient == 0]
        terms = [(-1) ** (len(s) + 1) * pr_oracle(conjunction(s), db) for s in cancelled.members]
        assert sum(terms) == 0
        live = sum(g.net_coefficient * pr_oracle(g.representative, db) for g in everything if g.net_coefficient)
        assert live == pr_oracle(q(QW), db)

    def test_equivalent_subsets_merge(self):
        # every subset of two or more conjoins to R(x) & S(x)
        groups = group_ie_terms([q("R(x)"), q("S(x)"), q("R(x)\nS(x)")], keep_cancelled=True)
        assert len(groups) == 3
        assert sum(g.net_coefficient for g in groups) == 1

    def test_empty(self):
        with pytest.raises(ParamsError):
            group_ie_terms([])


QW_SYMMETRIC = (
    "domain size 3\npred R/1\npred S1/2\npred S2/2\npred S3/2\npred T/1\n"
    "default R = 1/2\ndefault S1 = 1/3\ndefault S2 = 1/4\ndefault S3 = 2/5\ndefault T = 3/5"
)


class TestQw:
    def check(self, db):
        qw = q(QW)
        result = evaluate(qw, db)
        assert isinstance(result, Success)
        assert [c for node in result.trace.walk() for _, c in node.groups if c == 0]
        assert result.prob == pr_oracle(qw, db)

    def test_size_two(self):
        self.check(random_pdb(q(QW), 2, seed=2, denominator=5))

    @pytest.mark.slow
    def test_size_three(self):
        self.check(parse_pdb(QW_SYMMETRIC))

    def test_trace_mentions_cancelled_group(self):
        result = evaluate(q(QW), random_pdb(q(QW), 1))
        assert "[0] cancelled" in render_trace(result.trace)
        assert any("\tCancelled\t0\t" in line for line in trace_lines(result.trace))


def test_independent_partition():
    parts = [q("R(x) | U(x)"), q("S(x,y) | T(y)"), q("!R(y) | V(y)")]
    left, right = independent_partition(parts)
    assert left.key == q("R(x) | U(x)\n!R(y) | V(y)").key
    assert right.key == q("S(x,y) | T(y)").key
    assert independent_partition(parts[:1]) is None
    assert independent_partition([q("R(x) | U(x)"), q("R(y) | S(y)")]) is None


def test_specialize():
    c1, c2 = Const("c1"), Const("c2")
    c = clause(lit("R", c1, "x"), lit("S", "x", c2, positive=False))
    domain = Domain.sized(3)
    special = specialize(c, domain)
    assert {str(i) for i in special.literals} == {"R@c1:1(x)", "!S@c2(x)"}
    assert not special.is_ground
    guarded = clause(order_literal(c1, Var("x")), lit("R", "x"))
    assert specialize(guarded, domain).literals == {membership_literal(Var("x"), ["c2", "c3"]), lit("R", "x")}
    satisfied = guarded.substitute({Var("x"): c2}, domain)
    assert specialize(satisfied, domain) is TAUTOLOGY


@pytest.mark.parametrize("seed", range(5))
def test_ranked_example_after_substitution(seed):
    db = random_pdb(q(RANKING_EXAMPLE), 2, seed)
    result = lifted(RANKING_EXAMPLE, db)
    assert isinstance(result, Success), render_trace(result.trace)
    assert result.prob == pr_oracle(q(RANKING_EXAMPLE), db)


class TestClosedWorld:
    def test_listed_support(self):
        db = advisors()
        advises = Predicate("Advises", 2)
        assert listed_support(db, advises) == [("Anne", "Bob"), ("Bob", "Charlie")]
        assert listed_support(db, Predicate("Advises@Anne:1", 1)) is None
        full = random_pdb(q("R(x)"), 2)
        assert listed_support(full, Predicate("R", 1)) is None
        assert listed_support(parse_pdb("domain = A, B\npred R/1\ndefault R = 1/2"), Predicate("R", 1)) is None

    def test_expand(self):
        expanded = closed_world_expand(q("!Advises(x,y) | Prof(y)"), advisors())
        assert expanded is not None
        assert not any(c.variables for c in expanded.clauses)
        assert closed_world_expand(q("Advises(x,y) | Prof(y)"), advisors()) is None

    def test_hard_query_on_sparse_database(self):
        h = q(HARD_CORPUS["h"])
        db = parse_pdb("domain size 3\nR(c1) = 1/2\nR(c3) = 1/3\nS(c1,c2) = 1/4\nT(c2) = 2/3\nT(c3) = 1/5")
        result = evaluate(h, db)
        assert isinstance(result, Success)
        assert result.prob == pr_oracle(h, db)
        assert isinstance(evaluate(h, db, symbolic=True), Fail)


def test_workers_give_the_same_value():
    qw = q(QW)
    db = random_pdb(qw, 2, seed=4)
    sequential = evaluate(qw, db)
    threaded = evaluate(qw, db, Settings(workers=3))
    assert isinstance(threaded, Success)
    assert threaded.prob == sequential.prob


def test_symbolic_universal():
    tweets = q(TWEETS)
    db = parse_pdb(
        "domain size 4\npred Tweets/1\npred Follows/2\npred Leader/1\n"
        "default Tweets = 1/2\ndefault Follows = 1/3\ndefault Leader = 1/5"
    )
    assert evaluate(tweets, db, symbolic=True).prob == evaluate(tweets, db).prob


def tweets_db(n):
    return parse_pdb(f"domain size {n}\ndefault Tweets = 1/2\ndefault Follows = 1/3\ndefault Leader = 1/5")


@pytest.mark.slow
def test_tweets_scales():
    costs = []
    for n in (100, 200):
        with Timer(f"tweets n={n}", verbose=False) as timer:
            result = evaluate(q(TWEETS), tweets_db(n))
        assert isinstance(result, Success)
        assert 0 < result.prob < 1
        costs.append(timer.elapsed)
    # quadratic growth gives about 4x
    assert costs[1] <= 6 * costs[0]


def test_depth_cap():
    assert depth_cap(q(TWEETS), 3) > depth_cap(q(TWEETS), 2)


class TestRender:
    def test_text_and_lines(self):
        prepared, db = prepare(load_query(ADVISORS_QUERY).query, advisors())
        result = evaluate(prepared, db)
        text = render_trace(result.trace)
        assert text.splitlines()[0].startswith(result.trace.kind.value)
        assert TraceKind.CLOSED_WORLD.value in text
        lines = trace_lines(result.trace)
        assert lines[0].startswith("0\t")
        assert len(lines) >= len(result.trace.walk())

    def test_dict_is_json(self):
        result = evaluate(q(TWEETS), random_pdb(q(TWEETS), 2))
        data = json.loads(json.dumps(trace_to_dict(result.trace)))
        assert data["kind"] == TraceKind.INCLUSION_EXCLUSION.value
        assert data["children"]
        value = result.prob
        assert data["value"] == {"numerator": str(value.numerator), "denominator": str(value.denominator)}

    def test_failure_note(self):
        result = evaluate(q(HARD_CORPUS["h"]), random_pdb(q(HARD_CORPUS["h"]), 1))
        assert "! " in render_trace(result.trace)

    @pytest.mark.parametrize("text", [QW, TWEETS, RANKING_EXAMPLE])
    def test_trace_is_deterministic(self, text):
        db = random_pdb(q(text), 2, seed=4)
        first = render_trace(lifted(text, db).trace)
        assert render_trace(lifted(text, db).trace) == first
        assert trace_lines(lifted(text, db).trace) == trace_lines(lifted(text, db).trace)
