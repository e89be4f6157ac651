import threading

import pytest

from liftr.exceptions import LiftFailure, ParamsError
from liftr.oracle import pr_oracle
from liftr.tasks import ThreadGroup

from .main import QW, TWEETS, q, random_pdb

BRANCHES = [(TWEETS, 2, 0), (QW, 2, 1), (TWEETS, 1, 2), (QW, 1, 3)]


def branch_values():
    return [pr_oracle(q(text), random_pdb(q(text), size, seed)) for text, size, seed in BRANCHES]


@pytest.mark.parametrize("max_workers", [1, 4, None])
def test_results_in_submission_order(max_workers):
    with ThreadGroup(max_workers=max_workers) as tg:
        for text, size, seed in BRANCHES:
            tg.soonify(pr_oracle)(q(text), random_pdb(q(text), size, seed))
    assert tg.results == branch_values()


def test_branch_exceptions_are_collected():
    def stuck(name):
        raise LiftFailure(q(name))

    with ThreadGroup(max_workers=2) as tg:
        tg.soonify(stuck)("R(x) | S(x,y)")
        tg.soonify(len)("abc")
    assert isinstance(tg.results[0], LiftFailure)
    assert tg.results[1] == 3


def test_timeout_reports_unfinished_branch():
    release = threading.Event()
    with ThreadGroup(max_workers=2, timeout=0.05) as tg:
        tg.soonify(release.wait)(2)
        tg.soonify(sum)([1, 2])
    release.set()
    assert isinstance(tg.results[0], TimeoutError)
    assert "did not finish" in str(tg.results[0])
    assert tg.results[1] == 3


def test_invalid_workers():
    with pytest.raises(ParamsError):
        ThreadGroup(max_workers=0)
    with pytest.raises(RuntimeError):
        ThreadGroup().soonify(len)("abc")
