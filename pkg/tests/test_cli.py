import json
import sys
from fractions import Fraction

import pytest
from loguru import logger

from liftr import __version__
from liftr.cli import build_parser, format_value, main
from liftr.parser import parse_pdb, serialize_pdb

from .main import ADVISORS_PDB, ADVISORS_QUERY, H, H1, QW, RANKING_EXAMPLE, TWEETS, q, random_pdb


@pytest.fixture(autouse=True)
def restore_logger():
    yield
    logger.remove()
    logger.add(sys.stderr)
    logger.disable("liftr")


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write


@pytest.fixture
def advisors_files(files):
    return files("ucq.fol", ADVISORS_QUERY), files("advisors.pdb", ADVISORS_PDB)


def random_files(files, text, size=2, seed=0):
    return files("query.fol", text), files("random.pdb", serialize_pdb(random_pdb(q(text), size, seed)))


def test_format_value():
    assert format_value(Fraction(63, 200), 6) == "63/200 (0.315)"
    assert format_value(Fraction(1, 3), 4) == "1/3 (0.3333)"
    assert format_value(Fraction(63, 200), 2) == "63/200 (0.32)"
    assert format_value(Fraction(1), 6) == "1 (1)"
    assert format_value(Fraction(0), 6) == "0 (0)"
    assert format_value(Fraction(63, 200)) == "63/200"


def test_version(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["--version"])
    assert __version__ in capsys.readouterr().out


class TestEval:
    def test_advisors(self, advisors_files, capsys):
        query, pdb = advisors_files
        assert main(["eval", "-q", query, "-d", pdb]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "63/200 (0.315)"

    def test_dnf_flag(self, files, capsys):
        query = files("ucq.fol", "Prof(x) & Advises(x,y) & Student(y)")
        pdb = files("advisors.pdb", ADVISORS_PDB)
        assert main(["eval", "-q", query, "-d", pdb, "--dnf", "--exact"]) == 0
        assert capsys.readouterr().out.strip() == "63/200"

    def test_json(self, advisors_files, capsys):
        query, pdb = advisors_files
        assert main(["eval", "-q", query, "-d", pdb, "--json"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["status"] == "OK"
        assert data["negated"] is True
        assert data["value"] == {"numerator": "63", "denominator": "200"}
        assert data["trace"]["kind"]

    def test_trace_shows_cancellation(self, files, capsys):
        query, pdb = random_files(files, QW)
        assert main(["eval", "-q", query, "-d", pdb, "--trace"]) == 0
        assert "[0] cancelled" in capsys.readouterr().out
        assert main(["eval", "-q", query, "-d", pdb, "--trace", "lines"]) == 0
        assert "\tCancelled\t0\t" in capsys.readouterr().out

    def test_fail(self, files, capsys):
        query, pdb = random_files(files, H)
        assert main(["eval", "-q", query, "-d", pdb]) == 1
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("FAIL (stuck: ")
        assert "resolution depth 4" in out[1]


class TestCompare:
    def test_engine_fail(self, files, capsys):
        query, pdb = random_files(files, H1)
        assert main(["compare", "-q", query, "-d", pdb]) == 1
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("ENGINE_FAIL (stuck: ")
        assert out[1].startswith("  oracle: ")

    @pytest.mark.parametrize("text", [TWEETS, QW, RANKING_EXAMPLE])
    def test_equal(self, files, capsys, text):
        query, pdb = random_files(files, text, seed=5)
        assert main(["compare", "-q", query, "-d", pdb]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "EQUAL"
        assert out[1].replace("engine", "oracle") == out[2]


def test_oracle(advisors_files, capsys):
    query, pdb = advisors_files
    assert main(["oracle", "-q", query, "-d", pdb]) == 0
    assert capsys.readouterr().out.strip() == "63/200 (0.315)"
    assert main(["oracle", "-q", query, "-d", pdb, "--naive", "--exact"]) == 0
    assert capsys.readouterr().out.strip() == "63/200"
    assert main(["oracle", "-q", query, "-d", pdb, "--dimacs"]) == 0
    assert any(line.startswith("p cnf ") for line in capsys.readouterr().out.splitlines())


class TestClassify:
    def test_hard(self, files, capsys):
        assert main(["classify", "-q", files("h1.fol", H1)]) == 1
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "HardSharpP"
        assert "  immediately unsafe: True" in out

    def test_safe(self, files, capsys):
        assert main(["classify", "-q", files("tweets.fol", TWEETS)]) == 0
        assert capsys.readouterr().out.splitlines() == ["SafePtime"]

    def test_json(self, files, capsys):
        assert main(["classify", "-q", files("h.fol", H), "--json"]) == 1
        data = json.loads(capsys.readouterr().out)
        assert data["verdict"] == "HardSharpP"
        assert data["diagnostics"]["splittable"] is False


class TestPreprocessing:
    def test_shatter(self, files, capsys):
        query = files("q.fol", "!Prof(Anne) | !Advises(Anne,y) | !Student(y)")
        pdb = files("advisors.pdb", ADVISORS_PDB)
        assert main(["shatter", "-q", query, "-d", pdb]) == 0
        out = capsys.readouterr().out
        head, tail = out.split("# pdb\n")
        assert head.startswith("# query\n")
        assert "(Anne" not in head
        assert parse_pdb(tail).relation("Advises@Anne:1").rows == {("Bob",): Fraction(7, 10)}

    def test_rank(self, files, capsys):
        query, pdb = random_files(files, RANKING_EXAMPLE)
        assert main(["rank", "-q", query, "-d", pdb]) == 0
        out = capsys.readouterr().out
        assert "R#12(x,y)" in out
        assert "pred S#21/2" in out


class TestSym:
    def test_h(self, capsys):
        assert main(["sym", "--query", "H", "--n", "2", "--weights", "1/2,1/3,1/4", "--check"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[1].endswith(" EQUAL")

    def test_q4(self, capsys):
        assert main(["sym", "--query", "Q4", "--n", "2", "--n2", "1", "--weights", "1/3", "--check"]) == 0
        assert capsys.readouterr().out.splitlines()[1].endswith(" EQUAL")

    def test_bad_weights(self, capsys):
        assert main(["sym", "--query", "H", "--n", "2", "--weights", "1/2"]) == 2
        assert "liftr: error: " in capsys.readouterr().err


def test_reduce_demo(capsys):
    assert main(["reduce-demo", "--n", "1", "--edges", "1-1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "n=1 m=1 edges=1-1"
    assert "#Phi: 3" in out
    assert "brute force: 3 EQUAL" in out
    assert "total: 4" in out


class TestErrors:
    def test_missing_file(self, tmp_path, capsys):
        assert main(["eval", "-q", str(tmp_path / "missing.fol"), "-d", str(tmp_path / "missing.pdb")]) == 2
        assert "liftr: error:" in capsys.readouterr().err

    def test_parse_error(self, files, capsys):
        query = files("bad.fol", "R(x) | | S(x)")
        assert main(["classify", "-q", query]) == 2
        assert "line 1, col 8" in capsys.readouterr().err

    def test_unknown_predicate(self, files, capsys):
        query = files("q.fol", "Teaches(x)")
        pdb = files("advisors.pdb", ADVISORS_PDB)
        assert main(["eval", "-q", query, "-d", pdb]) == 2

    def test_bad_settings(self, advisors_files, capsys):
        query, pdb = advisors_files
        assert main(["eval", "-q", query, "-d", pdb, "--atom-budget", "0"]) == 2
