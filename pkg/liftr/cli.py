"""Command line entry point: ``liftr <subcommand> ...``.

Exit status is 0 on success, 1 when the engine (or a verdict) fails and 2 on
bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from loguru import logger

from . import __version__
from .dichotomy import Classification, Verdict, classify
from .engine import EvalResult, Fail, evaluate, render_trace, trace_lines, trace_to_dict
from .exceptions import LiftrError, ParamsError
from .logic import CnfQuery
from .oracle import ground, pr_oracle, to_dimacs
from .parser import QuerySource, load_query, parse_pdb, serialize_pdb, serialize_query
from .pdb import ONE, Pdb
from .preprocess import prepare, rank, shatter
from .reduction import Pp2Cnf, recover_counts
from .settings import Settings, get_settings
from .symmetric import h_instance, pr_H, pr_Q4, typed_q4_instance
from .timing import Timer

OK, FAILED, BAD_INPUT = 0, 1, 2
LOG_LEVELS = ("WARNING", "INFO", "DEBUG")

Handler = Callable[[argparse.Namespace, Settings], int]


def format_value(value: Fraction, places: int | None = None) -> str:
    """``63/200 (0.315)``: the exact rational, then a rounded decimal."""
    if places is None:
        return str(value)
    rounded = round(value, places)
    decimal = format(Decimal(rounded.numerator) / Decimal(rounded.denominator), "f")
    if "." in decimal:
        decimal = decimal.rstrip("0").rstrip(".")
    return f"{value} ({decimal})"


def _fraction_json(value: Fraction) -> dict[str, str]:
    return {"numerator": str(value.numerator), "denominator": str(value.denominator)}


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_query(args: argparse.Namespace) -> QuerySource:
    return load_query(_read(args.query), dnf=args.dnf)


def _load(args: argparse.Namespace) -> tuple[QuerySource, Pdb]:
    source = _load_query(args)
    db = parse_pdb(_read(args.pdb))
    db.check(source.query)
    return source, db


def _places(args: argparse.Namespace, settings: Settings) -> int | None:
    if getattr(args, "exact", False):
        return None
    return settings.decimal_places


def _emit_json(data: dict[str, Any]) -> None:
    print(json.dumps(data, indent=2, ensure_ascii=False))


def _print_trace(args: argparse.Namespace, result: EvalResult) -> None:
    if args.trace == "lines":
        print("\n".join(trace_lines(result.trace)))
    elif args.trace:
        print(render_trace(result.trace))


def _bounds(settings: Settings) -> str:
    length = "longest clause" if settings.clause_length_bound is None else settings.clause_length_bound
    return f"resolution depth {settings.resolution_depth}, clause length bound {length}"


def _run_engine(source: QuerySource, db: Pdb, settings: Settings) -> tuple[EvalResult, Fraction | None]:
    q, prepared = prepare(source.query, db, settings)
    result = evaluate(q, prepared, settings)
    if isinstance(result, Fail):
        return result, None
    return result, ONE - result.prob if source.negated else result.prob


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    source, db = _load(args)
    with Timer("eval", verbose=False) as timer:
        result, value = _run_engine(source, db, settings)
    logger.info("evaluated in {} seconds", timer.cost)
    if args.json:
        data: dict[str, Any] = {"status": "FAIL" if value is None else "OK", "negated": source.negated}
        if value is None:
            assert isinstance(result, Fail)
            data.update(stuck=str(result.stuck), reason=result.reason)
        else:
            data["value"] = _fraction_json(value)
        data["trace"] = trace_to_dict(result.trace)
        _emit_json(data)
        return FAILED if value is None else OK
    if value is None:
        assert isinstance(result, Fail)
        print(f"FAIL (stuck: {result.stuck})")
        print(f"  {result.reason}; {_bounds(settings)}")
    else:
        print(format_value(value, _places(args, settings)))
    _print_trace(args, result)
    return FAILED if value is None else OK


def cmd_oracle(args: argparse.Namespace, settings: Settings) -> int:
    source, db = _load(args)
    if args.dimacs:
        sys.stdout.write(to_dimacs(ground(source.query, db)))
        return OK
    value = pr_oracle(source.query, db, settings, naive=args.naive)
    if source.negated:
        value = ONE - value
    if args.json:
        _emit_json({"status": "OK", "negated": source.negated, "value": _fraction_json(value)})
    else:
        print(format_value(value, _places(args, settings)))
    return OK


def cmd_compare(args: argparse.Namespace, settings: Settings) -> int:
    source, db = _load(args)
    result, value = _run_engine(source, db, settings)
    expected = pr_oracle(source.query, db, settings)
    if source.negated:
        expected = ONE - expected
    places = _places(args, settings)
    if value is None:
        assert isinstance(result, Fail)
        verdict = "ENGINE_FAIL"
        print(f"ENGINE_FAIL (stuck: {result.stuck})")
    else:
        verdict = "EQUAL" if value == expected else "DIFFER"
        print(verdict)
        print(f"  engine: {format_value(value, places)}")
    print(f"  oracle: {format_value(expected, places)}")
    _print_trace(args, result)
    if verdict == "DIFFER":
        logger.error("engine and oracle disagree on {}", source.query)
    return OK if verdict == "EQUAL" else FAILED


def _print_classification(result: Classification) -> None:
    print(result.verdict.value)
    if result.verdict is not Verdict.SAFE_PTIME:
        print(f"  stuck: {result.witness}")
    d = result.diagnostics
    if d is None:
        return
    print(f"  subject: {d.subject}")
    print(f"  splittable: {d.splittable}")
    print(f"  decomposable: {d.decomposable}")
    print(f"  immediately unsafe: {d.immediately_unsafe}")
    for rewrite in d.unsafe_rewrites:
        steps = ", ".join(f"{name}={int(value)}" for name, value in rewrite) or "(none)"
        print(f"  unsafe after: {steps}")
    if d.note:
        print(f"  note: {d.note}")


def cmd_classify(args: argparse.Namespace, settings: Settings) -> int:
    source = _load_query(args)
    result = classify(source.query, source.sides, settings)
    if args.json:
        data: dict[str, Any] = {"verdict": result.verdict.value, "trace": trace_to_dict(result.trace)}
        if result.verdict is not Verdict.SAFE_PTIME:
            data["stuck"] = str(result.witness)
        if result.diagnostics is not None:
            d = result.diagnostics
            data["diagnostics"] = {
                "subject": str(d.subject),
                "splittable": d.splittable,
                "decomposable": d.decomposable,
                "immediately_unsafe": d.immediately_unsafe,
                "unsafe_rewrites": [[[name, value] for name, value in r] for r in d.unsafe_rewrites],
                "note": d.note,
            }
        _emit_json(data)
    else:
        _print_classification(result)
        if args.trace:
            print(render_trace(result.trace))
    return OK if result.verdict is Verdict.SAFE_PTIME else FAILED


def _print_pair(q: CnfQuery, db: Pdb) -> None:
    print("# query")
    sys.stdout.write(serialize_query(q))
    print("# pdb")
    sys.stdout.write(serialize_pdb(db))


def cmd_shatter(args: argparse.Namespace, settings: Settings) -> int:
    source, db = _load(args)
    _print_pair(*shatter(source.query, db))
    return OK


def cmd_rank(args: argparse.Namespace, settings: Settings) -> int:
    source, db = _load(args)
    q = source.query
    if q.has_constants:
        q, db = shatter(q, db)
    _print_pair(*rank(q, db, settings))
    return OK


def _weights(text: str, count: int) -> list[Fraction]:
    try:
        values = [Fraction(i.strip()) for i in text.split(",")]
    except (ValueError, ZeroDivisionError) as e:
        raise ParamsError(f"invalid weights {text!r}") from e
    if len(values) != count:
        raise ParamsError(f"expected {count} comma separated weight(s), got {len(values)}")
    return values


def cmd_sym(args: argparse.Namespace, settings: Settings) -> int:
    if args.query == "H":
        r, s, t = _weights(args.weights, 3)
        value = pr_H(args.n, r, s, t)
        instance = h_instance(args.n, r, s, t) if args.check else None
    else:
        (p,) = _weights(args.weights, 1)
        n2 = args.n if args.n2 is None else args.n2
        value = pr_Q4(args.n, n2, p)
        instance = typed_q4_instance(args.n, n2, p) if args.check else None
    print(format_value(value, _places(args, settings)))
    if instance is not None:
        expected = pr_oracle(*instance, settings)
        verdict = "EQUAL" if expected == value else "DIFFER"
        print(f"  oracle: {format_value(expected, _places(args, settings))} {verdict}")
        return OK if verdict == "EQUAL" else FAILED
    return OK


def cmd_reduce_demo(args: argparse.Namespace, settings: Settings) -> int:
    phi = Pp2Cnf.parse(args.n, args.edges)
    with Timer("reduce-demo", verbose=False) as timer:
        table = recover_counts(phi, settings=settings, staged=not args.full, seed=args.seed)
    expected = phi.brute_force_count()
    print(f"n={phi.n} m={phi.m} edges={args.edges}")
    print("k\tl\tp\tq\tN")
    for (k, l, p, q), count in table.nonzero():  # noqa: E741
        print(f"{k}\t{l}\t{p}\t{q}\t{count}")
    print(f"total: {table.total}")
    print(f"#Phi: {table.satisfying}")
    print(f"brute force: {expected} {'EQUAL' if expected == table.satisfying else 'DIFFER'}")
    print(f"time: {timer.cost} seconds")
    return OK if expected == table.satisfying else FAILED


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logs")
    common.add_argument("--json", action="store_true", help="machine readable output")
    common.add_argument("--exact", action="store_true", help="omit the decimal rendering")
    common.add_argument("--decimal", type=int, metavar="DIGITS", help="decimal places to display")
    common.add_argument("--resolution-depth", type=int, metavar="N")
    common.add_argument("--atom-budget", type=int, metavar="N")
    common.add_argument("--workers", type=int, metavar="N", help="threads for top level branches")
    common.add_argument("--seed", type=int, default=0)
    return common


def _query_args(parser: argparse.ArgumentParser, pdb: bool = True) -> None:
    parser.add_argument("-q", "--query", required=True, metavar="PATH", help="query file")
    if pdb:
        parser.add_argument("-d", "--pdb", required=True, metavar="PATH", help="probabilistic database file")
    parser.add_argument("--dnf", action="store_true", help="read the query as a DNF and report Pr(Q) = 1 - Pr(not Q)")


def _trace_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--trace",
        nargs="?",
        const="text",
        choices=("text", "lines"),
        help="print the evaluation trace (indented text or one node per line)",
    )


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="liftr", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Handler, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(handler=handler)
        return p

    p = add("eval", cmd_eval, "lifted evaluation of a query over a database")
    _query_args(p)
    _trace_arg(p)
    p = add("oracle", cmd_oracle, "ground weighted model count")
    _query_args(p)
    p.add_argument("--naive", action="store_true", help="enumerate worlds instead of decomposing")
    p.add_argument("--dimacs", action="store_true", help="dump the grounding instead of counting")
    p = add("compare", cmd_compare, "engine against oracle")
    _query_args(p)
    _trace_arg(p)
    p = add("classify", cmd_classify, "safe or #P-hard")
    _query_args(p, pdb=False)
    _trace_arg(p)
    p = add("shatter", cmd_shatter, "remove constants, print query and database")
    _query_args(p)
    p = add("rank", cmd_rank, "rank the query, print query and database")
    _query_args(p)
    p = add("sym", cmd_sym, "symmetric closed forms")
    p.add_argument("--query", choices=("H", "Q4"), required=True)
    p.add_argument("--n", type=int, required=True, help="domain size (left size for Q4)")
    p.add_argument("--n2", type=int, help="right size for Q4, defaults to --n")
    p.add_argument("--weights", required=True, help="r,s,t for H; p for Q4")
    p.add_argument("--check", action="store_true", help="also run the ground oracle")
    p = add("reduce-demo", cmd_reduce_demo, "count a PP2CNF through the probability oracle")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--edges", required=True, help='edges such as "1-1,2-2"')
    p.add_argument("--full", action="store_true", help="solve the full system instead of in stages")
    return parser


def configure_logging(verbosity: int) -> None:
    logger.remove()
    logger.add(sys.stderr, level=LOG_LEVELS[min(verbosity, len(LOG_LEVELS) - 1)])
    logger.enable("liftr")


def settings_from(args: argparse.Namespace) -> Settings:
    return get_settings().replace(
        resolution_depth=args.resolution_depth,
        atom_budget=args.atom_budget,
        workers=args.workers,
        decimal_places=args.decimal,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        settings = settings_from(args)
        return args.handler(args, settings)
    except (LiftrError, OSError) as e:
        print(f"liftr: error: {e}", file=sys.stderr)
        return BAD_INPUT


__all__ = ("build_parser", "format_value", "main")
