from loguru import logger

from .dichotomy import Classification, Verdict, classify
from .engine import EvalTrace, Fail, Success, evaluate, probability, render_trace
from .exceptions import LiftFailure, LiftrError, ParamsError
from .logic import FALSE, TRUE, Clause, CnfQuery, Domain, Predicate, clause, lit, query
from .oracle import pr_oracle
from .parser import load_query, parse_pdb, parse_query
from .pdb import Pdb, Relation
from .preprocess import prepare, rank, shatter
from .settings import Settings, get_settings
from .timing import timeit

__version__ = "0.1.0"
__all__ = (
    "__version__",
    "Classification",
    "Clause",
    "CnfQuery",
    "Domain",
    "EvalTrace",
    "FALSE",
    "Fail",
    "LiftFailure",
    "LiftrError",
    "ParamsError",
    "Pdb",
    "Predicate",
    "Relation",
    "Settings",
    "Success",
    "TRUE",
    "Verdict",
    "classify",
    "clause",
    "evaluate",
    "get_settings",
    "lit",
    "load_query",
    "parse_pdb",
    "parse_query",
    "pr_oracle",
    "prepare",
    "probability",
    "query",
    "rank",
    "render_trace",
    "shatter",
    "timeit",
)

logger.disable("liftr")
