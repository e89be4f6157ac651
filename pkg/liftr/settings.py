from __future__ import annotations

import dataclasses
import functools
import os
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

from .exceptions import ParamsError

ENV_PREFIX = "LIFTR_"


@dataclass(frozen=True)
class Settings:
    """Tunable budgets and bounds shared by every module.

    Values come from `LIFTR_*` environment variables (see `from_env`) and can be
    overridden per call with `replace`::

        settings = Settings.from_env().replace(resolution_depth=6)
    """

    resolution_depth: int = 4
    # None means "the longest clause of the query being searched"
    clause_length_bound: int | None = None
    max_resolvents: int = 400
    atom_budget: int = 40
    naive_atom_budget: int = 20
    sat_node_budget: int = 2**24
    rank_arity_cap: int = 3
    max_union_disjuncts: int = 8
    workers: int = 0
    symbolic_domain_size: int = 3
    rewrite_depth: int = 2
    grid_retries: int = 5
    decimal_places: int = 6

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if value is None:
                continue
            lower = 0 if field.name in ("workers", "rewrite_depth") else 1
            if not isinstance(value, int) or value < lower:
                raise ParamsError(f"{field.name} must be an integer >= {lower}, got {value!r}")

    def replace(self, **changes: Any) -> Settings:
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_env(cls, environ: Mapping[str, str] | None = None) -> Settings:
        if environ is None:
            environ = os.environ
        values: dict[str, Any] = {}
        for field in dataclasses.fields(cls):
            raw = environ.get(ENV_PREFIX + field.name.upper())
            if raw is None or not raw.strip():
                continue
            try:
                values[field.name] = int(raw)
            except ValueError as e:
                raise ParamsError(f"{ENV_PREFIX}{field.name.upper()}={raw!r} is not an integer") from e
        return cls(**values)


@functools.lru_cache
def get_settings() -> Settings:
    return Settings.from_env()
