from __future__ import annotations

import functools
import sys
import time
from collections.abc import Callable
from contextlib import AbstractContextManager
from types import TracebackType
from typing import TYPE_CHECKING, Any, TypeVar

from loguru import logger

if TYPE_CHECKING:  # pragma: no cover
    if sys.version_info >= (3, 11):
        from typing import Self
    else:
        from typing_extensions import Self

T_Retval = TypeVar("T_Retval")


class Timer(AbstractContextManager):
    """Log the time cost of a block or function at INFO level.

    Usage::

    ... code-block:: python3

        with Timer("lifted evaluation"):
            evaluate(q, db)
        # lifted evaluation Cost: 0.012 seconds

        with Timer("grounding", verbose=False) as t:
            ground(q, db)
        assert isinstance(t.cost, float)
    """

    def __init__(self, message: str, decimal_places: int = 3, verbose: bool = True) -> None:
        self.message = message
        self._decimal_places = decimal_places
        self._end = self._start = time.perf_counter()
        self._verbose = verbose

    def start(self) -> None:
        self._start = time.perf_counter()

    def capture(self, verbose: bool | None = None) -> None:
        self._end = time.perf_counter()
        if verbose is None:
            verbose = self._verbose
        if verbose:
            logger.info(str(self))

    @property
    def elapsed(self) -> float:
        return self._end - self._start

    @property
    def cost(self) -> float:
        return round(self.elapsed, self._decimal_places)

    def __str__(self) -> str:
        return f"{self.message} Cost: {self.cost} seconds"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.message!r}, {self._decimal_places}, {self._verbose})"

    def __enter__(self) -> Self:
        self.start()
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        self.capture()


def timeit(func: Callable[..., T_Retval]) -> Callable[..., T_Retval]:
    """Log the cost of every call of ``func`` through ``Timer``."""
    name = getattr(func, "__name__", str(func))

    @functools.wraps(func)
    def deco(*args: Any, **kwargs: Any) -> T_Retval:
        with Timer(name):
            return func(*args, **kwargs)

    return deco
