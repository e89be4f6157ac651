from __future__ import annotations

import concurrent.futures
import functools
import sys
from collections.abc import Callable
from contextlib import AbstractContextManager
from typing import Annotated, Any

from loguru import logger

from .exceptions import ParamsError

if sys.version_info >= (3, 11):  # pragma: no cover
    from typing import ParamSpec, Self
else:  # pragma: no cover
    from typing_extensions import ParamSpec, Self

T_ParamSpec = ParamSpec("T_ParamSpec")
BranchResults = Annotated[list, "The value of each branch, or the exception it raised, in submission order"]


class ThreadGroup(AbstractContextManager):
    """Run independent evaluation branches on a thread pool and collect their
    results in order.

    Usage::

    ... code-block:: python3

        with ThreadGroup(max_workers=4) as tg:
            for child in children:
                tg.soonify(engine_step)(child, depth + 1)
        values = tg.results  # same order as the soonify calls

    ## Arguments

    `max_workers`: size of the ``ThreadPoolExecutor``; None lets it choose
    `timeout`: seconds to wait for every branch; a branch still running
        afterwards is reported as a ``TimeoutError``.
    """

    def __init__(self, max_workers: int | None = None, timeout: float | None = None) -> None:
        if max_workers is not None and max_workers < 1:
            raise ParamsError(f"max_workers must be >= 1, got {max_workers}")
        self._results: list[Any] = []
        self._timeout = timeout
        self._max_workers = max_workers
        self._executor: concurrent.futures.ThreadPoolExecutor | None = None
        self._futures: dict[concurrent.futures.Future, int] = {}

    @property
    def results(self) -> BranchResults:
        return self._results

    def __enter__(self) -> Self:
        self._executor = concurrent.futures.ThreadPoolExecutor(max_workers=self._max_workers)
        return self

    def soonify(self, func: Callable[T_ParamSpec, Any]) -> Callable[T_ParamSpec, None]:
        """Submit ``func`` to the pool as soon as the returned runner is called."""

        @functools.wraps(func)
        def runner(*args: T_ParamSpec.args, **kwargs: T_ParamSpec.kwargs) -> None:
            if self._executor is None:
                raise RuntimeError("ThreadGroup is not entered")
            fut = self._executor.submit(func, *args, **kwargs)
            self._futures[fut] = len(self._futures)

        return runner

    def __exit__(self, *args: Any) -> None:
        fs = self._futures
        self._results = [None] * len(fs)
        try:
            done, pending = concurrent.futures.wait(fs, timeout=self._timeout)
            for future in done:
                try:
                    res = future.result()
                except Exception as exc:
                    res = exc
                self._results[fs[future]] = res
            for future in pending:
                future.cancel()
                index = fs[future]
                self._results[index] = TimeoutError(f"branch {index} did not finish in {self._timeout} seconds")
        finally:
            if self._executor is not None:
                self._executor.shutdown(wait=False)
        failed = sum(isinstance(r, BaseException) for r in self._results)
        if failed:
            logger.debug("{} of {} branch(es) raised", failed, len(self._results))
