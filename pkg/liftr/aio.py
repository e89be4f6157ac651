from __future__ import annotations

import functools
import sys
from collections.abc import Awaitable, Callable, Coroutine, Iterable, Sequence
from typing import Any, TypeVar

import anyio
import anyio.to_thread

from .exceptions import ParamsError

if sys.version_info >= (3, 11):  # pragma: no cover
    from typing import TypeVarTuple, Unpack
else:
    from exceptiongroup import ExceptionGroup  # pragma: no cover
    from typing_extensions import TypeVarTuple, Unpack  # pragma: no cover

T_Retval = TypeVar("T_Retval")
T_Item = TypeVar("T_Item")
PosArgsT = TypeVarTuple("PosArgsT")
AsyncFunc = Callable[..., Coroutine]


def run(
    func: Coroutine[None, None, T_Retval] | Callable[[Unpack[PosArgsT]], Awaitable[T_Retval]],
    *args: Unpack[PosArgsT],
    backend: str = "asyncio",
) -> T_Retval:
    """Run a coroutine, or an async function with positional arguments, to completion.

    :param func: async function or coroutine.
    :param args: arguments that will pass to `func` if it's a function.
    :param backend: should be 'asyncio' or 'trio'.

    Usage::

    ... code-block:: python3

        async def weigh(x, y):
            return x + y

        assert run(weigh(1, 2)) == run(weigh, 1, 2) == 3
    """
    if not callable(func):
        coro = func

        async def do_await() -> T_Retval:
            return await coro

        return anyio.run(do_await, backend=backend)
    return anyio.run(func, *args, backend=backend)


async def map_group(func: AsyncFunc, todos: Iterable[tuple]) -> None:
    """Start ``func(*args)`` for every ``args`` in ``todos`` inside one task group."""
    async with anyio.create_task_group() as tg:
        for args in todos:
            tg.start_soon(func, *args)


async def bulk_gather(coros: Sequence[Coroutine], batch_size: int = 0, raises: bool = True) -> tuple:
    """Like `asyncio.gather`; with a non-zero batch_size at most that many run at once.

    :param coros: Coroutines
    :param batch_size: running tasks limit number, set 0 to be unlimit.
    :param raises: if True, re-raise the first failure, else leave None in its slot.
    """
    if batch_size < 0:
        raise ParamsError(f"batch_size must be >= 0, got {batch_size}")
    if not coros:
        return ()
    results: list[Any] = [None] * len(coros)

    async def runner(i: int, coro: Coroutine, limiter: anyio.CapacityLimiter | None) -> None:
        if limiter is None:
            results[i] = await coro
            return
        async with limiter:
            results[i] = await coro

    limiter = anyio.CapacityLimiter(batch_size) if batch_size else None
    try:
        await map_group(runner, ((i, coro, limiter) for i, coro in enumerate(coros)))
    except ExceptionGroup as e:
        if raises:
            raise e.exceptions[0] from e
    return tuple(results)


def run_in_threads(
    func: Callable[[T_Item], T_Retval], items: Sequence[T_Item], batch_size: int = 0
) -> tuple[T_Retval, ...]:
    """Call a blocking ``func`` on every item from worker threads, keeping input order.

    Usage::

    ... code-block:: python3

        values = run_in_threads(oracle_call, grid_points, batch_size=4)
    """

    async def main() -> tuple:
        limiter = anyio.CapacityLimiter(batch_size or max(1, len(items)))
        return await bulk_gather(
            [anyio.to_thread.run_sync(functools.partial(func, item), limiter=limiter) for item in items]
        )

    if not items:
        return ()
    return run(main)
