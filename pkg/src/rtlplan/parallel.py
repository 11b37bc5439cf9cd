"""Order-preserving fan-out over a process pool."""

from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_POOLS: Dict[int, ProcessPoolExecutor] = {}


def _context():
    try:
        return mp.get_context("fork")
    except ValueError:
        return mp.get_context()


def pool(workers: int) -> ProcessPoolExecutor:
    """A process pool of ``workers`` processes, reused across calls."""
    ex = _POOLS.get(workers)
    if ex is None:
        ex = ProcessPoolExecutor(max_workers=workers, mp_context=_context())
        _POOLS[workers] = ex
    return ex


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """``[fn(x) for x in items]``, optionally computed on ``workers`` processes.

    Results always come back in input order, so output never depends on the
    worker count. ``fn`` must be a picklable module-level callable.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    return list(pool(workers).map(fn, items))


def shutdown() -> None:
    for ex in _POOLS.values():
        ex.shutdown(cancel_futures=True)
    _POOLS.clear()
