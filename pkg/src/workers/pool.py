"""Evaluation back ends.

Fitness evaluations, sweep cells, robustness trials and decoherence
trajectories are batches of independent calls.  A pluggable evaluator lets
the same code run in-process, on a process pool, or under a recorder in
unit tests.  Every implementation returns results in input order, so
callers never depend on completion order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, Optional, Protocol, Sequence

logger = logging.getLogger(__name__)


class Evaluator(Protocol):
    """Protocol for objects that map a function over a batch."""

    def map(self, fn: Callable[[Any], Any], items: Iterable[Any]) -> list[Any]:
        """Return ``[fn(x) for x in items]`` in input order."""


class SerialEvaluator:
    """Evaluate in the calling process."""

    def map(self, fn: Callable[[Any], Any], items: Iterable[Any]) -> list[Any]:
        return [fn(item) for item in items]

    def close(self) -> None:
        return None

    def __enter__(self) -> "SerialEvaluator":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


class PoolEvaluator:
    """Evaluate on a :class:`~concurrent.futures.ProcessPoolExecutor`.

    ``fn`` and the items must be picklable.  The pool is created lazily on
    the first batch and shut down by :meth:`close` or on leaving a ``with``
    block.
    """

    def __init__(self, workers: int, chunksize: int = 1) -> None:
        if workers < 1:
            raise ValueError("workers must be at least 1")
        self.workers = workers
        self.chunksize = chunksize
        self._executor: Optional[ProcessPoolExecutor] = None

    def map(self, fn: Callable[[Any], Any], items: Iterable[Any]) -> list[Any]:
        if self._executor is None:
            logger.debug("starting process pool with %d workers", self.workers)
            self._executor = ProcessPoolExecutor(max_workers=self.workers)
        return list(self._executor.map(fn, items, chunksize=self.chunksize))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def __enter__(self) -> "PoolEvaluator":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


class RecordingEvaluator(SerialEvaluator):
    """Serial evaluator that records the size of every batch."""

    def __init__(self) -> None:
        self.batches: list[int] = []

    def map(self, fn: Callable[[Any], Any], items: Iterable[Any]) -> list[Any]:
        batch: Sequence[Any] = list(items)
        self.batches.append(len(batch))
        return super().map(fn, batch)


def make_evaluator(workers: int | None) -> SerialEvaluator | PoolEvaluator:
    """Serial evaluator for ``workers <= 1``, otherwise a process pool."""
    if not workers or workers <= 1:
        return SerialEvaluator()
    return PoolEvaluator(workers)
