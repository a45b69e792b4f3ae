"""Bounded concurrent execution of independent blocking jobs."""

from __future__ import annotations

import asyncio
from collections.abc import Callable, Sequence
import logging
from typing import TypeVar

from .exceptions import ArgumentError

_LOGGER = logging.getLogger(__name__)

T = TypeVar("T")


async def gather_bounded(jobs: int, calls: Sequence[Callable[[], T]]) -> list[T | BaseException]:
    """Run calls on worker threads, at most `jobs` at a time. Results keep submission order."""
    if jobs < 1:
        raise ArgumentError(f"jobs must be positive, got {jobs}")

    semaphore = asyncio.Semaphore(jobs)

    async def _run(call: Callable[[], T]) -> T:
        async with semaphore:
            return await asyncio.to_thread(call)

    return await asyncio.gather(*(_run(call) for call in calls), return_exceptions=True)


def run_bounded(jobs: int, calls: Sequence[Callable[[], T]]) -> list[T | BaseException]:
    if jobs < 1:
        raise ArgumentError(f"jobs must be positive, got {jobs}")

    if jobs == 1 or len(calls) <= 1:
        results: list[T | BaseException] = []
        for call in calls:
            try:
                results.append(call())
            except Exception as e:
                results.append(e)

        return results

    _LOGGER.debug(f"Running {len(calls)} jobs on up to {jobs} threads")
    return asyncio.run(gather_bounded(jobs, calls))
