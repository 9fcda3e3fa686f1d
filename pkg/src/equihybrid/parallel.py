"""Deterministic data-parallel execution for the per-family steps.

Work is split into static contiguous blocks, one per worker.  Each block
writes its own result; blocks are combined in index order after all of them
finish, so outputs never depend on the worker count.  This is the only module
that starts threads.  numpy releases the GIL inside large ufunc loops, so
vectorised block kernels run concurrently; pure-Python oracles are serialised
by the GIL but still produce identical results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np


class ParallelMapError(RuntimeError):
    def __init__(self, failures: dict[int, BaseException]):
        self.failures = dict(sorted(failures.items()))
        idx = ", ".join(str(i) for i in list(self.failures)[:20])
        more = "" if len(self.failures) <= 20 else f" (+{len(self.failures) - 20} more)"
        super().__init__(f"operation failed at indices [{idx}]{more}: "
                         f"{next(iter(self.failures.values()))!r}")


@dataclass(frozen=True)
class ParallelPlan:
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def blocks(self, k: int) -> list[tuple[int, int]]:
        """Contiguous ``[lo, hi)`` ranges, sizes differing by at most one."""
        n = min(self.workers, max(k, 1))
        base, extra = divmod(k, n)
        out, lo = [], 0
        for b in range(n):
            hi = lo + base + (1 if b < extra else 0)
            out.append((lo, hi))
            lo = hi
        return out


class WorkerPool:
    """Thread pool bound to a plan; the calling thread runs block 0 itself."""

    def __init__(self, plan: ParallelPlan):
        self.plan = plan
        self._executor = (ThreadPoolExecutor(plan.workers - 1, thread_name_prefix="equihybrid")
                          if plan.workers > 1 else None)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def run_blocks(self, k: int, block_op: Callable[[int, int], Any]) -> list[Any]:
        """Apply ``block_op(lo, hi)`` to each static block; results in block order."""
        blocks = self.plan.blocks(k)
        if self._executor is None or len(blocks) == 1:
            return [block_op(lo, hi) for lo, hi in blocks]
        futures = [self._executor.submit(block_op, lo, hi) for lo, hi in blocks[1:]]
        first = block_op(*blocks[0])
        return [first] + [f.result() for f in futures]


def parallel_map(k: int | Sequence, op: Callable[[int], Any], plan: ParallelPlan,
                 pool: Optional[WorkerPool] = None) -> list[Any]:
    """``[op(0), ..., op(K-1)]`` evaluated over the plan's static blocks.

    Failures are collected per index and re-raised together as
    :class:`ParallelMapError` after every block has finished.
    """
    if not isinstance(k, int):
        k = len(k)

    def block(lo, hi):
        vals, errs = [], {}
        for i in range(lo, hi):
            try:
                vals.append(op(i))
            except Exception as exc:  # noqa: BLE001 - aggregated below
                errs[i] = exc
                vals.append(None)
        return vals, errs

    own = pool is None
    pool = pool or WorkerPool(plan)
    try:
        parts = pool.run_blocks(k, block)
    finally:
        if own:
            pool.close()
    failures: dict[int, BaseException] = {}
    out: list[Any] = []
    for vals, errs in parts:
        out.extend(vals)
        failures.update(errs)
    if failures:
        raise ParallelMapError(failures)
    return out


def squared_distances(points: np.ndarray, anchor: np.ndarray) -> np.ndarray:
    d = points - anchor
    return np.einsum("ij,ij->i", d, d)


def local_farthest(sq: np.ndarray, offset: int = 0) -> tuple[float, int]:
    """``(max squared distance, smallest global index attaining it)`` within one block."""
    i = int(np.argmax(sq))  # argmax returns the first maximiser
    return float(sq[i]), offset + i


def combine_farthest(candidates: Sequence[tuple[float, int]]) -> tuple[float, int]:
    """Merge per-block winners: largest distance, ties to the smallest index."""
    best = None
    for cand in candidates:
        if best is None or cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
            best = cand
    if best is None:
        raise ValueError("no candidates")
    return best


def farthest_from(points, anchor) -> tuple[int, np.ndarray]:
    """Index and value of the point farthest from ``anchor`` (ties: smallest index)."""
    P = np.asarray(points, dtype=np.float64)
    if P.size == 0:
        raise ValueError("farthest_from needs a nonempty list")
    if P.ndim == 1:
        P = P[:, None]
    a = np.asarray(anchor, dtype=np.float64).reshape(-1)
    _, i = local_farthest(squared_distances(P, a))
    return i, P[i].copy()
