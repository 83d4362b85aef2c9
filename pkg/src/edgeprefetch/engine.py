"""Event loop, seeded random streams and the generalized Poisson sampler."""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

Handler = Callable[[], Any]


class SchedulingError(RuntimeError):
    pass


@dataclass(order=True)
class _Entry:
    time: float
    seq: int
    handler: Handler = field(compare=False)
    label: str = field(compare=False, default="")


class EventQueue:
    """Priority queue of callbacks ordered by (time, insertion sequence).

    Handlers are zero-argument callables; they read ``queue.now`` for the
    current simulated time and may schedule further events.
    """

    def __init__(self) -> None:
        self._heap: list[_Entry] = []
        self._seq = 0
        self.now = 0.0
        self.scheduled = 0
        self.delivered = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, at: float, handler: Handler, label: str = "") -> None:
        if not at >= self.now:
            raise SchedulingError(f"cannot schedule at t={at!r}, clock is already {self.now!r}")
        heapq.heappush(self._heap, _Entry(float(at), self._seq, handler, label))
        self._seq += 1
        self.scheduled += 1

    def schedule_in(self, delay: float, handler: Handler, label: str = "") -> None:
        self.schedule(self.now + delay, handler, label)

    def peek_time(self) -> float | None:
        return self._heap[0].time if self._heap else None

    def step(self) -> None:
        entry = heapq.heappop(self._heap)
        self.now = entry.time
        self.delivered += 1
        entry.handler()

    def run_until(self, t_end: float) -> int:
        """Process every event with time <= t_end; returns the number processed."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before the clock ({self.now})")
        n = 0
        while self._heap and self._heap[0].time <= t_end:
            self.step()
            n += 1
        self.now = t_end
        return n

    def run(self) -> int:
        """Drain the queue completely."""
        n = 0
        while self._heap:
            self.step()
            n += 1
        return n


def rng_stream(seed: int, stream: str) -> np.random.Generator:
    """Independent generator for one stochastic subsystem.

    The stream label is hashed into the seed sequence, so adding or removing
    one subsystem never shifts the draws of another.
    """
    digest = hashlib.sha256(stream.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & (2**64 - 1), *words])))


def _check_gp(theta: float, lam: float) -> None:
    if not theta > 0:
        raise ValueError(f"theta must be > 0, got {theta}")
    if not 0 <= lam < 1:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")


def gp_pmf(k: int, theta: float, lam: float) -> float:
    """Generalized Poisson probability mass at k (evaluated in log space)."""
    _check_gp(theta, lam)
    if k < 0:
        return 0.0
    rate = theta + k * lam
    log_p = math.log(theta) + (k - 1) * math.log(rate) - rate - math.lgamma(k + 1)
    return math.exp(log_p)


_TABLE_CACHE: dict[tuple[float, float], np.ndarray] = {}


def gp_cdf_table(theta: float, lam: float, tail: float = 1e-12) -> np.ndarray:
    """Cumulative distribution tabulated until the remaining mass drops below ``tail``."""
    _check_gp(theta, lam)
    key = (float(theta), float(lam))
    table = _TABLE_CACHE.get(key)
    if table is not None:
        return table
    cdf = []
    acc = 0.0
    k = 0
    # the mean is theta/(1-lam); a hard cap guards against pathological inputs
    limit = int(50 + 200 * theta / (1 - lam) ** 3)
    while acc < 1.0 - tail and k < limit:
        acc += gp_pmf(k, theta, lam)
        cdf.append(acc)
        k += 1
    table = np.asarray(cdf)
    table /= table[-1]
    _TABLE_CACHE[key] = table
    return table


def gp_sample(theta: float, lam: float, rng: np.random.Generator, size: int | None = None):
    """Draw from GP(theta, lam) by inverse CDF over the tabulated pmf."""
    table = gp_cdf_table(theta, lam)
    u = rng.random(size)
    k = np.searchsorted(table, u, side="right")
    k = np.minimum(k, len(table) - 1)
    if size is None:
        return int(k)
    return k.astype(np.int64)
