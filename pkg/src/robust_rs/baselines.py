"""Comparison policies: equal allocation, proportional-to-variance, and the
plug-in optimal-ratio rule (ROCBA), all realized by most-starving allocation."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from .asymptotics import EXACT, MAX_ITER, optimal_ratios_kernel
from .problem import DegenerateStateError, PairIndex, PosteriorState, Ranking


class PolicyKind(Enum):
    RAODA = "raoda"
    ROCBA = "rocba"
    EA = "ea"
    PTV = "ptv"

    @property
    def code(self) -> int:
        return _CODES[self]

    @classmethod
    def parse(cls, name) -> "PolicyKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown policy {name!r}; expected one of {[p.value for p in cls]}") from None


_CODES = {PolicyKind.RAODA: 0, PolicyKind.ROCBA: 1, PolicyKind.EA: 2, PolicyKind.PTV: 3}


@njit(cache=True, nogil=True)
def welford_update(count, mean, m2, i, d, x):
    count[i, d] += 1
    delta = x - mean[i, d]
    mean[i, d] += delta / count[i, d]
    m2[i, d] += delta * (x - mean[i, d])


@dataclass(frozen=True)
class SampleVarianceTracker:
    """Running sample mean and sum of squared deviations per pair."""

    count: np.ndarray
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, k: int, m: int) -> "SampleVarianceTracker":
        return cls(np.zeros((k, m), dtype=np.int64), np.zeros((k, m)), np.zeros((k, m)))

    @classmethod
    def from_observations(cls, k: int, m: int, events) -> "SampleVarianceTracker":
        tracker = cls.empty(k, m)
        for pair, x in events:
            welford_update(tracker.count, tracker.mean, tracker.m2, int(pair[0]), int(pair[1]), float(x))
        return tracker

    def observe(self, pair, x: float) -> "SampleVarianceTracker":
        out = SampleVarianceTracker(self.count.copy(), self.mean.copy(), self.m2.copy())
        welford_update(out.count, out.mean, out.m2, int(pair[0]), int(pair[1]), float(x))
        return out

    def variance(self) -> np.ndarray:
        """Unbiased sample variance; raises if any pair has fewer than 2 samples."""
        if np.any(self.count < 2):
            raise ValueError("sample variance needs at least 2 observations per pair")
        return self.m2 / (self.count - 1)


@njit(cache=True, nogil=True)
def ea_kernel(count):
    k, m = count.shape
    bi = 0
    bd = 0
    for i in range(k):
        for d in range(m):
            if count[i, d] < count[bi, bd]:
                bi = i
                bd = d
    return bi, bd


@njit(cache=True, nogil=True)
def ptv_kernel(count, s2, t):
    k, m = count.shape
    total = s2.sum()
    if total <= 0.0:
        return ea_kernel(count)
    bi = 0
    bd = 0
    best = -np.inf
    for i in range(k):
        for d in range(m):
            deficit = s2[i, d] / total - count[i, d] / t
            if deficit > best:
                best = deficit
                bi = i
                bd = d
    return bi, bd


@njit(cache=True, nogil=True)
def deficit_on_omega(alpha, count, t, best, worst):
    """Most-starving pair in the candidate set, lexicographic ties."""
    k, m = count.shape
    bi = -1
    bd = -1
    top = -np.inf
    for i in range(k):
        for d in range(m):
            if i != best and d != worst[i]:
                continue
            deficit = alpha[i, d] - count[i, d] / t
            if deficit > top:
                top = deficit
                bi = i
                bd = d
    return bi, bd


@njit(cache=True, nogil=True)
def rocba_kernel(mean, sampling_var, count, t, best, worst, warm, use_warm):
    """Return (ok, i, d, alpha, edges); ok is False when the target solve failed."""
    status, alpha, edges = optimal_ratios_kernel(mean, sampling_var, best, worst, warm, use_warm, MAX_ITER)
    if status != EXACT:
        i, d = ea_kernel(count)
        return False, i, d, alpha, edges
    i, d = deficit_on_omega(alpha, count, t, best, worst)
    return True, i, d, alpha, edges


@dataclass
class FallbackCounter:
    """Counts ROCBA steps that fell back to equal allocation."""

    fallbacks: int = 0
    calls: int = field(default=0)


def ea_allocate(state: PosteriorState) -> PairIndex:
    i, d = ea_kernel(np.ascontiguousarray(state.count))
    return PairIndex(int(i), int(d))


def ptv_allocate(state: PosteriorState, tracker: SampleVarianceTracker) -> PairIndex:
    s2 = tracker.variance()
    if s2.shape != state.shape:
        raise ValueError("tracker shape does not match the posterior state")
    t = max(state.total_steps, 1)
    i, d = ptv_kernel(np.ascontiguousarray(state.count), s2, float(t))
    return PairIndex(int(i), int(d))


def rocba_allocate(state: PosteriorState, ranking: Ranking, counter: FallbackCounter | None = None) -> PairIndex:
    """Sample the candidate pair furthest below its plug-in optimal share.

    Targets are solved from posterior means and the known sampling variances.
    If the solve fails the step uses equal allocation and ``counter`` records it.
    """
    k, m = state.shape
    if k < 2:
        raise DegenerateStateError("allocation policy needs k >= 2")
    if not np.all(np.isfinite(state.post_mean)):
        raise DegenerateStateError("plug-in means must be finite")
    worst = np.asarray(ranking.worst_scenario, dtype=np.int64)
    t = float(max(state.total_steps, 1))
    ok, i, d, _, _ = rocba_kernel(
        np.ascontiguousarray(state.post_mean), np.ascontiguousarray(state.sampling_var),
        np.ascontiguousarray(state.count), t, ranking.best, worst,
        np.zeros((m, k), dtype=np.bool_), False,
    )
    if counter is not None:
        counter.calls += 1
        if not ok:
            counter.fallbacks += 1
    return PairIndex(int(i), int(d))


__all__ = [
    "PolicyKind",
    "SampleVarianceTracker",
    "FallbackCounter",
    "ea_allocate",
    "ptv_allocate",
    "rocba_allocate",
]
