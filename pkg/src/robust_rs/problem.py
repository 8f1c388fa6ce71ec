"""Problem definition, simulation oracle and the conjugate Gaussian posterior.

Alternatives and scenarios are 0-based. Each alternative is scored by its
worst-case (minimum over scenarios) mean; the best alternative maximizes that
score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from numba import njit

#: Prior variance sentinel for an uninformative (zero precision) prior.
UNINFORMATIVE = math.inf


class AssumptionViolation(ValueError):
    """Worst-case scenario or worst-case best alternative is not unique."""


class DegenerateStateError(ValueError):
    """A posterior state on which the requested quantity is undefined."""


class PairIndex(NamedTuple):
    alternative: int
    scenario: int


def _as_matrix(value, k: int, m: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full((k, m), float(arr))
    if arr.shape != (k, m):
        raise ValueError(f"{name} must have shape ({k}, {m}), got {arr.shape}")
    return arr


def check_unique_worst_case(true_mean: np.ndarray) -> None:
    """Raise :class:`AssumptionViolation` unless every alternative has a unique
    worst scenario and the worst-case best alternative is unique."""
    k, m = true_mean.shape
    for i in range(k):
        row = true_mean[i]
        if m > 1 and np.count_nonzero(row == row.min()) > 1:
            raise AssumptionViolation(f"alternative {i} has tied worst-case scenarios")
    wc = true_mean.min(axis=1)
    if np.count_nonzero(wc == wc.max()) > 1:
        raise AssumptionViolation("worst-case best alternative is not unique")


@dataclass(frozen=True)
class ProblemSpec:
    """Ground truth plus prior hyper-parameters for a k x m problem.

    Matrix arguments may be scalars, which are broadcast to (k, m).
    ``prior_var`` entries equal to :data:`UNINFORMATIVE` encode a flat prior.
    """

    true_mean: np.ndarray
    sampling_var: np.ndarray
    prior_mean: np.ndarray = None
    prior_var: np.ndarray = None

    def __post_init__(self):
        tm = np.array(self.true_mean, dtype=float)
        if tm.ndim != 2 or tm.size == 0:
            raise ValueError("true_mean must be a non-empty k x m matrix")
        k, m = tm.shape
        sv = _as_matrix(self.sampling_var, k, m, "sampling_var")
        pm = _as_matrix(0.0 if self.prior_mean is None else self.prior_mean, k, m, "prior_mean")
        pv = _as_matrix(UNINFORMATIVE if self.prior_var is None else self.prior_var, k, m, "prior_var")
        if not np.all(np.isfinite(tm)):
            raise ValueError("true_mean must be finite")
        if not np.all(sv > 0) or not np.all(np.isfinite(sv)):
            raise ValueError("sampling_var must be positive and finite")
        if not np.all(pv > 0):
            raise ValueError("prior_var must be positive (or UNINFORMATIVE)")
        check_unique_worst_case(tm)
        for name, arr in (("true_mean", tm), ("sampling_var", sv), ("prior_mean", pm), ("prior_var", pv)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.true_mean.shape[0]

    @property
    def m(self) -> int:
        return self.true_mean.shape[1]


def _check_pair(pair, k: int, m: int) -> PairIndex:
    i, d = int(pair[0]), int(pair[1])
    if not (0 <= i < k and 0 <= d < m):
        raise IndexError(f"pair {(i, d)} out of range for k={k}, m={m}")
    return PairIndex(i, d)


def sample_observation(spec: ProblemSpec, pair, rng: np.random.Generator) -> float:
    """Draw one simulation output X ~ N(true_mean[pair], sampling_var[pair])."""
    i, d = _check_pair(pair, spec.k, spec.m)
    return spec.true_mean[i, d] + math.sqrt(spec.sampling_var[i, d]) * rng.standard_normal()


def prior_precision(prior_var) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(np.isinf(prior_var), 0.0, 1.0 / np.asarray(prior_var, dtype=float))


@njit(cache=True, nogil=True)
def posterior_pair(count, total, sampling_var, prior_mean, prior_var, prior_prec):
    """Closed-form normal-normal posterior (mean, variance) for one pair."""
    if count == 0:
        return prior_mean, prior_var
    if prior_prec == 0.0:
        return total / count, sampling_var / count
    prec = prior_prec + count / sampling_var
    var = 1.0 / prec
    return (prior_prec * prior_mean + total / sampling_var) * var, var


@njit(cache=True, nogil=True)
def next_posterior_var(count, sampling_var, prior_prec):
    """Posterior variance after one more observation of the pair."""
    if prior_prec == 0.0:
        return sampling_var / (count + 1)
    return 1.0 / (prior_prec + (count + 1) / sampling_var)


@dataclass(frozen=True)
class PosteriorState:
    """Sufficient statistics and posterior moments for every pair.

    The hyper-parameters travel with the state so that lookahead variances can
    be computed without the ground truth.
    """

    count: np.ndarray
    sum: np.ndarray
    post_mean: np.ndarray
    post_var: np.ndarray
    sampling_var: np.ndarray
    prior_mean: np.ndarray
    prior_var: np.ndarray
    total_steps: int = 0
    prior_prec: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "prior_prec", prior_precision(self.prior_var))

    @classmethod
    def initial(cls, spec: ProblemSpec) -> "PosteriorState":
        k, m = spec.k, spec.m
        return cls.from_statistics(spec, np.zeros((k, m), dtype=np.int64), np.zeros((k, m)))

    @classmethod
    def from_statistics(cls, spec_or_hyper, count, total) -> "PosteriorState":
        """Build a state from per-pair counts and observation sums.

        ``spec_or_hyper`` is a :class:`ProblemSpec` or any object exposing
        ``sampling_var``, ``prior_mean`` and ``prior_var``.
        """
        count = np.asarray(count, dtype=np.int64)
        total = np.asarray(total, dtype=float)
        sv = np.asarray(spec_or_hyper.sampling_var, dtype=float)
        pm = np.asarray(spec_or_hyper.prior_mean, dtype=float)
        pv = np.asarray(spec_or_hyper.prior_var, dtype=float)
        if np.any(count < 0):
            raise ValueError("counts must be non-negative")
        pp = prior_precision(pv)
        mean = np.empty(count.shape)
        var = np.empty(count.shape)
        for idx in np.ndindex(count.shape):
            mean[idx], var[idx] = posterior_pair(count[idx], total[idx], sv[idx], pm[idx], pv[idx], pp[idx])
        return cls(count.copy(), total.copy(), mean, var, sv, pm, pv, int(count.sum()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.count.shape


def update_posterior(state: PosteriorState, spec: ProblemSpec | None, pair, observation: float) -> PosteriorState:
    """Return a new state with ``observation`` folded into ``pair``.

    The hyper-parameters are carried by ``state``; ``spec`` (optional) is only
    checked for shape agreement.
    """
    k, m = state.shape
    if spec is not None and (spec.k, spec.m) != (k, m):
        raise ValueError(f"spec shape {(spec.k, spec.m)} does not match state shape {(k, m)}")
    i, d = _check_pair(pair, k, m)
    if not math.isfinite(observation):
        raise ValueError(f"non-finite observation {observation!r}")
    count = state.count.copy()
    total = state.sum.copy()
    mean = state.post_mean.copy()
    var = state.post_var.copy()
    count[i, d] += 1
    total[i, d] += observation
    mean[i, d], var[i, d] = posterior_pair(
        count[i, d], total[i, d], state.sampling_var[i, d],
        state.prior_mean[i, d], state.prior_var[i, d], state.prior_prec[i, d],
    )
    return replace(state, count=count, sum=total, post_mean=mean, post_var=var,
                   total_steps=state.total_steps + 1)


@dataclass(frozen=True)
class Ranking:
    worst_scenario: np.ndarray
    order: np.ndarray

    @property
    def best(self) -> int:
        return int(self.order[0])


def rank_means(means: np.ndarray) -> Ranking:
    """Rank alternatives by worst-case mean; ties go to the lowest index."""
    means = np.asarray(means, dtype=float)
    if np.isnan(means).any():
        raise DegenerateStateError("posterior mean undefined (NaN) for some pair")
    worst = np.argmin(means, axis=1)
    wc = means[np.arange(means.shape[0]), worst]
    order = np.argsort(-wc, kind="stable")
    return Ranking(worst, order)


def compute_ranking(state: PosteriorState) -> Ranking:
    return rank_means(state.post_mean)


def true_best(spec: ProblemSpec) -> int:
    """Index of the alternative with the largest worst-case true mean."""
    wc = spec.true_mean.min(axis=1)
    if np.count_nonzero(wc == wc.max()) > 1:
        raise AssumptionViolation("worst-case best alternative is not unique")
    return int(np.argmax(wc))


@njit(cache=True, nogil=True)
def rank_kernel(mean, worst):
    """Fill ``worst`` with per-alternative argmin scenarios; return the best."""
    k, m = mean.shape
    best = 0
    best_val = -np.inf
    for i in range(k):
        w = 0
        v = mean[i, 0]
        for d in range(1, m):
            if mean[i, d] < v:
                v = mean[i, d]
                w = d
        worst[i] = w
        if v > best_val:
            best_val = v
            best = i
    return best
