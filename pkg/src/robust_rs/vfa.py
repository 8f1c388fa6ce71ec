"""One-step-lookahead allocation by inscribed-hypersphere radii.

For the posterior best alternative b and competitor i with worst scenario d_i,
the squared radius attached to best-side scenario l is

    R2(l, i) = (mu[b, l] - mu[i, d_i])**2 / (var[b, l] + var[i, d_i])

The value function approximation is the minimum of R2 over all (l, i). The
lookahead value of sampling a pair is that minimum recomputed with the pair's
posterior variance replaced by its one-step-updated value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .problem import (
    DegenerateStateError,
    PairIndex,
    PosteriorState,
    Ranking,
    next_posterior_var,
)


@dataclass(frozen=True)
class LookaheadValue:
    pair: PairIndex
    value: float


def _competitors(ranking: Ranking):
    best = ranking.best
    return [i for i in range(len(ranking.worst_scenario)) if i != best]


def radius_squared(state: PosteriorState, ranking: Ranking, scenario: int, competitor: int) -> float:
    best = ranking.best
    if competitor == best:
        raise ValueError("competitor must differ from the posterior best alternative")
    d = int(ranking.worst_scenario[competitor])
    denom = state.post_var[best, scenario] + state.post_var[competitor, d]
    if not denom > 0:
        raise DegenerateStateError("zero posterior variance on both sides of a radius term")
    gap = state.post_mean[best, scenario] - state.post_mean[competitor, d]
    return gap * gap / denom


def current_vfa(state: PosteriorState, ranking: Ranking) -> float:
    k, m = state.shape
    if k < 2:
        raise DegenerateStateError("value function approximation needs k >= 2")
    return min(radius_squared(state, ranking, l, i) for l in range(m) for i in _competitors(ranking))


def candidate_pairs(ranking: Ranking, m: int) -> list[PairIndex]:
    """Candidate set {(best, l)} U {(i, d_i)}, in lexicographic order."""
    best = ranking.best
    out = []
    for i in range(len(ranking.worst_scenario)):
        if i == best:
            out.extend(PairIndex(i, l) for l in range(m))
        else:
            out.append(PairIndex(i, int(ranking.worst_scenario[i])))
    return out


def omega_mask(ranking: Ranking, m: int) -> np.ndarray:
    mask = np.zeros((len(ranking.worst_scenario), m), dtype=bool)
    for pair in candidate_pairs(ranking, m):
        mask[pair] = True
    return mask


def next_var_matrix(state: PosteriorState) -> np.ndarray:
    out = np.empty(state.shape)
    for idx in np.ndindex(state.shape):
        out[idx] = next_posterior_var(state.count[idx], state.sampling_var[idx], state.prior_prec[idx])
    return out


@njit(cache=True, nogil=True)
def _terms(mean, var, best, worst):
    """Radius matrix R2[l, i] (column ``best`` is +inf)."""
    k, m = mean.shape
    r2 = np.full((m, k), np.inf)
    for i in range(k):
        if i == best:
            continue
        w = worst[i]
        for l in range(m):
            gap = mean[best, l] - mean[i, w]
            r2[l, i] = gap * gap / (var[best, l] + var[i, w])
    return r2


@njit(cache=True, nogil=True)
def lookahead_kernel(mean, var, next_var, best, worst, j, s):
    """Lookahead value of sampling (j, s); pairs outside the candidate set
    leave every radius term untouched."""
    k, m = mean.shape
    r2 = _terms(mean, var, best, worst)
    val = np.inf
    if j == best:
        for i in range(k):
            if i == best:
                continue
            w = worst[i]
            gap = mean[best, s] - mean[i, w]
            t = gap * gap / (next_var[best, s] + var[i, w])
            if t < val:
                val = t
        for l in range(m):
            if l == s:
                continue
            for i in range(k):
                if r2[l, i] < val:
                    val = r2[l, i]
    elif s == worst[j]:
        for l in range(m):
            gap = mean[best, l] - mean[j, s]
            t = gap * gap / (var[best, l] + next_var[j, s])
            if t < val:
                val = t
        for l in range(m):
            for i in range(k):
                if i != j and r2[l, i] < val:
                    val = r2[l, i]
    else:
        for l in range(m):
            for i in range(k):
                if r2[l, i] < val:
                    val = r2[l, i]
    return val


@njit(cache=True, nogil=True)
def raoda_kernel(mean, var, next_var, best, worst):
    """Argmax of the lookahead value over the candidate set.

    Uses per-row and per-column minima of the radius matrix so each candidate
    costs O(k + m). Ties resolve to the lexicographically lowest pair.
    """
    k, m = mean.shape
    r2 = _terms(mean, var, best, worst)
    row_min = np.full(m, np.inf)
    col_min = np.full(k, np.inf)
    for l in range(m):
        for i in range(k):
            v = r2[l, i]
            if v < row_min[l]:
                row_min[l] = v
            if v < col_min[i]:
                col_min[i] = v
    # smallest and second smallest row / column minima with their positions
    r1 = np.inf
    r1_at = -1
    r2nd = np.inf
    for l in range(m):
        v = row_min[l]
        if v < r1:
            r2nd = r1
            r1 = v
            r1_at = l
        elif v < r2nd:
            r2nd = v
    c1 = np.inf
    c1_at = -1
    c2nd = np.inf
    for i in range(k):
        v = col_min[i]
        if v < c1:
            c2nd = c1
            c1 = v
            c1_at = i
        elif v < c2nd:
            c2nd = v

    best_val = -np.inf
    pick_j = -1
    pick_s = -1
    for j in range(k):
        if j == best:
            for s in range(m):
                val = r2nd if s == r1_at else r1
                for i in range(k):
                    if i == best:
                        continue
                    w = worst[i]
                    gap = mean[best, s] - mean[i, w]
                    t = gap * gap / (next_var[best, s] + var[i, w])
                    if t < val:
                        val = t
                if val > best_val:
                    best_val = val
                    pick_j = j
                    pick_s = s
        else:
            s = worst[j]
            val = c2nd if j == c1_at else c1
            for l in range(m):
                gap = mean[best, l] - mean[j, s]
                t = gap * gap / (var[best, l] + next_var[j, s])
                if t < val:
                    val = t
            if val > best_val:
                best_val = val
                pick_j = j
                pick_s = s
    return pick_j, pick_s


def _check_policy_state(state: PosteriorState, ranking: Ranking) -> None:
    k, _ = state.shape
    if k < 2:
        raise DegenerateStateError("allocation policy needs k >= 2")
    if np.isnan(state.post_mean).any() or not np.all(state.post_var > 0):
        raise DegenerateStateError("posterior undefined or degenerate for some pair")


def lookahead_value(state: PosteriorState, ranking: Ranking, candidate) -> LookaheadValue:
    _check_policy_state(state, ranking)
    k, m = state.shape
    j, s = int(candidate[0]), int(candidate[1])
    if not (0 <= j < k and 0 <= s < m):
        raise IndexError(f"candidate {(j, s)} out of range")
    worst = np.asarray(ranking.worst_scenario, dtype=np.int64)
    val = lookahead_kernel(state.post_mean, state.post_var, next_var_matrix(state), ranking.best, worst, j, s)
    return LookaheadValue(PairIndex(j, s), float(val))


def raoda_allocate(state: PosteriorState, ranking: Ranking) -> PairIndex:
    _check_policy_state(state, ranking)
    worst = np.asarray(ranking.worst_scenario, dtype=np.int64)
    j, s = raoda_kernel(state.post_mean, state.post_var, next_var_matrix(state), ranking.best, worst)
    return PairIndex(int(j), int(s))


def plugin_lookahead_value(means, sampling_var, counts, ranking: Ranking, candidate) -> float:
    """Frequentist-limit lookahead value: posterior variances replaced by
    sampling_var / count, and by sampling_var / (count + 1) for the candidate."""
    means = np.asarray(means, dtype=float)
    sampling_var = np.asarray(sampling_var, dtype=float)
    counts = np.asarray(counts, dtype=float)
    var = sampling_var / counts
    nxt = sampling_var / (counts + 1.0)
    worst = np.asarray(ranking.worst_scenario, dtype=np.int64)
    j, s = int(candidate[0]), int(candidate[1])
    return float(lookahead_kernel(means, var, nxt, ranking.best, worst, j, s))


def raoda_value_map(state: PosteriorState, ranking: Ranking) -> dict[PairIndex, float]:
    """Lookahead values for every candidate pair (diagnostics and reports)."""
    _, m = state.shape
    return {p: lookahead_value(state, ranking, p).value for p in candidate_pairs(ranking, m)}


__all__ = [
    "LookaheadValue",
    "radius_squared",
    "current_vfa",
    "lookahead_value",
    "raoda_allocate",
    "candidate_pairs",
    "omega_mask",
    "plugin_lookahead_value",
    "raoda_value_map",
]
