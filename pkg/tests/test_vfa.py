from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_state, state_from
from robust_rs.problem import (
    DegenerateStateError,
    PairIndex,
    compute_ranking,
    next_posterior_var,
    rank_means,
)
from robust_rs.vfa import (
    candidate_pairs,
    current_vfa,
    lookahead_value,
    omega_mask,
    plugin_lookahead_value,
    radius_squared,
    raoda_allocate,
    raoda_value_map,
)


# --- radius_squared / current_vfa ---------------------------------------------

def _two_by_one(mu_best, mu_comp, v_best, v_comp):
    state = state_from([[mu_best], [mu_comp]], [[1], [1]])
    return replace(state, post_var=np.array([[v_best], [v_comp]]))


def test_radius_unit_symmetric_case():
    s = _two_by_one(1.0, 0.0, 0.5, 0.5)
    assert radius_squared(s, compute_ranking(s), 0, 1) == 1.0


def test_radius_zero_gap():
    s = _two_by_one(0.0, 0.0, 0.3, 0.9)
    assert radius_squared(s, compute_ranking(s), 0, 1) == 0.0


def test_radius_hand_value():
    s = _two_by_one(2.0, 0.5, 0.25, 0.5)
    assert radius_squared(s, compute_ranking(s), 0, 1) == pytest.approx(3.0, rel=1e-15)


def test_radius_rejects_best_as_competitor():
    s = _two_by_one(2.0, 0.5, 0.25, 0.5)
    with pytest.raises(ValueError):
        radius_squared(s, compute_ranking(s), 0, 0)


def test_radius_zero_denominator_is_degenerate():
    s = _two_by_one(2.0, 0.5, 0.0, 0.0)
    with pytest.raises(DegenerateStateError):
        radius_squared(s, compute_ranking(s), 0, 1)


def test_current_vfa_all_radii_equal():
    # best [2, 2]; competitors' worst at 1; unit gaps, variances 0.5 -> radius 1
    s = state_from([[2.0, 2.0], [1.0, 3.0], [5.0, 1.0]], [[2, 2], [2, 2], [2, 2]])
    assert current_vfa(s, compute_ranking(s)) == pytest.approx(1.0)


def test_current_vfa_picks_smaller_radius():
    # k=2, m=2: radii 3.0 (scenario 0) and 2.2^2/3.2 (scenario 1)
    s = state_from([[3.0, 2.2], [0.0, 5.0]], [[1, 1], [1, 1]])
    s = replace(s, post_var=np.array([[2.0, 2.2], [1.0, 1.0]]))
    r = compute_ranking(s)
    assert radius_squared(s, r, 0, 1) == pytest.approx(3.0)
    assert radius_squared(s, r, 1, 1) == pytest.approx(1.5125)
    assert current_vfa(s, r) == pytest.approx(1.5125)


def test_current_vfa_needs_two_alternatives():
    s = state_from([[1.0, 2.0]], [[3, 3]])
    with pytest.raises(DegenerateStateError):
        current_vfa(s, compute_ranking(s))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(0, 10**6))
def test_current_vfa_is_a_lower_bound_on_every_radius(k, m, seed):
    s = random_state(np.random.default_rng(seed), k, m)
    r = compute_ranking(s)
    v = current_vfa(s, r)
    for l in range(m):
        for i in range(k):
            if i != r.best:
                assert v <= radius_squared(s, r, l, i)


# --- candidate set ---------------------------------------------------------------

def test_candidate_set_is_best_row_plus_competitor_worst_cells():
    r = rank_means(np.array([[0.0, 1.0, 2.0], [5.0, 4.0, 6.0], [1.0, -1.0, 0.0]]))
    assert r.best == 1
    assert candidate_pairs(r, 3) == [(0, 0), (1, 0), (1, 1), (1, 2), (2, 1)]
    assert omega_mask(r, 3).sum() == 5


# --- lookahead_value -------------------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.booleans(), st.integers(0, 10**6))
def test_lookahead_never_below_current_vfa(k, m, informative, seed):
    s = random_state(np.random.default_rng(seed), k, m, informative)
    r = compute_ranking(s)
    base = current_vfa(s, r)
    cands = set(candidate_pairs(r, m))
    for i in range(k):
        for d in range(m):
            v = lookahead_value(s, r, (i, d)).value
            assert v >= base
            if (i, d) not in cands:
                assert v == base


def test_lookahead_reports_pair_and_value():
    s = state_from([[1.0], [0.0]], [[4], [4]])
    out = lookahead_value(s, compute_ranking(s), (1, 0))
    assert out.pair == PairIndex(1, 0)
    assert out.value == pytest.approx(1.0 / (0.25 + 0.2))


def test_lookahead_uses_prior_precision_in_next_variance():
    s = state_from([[1.0], [0.0]], [[4], [4]], sampling_var=2.0, prior_var=1.0)
    r = compute_ranking(s)
    nv = next_posterior_var(4, 2.0, 1.0)
    assert nv == pytest.approx(1.0 / (1.0 + 5 / 2.0))
    gap = s.post_mean[0, 0] - s.post_mean[1, 0]
    expect = gap**2 / (nv + s.post_var[1, 0])
    assert lookahead_value(s, r, (0, 0)).value == pytest.approx(expect, rel=1e-14)


def test_lookahead_rejects_out_of_range_candidate():
    s = state_from([[1.0], [0.0]], [[4], [4]])
    with pytest.raises(IndexError):
        lookahead_value(s, compute_ranking(s), (2, 0))


def _best_side_value(mu, var, nvar, best):
    return min((mu[best] - mu[i]) ** 2 / (nvar[best] + var[i]) for i in range(len(mu)) if i != best)


def _competitor_side_value(mu, var, nvar, best, j):
    first = (mu[best] - mu[j]) ** 2 / (var[best] + nvar[j])
    rest = [(mu[best] - mu[i]) ** 2 / (var[best] + var[i]) for i in range(len(mu)) if i not in (j, best)]
    return min([first] + rest)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10**6))
def test_single_scenario_matches_select_the_best_formulas(k, seed):
    s = random_state(np.random.default_rng(seed), k, 1)
    r = compute_ranking(s)
    mu, var = s.post_mean[:, 0], s.post_var[:, 0]
    nvar = s.sampling_var[:, 0] / (s.count[:, 0] + 1)
    for j in range(k):
        got = lookahead_value(s, r, (j, 0)).value
        want = _best_side_value(mu, var, nvar, r.best) if j == r.best else _competitor_side_value(mu, var, nvar, r.best, j)
        assert got == pytest.approx(want, rel=1e-12)


def test_plugin_value_uses_counts_plus_one():
    means = np.array([[1.0, 2.0], [0.0, 3.0]])
    counts = np.array([[3, 5], [2, 7]])
    r = rank_means(means)
    got = plugin_lookahead_value(means, 1.0, counts, r, (1, 0))
    # competitor 1's worst is scenario 0; only its term changes
    want = min((1.0 - 0.0) ** 2 / (1 / 3 + 1 / 3), (2.0 - 0.0) ** 2 / (1 / 5 + 1 / 3))
    assert got == pytest.approx(want, rel=1e-14)


# --- raoda_allocate --------------------------------------------------------------

def brute_force_allocate(state):
    """Rebuild every candidate's full radius set from scratch over all k*m pairs."""
    mean, var = state.post_mean, state.post_var
    k, m = mean.shape
    worst = mean.argmin(axis=1)
    wc = mean[np.arange(k), worst]
    best = int(np.argmax(wc))
    top, pick = -np.inf, None
    for j in range(k):
        for s in range(m):
            v2 = var.copy()
            v2[j, s] = next_posterior_var(state.count[j, s], state.sampling_var[j, s], state.prior_prec[j, s])
            val = min(
                (mean[best, l] - mean[i, worst[i]]) ** 2 / (v2[best, l] + v2[i, worst[i]])
                for l in range(m) for i in range(k) if i != best
            )
            if val > top:
                top, pick = val, (j, s)
    return pick


def test_allocates_to_high_variance_binding_best_scenario():
    means = np.array([[1.0, 3.0], [0.0, 2.0], [-1.0, 0.5]])
    s = state_from(means, np.full((3, 2), 10))
    s = replace(s, post_var=np.array([[9.0, 0.01], [0.01, 0.01], [0.01, 0.01]]))
    r = compute_ranking(s)
    assert raoda_allocate(s, r) == (0, 0) == brute_force_allocate(s)


def test_allocates_to_dominant_competitor():
    means = np.array([[2.0, 3.0], [1.5, 4.0], [-1.0, 0.5]])
    s = state_from(means, np.full((3, 2), 10))
    s = replace(s, post_var=np.array([[0.01, 0.01], [5.0, 0.01], [0.01, 0.01]]))
    r = compute_ranking(s)
    assert raoda_allocate(s, r) == (1, 0) == brute_force_allocate(s)


def test_symmetric_state_breaks_tie_to_first_pair():
    s = state_from([[1.0], [-1.0]], [[5], [5]])
    assert raoda_allocate(s, compute_ranking(s)) == (0, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 4), st.integers(1, 4), st.booleans(), st.integers(0, 10**6))
def test_allocation_matches_brute_force(k, m, informative, seed):
    s = random_state(np.random.default_rng(seed), k, m, informative)
    assert raoda_allocate(s, compute_ranking(s)) == brute_force_allocate(s)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.floats(-100, 100), st.integers(0, 10**6))
def test_allocation_invariant_to_mean_translation(k, m, shift, seed):
    s = random_state(np.random.default_rng(seed), k, m)
    moved = replace(s, post_mean=s.post_mean + shift)
    assert raoda_allocate(s, compute_ranking(s)) == raoda_allocate(moved, compute_ranking(moved))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.floats(0.01, 100), st.integers(0, 10**6))
def test_allocation_invariant_to_joint_scaling(k, m, lam, seed):
    s = random_state(np.random.default_rng(seed), k, m)
    lam2 = lam * lam
    scaled = replace(s, post_mean=s.post_mean * lam, post_var=s.post_var * lam2,
                     sampling_var=s.sampling_var * lam2)
    assert raoda_allocate(s, compute_ranking(s)) == raoda_allocate(scaled, compute_ranking(scaled))


def test_value_map_covers_candidates_only():
    s = random_state(np.random.default_rng(5), 4, 3)
    r = compute_ranking(s)
    values = raoda_value_map(s, r)
    assert list(values) == candidate_pairs(r, 3)
    pick = raoda_allocate(s, r)
    assert values[pick] == max(values.values())


def test_allocation_rejects_single_alternative():
    s = state_from([[1.0, 2.0]], [[3, 3]])
    with pytest.raises(DegenerateStateError):
        raoda_allocate(s, compute_ranking(s))


def test_allocation_rejects_zero_variance():
    s = state_from([[1.0], [0.0]], [[3], [3]])
    s = replace(s, post_var=np.array([[0.0], [1.0]]))
    with pytest.raises(DegenerateStateError):
        raoda_allocate(s, compute_ranking(s))
