"""Acceptance criteria 1-8, each printing one PASS/FAIL line.

Criteria 1 and 2 run the three presets with all four policies at 2000
replications (several minutes on one core). Run on its own with

    python3 -m pytest tests/test_acceptance.py -v
"""

import math
import os
import sys

import numpy as np
import pytest

from helpers import random_state
from robust_rs.baselines import PolicyKind
from robust_rs.config import ExperimentConfig, preset
from robust_rs.harness import (
    budget_to_reach,
    estimate_posterior_pcs,
    estimate_posterior_pcs_bound,
    ratio_report,
    replication_rng,
    run_experiment,
)
from robust_rs.problem import UNINFORMATIVE, PosteriorState, ProblemSpec, compute_ranking, update_posterior
from robust_rs.vfa import lookahead_value, raoda_allocate

from test_harness import fixed_config
from test_vfa import _best_side_value, _competitor_side_value, brute_force_allocate

PRESETS = ("exp1", "exp2", "exp3")
REPS = 2000
SEED = 20240101
THRESHOLDS = {"exp1": 0.45, "exp2": 0.65, "exp3": 0.93}
EXTRA_BUDGET = {"exp1": 856, "exp2": 510, "exp3": 2724}


@pytest.fixture(scope="module")
def preset_curves():
    workers = os.cpu_count() or 1
    curves = {}
    for name in PRESETS:
        curve = None
        for kind in PolicyKind:
            part = run_experiment(preset(name, policy=kind, reps=REPS, seed=SEED), workers=workers)
            curve = part if curve is None else curve + part
        curves[name] = curve
    return curves


def _gap(a, b):
    return a.pcs - b.pcs, math.sqrt(a.stderr**2 + b.stderr**2)


def test_criterion_1_policy_ordering(preset_curves, verdict):
    ok, parts = True, []
    for name in PRESETS:
        final = {kind: preset_curves[name].final(kind) for kind in PolicyKind}
        raoda, rocba = final[PolicyKind.RAODA], final[PolicyKind.ROCBA]
        simple = max(final[PolicyKind.PTV], final[PolicyKind.EA], key=lambda row: row.pcs)
        d1, se1 = _gap(raoda, rocba)
        d2, se2 = _gap(rocba, simple)
        good = d1 > 2 * se1 and d2 > 2 * se2
        ok &= good
        parts.append(
            f"{name}: raoda {raoda.pcs:.4f} rocba {rocba.pcs:.4f} {simple.policy} {simple.pcs:.4f} "
            f"(gaps {d1:+.4f}/{2 * se1:.4f}, {d2:+.4f}/{2 * se2:.4f}) {'ok' if good else 'violated'}"
        )
    verdict(1, ok, "; ".join(parts))


def test_criterion_2_budget_to_threshold(preset_curves, verdict):
    ok, parts = True, []
    for name in PRESETS:
        thr, ref = THRESHOLDS[name], EXTRA_BUDGET[name]
        b_raoda = budget_to_reach(preset_curves[name].for_policy("raoda"), thr)
        b_rocba = budget_to_reach(preset_curves[name].for_policy("rocba"), thr)
        if b_raoda is None or b_rocba is None:
            good, extra = False, None
        else:
            extra = b_rocba - b_raoda
            good = b_raoda < b_rocba and abs(extra - ref) <= 0.5 * ref
        ok &= good
        parts.append(f"{name}@{thr}: raoda {b_raoda} rocba {b_rocba} extra {extra} (ref {ref}) "
                     f"{'ok' if good else 'violated'}")
    verdict(2, ok, "; ".join(parts))


CRIT3_MEANS = [[0.0, 0.6, 1.5], [-0.8, 0.3, 1.0], [0.4, -1.2, 0.9], [1.0, 0.2, -1.6]]


def test_criterion_3_allocation_ratios_converge(verdict):
    config = fixed_config("raoda", means=CRIT3_MEANS, budget=200_000, warmup=10, reps=1, seed=SEED,
                          checkpoints=(200_000,))
    report = ratio_report(config, 0)
    res = report.residuals
    off = report.empirical.off_omega
    ok = res is not None and max(res) < 0.10 and report.max_deviation < 0.05 and off < 0.02
    shown = "undefined" if res is None else ", ".join(f"{r:.4f}" for r in res)
    verdict(3, ok, f"residuals ({shown}) < 0.10, max deviation {report.max_deviation:.4f} < 0.05, "
                   f"off-candidate mass {off:.4f} < 0.02")


def consistency_means(k=5, m=3, gap=1.0):
    # unit gaps: worst-case means 0, -1, ..., -4 with worst scenarios rotating by row
    i = np.arange(k)[:, None]
    d = np.arange(m)[None, :]
    return gap * (-i + (d - i) % m).astype(float)


def test_criterion_4_consistency(verdict):
    checkpoints = (150, 1000, 5000, 20_000, 50_000)
    config = fixed_config("raoda", means=consistency_means(), budget=50_000, warmup=10, reps=500, seed=SEED,
                          checkpoints=checkpoints)
    rows = run_experiment(config, workers=os.cpu_count() or 1).rows
    pcs = [row.pcs for row in rows]
    monotone = all(b >= a - 2 * math.sqrt(ra.stderr**2 + rb.stderr**2)
                   for (a, ra), (b, rb) in zip(zip(pcs, rows), zip(pcs[1:], rows[1:])))
    ok = pcs[-1] >= 0.99 and monotone
    curve = ", ".join(f"{row.budget}:{row.pcs:.3f}" for row in rows)
    verdict(4, ok, f"final pcs {pcs[-1]:.4f} >= 0.99 over 500 reps, non-decreasing within 2 SE ({curve})")


def test_criterion_5_single_scenario_reduction(verdict):
    rng = np.random.default_rng(SEED)
    worst_rel, checked = 0.0, 0
    for _ in range(1000):
        k = int(rng.integers(2, 9))
        s = random_state(rng, k, 1, informative=bool(rng.integers(2)))
        r = compute_ranking(s)
        mu, var = s.post_mean[:, 0], s.post_var[:, 0]
        nvar = 1.0 / (s.prior_prec[:, 0] + (s.count[:, 0] + 1) / s.sampling_var[:, 0])
        for j in range(k):
            got = lookahead_value(s, r, (j, 0)).value
            want = _best_side_value(mu, var, nvar, r.best) if j == r.best else _competitor_side_value(mu, var, nvar, r.best, j)
            worst_rel = max(worst_rel, abs(got - want) / abs(want) if want else abs(got))
            checked += 1
    verdict(5, worst_rel <= 1e-12, f"{checked} candidate values on 1000 states, max relative error {worst_rel:.2e}")


def _from_scratch(xs, sv, pm, pv):
    n, total = len(xs), sum(xs)
    if math.isinf(pv):
        return total / n, sv / n
    var = 1.0 / (1.0 / pv + n / sv)
    return var * (pm / pv + total / sv), var


def test_criterion_6_posterior_updates(verdict):
    rng = np.random.default_rng(SEED)
    worst_rel, perm_ok = 0.0, True
    for _ in range(1000):
        sv = float(rng.uniform(0.05, 50.0))
        pm = float(rng.normal())
        pv = UNINFORMATIVE if rng.random() < 0.3 else float(rng.uniform(0.01, 100.0))
        xs = list(rng.normal(rng.normal(scale=5), math.sqrt(sv), size=int(rng.integers(1, 60))))
        spec = ProblemSpec(np.array([[0.0]]), sv, pm, pv)
        state = PosteriorState.initial(spec)
        for x in xs:
            state = update_posterior(state, spec, (0, 0), x)
        mean, var = _from_scratch(xs, sv, pm, pv)
        worst_rel = max(worst_rel, abs(state.post_var[0, 0] - var) / var,
                        abs(state.post_mean[0, 0] - mean) / max(abs(mean), 1e-300))

        # shuffle, then accumulate each permutation in sorted order
        shuffled = list(rng.permutation(xs))
        finals = []
        for seq in (sorted(xs), sorted(shuffled)):
            s = PosteriorState.initial(spec)
            for x in seq:
                s = update_posterior(s, spec, (0, 0), x)
            finals.append(s)
        a, b = finals
        perm_ok &= (np.array_equal(a.count, b.count) and np.array_equal(a.sum, b.sum)
                    and np.array_equal(a.post_mean, b.post_mean) and np.array_equal(a.post_var, b.post_var))
    ok = worst_rel <= 1e-12 and perm_ok
    verdict(6, ok, f"1000 sequences, max relative error {worst_rel:.2e}; "
                   f"sorted-order permutation invariance {'bit-exact' if perm_ok else 'broken'}")


def test_criterion_7_policy_matches_brute_force(verdict):
    rng = np.random.default_rng(SEED)
    agree = 0
    for _ in range(1000):
        k, m = int(rng.integers(2, 5)), int(rng.integers(1, 5))
        s = random_state(rng, k, m, informative=bool(rng.integers(2)))
        agree += raoda_allocate(s, compute_ranking(s)) == brute_force_allocate(s)
    verdict(7, agree == 1000, f"{agree}/1000 states agree with exhaustive argmax")


def test_criterion_8_bound_estimator(verdict):
    from scipy.stats import norm

    from helpers import state_from

    s = state_from([[0.5], [0.0]], [[4], [2]])
    exact = norm.cdf(0.5 / math.sqrt(s.post_var[0, 0] + s.post_var[1, 0]))
    n = 100_000
    est = estimate_posterior_pcs_bound(s, compute_ranking(s), n, replication_rng(SEED, 0, 2))
    se = math.sqrt(exact * (1 - exact) / n)
    closed_ok = abs(est - exact) <= 3 * se

    rng = np.random.default_rng(SEED)
    draws, below = 10_000, 0
    for _ in range(100):
        k, m = int(rng.integers(2, 7)), int(rng.integers(1, 5))
        st = random_state(rng, k, m, informative=bool(rng.integers(2)))
        r = compute_ranking(st)
        lo = estimate_posterior_pcs_bound(st, r, draws, np.random.default_rng(rng.integers(2**63)))
        full = estimate_posterior_pcs(st, r, draws, np.random.default_rng(rng.integers(2**63)))
        below += lo <= full + 3 * math.sqrt(max(full * (1 - full), 1e-12) / draws)
    ok = closed_ok and below == 100
    verdict(8, ok, f"closed form {exact:.5f} vs estimate {est:.5f} (3 SE {3 * se:.5f}); "
                   f"bound <= direct + 3 SE on {below}/100 states")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
