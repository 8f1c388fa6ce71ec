"""Sequential allocate-simulate-update loop, macro-replications and PCS curves.

Randomness of replication ``r`` comes only from ``(seed, r)``:

* stream 0 draws the true means (when they come from the prior);
* stream 1 draws one standard normal per simulation call, consumed in call
  order (warmup in row-major pair order, then one per policy step).

Every policy therefore sees the same means and the same noise sequence for a
given replication, and results do not depend on how replications are scheduled.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .asymptotics import (
    AllocationRatios,
    empirical_ratios,
    optimality_residuals,
    solve_optimal_ratios,
)
from .baselines import PolicyKind, deficit_on_omega, ea_kernel, ptv_kernel, rocba_kernel, welford_update
from .config import ExperimentConfig
from .problem import (
    AssumptionViolation,
    PosteriorState,
    ProblemSpec,
    Ranking,
    check_unique_worst_case,
    compute_ranking,
    next_posterior_var,
    posterior_pair,
    prior_precision,
    rank_kernel,
    rank_means,
)
from .vfa import raoda_kernel

MEAN_STREAM = 0
NOISE_STREAM = 1
MAX_REDRAWS = 1000

RAODA, ROCBA, EA, PTV = (PolicyKind.RAODA.code, PolicyKind.ROCBA.code, PolicyKind.EA.code, PolicyKind.PTV.code)


@njit(cache=True, nogil=True)
def _simulate(policy, true_mean, sampling_var, prior_mean, prior_var, prior_prec,
              n0, budget, z, checkpoints, resolve_every):
    k, m = true_mean.shape
    count = np.zeros((k, m), dtype=np.int64)
    total = np.zeros((k, m))
    mean = np.empty((k, m))
    var = np.empty((k, m))
    nxt = np.empty((k, m))
    w_count = np.zeros((k, m), dtype=np.int64)
    w_mean = np.zeros((k, m))
    w_m2 = np.zeros((k, m))
    sd = np.sqrt(sampling_var)
    pos = 0
    for i in range(k):
        for d in range(m):
            for _ in range(n0):
                x = true_mean[i, d] + sd[i, d] * z[pos]
                pos += 1
                count[i, d] += 1
                total[i, d] += x
                welford_update(w_count, w_mean, w_m2, i, d, x)
    for i in range(k):
        for d in range(m):
            mean[i, d], var[i, d] = posterior_pair(
                count[i, d], total[i, d], sampling_var[i, d], prior_mean[i, d], prior_var[i, d], prior_prec[i, d])
            nxt[i, d] = next_posterior_var(count[i, d], sampling_var[i, d], prior_prec[i, d])

    selected = np.full(checkpoints.size, -1, dtype=np.int64)
    worst = np.zeros(k, dtype=np.int64)
    alpha = np.zeros((k, m))
    warm = np.zeros((m, k), dtype=np.bool_)
    have_warm = False
    since_solve = resolve_every
    fallbacks = 0
    cp = 0
    t = pos
    while True:
        best = rank_kernel(mean, worst)
        while cp < checkpoints.size and checkpoints[cp] == t:
            selected[cp] = best
            cp += 1
        if t >= budget:
            break
        if policy == 0:
            i, d = raoda_kernel(mean, var, nxt, best, worst)
        elif policy == 1:
            if since_solve >= resolve_every:
                ok, i, d, alpha, edges = rocba_kernel(mean, sampling_var, count, float(t), best, worst, warm, have_warm)
                if ok:
                    warm = edges
                    have_warm = True
                    since_solve = 1
                else:
                    fallbacks += 1
                    have_warm = False
            else:
                i, d = deficit_on_omega(alpha, count, float(t), best, worst)
                since_solve += 1
        elif policy == 2:
            i, d = ea_kernel(count)
        else:
            s2 = np.empty((k, m))
            for a in range(k):
                for b in range(m):
                    s2[a, b] = w_m2[a, b] / (w_count[a, b] - 1)
            i, d = ptv_kernel(count, s2, float(t))
        x = true_mean[i, d] + sd[i, d] * z[pos]
        pos += 1
        count[i, d] += 1
        total[i, d] += x
        welford_update(w_count, w_mean, w_m2, i, d, x)
        mean[i, d], var[i, d] = posterior_pair(
            count[i, d], total[i, d], sampling_var[i, d], prior_mean[i, d], prior_var[i, d], prior_prec[i, d])
        nxt[i, d] = next_posterior_var(count[i, d], sampling_var[i, d], prior_prec[i, d])
        t += 1
    return selected, count, total, fallbacks


def replication_rng(seed: int, r: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(r), int(stream)])


def draw_true_mean(config: ExperimentConfig, r: int) -> tuple[np.ndarray, int]:
    """True means of replication ``r`` and the number of redraws needed to
    satisfy the unique-worst-case assumption."""
    if config.mean_source == "fixed":
        return np.array(config.true_mean), 0
    rng = replication_rng(config.seed, r, MEAN_STREAM)
    sd = np.sqrt(config.prior_var)
    for redraws in range(MAX_REDRAWS):
        mu = config.prior_mean + sd * rng.standard_normal((config.k, config.m))
        try:
            check_unique_worst_case(mu)
        except AssumptionViolation:
            continue
        return mu, redraws
    raise AssumptionViolation(f"no valid mean draw after {MAX_REDRAWS} attempts")


def noise_sequence(config: ExperimentConfig, r: int) -> np.ndarray:
    return replication_rng(config.seed, r, NOISE_STREAM).standard_normal(config.budget)


@dataclass(frozen=True)
class ReplicationResult:
    replication: int
    true_mean: np.ndarray
    true_best: int
    checkpoints: tuple[int, ...]
    selected: np.ndarray
    state: PosteriorState
    redraws: int = 0
    fallbacks: int = 0

    @property
    def correct(self) -> np.ndarray:
        return self.selected == self.true_best


def run_replication(config: ExperimentConfig, r: int) -> ReplicationResult:
    mu, redraws = draw_true_mean(config, r)
    spec = ProblemSpec(mu, config.sampling_var, config.prior_mean, config.prior_var)
    wc = mu.min(axis=1)
    selected, count, total, fallbacks = _simulate(
        config.policy.code, spec.true_mean, spec.sampling_var, spec.prior_mean, spec.prior_var,
        prior_precision(spec.prior_var), config.warmup, config.budget, noise_sequence(config, r),
        np.asarray(config.checkpoints, dtype=np.int64), config.rocba_resolve_every,
    )
    state = PosteriorState.from_statistics(spec, count, total)
    return ReplicationResult(r, mu, int(np.argmax(wc)), config.checkpoints, selected, state, redraws, int(fallbacks))


@dataclass(frozen=True)
class PcsRow:
    budget: int
    policy: str
    pcs: float
    stderr: float
    reps: int


@dataclass(frozen=True)
class PcsCurve:
    rows: tuple[PcsRow, ...] = ()
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __add__(self, other: "PcsCurve") -> "PcsCurve":
        diag = dict(self.diagnostics)
        diag.update(other.diagnostics)
        return PcsCurve(self.rows + other.rows, diag)

    def for_policy(self, policy) -> list[PcsRow]:
        name = PolicyKind.parse(policy).value
        return [row for row in self.rows if row.policy == name]

    def final(self, policy) -> PcsRow:
        return max(self.for_policy(policy), key=lambda row: row.budget)


def pcs_row(budget: int, policy: str, correct: int, reps: int) -> PcsRow:
    p = correct / reps
    return PcsRow(int(budget), policy, p, math.sqrt(p * (1.0 - p) / reps), reps)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> PcsCurve:
    """Run ``config.reps`` replications and estimate PCS at every checkpoint.

    With ``workers > 1`` replications run on a thread pool; the simulation
    kernel releases the GIL. Output is identical to a serial run.
    """
    reps = range(config.reps)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: run_replication(config, r), reps))
    else:
        results = [run_replication(config, r) for r in reps]
    hits = np.zeros(len(config.checkpoints), dtype=np.int64)
    for res in results:
        hits += res.correct
    name = config.policy.value
    rows = tuple(pcs_row(b, name, int(h), config.reps) for b, h in zip(config.checkpoints, hits))
    diag = {name: {"redraws": sum(r.redraws for r in results), "fallbacks": sum(r.fallbacks for r in results)}}
    return PcsCurve(rows, diag)


def emit_csv(curve: PcsCurve, path) -> None:
    """Write ``budget,policy,pcs,stderr,reps`` sorted by budget then policy."""
    path = Path(path)
    rows = sorted(curve.rows, key=lambda row: (row.budget, row.policy))
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["budget", "policy", "pcs", "stderr", "reps"])
            for row in rows:
                writer.writerow([row.budget, row.policy, f"{row.pcs:.6g}", f"{row.stderr:.6g}", row.reps])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def budget_to_reach(rows, threshold: float) -> int | None:
    """Smallest checkpoint budget whose PCS reaches ``threshold``."""
    for row in sorted(rows, key=lambda row: row.budget):
        if row.pcs >= threshold:
            return row.budget
    return None


# ---------------------------------------------------------------------------
# posterior probability of correct selection


def posterior_pcs_events(state: PosteriorState, ranking: Ranking, draws: int, rng: np.random.Generator,
                         chunk: int = 20_000) -> tuple[np.ndarray, np.ndarray]:
    """Indicators of the lower-bound event and the exact correct-selection
    event on the same independent posterior draws.

    Bound event: every best-side mean exceeds every competitor's mean at its
    posterior worst scenario. Exact event: the posterior best keeps the largest
    worst-case mean.
    """
    if draws < 1:
        raise ValueError("draws must be at least 1")
    mean = np.asarray(state.post_mean, dtype=float)
    sd = np.sqrt(np.asarray(state.post_var, dtype=float))
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(sd))):
        raise ValueError("posterior must be defined and proper for every pair")
    k, m = mean.shape
    b = ranking.best
    comps = np.array([i for i in range(k) if i != b], dtype=np.int64)
    worst = np.asarray(ranking.worst_scenario)[comps]
    bound = np.empty(draws, dtype=bool)
    exact = np.empty(draws, dtype=bool)
    done = 0
    while done < draws:
        n = min(chunk, draws - done)
        mu = mean + sd * rng.standard_normal((n, k, m))
        best_min = mu[:, b, :].min(axis=1)
        if comps.size:
            bound[done:done + n] = best_min >= mu[:, comps, worst].max(axis=1)
            exact[done:done + n] = best_min >= mu[:, comps, :].min(axis=2).max(axis=1)
        else:
            bound[done:done + n] = True
            exact[done:done + n] = True
        done += n
    return bound, exact


def estimate_posterior_pcs_bound(state: PosteriorState, ranking: Ranking, draws: int, rng) -> float:
    bound, _ = posterior_pcs_events(state, ranking, draws, rng)
    return float(bound.mean())


def estimate_posterior_pcs(state: PosteriorState, ranking: Ranking, draws: int, rng) -> float:
    _, exact = posterior_pcs_events(state, ranking, draws, rng)
    return float(exact.mean())


# ---------------------------------------------------------------------------
# ratio diagnostics


@dataclass(frozen=True)
class RatioReport:
    empirical: AllocationRatios
    target: AllocationRatios
    residuals: tuple[float, float, float] | None
    max_deviation: float
    result: ReplicationResult


def ratio_report(config: ExperimentConfig, r: int = 0) -> RatioReport:
    """Empirical shares of one run against the optimal shares computed from the
    run's true means and sampling variances."""
    result = run_replication(config, r)
    truth = rank_means(result.true_mean)
    target = solve_optimal_ratios(result.true_mean, config.sampling_var, truth)
    emp = empirical_ratios(result.state, truth)
    try:
        res = optimality_residuals(emp, result.true_mean, config.sampling_var, truth)
    except ValueError:
        res = None
    dev = float(np.abs(emp.alpha - target.alpha).max())
    return RatioReport(emp, target, res, dev, result)


def warmup_state(config: ExperimentConfig, r: int = 0) -> tuple[PosteriorState, Ranking]:
    short = config.with_overrides(budget=config.warmup_total)
    state = run_replication(short, r).state
    return state, compute_ranking(state)


__all__ = [
    "ReplicationResult",
    "PcsRow",
    "PcsCurve",
    "RatioReport",
    "run_replication",
    "run_experiment",
    "emit_csv",
    "budget_to_reach",
    "draw_true_mean",
    "noise_sequence",
    "posterior_pcs_events",
    "estimate_posterior_pcs_bound",
    "estimate_posterior_pcs",
    "ratio_report",
    "warmup_state",
]
