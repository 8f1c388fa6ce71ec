"""Command line interface: ``run``, ``ratios`` and ``bound`` subcommands."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .baselines import PolicyKind
from .config import ExperimentConfig, load_config, preset
from .harness import (
    emit_csv,
    estimate_posterior_pcs_bound,
    ratio_report,
    replication_rng,
    run_experiment,
    warmup_state,
)

BOUND_STREAM = 2


def _policies(values: list[str]) -> list[PolicyKind]:
    out: list[PolicyKind] = []
    for value in values:
        for name in value.split(","):
            if name.strip():
                kind = PolicyKind.parse(name)
                if kind not in out:
                    out.append(kind)
    return out


def _base_config(args) -> ExperimentConfig:
    if getattr(args, "preset", None):
        return preset(args.preset)
    return load_config(args.config)


def _overrides(args) -> dict:
    changes = {}
    for key in ("budget", "reps", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    return changes


def cmd_run(args) -> int:
    base = _base_config(args).with_overrides(**_overrides(args))
    policies = _policies(args.policy) if args.policy else [base.policy]
    curve = None
    for kind in policies:
        part = run_experiment(base.with_overrides(policy=kind), workers=args.workers)
        curve = part if curve is None else curve + part
        final = part.final(kind)
        print(f"{kind.value}: final pcs {final.pcs:.4f} (se {final.stderr:.4f}) at budget {final.budget}")
        diag = part.diagnostics[kind.value]
        if diag["fallbacks"] or diag["redraws"]:
            print(f"{kind.value}: {diag['fallbacks']} solver fallbacks, {diag['redraws']} mean redraws")
    emit_csv(curve, args.out)
    print(f"wrote {args.out}")
    return 0


def _fmt(values) -> str:
    return " ".join(f"{v:.4f}" for v in values)


def cmd_ratios(args) -> int:
    config = _base_config(args).with_overrides(**_overrides(args))
    if args.policy:
        config = config.with_overrides(policy=PolicyKind.parse(args.policy))
    report = ratio_report(config, args.replication)
    emp, target = report.empirical, report.target
    print(f"policy {config.policy.value}, budget {config.budget}, replication {args.replication}")
    print("pair        empirical  target")
    for i, d in zip(*np.nonzero(target.omega)):
        print(f"({i:2d}, {d:2d})    {emp.alpha[i, d]:.5f}    {target.alpha[i, d]:.5f}")
    print(f"off-candidate mass {emp.off_omega:.5f}")
    print(f"max deviation {report.max_deviation:.5f}")
    if report.residuals is None:
        print("residuals undefined (a candidate pair was never sampled)")
    else:
        print("residuals (scenario, competitor, total balance): " + _fmt(report.residuals))
    return 0


def cmd_bound(args) -> int:
    config = _base_config(args).with_overrides(**_overrides(args))
    state, ranking = warmup_state(config, args.replication)
    rng = replication_rng(config.seed, args.replication, BOUND_STREAM)
    est = estimate_posterior_pcs_bound(state, ranking, args.draws, rng)
    se = (est * (1.0 - est) / args.draws) ** 0.5
    print(f"posterior pcs lower bound {est:.6f} (se {se:.6f}, {args.draws} draws, posterior best {ranking.best})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-rs", description="Robust ranking and selection experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def source(p, presets: bool = True):
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--config", help="config file (key = value format)")
        if presets:
            group.add_argument("--preset", choices=["exp1", "exp2", "exp3"], help="built-in experiment")
        p.add_argument("--budget", type=int, help="total sampling budget T")
        p.add_argument("--seed", type=int, help="master seed")

    run = sub.add_parser("run", help="estimate PCS curves and write a CSV")
    source(run)
    run.add_argument("--policy", action="append", help="raoda|rocba|ea|ptv; repeat or comma-separate")
    run.add_argument("--reps", type=int, help="macro-replications")
    run.add_argument("--workers", type=int, default=1, help="threads for replications")
    run.add_argument("--out", required=True, help="output CSV path")
    run.set_defaults(func=cmd_run)

    ratios = sub.add_parser("ratios", help="empirical vs optimal allocation ratios for one run")
    source(ratios)
    ratios.add_argument("--policy", help="raoda|rocba|ea|ptv")
    ratios.add_argument("--replication", type=int, default=0)
    ratios.set_defaults(func=cmd_ratios)

    bound = sub.add_parser("bound", help="posterior PCS lower bound after the warmup")
    source(bound)
    bound.add_argument("--draws", type=int, default=100_000)
    bound.add_argument("--replication", type=int, default=0)
    bound.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
