"""Experiment configuration: a flat ``key = value`` text format and built-in presets.

Example::

    # two alternatives, one scenario
    k = 2
    m = 1
    budget = 400
    warmup = 10
    reps = 100
    seed = 7
    policy = raoda
    sampling_var = 1
    mean_source = fixed
    true_mean = 0 1

Matrix fields (``true_mean``, ``prior_mean``, ``prior_var``, ``sampling_var``)
are row-major whitespace- or comma-separated lists; a single number is
broadcast. ``inf`` in ``prior_var`` selects the uninformative prior.
``checkpoints`` is a list of budgets; by default every 200 steps from the end
of the warmup to the budget.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import PolicyKind
from .problem import UNINFORMATIVE, ProblemSpec

CHECKPOINT_STEP = 200
MEAN_SOURCES = ("fixed", "prior")


def default_checkpoints(start: int, budget: int, step: int = CHECKPOINT_STEP) -> tuple[int, ...]:
    points = list(range(start, budget, step))
    points.append(budget)
    return tuple(points)


@dataclass(frozen=True)
class ExperimentConfig:
    k: int
    m: int
    budget: int
    warmup: int
    reps: int
    seed: int
    policy: PolicyKind
    prior_mean: np.ndarray
    prior_var: np.ndarray
    sampling_var: np.ndarray
    mean_source: str = "prior"
    true_mean: np.ndarray | None = None
    checkpoints: tuple[int, ...] = field(default=())
    rocba_resolve_every: int = 1

    def __post_init__(self):
        k, m = int(self.k), int(self.m)
        if k < 1 or m < 1:
            raise ValueError("k and m must be positive")
        object.__setattr__(self, "policy", PolicyKind.parse(self.policy))
        for name in ("prior_mean", "prior_var", "sampling_var"):
            object.__setattr__(self, name, _matrix(getattr(self, name), k, m, name))
        if not np.all(self.sampling_var > 0) or not np.all(np.isfinite(self.sampling_var)):
            raise ValueError("sampling_var must be positive and finite")
        if not np.all(self.prior_var > 0):
            raise ValueError("prior_var must be positive (inf for uninformative)")
        if self.warmup < 2:
            raise ValueError("warmup must be at least 2 samples per pair")
        start = self.warmup * k * m
        if start > self.budget:
            raise ValueError(f"budget {self.budget} is smaller than the warmup total {start}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.rocba_resolve_every < 1:
            raise ValueError("rocba_resolve_every must be at least 1")
        if self.mean_source not in MEAN_SOURCES:
            raise ValueError(f"mean_source must be one of {MEAN_SOURCES}")
        if self.mean_source == "fixed":
            if self.true_mean is None:
                raise ValueError("mean_source = fixed needs true_mean")
            tm = _matrix(self.true_mean, k, m, "true_mean")
            ProblemSpec(tm, self.sampling_var, self.prior_mean, self.prior_var)
            object.__setattr__(self, "true_mean", tm)
        elif not np.all(np.isfinite(self.prior_var)):
            raise ValueError("drawing means from the prior needs a finite prior_var")
        cps = tuple(int(c) for c in self.checkpoints) or default_checkpoints(start, self.budget)
        if list(cps) != sorted(set(cps)):
            raise ValueError("checkpoints must be strictly ascending")
        if cps[0] < start or cps[-1] > self.budget:
            raise ValueError(f"checkpoints must lie in [{start}, {self.budget}]")
        object.__setattr__(self, "checkpoints", cps)

    @property
    def warmup_total(self) -> int:
        return self.warmup * self.k * self.m

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Copy with fields replaced; checkpoints are regenerated when the budget
        changes and no explicit checkpoints are given."""
        if "budget" in changes and "checkpoints" not in changes:
            changes["checkpoints"] = ()
        return replace(self, **changes)


def _matrix(value, k: int, m: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0 or arr.size == 1:
        arr = np.full((k, m), float(arr.ravel()[0]))
    elif arr.size == k * m:
        arr = arr.reshape(k, m)
    else:
        raise ValueError(f"{name} needs 1 or {k * m} values, got {arr.size}")
    arr.setflags(write=False)
    return arr


_INT_KEYS = {"k", "m", "budget", "warmup", "reps", "seed", "rocba_resolve_every"}
_MATRIX_KEYS = {"prior_mean", "prior_var", "sampling_var", "true_mean"}
_KEYS = _INT_KEYS | _MATRIX_KEYS | {"policy", "mean_source", "checkpoints", "preset"}


def _numbers(text: str, key: str) -> list[float]:
    try:
        return [float(tok) for tok in re.split(r"[\s,;]+", text.strip()) if tok]
    except ValueError:
        raise ValueError(f"{key}: expected numbers, got {text!r}") from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse the flat key/value format. ``preset = exp1`` starts from a preset."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value

    fields: dict[str, object] = {}
    for key, value in raw.items():
        if key in _INT_KEYS:
            try:
                fields[key] = int(value)
            except ValueError:
                raise ValueError(f"{source}: {key} must be an integer, got {value!r}") from None
        elif key in _MATRIX_KEYS:
            fields[key] = _numbers(value, key)
        elif key == "checkpoints":
            fields[key] = tuple(int(v) for v in _numbers(value, key))
        else:
            fields[key] = value

    preset_name = fields.pop("preset", None)
    if preset_name is not None:
        return preset(str(preset_name)).with_overrides(**fields)
    missing = [key for key in ("k", "m", "budget", "warmup") if key not in fields]
    if missing:
        raise ValueError(f"{source}: missing required keys {missing}")
    fields.setdefault("reps", 1)
    fields.setdefault("seed", 0)
    fields.setdefault("policy", "raoda")
    fields.setdefault("prior_mean", 0.0)
    fields.setdefault("prior_var", UNINFORMATIVE)
    fields.setdefault("sampling_var", 1.0)
    fields.setdefault("mean_source", "fixed" if "true_mean" in fields else "prior")
    try:
        return ExperimentConfig(**fields)
    except ValueError as exc:
        raise type(exc)(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(text, str(path))


def _fmt_matrix(arr: np.ndarray) -> str:
    flat = np.asarray(arr, dtype=float).ravel()
    if np.all(flat == flat[0]):
        return repr(float(flat[0]))
    return " ".join(repr(float(v)) for v in flat)


def format_config(config: ExperimentConfig) -> str:
    """Render ``config`` in the text format; ``parse_config`` reads it back."""
    lines = [
        f"k = {config.k}",
        f"m = {config.m}",
        f"budget = {config.budget}",
        f"warmup = {config.warmup}",
        f"reps = {config.reps}",
        f"seed = {config.seed}",
        f"policy = {config.policy.value}",
        f"prior_mean = {_fmt_matrix(config.prior_mean)}",
        f"prior_var = {_fmt_matrix(config.prior_var)}",
        f"sampling_var = {_fmt_matrix(config.sampling_var)}",
        f"mean_source = {config.mean_source}",
    ]
    if config.true_mean is not None:
        lines.append(f"true_mean = {_fmt_matrix(config.true_mean)}")
    lines.append("checkpoints = " + " ".join(str(c) for c in config.checkpoints))
    lines.append(f"rocba_resolve_every = {config.rocba_resolve_every}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# presets: k = 10, m = 5, T = 6000, n0 = 40, means drawn from the prior


def _grid_sum(k: int, m: int) -> np.ndarray:
    # 1-based i + d evaluated on 0-based indices
    return np.add.outer(np.arange(k), np.arange(m)) + 2.0


def _preset_exp1() -> dict:
    pv = np.full((10, 5), 0.02)
    pv[0, :] = 0.01
    return dict(prior_var=pv, sampling_var=1.0)


def _preset_exp2() -> dict:
    return dict(prior_var=(3.0 - 0.1 * _grid_sum(10, 5)) ** 2, sampling_var=64.0)


def _preset_exp3() -> dict:
    return dict(prior_var=_grid_sum(10, 5) ** 2, sampling_var=64.0)


PRESETS = {"exp1": _preset_exp1, "exp2": _preset_exp2, "exp3": _preset_exp3}


def preset(name: str, policy="raoda", reps: int = 2000, seed: int = 20240101) -> ExperimentConfig:
    try:
        extra = PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return ExperimentConfig(
        k=10, m=5, budget=6000, warmup=40, reps=reps, seed=seed, policy=policy,
        prior_mean=0.0, mean_source="prior", **extra,
    )


__all__ = [
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "format_config",
    "preset",
    "PRESETS",
    "default_checkpoints",
]
