"""Stability of SRCC and GMC_g under imbalanced MOS subsets.

Subsets are drawn without replacement with per-image probability
proportional to a Gaussian mixture over MOS, then every model is re-scored
on each subset. The density model is refitted per subset so the regulator
sees the shifted distribution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError, SubsetTooLarge
from .gcc import PairMode, classical_correlation
from .pipeline import GmcConfig, compute_gmc


@dataclass(frozen=True)
class Mode:
    center: float
    width: float
    weight: float = 1.0


@dataclass(frozen=True)
class ResamplePlan:
    modes: tuple[Mode, ...]
    subset_size: int | None = None
    seed: int = 0
    replacement: bool = False
    label: str = ""

    def validate(self, n: int) -> int:
        """Check the plan against a dataset of size ``n``; return the subset size."""
        if not self.modes:
            raise ConfigError("a resample plan needs at least one mode")
        for m in self.modes:
            if not m.width > 0:
                raise ConfigError(f"mode width must be positive, got {m.width}")
            if m.weight < 0:
                raise ConfigError(f"mode weight must be nonnegative, got {m.weight}")
        total = math.fsum(m.weight for m in self.modes)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"mixture weights must sum to 1, got {total}")
        size = default_subset_size(n) if self.subset_size is None else int(self.subset_size)
        if size < 3:
            raise ConfigError(f"subset size must be at least 3, got {size}")
        if not self.replacement and size > n:
            raise SubsetTooLarge(f"subset of {size} requested from {n} samples without replacement")
        return size

    def with_seed(self, seed: int) -> "ResamplePlan":
        return ResamplePlan(self.modes, self.subset_size, seed, self.replacement, self.label)


def default_subset_size(n: int) -> int:
    return min(1000, n // 2)


def default_plans(seed: int = 0, subset_size: int | None = None) -> list[ResamplePlan]:
    """Nine stand-in plans: three unimodal, three bimodal, three trimodal."""
    third = 1.0 / 3.0
    specs = [
        ("uni-30", [(30, 10, 1.0)]),
        ("uni-50", [(50, 10, 1.0)]),
        ("uni-70", [(70, 10, 1.0)]),
        ("bi-25-75", [(25, 8, 0.5), (75, 8, 0.5)]),
        ("bi-20-60", [(20, 8, 0.5), (60, 8, 0.5)]),
        ("bi-40-80", [(40, 8, 0.5), (80, 8, 0.5)]),
        ("tri-even", [(20, 7, third), (50, 7, third), (80, 7, third)]),
        ("tri-low", [(20, 7, 0.5), (50, 7, 0.25), (80, 7, 0.25)]),
        ("tri-high", [(20, 7, 0.25), (50, 7, 0.25), (80, 7, 0.5)]),
    ]
    seeds = np.random.SeedSequence(seed).generate_state(len(specs), dtype=np.uint64)
    return [
        ResamplePlan(tuple(Mode(c, w, p) for c, w, p in modes), subset_size, int(s), False, label)
        for (label, modes), s in zip(specs, seeds)
    ]


def selection_weights(mos: np.ndarray, modes: Sequence[Mode]) -> np.ndarray:
    """Unnormalized selection weight of each sample under the mixture."""
    w = np.zeros_like(np.asarray(mos, dtype=float))
    for m in modes:
        w = w + m.weight * np.exp(-((mos - m.center) ** 2) / (2.0 * m.width**2))
    return w


def draw_indices(mos: np.ndarray, plan: ResamplePlan) -> np.ndarray:
    size = plan.validate(mos.size)
    w = selection_weights(mos, plan.modes)
    nonzero = int(np.count_nonzero(w))
    if nonzero == 0 or (not plan.replacement and nonzero < size):
        raise DataError(
            f"plan '{plan.label}' gives nonzero selection weight to {nonzero} samples, fewer than {size}"
        )
    rng = np.random.default_rng(plan.seed)
    idx = rng.choice(mos.size, size=size, replace=plan.replacement, p=w / w.sum())
    return np.sort(idx)


def draw_subset(ds: Dataset, plan: ResamplePlan) -> Dataset:
    """Probability-weighted subset; deterministic for a given plan seed."""
    return ds.take(draw_indices(ds.mos, plan))


@dataclass
class SubsetRow:
    index: int
    label: str
    model: str
    n: int
    srcc: float | None
    gmc_g: float
    density_digest: str


@dataclass
class RobustnessReport:
    rows: list[SubsetRow]
    dispersion: dict[str, dict[str, float]] = field(default_factory=dict)

    def values(self, model: str, metric: str) -> np.ndarray:
        return np.array([getattr(r, metric) for r in self.rows if r.model == model], dtype=float)


def _dispersion(values: np.ndarray) -> tuple[float, float]:
    values = values[np.isfinite(values)]
    if values.size == 0:
        return math.nan, math.nan
    return float(values.mean()), float(values.std())


def run_protocol(
    models: Mapping[str, Dataset],
    plans: Sequence[ResamplePlan],
    config: GmcConfig = GmcConfig(),
    threads: int = 1,
) -> RobustnessReport:
    """Score every model on every subset and summarize the spread.

    All models must share the MOS column; the subsets are drawn once from it
    so every model is scored on the same images.
    """
    if not models:
        raise ConfigError("no models given")
    names = list(models)
    ref = models[names[0]]
    for name in names[1:]:
        if models[name].mos_digest() != ref.mos_digest():
            raise ConfigError(f"model '{name}' does not share the MOS column of '{names[0]}'")

    subsets = [draw_indices(ref.mos, plan) for plan in plans]

    def job(args):
        s, name = args
        sub = models[name].take(subsets[s])
        result = compute_gmc(sub, config, with_baselines=False)
        return SubsetRow(
            index=s,
            label=plans[s].label or str(s),
            model=name,
            n=sub.n,
            srcc=classical_correlation(sub, PairMode.SRCC),
            gmc_g=result.report.gmc_g,
            density_digest=result.density.digest(),
        )

    tasks = [(s, name) for s in range(len(plans)) for name in names]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, tasks))
    else:
        rows = [job(t) for t in tasks]

    report = RobustnessReport(rows)
    for name in names:
        mean_s, std_s = _dispersion(report.values(name, "srcc"))
        mean_g, std_g = _dispersion(report.values(name, "gmc_g"))
        report.dispersion[name] = {
            "mean_srcc": mean_s,
            "std_srcc": std_s,
            "mean_gmc_g": mean_g,
            "std_gmc_g": std_g,
        }
    return report
