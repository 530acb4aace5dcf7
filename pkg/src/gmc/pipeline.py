"""End-to-end GMC computation for one model's scores."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

from .dataset import Dataset
from .errors import InvalidRange
from .gcc import PairMode, classical_correlation
from .regulator import DEFAULT_BANDWIDTH, DEFAULT_BINS, DensityMode, DensityModel, fit_density
from .sampler import QueryPoint, SamplePlan, Scheme, sample_points
from .surface import (
    DEFAULT_GRID,
    CorrelationSurface,
    GmcReport,
    evaluate_queries,
    fit_surface,
    integrate,
    region_partition,
)


@dataclass(frozen=True)
class GmcConfig:
    mode: PairMode = PairMode.SRCC
    k: int = 100
    bins: int = DEFAULT_BINS
    grid: int = DEFAULT_GRID
    density_bandwidth: float = DEFAULT_BANDWIDTH
    # None: per-sample KDE when spreads are supplied, else smoothed histogram
    density_mode: DensityMode | None = None
    kernel_smoothing: bool = True
    scheme: Scheme = Scheme.LHS
    seed: int = 0
    shared_u: bool = True
    qs_range: tuple[float, float] | None = None
    qd_range: tuple[float, float] | None = None
    pd_variance_scale: float = 1.0
    weight_cutoff: float = 0.0

    def resolved_density_mode(self, ds: Dataset) -> DensityMode:
        if not self.kernel_smoothing:
            return DensityMode.RAW_BINNED
        if self.density_mode is not None:
            return self.density_mode
        return DensityMode.PER_SAMPLE_KDE if ds.all_sigma_provided else DensityMode.BINNED_SMOOTHED

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, value in d.items():
            if hasattr(value, "value"):
                d[key] = value.value
            elif isinstance(value, tuple):
                d[key] = list(value)
        return d

    def digest(self, *extra: str) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True) + "|" + "|".join(extra)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def with_(self, **changes) -> "GmcConfig":
        return replace(self, **changes)


def default_ranges(ds: Dataset) -> tuple[tuple[float, float], tuple[float, float]]:
    """Empirical MOS support and ``(0, max |q_i - q_j|)``."""
    lo, hi = float(ds.mos.min()), float(ds.mos.max())
    if not hi > lo:
        raise InvalidRange("all MOS values are equal; the query box is degenerate")
    return (lo, hi), (0.0, hi - lo)


@dataclass
class GmcResult:
    report: GmcReport
    surface: CorrelationSurface
    queries: list[QueryPoint]
    density: DensityModel


def compute_gmc(ds: Dataset, config: GmcConfig = GmcConfig(), with_baselines: bool = True) -> GmcResult:
    """Sample query points, evaluate localized correlations, fit and integrate."""
    qs_auto, qd_auto = default_ranges(ds)
    qs_range = tuple(config.qs_range) if config.qs_range is not None else qs_auto
    qd_range = tuple(config.qd_range) if config.qd_range is not None else qd_auto

    dm = fit_density(ds, config.resolved_density_mode(ds), config.bins, config.density_bandwidth)
    plan = SamplePlan(
        qs_range=qs_range,
        qd_range=qd_range,
        k=config.k,
        scheme=config.scheme,
        seed=config.seed,
        shared_u=config.shared_u,
    )
    queries = evaluate_queries(
        ds,
        dm,
        sample_points(plan),
        config.mode,
        pd_variance_scale=config.pd_variance_scale,
        cutoff=config.weight_cutoff,
    )
    surface = fit_surface(queries, qs_range, qd_range, config.grid)

    regions = region_partition(qs_range, qd_range)
    values = {name: integrate(surface, rect) for name, rect in regions.items()}
    baselines = {}
    if with_baselines:
        baselines = {m.name: classical_correlation(ds, m) for m in PairMode}
    report = GmcReport(
        gmc_g=integrate(surface),
        gmc_s={k: values[k] for k in ("LQ", "MQ", "HQ")},
        gmc_d={k: values[k] for k in ("LD", "MD", "HD")},
        baselines=baselines,
        metric_mode=config.mode,
        k_used=len(surface.source_points),
        seed=config.seed,
        config_digest=config.digest(ds.mos_digest()),
        excluded_count=surface.excluded_count,
        qs_range=qs_range,
        qd_range=qd_range,
    )
    return GmcResult(report, surface, queries, dm)
