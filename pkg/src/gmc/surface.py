"""Correlation surface: localized correlations, local linear fit, region integrals."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .dataset import Dataset
from .errors import EmptyRegion, InvalidRange, TooFewPoints
from .gcc import PairMode, pair_inputs, ratio
from .modulator import half_s_exponent
from .regulator import DensityModel
from .sampler import QueryPoint

log = logging.getLogger(__name__)

MIN_FIT_POINTS = 6
DEFAULT_GRID = 50
MAX_CONDITION = 1e8
NN_FLOOR_FACTOR = 1.5
EXCLUDED_WARN_FRACTION = 0.10

QUALITY_REGIONS = ("LQ", "MQ", "HQ")
DIFFERENCE_REGIONS = ("LD", "MD", "HD")


# ---------------------------------------------------------------- queries


def evaluate_queries(
    ds: Dataset,
    dm: DensityModel,
    points: Sequence[QueryPoint],
    mode: PairMode = PairMode.SRCC,
    pd_variance_scale: float = 1.0,
    cutoff: float = 0.0,
) -> list[QueryPoint]:
    """Localized weighted correlation at every query point.

    Weights are ``p_s * p_d * p_t`` per pair; a point whose weighted support
    collapses gets ``gamma = None``.
    """
    if not points:
        return []
    x, y = pair_inputs(ds, mode)
    q = ds.mos
    sig2 = ds.sigma**2
    t = dm.inverse(q)
    qs = np.array([p.qs for p in points], dtype=float)
    qd = np.array([p.qd for p in points], dtype=float)
    half = half_s_exponent(qs[:, None], q[None, :], ds.sigma[None, :])
    sums = _kernels.weighted_pair_sums(x, y, mode.uses_sign, q, sig2, half, qd, pd_variance_scale, t, cutoff)
    return [QueryPoint(p.qs, p.qd, ratio(*s)) for p, s in zip(points, sums)]


def evaluate_query(ds, dm, pt: QueryPoint, mode: PairMode = PairMode.SRCC, **kw) -> QueryPoint:
    return evaluate_queries(ds, dm, [pt], mode, **kw)[0]


# ---------------------------------------------------------------- fitting


def silverman_bandwidth(x: np.ndarray) -> float:
    """One-dimensional rule of thumb ``0.9 min(std, IQR/1.34) n^(-1/5)``."""
    std = float(np.std(x))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(std, (q75 - q25) / 1.34) if q75 > q25 else std
    return 0.9 * spread * x.size ** (-0.2)


def mean_spacing(x: np.ndarray) -> float:
    s = np.diff(np.sort(x))
    s = s[s > 0]
    return float(s.mean()) if s.size else 0.0


def _axis_bandwidth(x: np.ndarray, span: float) -> float:
    h = max(silverman_bandwidth(x), NN_FLOOR_FACTOR * mean_spacing(x))
    # all coordinates equal along an axis: fall back to the domain width
    return h if h > 0 else span


def local_linear(
    xs: np.ndarray,
    ys: np.ndarray,
    values: np.ndarray,
    gx: np.ndarray,
    gy: np.ndarray,
    hx: float,
    hy: float,
) -> np.ndarray:
    """Local linear estimate at each ``(gx, gy)`` with a product Gaussian kernel.

    Offsets are scaled by the bandwidths so the 3x3 normal matrix condition
    number is unit-free; nodes whose matrix is worse than ``1e8`` fall back
    to the kernel-weighted mean.
    """
    dx = (xs[None, :] - gx[:, None]) / hx
    dy = (ys[None, :] - gy[:, None]) / hy
    w = np.exp(-0.5 * (dx * dx + dy * dy))
    s0 = w.sum(1)
    sx = (w * dx).sum(1)
    sy = (w * dy).sum(1)
    sxx = (w * dx * dx).sum(1)
    sxy = (w * dx * dy).sum(1)
    syy = (w * dy * dy).sum(1)
    A = np.stack(
        [
            np.stack([s0, sx, sy], -1),
            np.stack([sx, sxx, sxy], -1),
            np.stack([sy, sxy, syy], -1),
        ],
        -2,
    )
    rhs = np.stack([w @ values, (w * dx) @ values, (w * dy) @ values], -1)

    out = np.empty(gx.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.linalg.cond(A)
    good = np.isfinite(cond) & (cond <= MAX_CONDITION)
    if good.any():
        out[good] = np.linalg.solve(A[good], rhs[good][..., None])[:, 0, 0]
    bad = ~good
    if bad.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            out[bad] = rhs[bad, 0] / s0[bad]
        out[bad & ~np.isfinite(out)] = float(np.mean(values))
    return out


@dataclass
class CorrelationSurface:
    grid: np.ndarray  # indexed [qs, qd]
    qs_axis: np.ndarray
    qd_axis: np.ndarray
    qs_range: tuple[float, float]
    qd_range: tuple[float, float]
    fit_bandwidths: tuple[float, float]
    source_points: list[QueryPoint]
    excluded_count: int = 0

    @property
    def cell_size(self) -> tuple[float, float]:
        g_s, g_d = self.grid.shape
        return (
            (self.qs_range[1] - self.qs_range[0]) / g_s,
            (self.qd_range[1] - self.qd_range[0]) / g_d,
        )

    def __call__(self, qs, qd) -> np.ndarray:
        """Surface value at arbitrary points (same estimator as the grid)."""
        qs, qd = np.broadcast_arrays(np.asarray(qs, dtype=float), np.asarray(qd, dtype=float))
        xs = np.array([p.qs for p in self.source_points])
        ys = np.array([p.qd for p in self.source_points])
        vs = np.array([p.gamma for p in self.source_points])
        out = local_linear(xs, ys, vs, qs.ravel(), qd.ravel(), *self.fit_bandwidths)
        return np.clip(out, -1.0, 1.0).reshape(qs.shape)

    def long_rows(self):
        """``(qs, qd, value)`` for every grid node, qs-major."""
        for i, a in enumerate(self.qs_axis):
            for j, b in enumerate(self.qd_axis):
                yield float(a), float(b), float(self.grid[i, j])


def cell_centers(lo: float, hi: float, g: int) -> np.ndarray:
    return lo + (np.arange(g) + 0.5) * ((hi - lo) / g)


def fit_surface(
    points: Sequence[QueryPoint],
    qs_range: tuple[float, float],
    qd_range: tuple[float, float],
    grid_size: int = DEFAULT_GRID,
    bandwidths: tuple[float, float] | None = None,
) -> CorrelationSurface:
    """Fit the correlation surface on a ``grid_size`` square grid of cell centres."""
    for lo, hi in (qs_range, qd_range):
        if not hi > lo:
            raise InvalidRange(f"degenerate surface range ({lo}, {hi})")
    used = [p for p in points if p.gamma is not None and math.isfinite(p.gamma)]
    excluded = len(points) - len(used)
    if len(used) < MIN_FIT_POINTS:
        raise TooFewPoints(f"need at least {MIN_FIT_POINTS} defined query points, got {len(used)}")
    if points and excluded / len(points) > EXCLUDED_WARN_FRACTION:
        log.warning("%d of %d query points had undefined correlation and were excluded", excluded, len(points))

    xs = np.array([p.qs for p in used])
    ys = np.array([p.qd for p in used])
    vs = np.array([p.gamma for p in used])
    if bandwidths is None:
        bandwidths = (
            _axis_bandwidth(xs, qs_range[1] - qs_range[0]),
            _axis_bandwidth(ys, qd_range[1] - qd_range[0]),
        )
    qs_axis = cell_centers(*qs_range, grid_size)
    qd_axis = cell_centers(*qd_range, grid_size)
    gx, gy = np.meshgrid(qs_axis, qd_axis, indexing="ij")
    values = local_linear(xs, ys, vs, gx.ravel(), gy.ravel(), *bandwidths).reshape(gx.shape)
    return CorrelationSurface(
        grid=np.clip(values, -1.0, 1.0),
        qs_axis=qs_axis,
        qd_axis=qd_axis,
        qs_range=(float(qs_range[0]), float(qs_range[1])),
        qd_range=(float(qd_range[0]), float(qd_range[1])),
        fit_bandwidths=(float(bandwidths[0]), float(bandwidths[1])),
        source_points=list(used),
        excluded_count=excluded,
    )


# ---------------------------------------------------------------- integrals


@dataclass(frozen=True)
class Rect:
    qs: tuple[float, float]
    qd: tuple[float, float]

    @property
    def area(self) -> float:
        return (self.qs[1] - self.qs[0]) * (self.qd[1] - self.qd[0])


def _overlap(edges_lo: np.ndarray, edges_hi: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return np.clip(np.minimum(edges_hi, hi) - np.maximum(edges_lo, lo), 0.0, None)


def integrate(surface: CorrelationSurface, region: Rect | None = None) -> float:
    """Area-normalized midpoint-rule integral over ``region`` (default: whole domain).

    Cells cut by the region boundary contribute in proportion to their
    overlap.
    """
    if region is None:
        region = Rect(surface.qs_range, surface.qd_range)
    tol = 1e-9 * max(1.0, abs(surface.qs_range[1]), abs(surface.qd_range[1]))
    if (
        region.qs[0] < surface.qs_range[0] - tol
        or region.qs[1] > surface.qs_range[1] + tol
        or region.qd[0] < surface.qd_range[0] - tol
        or region.qd[1] > surface.qd_range[1] + tol
    ):
        raise InvalidRange(f"region {region} lies outside the surface domain")
    g_s, g_d = surface.grid.shape
    es = np.linspace(*surface.qs_range, g_s + 1)
    ed = np.linspace(*surface.qd_range, g_d + 1)
    ws = _overlap(es[:-1], es[1:], *region.qs)
    wd = _overlap(ed[:-1], ed[1:], *region.qd)
    area = ws.sum() * wd.sum()
    if not area > 0:
        raise EmptyRegion(f"region {region} has no overlap with the surface grid")
    value = float(ws @ surface.grid @ wd) / area
    return min(1.0, max(-1.0, value))


def thirds(lo: float, hi: float) -> list[tuple[float, float]]:
    a = lo + (hi - lo) / 3.0
    b = lo + 2.0 * (hi - lo) / 3.0
    return [(lo, a), (a, b), (b, hi)]


def region_partition(qs_range, qd_range) -> dict[str, Rect]:
    """Equal-width thirds of each axis, the other axis kept whole."""
    qs_range = (float(qs_range[0]), float(qs_range[1]))
    qd_range = (float(qd_range[0]), float(qd_range[1]))
    out = {}
    for name, r in zip(QUALITY_REGIONS, thirds(*qs_range)):
        out[name] = Rect(r, qd_range)
    for name, r in zip(DIFFERENCE_REGIONS, thirds(*qd_range)):
        out[name] = Rect(qs_range, r)
    return out


# ---------------------------------------------------------------- report


@dataclass
class GmcReport:
    gmc_g: float
    gmc_s: dict[str, float]
    gmc_d: dict[str, float]
    baselines: dict[str, float | None]
    metric_mode: PairMode
    k_used: int
    seed: int
    config_digest: str
    excluded_count: int = 0
    qs_range: tuple[float, float] = (0.0, 100.0)
    qd_range: tuple[float, float] = (0.0, 100.0)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "gmc_g": self.gmc_g,
            "gmc_s": dict(self.gmc_s),
            "gmc_d": dict(self.gmc_d),
            "baselines": dict(self.baselines),
            "metric_mode": self.metric_mode.value,
            "k_used": self.k_used,
            "excluded_count": self.excluded_count,
            "qs_range": list(self.qs_range),
            "qd_range": list(self.qd_range),
            "seed": self.seed,
            "config_digest": self.config_digest,
            **self.extra,
        }
