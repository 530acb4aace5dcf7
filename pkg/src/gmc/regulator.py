"""Quality-density estimation and the inverse-density pair factor.

Pairs from crowded MOS regions are down-weighted by ``1 / (D(q_i) D(q_j))``.
Three estimators are available:

* ``PER_SAMPLE_KDE`` sums a Gaussian bump per sample, each with that
  sample's own rating spread (used when spreads come with the data).
* ``BINNED_SMOOTHED`` histograms the MOS into ``bins`` equal-width bins and
  smooths the bin frequencies with a Gaussian kernel of width ``bandwidth``.
* ``RAW_BINNED`` uses the bin frequency as is (ablation baseline).

Binned densities are rescaled so their mean over ``[0, 100]`` equals one.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .dataset import CANONICAL_MAX, Dataset
from .errors import EmptyDataset

DEFAULT_BINS = 100
DEFAULT_BANDWIDTH = 5.0
DEFAULT_FLOOR = 1e-6
NORM_GRID_POINTS = 1000
_EVAL_CHUNK = 1 << 22


class DensityMode(enum.Enum):
    PER_SAMPLE_KDE = "kde"
    BINNED_SMOOTHED = "binned"
    RAW_BINNED = "raw"


def bin_index(q, bins: int) -> np.ndarray:
    """Bin of each canonical-scale value; 100 falls into the last bin."""
    q = np.asarray(q, dtype=float)
    idx = np.floor(q * (bins / CANONICAL_MAX)).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def bin_centers(bins: int) -> np.ndarray:
    width = CANONICAL_MAX / bins
    return (np.arange(bins) + 0.5) * width


@dataclass(frozen=True, eq=False)
class DensityModel:
    mode: DensityMode
    bins: int = DEFAULT_BINS
    bandwidth: float = DEFAULT_BANDWIDTH
    floor: float = DEFAULT_FLOOR
    bin_freq: np.ndarray | None = None
    # per-sample KDE support
    centers: np.ndarray | None = None
    spreads: np.ndarray | None = None
    # divisor that brings the binned field to unit mean
    norm: float = 1.0
    _digest: str = field(default="", repr=False)

    def raw(self, q) -> np.ndarray:
        """Unfloored density at ``q`` (scalar or array)."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self.mode is DensityMode.PER_SAMPLE_KDE:
            out = np.empty(q.size)
            step = max(1, _EVAL_CHUNK // self.centers.size)
            inv2 = 1.0 / (2.0 * self.spreads**2)
            for s in range(0, q.size, step):
                d = self.centers[None, :] - q[s : s + step, None]
                out[s : s + step] = np.exp(-(d * d) * inv2).mean(axis=1)
            return out
        if self.mode is DensityMode.RAW_BINNED:
            return self.bin_freq[bin_index(q, self.bins)] * self.bins
        return _smoothed(q, self.bin_freq, self.bins, self.bandwidth) / self.norm

    def __call__(self, q):
        """Density floored at ``floor``; scalar in, scalar out."""
        out = np.maximum(self.raw(q), self.floor)
        return float(out[0]) if np.ndim(q) == 0 else out

    def inverse(self, q) -> np.ndarray:
        """Per-sample regulator factor ``1 / max(D(q), floor)``."""
        return 1.0 / np.maximum(self.raw(q), self.floor)

    def digest(self) -> str:
        return self._digest


def _smoothed(q: np.ndarray, freq: np.ndarray, bins: int, bandwidth: float) -> np.ndarray:
    c = bin_centers(bins)
    d = q[:, None] - c[None, :]
    return np.exp(-(d * d) / (2.0 * bandwidth**2)) @ freq


def _digest_of(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
        else:
            h.update(repr(p).encode())
        h.update(b"|")
    return h.hexdigest()


def fit_density(
    ds: Dataset,
    mode: DensityMode | None = None,
    bins: int = DEFAULT_BINS,
    bandwidth: float = DEFAULT_BANDWIDTH,
    floor: float = DEFAULT_FLOOR,
) -> DensityModel:
    """Fit a density model to the dataset's canonical MOS.

    ``mode=None`` picks the per-sample KDE when every spread was supplied
    with the data and the smoothed histogram otherwise.
    """
    if ds is None or ds.n == 0:
        raise EmptyDataset("cannot fit a density to an empty dataset")
    if mode is None:
        mode = DensityMode.PER_SAMPLE_KDE if ds.all_sigma_provided else DensityMode.BINNED_SMOOTHED
    if bins < 1:
        raise ValueError("bins must be positive")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    if not floor > 0:
        raise ValueError("floor must be positive")

    if mode is DensityMode.PER_SAMPLE_KDE:
        centers = np.array(ds.mos, dtype=float)
        spreads = np.array(ds.sigma, dtype=float)
        return DensityModel(
            mode=mode,
            bins=bins,
            bandwidth=bandwidth,
            floor=floor,
            centers=centers,
            spreads=spreads,
            _digest=_digest_of(mode.value, floor, centers, spreads),
        )

    counts = np.bincount(bin_index(ds.mos, bins), minlength=bins).astype(float)
    freq = counts / counts.sum()
    freq.setflags(write=False)
    norm = 1.0
    if mode is DensityMode.BINNED_SMOOTHED:
        grid = np.linspace(0.0, CANONICAL_MAX, NORM_GRID_POINTS)
        norm = float(_smoothed(grid, freq, bins, bandwidth).mean())
    return DensityModel(
        mode=mode,
        bins=bins,
        bandwidth=bandwidth,
        floor=floor,
        bin_freq=freq,
        norm=norm,
        _digest=_digest_of(mode.value, bins, bandwidth, floor, freq),
    )


def p_t(dm: DensityModel, q_i, q_j):
    """Regulator factor ``1 / (D(q_i) D(q_j))`` with both densities floored."""
    out = dm.inverse(q_i) * dm.inverse(q_j)
    return float(out[0]) if np.ndim(q_i) == 0 and np.ndim(q_j) == 0 else out
