"""Generalized correlation coefficient over antisymmetric pair functions.

With pair functions ``a_ij`` (predictions) and ``b_ij`` (MOS) and symmetric
nonnegative pair weights ``w_ij``::

    gamma = sum w a b / (sqrt(sum w a^2) * sqrt(sum w b^2))

summed over all ordered pairs. Uniform weights recover Pearson, Spearman
and Kendall correlation depending on the pair functions.
"""

from __future__ import annotations

import enum
import math
from typing import Callable, Union

import numpy as np
from scipy.stats import kendalltau

from .dataset import Dataset

DEGENERATE_SUM = 1e-12


class PairMode(enum.Enum):
    """Choice of antisymmetric pair functions.

    ``PLCC``: score differences. ``SRCC``: rank differences.
    ``KRCC``: signs of score differences, with ``sgn(0) = 0``.
    """

    PLCC = "plcc"
    SRCC = "srcc"
    KRCC = "krcc"

    @property
    def uses_sign(self) -> bool:
        return self is PairMode.KRCC


# lazily evaluated weights: row(i) -> w[i, :]
WeightRow = Callable[[int], np.ndarray]
Weights = Union[np.ndarray, WeightRow]


def pair_inputs(ds: Dataset, mode: PairMode) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample values whose pairwise differences (or signs) form ``a`` and ``b``."""
    if mode is PairMode.SRCC:
        return ds.pred_ranks, ds.mos_ranks
    return ds.pred, ds.mos


def pair_terms(ds: Dataset, mode: PairMode, i, j) -> tuple[np.ndarray, np.ndarray]:
    """``(a_ij, b_ij)`` for index arrays ``i`` and ``j`` (broadcast)."""
    x, y = pair_inputs(ds, mode)
    i = np.asarray(i)
    j = np.asarray(j)
    a = x[i] - x[j]
    b = y[i] - y[j]
    if mode.uses_sign:
        return np.sign(a), np.sign(b)
    return a, b


def ratio(sab: float, saa: float, sbb: float) -> float | None:
    """Turn the three weighted sums into a coefficient, or ``None`` if degenerate."""
    if not (saa >= DEGENERATE_SUM and sbb >= DEGENERATE_SUM):
        return None
    r = float(sab) / (math.sqrt(saa) * math.sqrt(sbb))
    # Cauchy-Schwarz holds exactly; only rounding can step outside
    return min(1.0, max(-1.0, r))


def _as_row_provider(weights: Weights, n: int) -> WeightRow:
    if callable(weights):
        return weights
    w = np.asarray(weights, dtype=float)
    if w.shape != (n, n):
        raise ValueError(f"weight matrix must be {n}x{n}, got {w.shape}")
    return lambda i: w[i]


def weighted_gcc(ds: Dataset, mode: PairMode, weights: Weights) -> float | None:
    """Weighted GCC over all ordered pairs ``i != j``.

    ``weights`` is either a dense ``n x n`` array or a callable returning
    row ``i`` of the weight matrix, so large ``n`` never needs the full
    matrix in memory. Returns ``None`` when either weighted spread falls
    below ``1e-12``.
    """
    x, y = pair_inputs(ds, mode)
    n = ds.n
    row = _as_row_provider(weights, n)
    parts = ([], [], [])
    for i in range(n):
        w = np.asarray(row(i), dtype=float)
        if w.shape != (n,):
            raise ValueError(f"weight row {i} has shape {w.shape}, expected ({n},)")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        a = x[i] - x
        b = y[i] - y
        if mode.uses_sign:
            a = np.sign(a)
            b = np.sign(b)
        # the i == j term is zero in all three sums
        parts[0].append(np.dot(w, a * b))
        parts[1].append(np.dot(w, a * a))
        parts[2].append(np.dot(w, b * b))
    sab, saa, sbb = (math.fsum(p) for p in parts)
    return ratio(sab, saa, sbb)


def uniform_weights(n: int) -> WeightRow:
    ones = np.ones(n)
    return lambda i: ones


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    xc = x - x.mean()
    yc = y - y.mean()
    return ratio(math.fsum(xc * yc), math.fsum(xc * xc), math.fsum(yc * yc))


def classical_correlation(ds: Dataset, mode: PairMode) -> float | None:
    """Unweighted coefficient in O(n log n); ``None`` when either column is constant.

    PLCC and SRCC use the centered-sum form of the uniform-weight GCC.
    KRCC uses the tie-aware tau-b, which is what the sign-based GCC equals
    when ties are present.
    """
    if np.ptp(ds.pred) == 0 or np.ptp(ds.mos) == 0:
        return None
    if mode is PairMode.KRCC:
        tau = kendalltau(ds.pred, ds.mos, variant="b").statistic
        return None if not math.isfinite(tau) else float(tau)
    x, y = pair_inputs(ds, mode)
    return _pearson(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
