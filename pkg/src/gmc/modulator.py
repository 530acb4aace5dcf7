"""Granularity weights: how strongly an image pair speaks to a query point.

Each rating is modelled as Gaussian around its MOS with the image's rating
spread. ``p_s`` is the joint likelihood of both images sitting at the query
MOS; ``p_d`` is the likelihood of their MOS gap matching the query gap.
All functions broadcast over numpy arrays.
"""

from __future__ import annotations

import numpy as np

# weights below this are dropped when truncation is enabled
DEFAULT_CUTOFF = 1e-8


def half_s_exponent(qs, q, sigma):
    """Per-image exponent ``-(qs - q)^2 / (2 sigma^2)``; ``p_s`` is exp of the pair sum."""
    q = np.asarray(q, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return -((qs - q) ** 2) / (2.0 * sigma**2)


def p_s(qs, q_i, sigma_i, q_j, sigma_j):
    return np.exp(half_s_exponent(qs, q_i, sigma_i) + half_s_exponent(qs, q_j, sigma_j))


def p_d(qd, q_i, sigma_i, q_j, sigma_j, variance_scale: float = 1.0):
    """Gaussian bump in ``qd`` centred on ``|q_i - q_j|``.

    The exponent denominator is ``sigma_i^2 + sigma_j^2``; pass
    ``variance_scale=2`` for the doubled-variance convention.
    """
    gap = np.abs(np.asarray(q_i, dtype=float) - np.asarray(q_j, dtype=float))
    var = np.asarray(sigma_i, dtype=float) ** 2 + np.asarray(sigma_j, dtype=float) ** 2
    return np.exp(-((qd - gap) ** 2) / (variance_scale * var))


def granularity_weight(qs, qd, q_i, sigma_i, q_j, sigma_j, variance_scale: float = 1.0, cutoff: float = 0.0):
    w = p_s(qs, q_i, sigma_i, q_j, sigma_j) * p_d(qd, q_i, sigma_i, q_j, sigma_j, variance_scale)
    if cutoff > 0:
        w = np.where(w < cutoff, 0.0, w)
    return w
