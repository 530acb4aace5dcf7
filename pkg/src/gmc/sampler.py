"""Query-point generation over the (MOS, |dMOS|) rectangle."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidRange


class Scheme(enum.Enum):
    LHS = "lhs"
    RANDOM = "random"


@dataclass
class QueryPoint:
    qs: float
    qd: float
    gamma: float | None = None


@dataclass(frozen=True)
class SamplePlan:
    qs_range: tuple[float, float]
    qd_range: tuple[float, float]
    k: int = 100
    scheme: Scheme = Scheme.LHS
    seed: int = 0
    shared_u: bool = True

    def validate(self) -> None:
        if self.k < 1:
            raise InvalidRange(f"k must be positive, got {self.k}")
        for name, (lo, hi) in (("qs_range", self.qs_range), ("qd_range", self.qd_range)):
            if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
                raise InvalidRange(f"{name} must satisfy max > min, got ({lo}, {hi})")
        if self.qd_range[0] < 0:
            raise InvalidRange("qd_range must be nonnegative")


def lhs_coordinates(perm, u, lo: float, hi: float) -> np.ndarray:
    """Place point ``k`` in stratum ``perm[k]`` (1-based), ``u[k]`` below its upper edge."""
    perm = np.asarray(perm, dtype=float)
    k = perm.size
    return (perm - np.asarray(u, dtype=float)) / k * (hi - lo) + lo


def sample_points(plan: SamplePlan) -> list[QueryPoint]:
    """Draw ``plan.k`` query points; identical plans give bit-identical output."""
    plan.validate()
    rng = np.random.default_rng(plan.seed)
    k = plan.k
    if plan.scheme is Scheme.LHS:
        perm_x = rng.permutation(k) + 1
        perm_y = rng.permutation(k) + 1
        u_x = rng.random(k)
        u_y = u_x if plan.shared_u else rng.random(k)
        qs = lhs_coordinates(perm_x, u_x, *plan.qs_range)
        qd = lhs_coordinates(perm_y, u_y, *plan.qd_range)
    else:
        qs = rng.uniform(*plan.qs_range, size=k)
        qd = rng.uniform(*plan.qd_range, size=k)
    return [QueryPoint(float(a), float(b)) for a, b in zip(qs, qd)]
