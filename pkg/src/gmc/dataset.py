"""Score-file ingestion, MOS normalization, ranking and rating-spread estimation.

All MOS values are mapped affinely onto the canonical ``[0, 100]`` scale.
Rating standard deviations, when supplied, are rescaled with the same
factor; when absent they are estimated from a Beta model of the rating
distribution.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DataError,
    DegenerateScale,
    FewerThanThreeSamples,
    MissingColumn,
    NonNumericValue,
)

log = logging.getLogger(__name__)

CANONICAL_MAX = 100.0
DEFAULT_DISPERSION = 20.0
MU_FLOOR = 0.01

REQUIRED_COLUMNS = ("id", "pred", "mos")
OPTIONAL_COLUMNS = ("std",)


class SigmaSource(enum.Enum):
    PROVIDED = "provided"
    BETA_ESTIMATED = "beta_estimated"


class ScoreFormat(enum.Enum):
    CSV = "csv"
    JSON = "json"


@dataclass(frozen=True)
class Sample:
    """One image record on the canonical scale."""

    id: str
    pred: float
    mos: float
    sigma: float | None
    sigma_source: SigmaSource


def estimate_sigma(mos_normalized, dispersion: float = DEFAULT_DISPERSION):
    """Rating standard deviation implied by a Beta(mu, phi) rating model.

    With mean ``mu = mos / 100`` and precision ``phi`` the Beta variance is
    ``mu (1 - mu) / (1 + phi)``; the result is returned in canonical units.
    ``mu`` is clamped to ``[0.01, 0.99]`` so the estimate never reaches zero.
    Accepts scalars or arrays.
    """
    if not dispersion > 0:
        raise ValueError(f"dispersion must be positive, got {dispersion}")
    mu = np.clip(np.asarray(mos_normalized, dtype=float) / CANONICAL_MAX, MU_FLOOR, 1.0 - MU_FLOOR)
    out = CANONICAL_MAX * np.sqrt(mu * (1.0 - mu) / (1.0 + dispersion))
    return float(out) if out.ndim == 0 else out


def midranks(values) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    return rankdata(np.asarray(values, dtype=float), method="average")


def _readonly(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Normalized samples with precomputed ranks.

    Arrays are read-only; build new datasets with :meth:`from_arrays`,
    :meth:`take` or :meth:`with_pred` instead of mutating.
    """

    ids: tuple[str, ...]
    pred: np.ndarray
    mos: np.ndarray
    sigma: np.ndarray
    sigma_provided: np.ndarray
    pred_ranks: np.ndarray
    mos_ranks: np.ndarray
    scale_bounds: tuple[float, float]

    @classmethod
    def from_arrays(
        cls,
        pred,
        mos,
        sigma=None,
        ids: Sequence[str] | None = None,
        scale_override: tuple[float, float] | None = None,
        dispersion: float = DEFAULT_DISPERSION,
    ) -> "Dataset":
        """Normalize raw columns onto the canonical scale.

        ``sigma`` may be ``None`` or contain NaN entries; those samples get a
        Beta-estimated spread computed from their normalized MOS.
        """
        pred = np.asarray(pred, dtype=float)
        mos = np.asarray(mos, dtype=float)
        n = mos.size
        if pred.shape != (n,) or mos.ndim != 1:
            raise DataError("pred and mos must be 1-D columns of equal length")
        if n < 3:
            raise FewerThanThreeSamples(f"need at least 3 samples, got {n}")
        if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(mos))):
            raise NonNumericValue("pred and mos must be finite")

        if scale_override is not None:
            lo, hi = map(float, scale_override)
        else:
            lo, hi = float(mos.min()), float(mos.max())
        if not hi > lo:
            raise DegenerateScale(f"MOS scale is degenerate: min == max == {lo}")
        factor = CANONICAL_MAX / (hi - lo)
        mos_n = (mos - lo) * factor
        # absorb rounding at the endpoints
        mos_n = np.where(np.isclose(mos_n, 0.0, atol=1e-9), 0.0, mos_n)
        mos_n = np.where(np.isclose(mos_n, CANONICAL_MAX, rtol=0, atol=1e-9), CANONICAL_MAX, mos_n)
        if mos_n.min() < 0.0 or mos_n.max() > CANONICAL_MAX:
            raise DataError(f"MOS values fall outside the scale ({lo}, {hi})")

        if sigma is None:
            raw_sigma = np.full(n, np.nan)
        else:
            raw_sigma = np.asarray(sigma, dtype=float)
            if raw_sigma.shape != (n,):
                raise DataError("std column length does not match mos")
        provided = np.isfinite(raw_sigma)
        if np.any(raw_sigma[provided] <= 0):
            raise DataError("std values must be positive")
        sig = np.where(provided, raw_sigma * factor, 0.0)
        missing = ~provided
        if missing.any():
            sig[missing] = estimate_sigma(mos_n[missing], dispersion)

        if ids is None:
            ids = [str(i) for i in range(n)]
        ids = tuple(str(i) for i in ids)
        if len(ids) != n:
            raise DataError("id column length does not match mos")

        return cls(
            ids=ids,
            pred=_readonly(pred),
            mos=_readonly(mos_n),
            sigma=_readonly(sig),
            sigma_provided=_readonly(provided, bool),
            pred_ranks=_readonly(midranks(pred)),
            mos_ranks=_readonly(midranks(mos_n)),
            scale_bounds=(lo, hi),
        )

    def __len__(self) -> int:
        return self.mos.size

    @property
    def n(self) -> int:
        return self.mos.size

    @property
    def samples(self) -> list[Sample]:
        return [
            Sample(
                id=self.ids[i],
                pred=float(self.pred[i]),
                mos=float(self.mos[i]),
                sigma=float(self.sigma[i]),
                sigma_source=SigmaSource.PROVIDED if self.sigma_provided[i] else SigmaSource.BETA_ESTIMATED,
            )
            for i in range(self.n)
        ]

    @property
    def all_sigma_provided(self) -> bool:
        return bool(np.all(self.sigma_provided))

    def take(self, indices: Iterable[int]) -> "Dataset":
        """Subset keeping the parent's normalization; ranks are recomputed."""
        idx = np.asarray(list(indices), dtype=np.int64)
        if idx.size < 3:
            raise FewerThanThreeSamples(f"need at least 3 samples, got {idx.size}")
        pred = self.pred[idx]
        mos = self.mos[idx]
        return Dataset(
            ids=tuple(self.ids[i] for i in idx),
            pred=_readonly(pred),
            mos=_readonly(mos),
            sigma=_readonly(self.sigma[idx]),
            sigma_provided=_readonly(self.sigma_provided[idx], bool),
            pred_ranks=_readonly(midranks(pred)),
            mos_ranks=_readonly(midranks(mos)),
            scale_bounds=self.scale_bounds,
        )

    def with_pred(self, pred) -> "Dataset":
        """Same MOS/sigma, different model scores."""
        pred = np.asarray(pred, dtype=float)
        if pred.shape != self.pred.shape:
            raise DataError("replacement pred column has the wrong length")
        if not np.all(np.isfinite(pred)):
            raise NonNumericValue("pred must be finite")
        return Dataset(
            ids=self.ids,
            pred=_readonly(pred),
            mos=self.mos,
            sigma=self.sigma,
            sigma_provided=self.sigma_provided,
            pred_ranks=_readonly(midranks(pred)),
            mos_ranks=self.mos_ranks,
            scale_bounds=self.scale_bounds,
        )

    def mos_digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.mos, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.sigma, dtype="<f8").tobytes())
        return h.hexdigest()


def _parse_float(value, column: str, row: int, path) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise NonNumericValue(f"{path}: row {row}: column '{column}' is not numeric: {value!r}") from None
    if not math.isfinite(out):
        raise NonNumericValue(f"{path}: row {row}: column '{column}' is not finite: {value!r}")
    return out


def read_records(path: Path, fmt: ScoreFormat) -> tuple[list[str], list[dict]]:
    if fmt is ScoreFormat.CSV:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            columns = [c.strip() for c in (reader.fieldnames or [])]
            rows = [{(k or "").strip(): v for k, v in r.items()} for r in reader]
        return columns, rows
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, list) or not all(isinstance(r, dict) for r in payload):
        raise DataError(f"{path}: JSON score file must be an array of objects")
    columns: list[str] = []
    for r in payload:
        for k in r:
            if k not in columns:
                columns.append(k)
    return columns, payload


def load_scores(
    path,
    format: ScoreFormat | str | None = None,
    scale_override: tuple[float, float] | None = None,
    dispersion: float = DEFAULT_DISPERSION,
) -> Dataset:
    """Read a CSV or JSON score file into a normalized :class:`Dataset`.

    The format is inferred from the file suffix when not given. Rows are
    numbered from 1 in error messages (header excluded).
    """
    path = Path(path)
    if format is None:
        format = ScoreFormat.JSON if path.suffix.lower() == ".json" else ScoreFormat.CSV
    fmt = ScoreFormat(format) if not isinstance(format, ScoreFormat) else format

    columns, rows = read_records(path, fmt)
    for col in REQUIRED_COLUMNS:
        if col not in columns:
            raise MissingColumn(f"{path}: missing required column '{col}'")
    unknown = [c for c in columns if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        log.warning("%s: ignoring unknown columns %s", path, ", ".join(unknown))

    has_std = "std" in columns
    ids, pred, mos, std = [], [], [], []
    for row_no, r in enumerate(rows, start=1):
        ids.append(str(r.get("id")))
        pred.append(_parse_float(r.get("pred"), "pred", row_no, path))
        mos.append(_parse_float(r.get("mos"), "mos", row_no, path))
        if has_std:
            v = r.get("std")
            if v is None or (isinstance(v, str) and not v.strip()):
                std.append(math.nan)
            else:
                std.append(_parse_float(v, "std", row_no, path))
    if len(mos) < 3:
        raise FewerThanThreeSamples(f"{path}: need at least 3 samples, got {len(mos)}")
    try:
        return Dataset.from_arrays(
            pred,
            mos,
            sigma=std if has_std else None,
            ids=ids,
            scale_override=scale_override,
            dispersion=dispersion,
        )
    except DataError as exc:
        raise type(exc)(f"{path}: {exc}") from None
