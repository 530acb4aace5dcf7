"""Run orchestration behind the command line: evaluation, exports, sweeps.

Every file is written to a temporary sibling and renamed into place, and
numbers are emitted with ``repr`` so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import DEFAULT_DISPERSION, Dataset, ScoreFormat, load_scores, read_records
from .errors import ConfigError, DegenerateScale, GmcError, LengthMismatch
from .pipeline import GmcConfig, GmcResult, compute_gmc
from .robustness import ResamplePlan, RobustnessReport, run_protocol
from .sampler import Scheme
from .svg import render_heatmap

log = logging.getLogger(__name__)


def thread_cap(default: int | None = None) -> int:
    """Worker count, capped by the ``GMC_THREADS`` environment variable."""
    n = default or os.cpu_count() or 1
    env = os.environ.get("GMC_THREADS")
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise ConfigError(f"GMC_THREADS must be an integer, got {env!r}") from None
    return max(1, n)


# ---------------------------------------------------------------- io


def _num(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _json_clean(obj):
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    return json.dumps(_json_clean(obj), indent=2, allow_nan=False) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    inputs: list[tuple[str, Path]]
    gmc: GmcConfig = field(default_factory=GmcConfig)
    dispersion_phi: float = DEFAULT_DISPERSION
    scale_override: tuple[float, float] | None = None
    output_dir: Path = Path("gmc_out")
    render_svg: bool = False

    def validate(self) -> None:
        if not self.inputs:
            raise ConfigError("at least one --input NAME=PATH is required")
        names = [n for n, _ in self.inputs]
        if len(set(names)) != len(names):
            raise ConfigError("model names must be unique")
        for name in names:
            if not name or "/" in name or name in (".", ".."):
                raise ConfigError(f"invalid model name {name!r}")
        if self.gmc.k < 1 or self.gmc.grid < 1 or self.gmc.bins < 1:
            raise ConfigError("k, grid and bins must be positive")


def load_inputs(config: RunConfig) -> dict[str, Dataset]:
    """Load every input and check that all share one MOS column."""
    config.validate()
    models = {
        name: load_scores(path, scale_override=config.scale_override, dispersion=config.dispersion_phi)
        for name, path in config.inputs
    }
    check_comparable(models, dict(config.inputs))
    return models


def check_comparable(models: dict[str, Dataset], paths: dict | None = None) -> None:
    names = list(models)
    ref = models[names[0]]
    for name in names[1:]:
        ds = models[name]
        where = f"{paths[name]}" if paths else name
        if ds.n != ref.n:
            raise ConfigError(f"{where}: {ds.n} rows but '{names[0]}' has {ref.n}; MOS columns differ")
        for row in range(ds.n):
            if ds.ids[row] != ref.ids[row] or ds.mos[row] != ref.mos[row]:
                raise ConfigError(
                    f"{where}: row {row + 1} (id {ds.ids[row]!r}) does not match "
                    f"'{names[0]}' (id {ref.ids[row]!r}); MOS columns must be identical"
                )


# ---------------------------------------------------------------- eval


def export_result(result: GmcResult, out: Path, title: str = "", svg: bool = False) -> None:
    out = Path(out)
    write_atomic(out / "report.json", dumps_json(result.report.to_dict()))
    write_atomic(
        out / "surface.csv",
        csv_text(["qs", "qd", "value"], ((_num(a), _num(b), _num(v)) for a, b, v in result.surface.long_rows())),
    )
    write_atomic(
        out / "queries.csv",
        csv_text(["qs", "qd", "gamma"], ((_num(p.qs), _num(p.qd), _num(p.gamma)) for p in result.queries)),
    )
    if svg:
        write_atomic(out / "surface.svg", render_heatmap(result.surface, title))


def run_gmc(config: RunConfig) -> dict[str, GmcResult]:
    """Evaluate every model and write its artifacts under ``output_dir/<name>/``."""
    models = load_inputs(config)

    def job(name):
        try:
            result = compute_gmc(models[name], config.gmc)
        except GmcError as exc:
            raise type(exc)(f"model '{name}': {exc}") from None
        export_result(result, Path(config.output_dir) / name, title=name, svg=config.render_svg)
        return name, result

    workers = thread_cap(len(models))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(job, models))
    else:
        results = dict(job(n) for n in models)

    summary = {name: results[name].report.to_dict() for name in models}
    write_atomic(Path(config.output_dir) / "summary.json", dumps_json(summary))
    return results


# ---------------------------------------------------------------- ablation


@dataclass(frozen=True)
class AblationRow:
    scheme: Scheme
    k: int
    seed: int
    gmc_g: float


def run_ablation_sampling(
    ds: Dataset,
    k_values: Sequence[int],
    seeds: Sequence[int],
    base: GmcConfig = GmcConfig(),
    schemes: Sequence[Scheme] = (Scheme.LHS, Scheme.RANDOM),
) -> list[AblationRow]:
    """GMC_g for every (scheme, K, seed) combination."""
    if not k_values:
        raise ConfigError("k_values must not be empty")
    if not seeds:
        raise ConfigError("seeds must not be empty")
    rows = []
    for scheme in schemes:
        for k in k_values:
            for seed in seeds:
                res = compute_gmc(ds, base.with_(scheme=scheme, k=int(k), seed=int(seed)), with_baselines=False)
                rows.append(AblationRow(scheme, int(k), int(seed), res.report.gmc_g))
    return rows


def ablation_summary(rows: Sequence[AblationRow]) -> list[tuple[Scheme, int, float, float, int]]:
    """``(scheme, K, mean, std, count)`` per group, in first-seen order."""
    groups: dict[tuple[Scheme, int], list[float]] = {}
    for r in rows:
        groups.setdefault((r.scheme, r.k), []).append(r.gmc_g)
    return [(s, k, float(np.mean(v)), float(np.std(v)), len(v)) for (s, k), v in groups.items()]


def write_ablation(out: Path, per_model: dict[str, list[AblationRow]]) -> None:
    write_atomic(
        Path(out) / "ablation.csv",
        csv_text(
            ["model", "scheme", "k", "seed", "gmc_g"],
            ((m, r.scheme.value, r.k, r.seed, _num(r.gmc_g)) for m, rows in per_model.items() for r in rows),
        ),
    )
    write_atomic(
        Path(out) / "ablation_summary.csv",
        csv_text(
            ["model", "scheme", "k", "mean_gmc_g", "std_gmc_g", "n_seeds"],
            (
                (m, s.value, k, _num(mean), _num(std), c)
                for m, rows in per_model.items()
                for s, k, mean, std, c in ablation_summary(rows)
            ),
        ),
    )


# ---------------------------------------------------------------- robustness


def write_robustness(out: Path, report: RobustnessReport, plans: Sequence[ResamplePlan], config: GmcConfig) -> None:
    write_atomic(
        Path(out) / "robustness.csv",
        csv_text(
            ["subset", "label", "model", "n", "srcc", "gmc_g"],
            ((r.index, r.label, r.model, r.n, _num(r.srcc), _num(r.gmc_g)) for r in report.rows),
        ),
    )
    payload = {
        "dispersion": report.dispersion,
        "plans": [
            {
                "label": p.label,
                "seed": p.seed,
                "subset_size": p.subset_size,
                "replacement": p.replacement,
                "modes": [{"center": m.center, "width": m.width, "weight": m.weight} for m in p.modes],
            }
            for p in plans
        ],
        "config": config.to_dict(),
        "config_digest": config.digest(),
    }
    write_atomic(Path(out) / "robustness.json", dumps_json(payload))


def run_robustness(config: RunConfig, plans: Sequence[ResamplePlan]) -> RobustnessReport:
    models = load_inputs(config)
    report = run_protocol(models, plans, config.gmc, threads=thread_cap())
    write_robustness(config.output_dir, report, plans, config.gmc)
    return report


# ---------------------------------------------------------------- combine


class Polarity(enum.Enum):
    HIGHER_BETTER = "higher"
    LOWER_BETTER = "lower"


def _minmax(v: np.ndarray) -> np.ndarray:
    lo, hi = float(v.min()), float(v.max())
    if not hi > lo:
        raise DegenerateScale("cannot min-max normalize a constant score column")
    return (v - lo) / (hi - lo)


def combine_scores(a, b, polarity_a: Polarity, polarity_b: Polarity) -> np.ndarray:
    """Sum of two min-max normalized score columns, lower-is-better ones reflected."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"score columns differ in length: {a.size} vs {b.size}")
    parts = []
    for v, pol in ((a, Polarity(polarity_a)), (b, Polarity(polarity_b))):
        v = _minmax(v)
        parts.append(1.0 - v if pol is Polarity.LOWER_BETTER else v)
    return parts[0] + parts[1]


def combine_files(path_a, path_b, polarity_a, polarity_b, out_path) -> np.ndarray:
    """Combine two score files sharing ids; write ``id,pred,mos[,std]`` CSV."""
    ds_a = load_scores(path_a)
    ds_b = load_scores(path_b)
    if ds_a.n != ds_b.n:
        raise LengthMismatch(f"{path_a} has {ds_a.n} rows, {path_b} has {ds_b.n}")
    if ds_a.ids != ds_b.ids:
        raise ConfigError(f"{path_a} and {path_b} list different ids")
    combined = combine_scores(ds_a.pred, ds_b.pred, polarity_a, polarity_b)
    # raw MOS (and std) are copied from the first file untouched
    fmt = ScoreFormat.JSON if Path(path_a).suffix.lower() == ".json" else ScoreFormat.CSV
    columns, records = read_records(Path(path_a), fmt)
    header = ["id", "pred", "mos"] + (["std"] if "std" in columns else [])
    rows = (
        [r["id"], _num(v), r["mos"]] + ([r.get("std", "")] if "std" in columns else [])
        for r, v in zip(records, combined)
    )
    write_atomic(Path(out_path), csv_text(header, rows))
    return combined
