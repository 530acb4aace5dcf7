"""Command line entry point.

Exit status: 0 on success, 2 on configuration errors, 3 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, DataError, GmcError
from .gcc import PairMode
from .pipeline import GmcConfig
from .regulator import DEFAULT_BANDWIDTH, DEFAULT_BINS, DensityMode
from .robustness import Mode, ResamplePlan, default_plans
from .runner import (
    Polarity,
    RunConfig,
    combine_files,
    load_inputs,
    run_ablation_sampling,
    run_gmc,
    run_robustness,
    write_ablation,
)
from .sampler import Scheme

EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("gmc")


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN:MAX, got {text!r}") from None
    if not hi > lo:
        raise argparse.ArgumentTypeError(f"range must satisfy MAX > MIN, got {text!r}")
    return lo, hi


def _input(text: str) -> tuple[str, Path]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {text!r}")
    return name, Path(path)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", action="append", type=_input, default=[], metavar="NAME=PATH",
                   help="score file (CSV or JSON with id,pred,mos[,std]); repeatable")
    p.add_argument("--metric", choices=[m.value for m in PairMode], default=PairMode.SRCC.value)
    p.add_argument("--k", type=int, default=100, help="number of query points")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="MOS histogram bins")
    p.add_argument("--grid", type=int, default=50, help="surface grid size per axis")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sampler", choices=[s.value for s in Scheme], default=Scheme.LHS.value)
    p.add_argument("--independent-u", action="store_true",
                   help="draw the in-stratum offset separately for each axis")
    p.add_argument("--no-kernel-smoothing", action="store_true",
                   help="use raw bin frequencies as the density")
    p.add_argument("--density", choices=["auto", "kde", "binned"], default="auto",
                   help="density estimator (auto: per-sample KDE when std is supplied)")
    p.add_argument("--density-bandwidth", type=float, default=DEFAULT_BANDWIDTH)
    p.add_argument("--phi", type=float, default=20.0, help="Beta dispersion for estimated rating spreads")
    p.add_argument("--mos-scale", type=_range, default=None, metavar="MIN:MAX",
                   help="raw MOS scale (default: empirical min/max)")
    p.add_argument("--qs-range", type=_range, default=None, metavar="MIN:MAX")
    p.add_argument("--qd-range", type=_range, default=None, metavar="MIN:MAX")
    p.add_argument("--pd-variance-convention", choices=["sum", "double"], default="sum",
                   help="denominator of the difference weight: s_i^2+s_j^2 or twice that")
    p.add_argument("--weight-cutoff", type=float, default=0.0,
                   help="treat granularity weights below this as zero (0 disables)")
    p.add_argument("--out", type=Path, default=Path("gmc_out"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmc", description="Granularity-modulated correlation for IQA score files")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="compute GMC reports and surfaces")
    _add_common(p)
    p.add_argument("--render-svg", action="store_true")

    p = sub.add_parser("robustness", help="resampling robustness protocol")
    _add_common(p)
    p.add_argument("--plans", type=Path, default=None, help="JSON file with resample plans")
    p.add_argument("--subset-size", type=int, default=None)
    p.add_argument("--plan-seed", type=int, default=0, help="seed for the default plans")

    p = sub.add_parser("ablation", help="GMC_g versus number of query points")
    _add_common(p)
    p.add_argument("--k-values", type=_int_list, default=[10, 50, 100, 500, 1000])
    p.add_argument("--seeds", type=_int_list, default=list(range(20)))
    p.add_argument("--schemes", default="lhs,random")

    p = sub.add_parser("combine", help="combine two score files")
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.add_argument("--polarity-a", choices=[x.value for x in Polarity], default="higher")
    p.add_argument("--polarity-b", choices=[x.value for x in Polarity], default="higher")
    p.add_argument("--out", type=Path, required=True)
    return parser


def config_from_args(args) -> RunConfig:
    gmc = GmcConfig(
        mode=PairMode(args.metric),
        k=args.k,
        bins=args.bins,
        grid=args.grid,
        density_bandwidth=args.density_bandwidth,
        density_mode=None if args.density == "auto" else DensityMode(args.density),
        kernel_smoothing=not args.no_kernel_smoothing,
        scheme=Scheme(args.sampler),
        seed=args.seed,
        shared_u=not args.independent_u,
        qs_range=args.qs_range,
        qd_range=args.qd_range,
        pd_variance_scale=2.0 if args.pd_variance_convention == "double" else 1.0,
        weight_cutoff=args.weight_cutoff,
    )
    if args.k < 1 or args.grid < 1 or args.bins < 1:
        raise ConfigError("--k, --grid and --bins must be positive")
    if not args.phi > 0 or not args.density_bandwidth > 0:
        raise ConfigError("--phi and --density-bandwidth must be positive")
    return RunConfig(
        inputs=list(args.input),
        gmc=gmc,
        dispersion_phi=args.phi,
        scale_override=args.mos_scale,
        output_dir=args.out,
        render_svg=getattr(args, "render_svg", False),
    )


def load_plans(path: Path, subset_size: int | None) -> list[ResamplePlan]:
    """Read plans from JSON: ``{"subset_size": N, "plans": [{"label", "seed", "modes": [...]}]}``."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        size = subset_size if subset_size is not None else payload.get("subset_size")
        plans = []
        for i, p in enumerate(payload["plans"]):
            modes = tuple(Mode(float(m["center"]), float(m["width"]), float(m.get("weight", 1.0))) for m in p["modes"])
            plans.append(
                ResamplePlan(
                    modes=modes,
                    subset_size=p.get("subset_size", size),
                    seed=int(p.get("seed", i)),
                    replacement=bool(p.get("replacement", False)),
                    label=str(p.get("label", i)),
                )
            )
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: cannot read resample plans: {exc}") from None
    if not plans:
        raise ConfigError(f"{path}: no plans given")
    return plans


def _run(args) -> None:
    if args.command == "combine":
        combine_files(args.a, args.b, Polarity(args.polarity_a), Polarity(args.polarity_b), args.out)
        return

    config = config_from_args(args)
    if args.command == "eval":
        results = run_gmc(config)
        for name, res in results.items():
            r = res.report
            print(f"{name}: GMC_g={r.gmc_g:.4f} " + " ".join(f"{k}={v:.4f}" for k, v in {**r.gmc_s, **r.gmc_d}.items()))
    elif args.command == "robustness":
        if args.plans is not None:
            plans = load_plans(args.plans, args.subset_size)
        else:
            plans = default_plans(args.plan_seed, args.subset_size)
        if len(plans) != 9:
            log.warning("protocol normally uses nine plans, got %d", len(plans))
        report = run_robustness(config, plans)
        for name, d in report.dispersion.items():
            print(f"{name}: std SRCC={d['std_srcc']:.5f} std GMC_g={d['std_gmc_g']:.5f}")
    elif args.command == "ablation":
        try:
            schemes = [Scheme(s.strip()) for s in args.schemes.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"unknown scheme in {args.schemes!r}") from None
        models = load_inputs(config)
        per_model = {
            name: run_ablation_sampling(ds, args.k_values, args.seeds, config.gmc, schemes)
            for name, ds in models.items()
        }
        write_ablation(config.output_dir, per_model)
        print(f"wrote {config.output_dir / 'ablation.csv'}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, GmcError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
