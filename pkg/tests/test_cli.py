import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gmc.cli import main
from gmc.errors import ConfigError, LengthMismatch
from gmc.gcc import PairMode, classical_correlation
from gmc.pipeline import GmcConfig
from gmc.dataset import Dataset
from gmc.runner import Polarity, RunConfig, combine_scores, dumps_json, run_ablation_sampling, run_gmc

from conftest import write_csv

FAST = ["--k", "30", "--grid", "12"]


def tree_digest(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()}


def test_eval_writes_artifacts(score_file, tmp_path):
    out = tmp_path / "out"
    assert main(["eval", "--input", f"m={score_file}", "--out", str(out), "--render-svg", *FAST]) == 0
    report = json.loads((out / "m" / "report.json").read_text())
    assert -1 <= report["gmc_g"] <= 1
    assert set(report["gmc_s"]) == {"LQ", "MQ", "HQ"}
    assert set(report["gmc_d"]) == {"LD", "MD", "HD"}
    assert set(report["baselines"]) == {"PLCC", "SRCC", "KRCC"}
    assert report["metric_mode"] == "srcc"
    rows = list(csv.reader((out / "m" / "surface.csv").open()))
    assert rows[0] == ["qs", "qd", "value"]
    assert len(rows) - 1 == 12 * 12
    assert all(-1 <= float(r[2]) <= 1 for r in rows[1:])
    assert (out / "m" / "surface.svg").read_text().startswith("<svg")
    assert (out / "summary.json").exists()


def test_same_seed_same_bytes(score_file, tmp_path):
    args = ["eval", "--input", f"m={score_file}", *FAST]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")


def test_perfect_predictor_report(tmp_path):
    q = np.linspace(1, 5, 150)
    path = write_csv(tmp_path / "p.csv", [(f"i{i}", v, v) for i, v in enumerate(q)])
    cfg = RunConfig([("p", path)], GmcConfig(k=40, grid=15), output_dir=tmp_path / "o")
    rep = run_gmc(cfg)["p"].report
    assert rep.gmc_g == pytest.approx(1.0, abs=1e-9)
    for v in {**rep.gmc_s, **rep.gmc_d}.values():
        assert v == pytest.approx(1.0, abs=1e-9)


def test_mismatched_mos_names_row(tmp_path, capsys):
    a = write_csv(tmp_path / "a.csv", [("x", 1, 1), ("y", 2, 2), ("z", 3, 3), ("w", 4, 4)])
    b = write_csv(tmp_path / "b.csv", [("x", 1, 1), ("y", 2, 2), ("z", 3, 3.5), ("w", 4, 4)])
    cfg = RunConfig([("a", a), ("b", b)], output_dir=tmp_path / "o")
    with pytest.raises(ConfigError, match="row 3"):
        run_gmc(cfg)
    assert main(["eval", "--input", f"a={a}", "--input", f"b={b}", "--out", str(tmp_path / "o")]) == 2
    assert "row 3" in capsys.readouterr().err


def test_data_error_exit_code(tmp_path):
    bad = write_csv(tmp_path / "bad.csv", [("x", 1, 1), ("y", "abc", 2), ("z", 3, 3)])
    assert main(["eval", "--input", f"m={bad}", "--out", str(tmp_path / "o")]) == 3
    assert main(["eval", "--input", f"m={tmp_path / 'missing.csv'}", "--out", str(tmp_path / "o")]) == 3


def test_config_error_exit_code(score_file, tmp_path):
    assert main(["eval", "--input", f"m={score_file}", "--k", "0", "--out", str(tmp_path / "o")]) == 2
    assert main(["eval", "--out", str(tmp_path / "o")]) == 2


def test_constant_predictor_is_a_data_error(tmp_path, capsys):
    path = write_csv(tmp_path / "c.csv", [(f"i{i}", 1.0, v) for i, v in enumerate(np.linspace(0, 10, 40))])
    assert main(["eval", "--input", f"c={path}", "--out", str(tmp_path / "o"), *FAST]) == 3
    assert "defined query points" in capsys.readouterr().err


def test_undefined_serialized_as_null():
    ds = Dataset.from_arrays(np.ones(40), np.linspace(0, 10, 40))
    text = dumps_json({"PLCC": classical_correlation(ds, PairMode.PLCC), "x": float("nan"), "y": np.float64(0.5)})
    assert json.loads(text) == {"PLCC": None, "x": None, "y": 0.5}


def test_combine_examples():
    rng = np.random.default_rng(0)
    a = rng.normal(size=10)
    doubled = combine_scores(a, a, Polarity.HIGHER_BETTER, Polarity.HIGHER_BETTER)
    assert np.array_equal(np.argsort(doubled), np.argsort(a))
    cancel = combine_scores(a, 3 * a + 2, Polarity.HIGHER_BETTER, Polarity.LOWER_BETTER)
    np.testing.assert_allclose(cancel, 1.0, atol=1e-12)
    with pytest.raises(LengthMismatch):
        combine_scores(a, a[:9], Polarity.HIGHER_BETTER, Polarity.HIGHER_BETTER)


def test_combine_cli(tmp_path):
    a = write_csv(tmp_path / "a.csv", [("x", 0.1, 1), ("y", 0.5, 2), ("z", 0.9, 3)])
    b = write_csv(tmp_path / "b.csv", [("x", 9, 1), ("y", 5, 2), ("z", 1, 3)])
    out = tmp_path / "ab.csv"
    assert main(["combine", "--a", str(a), "--b", str(b), "--polarity-b", "lower", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["id"] for r in rows] == ["x", "y", "z"]
    assert [float(r["pred"]) for r in rows] == pytest.approx([0.0, 1.0, 2.0])
    assert [r["mos"] for r in rows] == ["1", "2", "3"]


def test_ablation_single_row(small_ds, tmp_path):
    rows = run_ablation_sampling(small_ds, [10], [0], GmcConfig(grid=10), schemes=[GmcConfig().scheme])
    assert len(rows) == 1 and rows[0].k == 10


def test_ablation_cli(score_file, tmp_path):
    out = tmp_path / "abl"
    assert main(["ablation", "--input", f"m={score_file}", "--k-values", "10,20", "--seeds", "0,1",
                 "--grid", "10", "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "ablation.csv").open()))
    assert len(rows) == 2 * 2 * 2
    summary = list(csv.DictReader((out / "ablation_summary.csv").open()))
    assert {(r["scheme"], r["k"]) for r in summary} == {("lhs", "10"), ("lhs", "20"), ("random", "10"), ("random", "20")}


def test_robustness_cli(tmp_path):
    rng = np.random.default_rng(3)
    q = rng.uniform(0, 100, 400)
    path = write_csv(tmp_path / "m.csv", [(f"i{i}", q[i] + rng.normal(0, 5), q[i]) for i in range(400)])
    plans = {"subset_size": 80, "plans": [{"label": "c", "seed": 1, "modes": [{"center": 50, "width": 15}]},
                                            {"label": "l", "seed": 2, "modes": [{"center": 30, "width": 15}]}]}
    plan_file = tmp_path / "plans.json"
    plan_file.write_text(json.dumps(plans))
    out = tmp_path / "rob"
    assert main(["robustness", "--input", f"m={path}", "--plans", str(plan_file), "--out", str(out), *FAST]) == 0
    rows = list(csv.DictReader((out / "robustness.csv").open()))
    assert [r["label"] for r in rows] == ["c", "l"]
    payload = json.loads((out / "robustness.json").read_text())
    assert set(payload["dispersion"]["m"]) == {"mean_srcc", "std_srcc", "mean_gmc_g", "std_gmc_g"}


def test_bad_plan_file(score_file, tmp_path):
    plan_file = tmp_path / "plans.json"
    plan_file.write_text("{not json")
    assert main(["robustness", "--input", f"m={score_file}", "--plans", str(plan_file), "--out", str(tmp_path)]) == 2


def test_module_entry_point(score_file, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gmc", "eval", "--input", f"m={score_file}", "--out", str(tmp_path / "o"), *FAST],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("m: GMC_g=")
