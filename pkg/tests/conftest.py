import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gmc.dataset import Dataset  # noqa: E402


def synthetic(n=500, seed=0, noise=15.0, hetero=True, with_std=False):
    """Uniform MOS on [0, 100] with a noisy predictor."""
    rng = np.random.default_rng(seed)
    q = rng.uniform(0, 100, n)
    scale = q / 100 if hetero else 1.0
    p = q + rng.normal(0, noise, n) * scale
    sigma = rng.uniform(4, 12, n) if with_std else None
    return Dataset.from_arrays(p, q, sigma=sigma, scale_override=(0, 100))


def write_csv(path, rows, header=("id", "pred", "mos")):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def small_ds():
    return synthetic(n=200, seed=3)


@pytest.fixture
def score_file(tmp_path):
    rng = np.random.default_rng(11)
    q = rng.uniform(1, 5, 120)
    p = q + rng.normal(0, 0.6, 120)
    rows = [(f"img{i:03d}", f"{p[i]:.6f}", f"{q[i]:.6f}") for i in range(120)]
    return write_csv(tmp_path / "model.csv", rows)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
