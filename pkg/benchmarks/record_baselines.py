"""Re-record tests/baselines.json from the shipped two-moons configs.

Run from the repository root: ``python benchmarks/record_baselines.py``.
"""

import json
import platform
import sys
import tempfile
from pathlib import Path

import numpy as np

from fracact import kernels
from fracact.cli import main
from fracact.reporting import read_metrics

ROOT = Path(__file__).resolve().parents[1]
RUNS = ["sig", "fsig_n2", "gelu", "fgelu_n1", "mish", "fmish_n2", "falu", "relu", "prelu"]


def record():
    out = {}
    with tempfile.TemporaryDirectory() as tmp:
        for name in RUNS:
            run_dir = Path(tmp) / name
            rc = main(["train", "--config", str(ROOT / "configs" / f"two_moons_{name}.cfg"), "--out", str(run_dir)])
            if rc != 0:
                out[name] = {"exit_code": rc}
                continue
            rows = read_metrics(run_dir / "metrics.csv")
            out[name] = {
                "exit_code": rc,
                "best_test_acc": max(r["test_acc"] for r in rows),
                "final_test_loss": rows[-1]["test_loss"],
                "first_epoch_at_0.90": next((r["epoch"] for r in rows if r["test_acc"] >= 0.9), None),
            }
    out["_recorded_with"] = {
        "backend": kernels.get_backend(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    return out


if __name__ == "__main__":
    data = record()
    path = ROOT / "tests" / "baselines.json"
    path.write_text(json.dumps(data, indent=2) + "\n")
    print(f"wrote {path}", file=sys.stderr)
