"""Mean minimum normalised mass error over 10 runs of 11 iterations.

Runs TPE and random search on ThreeCircles, plus the learned estimator when
a model from train_models.py is present.

Usage: python3 scripts/table1.py [OUT] [MODEL]
"""
import sys
from pathlib import Path

from _common import out_dir, run

out = out_dir("results/table1")
model = Path(sys.argv[2] if len(sys.argv) > 2 else "results/models/three_circles/model.mlp1")
for est in ("tpe", "random"):
    run("eval", "--estimator", est, "--out", out / est)
if model.exists():
    run("eval", "--estimator", "learned", "--model", model, "--width", 32, "--height", 32,
        "--seed", 12345, "--out", out / "learned")
    run("eval", "--estimator", "tpe", "--width", 32, "--height", 32, "--seed", 12345,
        "--out", out / "tpe_32")
for p in sorted(out.glob("*/eval.csv")):
    print(p.parent.name, p.read_text().splitlines()[1])
