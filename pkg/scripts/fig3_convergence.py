"""Per-iteration parameter error of the learned estimator and TPE.

Each run CSV under OUT/<estimator>/runs holds the error curve of one scene;
the settle iteration is the first one within 10% of the final error.

Usage: python3 scripts/fig3_convergence.py [OUT] [MODEL]
"""
import csv
import statistics
import sys
from pathlib import Path

from physest.refine import settle_iteration

from _common import out_dir, run

out = out_dir("results/fig3")
model = sys.argv[2] if len(sys.argv) > 2 else "results/models/three_circles/model.mlp1"
common = ("--width", 32, "--height", 32, "--seed", 12345, "--iters", 11)
run("eval", "--estimator", "learned", "--model", model, *common, "--out", out / "learned")
run("eval", "--estimator", "tpe", *common, "--out", out / "tpe")
for est in ("learned", "tpe"):
    settles = []
    for p in sorted(Path(out / est / "runs").glob("run_*.csv")):
        curve = [float(r["param_mse"]) for r in csv.DictReader(open(p))]
        settles.append(settle_iteration(curve))
    print(est, "settle iterations", settles, "median", statistics.median(settles))
