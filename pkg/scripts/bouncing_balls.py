"""Learned estimator on BouncingBalls with 2 to 6 unknown balls and with one.

Usage: python3 scripts/bouncing_balls.py [OUT] [MODEL]
"""
import sys

from _common import out_dir, run

out = out_dir("results/bouncing_balls")
model = sys.argv[2] if len(sys.argv) > 2 else "results/models/bouncing_balls/model.mlp1"
for n in range(1, 7):
    run("eval", "--scene", "bouncing_balls", "--n-unknown", n, "--estimator", "learned",
        "--model", model, "--width", 32, "--height", 32, "--seed", 12345, "--runs", 10,
        "--out", out / f"n{n}")
for n in range(1, 7):
    print(n, (out / f"n{n}" / "eval.csv").read_text().splitlines()[1])
