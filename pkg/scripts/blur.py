"""Learned estimator with sharp and sigma=3 blurred observations.

Usage: python3 scripts/blur.py [OUT] [MODEL]
"""
import json
import sys

from _common import out_dir, run

out = out_dir("results/blur")
model = sys.argv[2] if len(sys.argv) > 2 else "results/models/three_circles/model.mlp1"
run("blur-eval", "--model", model, "--sigma", 3, "--seed", 12345, "--out", out)
print("degradation", json.loads((out / "manifest.json").read_text())["degradation"])
