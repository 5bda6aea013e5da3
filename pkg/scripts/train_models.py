"""Generate training sets and fit the two regressors used by the other scripts.

ThreeCircles is trained on sharp plus sigma=3 blurred observations;
BouncingBalls on 2 to 6 ball scenes.

Usage: python3 scripts/train_models.py [OUT] [RECORDS]
"""
import sys

from _common import out_dir, run

out = out_dir("results/models")
records = sys.argv[2] if len(sys.argv) > 2 else 2000
run("dataset-gen", "--scene", "three_circles", "--records", records, "--seed", 1,
    "--out", out / "tc_sharp")
run("dataset-gen", "--scene", "three_circles", "--records", records, "--seed", 1,
    "--obs-blur", 3, "--out", out / "tc_blur")
run("train", "--dataset", out / "tc_sharp/dataset.pds", out / "tc_blur/dataset.pds",
    "--out", out / "three_circles")
# each record draws its own ball count
run("dataset-gen", "--scene", "bouncing_balls", "--records", records, "--seed", 1,
    "--out", out / "bb")
run("train", "--dataset", out / "bb/dataset.pds", "--out", out / "bouncing_balls")
