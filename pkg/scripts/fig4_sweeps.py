"""Image-MSE sensitivity of ThreeCircles to mass, elasticity and friction.

Usage: python3 scripts/fig4_sweeps.py [OUT]
"""
from _common import out_dir, run

out = out_dir("results/fig4")
for kind in ("mass", "elasticity", "friction"):
    run("sweep", "--kind", kind, "--out", out / kind)
