"""Command-line entry point.

Option precedence, lowest to highest: built-in defaults, the JSON file given
by ``--config`` and explicit flags.  Each command writes ``manifest.json``
with its fully resolved options; passing that file back through ``--config``
replays the command and reproduces its outputs byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import __version__, seeding
from ..metrics import SWEEP_BASE, default_deltas, sensitivity_sweep
from ..physics2d import simulate
from ..raster import RasterConfig, render_sequence, write_fseq, write_pgm_frames
from ..scenes import ParamKind, SceneKind, apply_params, make_scene, sample_params
from .experiments import ExperimentConfig, run_experiment, table_csv, write_experiment, write_json

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
SCENES = tuple(k.value for k in SceneKind)
KINDS = tuple(k.value for k in ParamKind)

_EXPERIMENT_DEFAULTS = {k: v for k, v in ExperimentConfig().to_dict().items() if k != "seed"}

DEFAULTS = {
    "simulate": {"scene": "three_circles", "n_unknown": None, "kinds": ["mass"], "width": 64,
                 "height": 64, "frames": 30, "stride": 10, "pgm": True},
    "sweep": {"scene": "three_circles", "kind": "mass", "points": 41, "base": None,
              "width": 64, "height": 64, "frames": 30, "stride": 10},
    "dataset-gen": {"scene": "three_circles", "records": 2000, "kinds": ["mass"],
                    "n_unknown": None, "obs_blur": 0.0, "width": 32, "height": 32, "frames": 30,
                    "stride": 10},
    "train": {"dataset": None, "epochs": 60, "learning_rate": 1e-3, "batch_size": 20},
    "refine": {**_EXPERIMENT_DEFAULTS, "runs": 1},
    "eval": dict(_EXPERIMENT_DEFAULTS),
    "blur-eval": {**_EXPERIMENT_DEFAULTS, "estimator": "learned", "sigma": 3.0,
                  "width": 32, "height": 32},
}
for _d in DEFAULTS.values():
    _d.setdefault("seed", 0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_raster(p):
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--stride", type=int)


def _add_experiment(p):
    p.add_argument("--scene", choices=SCENES)
    p.add_argument("--estimator", choices=("oracle", "tpe", "random", "learned"))
    p.add_argument("--kinds", nargs="+", choices=KINDS)
    p.add_argument("--runs", type=int)
    p.add_argument("--iters", "--iterations", dest="iterations", type=int)
    p.add_argument("--n-unknown", dest="n_unknown", type=int)
    p.add_argument("--model")
    p.add_argument("--mode", choices=("auto", "single", "multi"))
    _add_raster(p)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root seed")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON options file")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    g.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                   help="parallel workers (default: PHYSEST_THREADS, 0 = all CPUs)")

    parser = _Parser(prog="physest", parents=[common],
                     description="Estimate physical parameters by simulate-and-correct.")
    parser.add_argument("--version", action="version", version=f"physest {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="simulate a scene and render it")
    p.add_argument("--scene", choices=SCENES)
    p.add_argument("--n-unknown", dest="n_unknown", type=int)
    p.add_argument("--kinds", nargs="+", choices=KINDS)
    p.add_argument("--no-pgm", dest="pgm", action="store_const", const=False)
    _add_raster(p)

    p = sub.add_parser("sweep", parents=[common], help="image-MSE sensitivity sweep")
    p.add_argument("--scene", choices=SCENES)
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--points", type=int)
    p.add_argument("--base", type=float)
    _add_raster(p)

    p = sub.add_parser("dataset-gen", parents=[common], help="generate training records")
    p.add_argument("--scene", choices=SCENES)
    p.add_argument("--records", type=int)
    p.add_argument("--obs-blur", dest="obs_blur", type=float,
                   help="blur sigma (pixels) applied to observations only")
    p.add_argument("--kinds", nargs="+", choices=KINDS)
    p.add_argument("--n-unknown", dest="n_unknown", type=int)
    _add_raster(p)

    p = sub.add_parser("train", parents=[common], help="train the regressor")
    p.add_argument("--dataset", nargs="+", help="one or more dataset files, concatenated")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", "--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)

    p = sub.add_parser("refine", parents=[common], help="one refinement run")
    _add_experiment(p)
    p = sub.add_parser("eval", parents=[common], help="aggregate error over repeated runs")
    _add_experiment(p)
    p = sub.add_parser("blur-eval", parents=[common], help="sharp vs blurred observations")
    _add_experiment(p)
    p.add_argument("--sigma", type=float)
    return parser


def resolve(command: str, args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS[command])
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("command", "config", "out", "workers")}
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            data = json.loads(Path(cfg_path).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}") from None
        if isinstance(data, dict) and "options" in data:
            if data.get("command", command) != command:
                raise UsageError(f"config was written by {data['command']!r}, not {command!r}")
            data = data["options"]
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(data) - set(opts)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        opts.update(data)
    opts.update(flags)
    return opts


def _raster(o) -> RasterConfig:
    return RasterConfig(width=o["width"], height=o["height"], frames=o["frames"], stride=o["stride"])


def _experiment(o) -> ExperimentConfig:
    keys = ExperimentConfig.__dataclass_fields__
    return ExperimentConfig(**{k: v for k, v in o.items() if k in keys})


def _manifest(out: Path, command: str, opts: dict, **extra) -> None:
    write_json(out / "manifest.json", {"command": command, "options": opts, **extra})


def cmd_simulate(o, out, workers):
    spec = make_scene(o["scene"], o["n_unknown"], o["seed"], o["kinds"],
                      allow_single=o["n_unknown"] == 1)
    params = sample_params(spec, seeding.derive_seed(o["seed"], seeding.TRUTH))
    cfg = _raster(o)
    traj = simulate(apply_params(spec, params), cfg.steps)
    seq = render_sequence(traj, None, cfg)
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "body", "x", "y", "angle", "vx", "vy", "ang_velocity"])
        for s in range(traj.states.shape[0]):
            for i, bid in enumerate(traj.body_ids):
                if not traj.static_mask[i]:
                    w.writerow([s, bid, *(repr(float(v)) for v in traj.states[s, i])])
    write_fseq(out / "frames.fseq", seq)
    if o["pgm"]:
        write_pgm_frames(out / "pgm", seq)
    _manifest(out, "simulate", o, scene=spec.to_dict(), params=params.as_list())


def cmd_sweep(o, out, workers):
    kind = ParamKind(o["kind"])
    base = SWEEP_BASE[kind] if o["base"] is None else o["base"]
    spec = make_scene(o["scene"], None, o["seed"], [kind])
    deltas = default_deltas(kind, base, o["points"])
    curve = sensitivity_sweep(spec, kind, base, deltas, _raster(o))
    curve.to_csv(out / f"sweep_{kind.value}.csv")
    _manifest(out, "sweep", o, range=curve.range)


def cmd_dataset_gen(o, out, workers):
    from ..estimators import gen_dataset, save_dataset

    ds = gen_dataset(o["scene"], o["records"], o["seed"], o["kinds"], _raster(o),
                     n_unknown=o["n_unknown"], obs_blur=o["obs_blur"], workers=workers)
    save_dataset(out / "dataset.pds", ds)
    _manifest(out, "dataset-gen", o, target_mean=float(ds.targets.mean()))


def cmd_train(o, out, workers):
    from ..estimators import Dataset, LearnedEstimator, TrainConfig, load_dataset, mlp_train

    if not o["dataset"]:
        raise ValueError("train needs --dataset")
    paths = [o["dataset"]] if isinstance(o["dataset"], str) else o["dataset"]
    ds = Dataset.concat([load_dataset(p) for p in paths])
    cfg = TrainConfig(learning_rate=o["learning_rate"], batch_size=o["batch_size"],
                      epochs=o["epochs"], seed=o["seed"])
    res = mlp_train(ds.features, ds.targets, cfg)
    LearnedEstimator(res.model, ds.kinds).save(out / "model.mlp1")
    with open(out / "losses.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, l in enumerate(res.losses):
            w.writerow([i, repr(l)])
    _manifest(out, "train", o, final_loss=res.losses[-1])


def cmd_refine(o, out, workers):
    from ..refine import write_run
    from .experiments import run_one

    cfg = _experiment(o)
    run = run_one(cfg, 0, workers)
    write_run(run, out / "run.csv")
    _manifest(out, "refine", o, run=run.manifest())


def cmd_eval(o, out, workers):
    cfg = _experiment(o)
    records = run_experiment(cfg, workers)
    rows = write_experiment(out, cfg, records)
    _manifest(out, "eval", o, table=rows)


def cmd_blur_eval(o, out, workers):
    from dataclasses import replace

    cfg = _experiment(o)
    rows = []
    for sigma in (0.0, float(o["sigma"])):
        c = replace(cfg, blur_sigma=sigma)
        rows += write_experiment(out / f"sigma_{sigma:g}", c, run_experiment(c, workers))
    ratio = rows[1]["mean_min_param_mse"] / rows[0]["mean_min_param_mse"] \
        if rows[0]["mean_min_param_mse"] > 0 else float("inf")
    (out / "blur.csv").write_text(table_csv(rows))
    _manifest(out, "blur-eval", o, degradation=ratio)


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "dataset-gen": cmd_dataset_gen,
            "train": cmd_train, "refine": cmd_refine, "eval": cmd_eval, "blur-eval": cmd_blur_eval}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        opts = resolve(args.command, args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    out = Path(getattr(args, "out", None) or "out")
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](opts, out, getattr(args, "workers", None))
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"physest {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
