"""Command-line interface: ``lattkm <command> [options]``.

Exit codes: 0 on success, 2 on invalid configuration or input, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .exceptions import DataError

logger = logging.getLogger("lattkm")

# flag name -> (RunConfig field, type)
RUN_FLAGS = {
    "--data": ("data", str),
    "--target": ("target", str),
    "--delimiter": ("delimiter", str),
    "--test-fraction": ("test_fraction", float),
    "--split-seed": ("split_seed", int),
    "--feature-map": ("feature_map", str),
    "--n-basis": ("n_basis", int),
    "--bayesian-core": ("bayesian_core", int),
    "--epochs": ("n_epochs", int),
    "--inference": ("inference", str),
    "--beta": ("beta", float),
    "--gamma": ("gamma", float),
    "--max-iter": ("max_iter", int),
    "--restarts": ("n_restarts", int),
    "--cv-folds": ("cv_folds", int),
    "--pattern-middle-rank": ("pattern_middle_rank", int),
    "--n-jobs": ("n_jobs", int),
    "--gp-max-n": ("gp_max_n", int),
    "--out-dir": ("out_dir", str),
}
LIST_FLAGS = {
    "--ranks": ("ranks", int),
    "--rank-patterns": ("rank_patterns", int),
    "--cv-grid": ("cv_grid", float),
    "--seeds": ("seeds", int),
    "--shifts": ("shifts", int),
}


def _add_run_options(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--preset", help="bundled config stub (e.g. 'robot') applied before --config")
    for flag, (dest, typ) in RUN_FLAGS.items():
        p.add_argument(flag, dest=dest, type=typ, default=None)
    for flag, (dest, typ) in LIST_FLAGS.items():
        p.add_argument(flag, dest=dest, type=typ, nargs="+", default=None)


def build_config(args) -> ex.RunConfig:
    values: dict = {}
    if args.preset:
        values.update(ex.load_preset(args.preset))
    if args.config:
        values.update(ex.RunConfig.from_json(args.config).to_dict())
    for dest, _ in list(RUN_FLAGS.values()) + list(LIST_FLAGS.values()):
        v = getattr(args, dest)
        if v is not None:
            values[dest] = v
    if isinstance(values.get("ranks"), list) and len(values["ranks"]) == 1:
        values["ranks"] = values["ranks"][0]
    return ex.RunConfig.from_dict(values).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lattkm", description="Bayesian tensor-train kernel machine experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in [
        ("train", "train a model and report test NLL/RMSE"),
        ("cv", "select (gamma, beta) by K-fold cross-validation, then train"),
        ("ablate-core", "test NLL for every Bayesian core under each rank pattern"),
        ("ablate-shift", "test NLL for every Bayesian core under cyclic feature shifts"),
        ("compare-gp", "VI vs CV vs full GP on one split"),
    ]:
        _add_run_options(sub.add_parser(name, help=help_))

    p = sub.add_parser("predict", help="predictive mean/variance from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target")
    p.add_argument("--delimiter", default=",")

    p = sub.add_parser("metrics", help="NLL and RMSE of a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth")
    p.add_argument("--target")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--out", help="write the report as JSON here")

    p = sub.add_parser("synth", help="write a synthetic dataset drawn from a seeded TT model")
    p.add_argument("--out", required=True)
    p.add_argument("--n-samples", type=int, default=2000)
    p.add_argument("--n-dims", type=int, default=6)
    p.add_argument("--n-basis", type=int, default=4)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--signal-std", type=float, default=1.0)
    p.add_argument("--family", default="polynomial", choices=["polynomial", "fourier"])
    p.add_argument("--seed", type=int, default=0)
    return parser


COMMANDS = {
    "train": ex.cmd_train,
    "cv": ex.cmd_cv,
    "ablate-core": ex.cmd_ablate_core,
    "ablate-shift": ex.cmd_ablate_shift,
    "compare-gp": ex.cmd_compare_gp,
}


def _summary(result: dict) -> dict:
    keys = ("command", "nll", "rmse", "best", "n_fold_fits", "table", "n", "out")
    out = {k: result[k] for k in keys if k in result}
    return out or result


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in COMMANDS:
            result = COMMANDS[args.command](build_config(args))
        elif args.command == "predict":
            result = ex.cmd_predict(args.model, args.data, args.out, args.target, args.delimiter)
        elif args.command == "metrics":
            result = ex.cmd_metrics(args.predictions, args.truth, args.target, args.delimiter)
            if args.out:
                out = Path(args.out)
                out.parent.mkdir(parents=True, exist_ok=True)
                out.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        else:
            result = ex.cmd_synth(args.out, args.n_samples, args.n_dims, args.n_basis, args.rank,
                                  args.noise, args.signal_std, args.family, args.seed)
    except (ex.ConfigError, DataError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.debug("command failed", exc_info=True)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(_summary(result), indent=2, default=float))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
