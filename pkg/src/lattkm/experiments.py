"""Experiment drivers: training, CV, ablations and the GP comparison.

Every driver takes a :class:`RunConfig`, writes deterministic JSON/CSV
artifacts into ``config.out_dir`` and returns a result dictionary. Wall-clock
measurements are volatile, so they are written only to ``manifest.json``
(together with the creation timestamp and the hashes of all other files).
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.model_selection import GridSearchCV, KFold

from .als import rank_pattern
from .data import Dataset, cyclic_shift, indices_hash, load_csv, read_numeric_csv, split, write_csv
from .estimator import LaplaceTTKMRegressor
from .exceptions import DataError
from .gp import ExactGPRegressor, select_hyperparameters
from .metrics import gaussian_nll, rmse
from .synth import make_tt_regression

logger = logging.getLogger(__name__)

DEFAULT_CV_GRID = (0.001, 0.01, 0.1, 1.0, 10.0)


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


@dataclass
class RunConfig:
    data: str | None = None
    target: str | None = None
    delimiter: str = ","
    test_fraction: float = 0.1
    split_seed: int = 0
    feature_map: str = "polynomial"
    n_basis: int = 4
    ranks: int | list = 2
    rank_patterns: list = field(default_factory=lambda: [1, 2, 3])
    pattern_middle_rank: int | None = None
    bayesian_core: int = 1
    n_epochs: int = 10
    inference: str = "vi"
    beta: float = 1.0
    gamma: float = 1.0
    max_iter: int = 10
    n_restarts: int = 3
    cv_grid: list = field(default_factory=lambda: list(DEFAULT_CV_GRID))
    cv_folds: int = 5
    seeds: list = field(default_factory=lambda: list(range(10)))
    shifts: list = field(default_factory=lambda: [0, 1, 2, 3])
    n_jobs: int = 1
    gp_max_n: int = 5000
    gp_grid: dict | None = None
    out_dir: str = "runs"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self, n_features: int | None = None) -> "RunConfig":
        if self.inference not in ("vi", "cv", "fixed"):
            raise ConfigError(f"inference must be vi, cv or fixed, got {self.inference!r}")
        if self.feature_map not in ("polynomial", "fourier"):
            raise ConfigError(f"unknown feature map {self.feature_map!r}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        for name in ("n_basis", "n_epochs", "max_iter", "n_restarts", "n_jobs", "gp_max_n"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.cv_grid or any(not v > 0 for v in self.cv_grid):
            raise ConfigError("cv_grid must be a non-empty list of positive values")
        if self.inference == "fixed" and not (self.beta > 0 and self.gamma > 0):
            raise ConfigError("fixed inference needs positive beta and gamma")
        ranks = [self.ranks] if np.isscalar(self.ranks) else list(self.ranks)
        if any(int(r) < 1 for r in ranks):
            raise ConfigError(f"ranks must be positive, got {self.ranks}")
        if any(p not in (1, 2, 3) for p in self.rank_patterns):
            raise ConfigError(f"rank patterns must be among 1, 2, 3, got {self.rank_patterns}")
        if n_features is not None:
            if not 1 <= self.bayesian_core <= n_features:
                raise ConfigError(f"bayesian_core must be in 1..{n_features}, got {self.bayesian_core}")
            if not np.isscalar(self.ranks) and len(self.ranks) != n_features - 1:
                raise ConfigError(f"expected {n_features - 1} ranks, got {len(self.ranks)}")
        return self


def load_preset(name: str) -> dict:
    """Bundled configuration stub, e.g. ``"robot"``."""
    try:
        text = resources.files("lattkm").joinpath("configs", f"{name}.json").read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"unknown preset {name!r}") from exc
    return json.loads(text)


def load_dataset(config: RunConfig) -> Dataset:
    if config.data is None:
        raise ConfigError("no dataset given (set 'data' to a CSV path)")
    if not Path(config.data).exists():
        raise ConfigError(f"dataset {config.data} does not exist")
    return load_csv(config.data, config.target, config.delimiter)


def make_estimator(config: RunConfig, seed: int, **overrides) -> LaplaceTTKMRegressor:
    params = dict(
        n_basis=config.n_basis, feature_map=config.feature_map, ranks=config.ranks,
        bayesian_core=config.bayesian_core, n_epochs=config.n_epochs,
        inference="fixed" if config.inference == "fixed" else "vi",
        beta=config.beta, gamma=config.gamma, max_iter=config.max_iter,
        n_restarts=config.n_restarts, random_state=seed)
    params.update(overrides)
    return LaplaceTTKMRegressor(**params)


def neg_nll_score(estimator, X, y) -> float:
    return -estimator.nll(X, y)


def cv_search(config: RunConfig, train: Dataset, seed: int, **overrides) -> GridSearchCV:
    """K-fold selection of ``(gamma, beta)`` from ``cv_grid`` by validation NLL.

    Candidates are visited with ``gamma`` fastest; ties keep the earliest.
    """
    grid = {"beta": list(config.cv_grid), "gamma": list(config.cv_grid)}
    search = GridSearchCV(
        make_estimator(config, seed, **{**overrides, "inference": "fixed"}), grid, scoring=neg_nll_score,
        cv=KFold(config.cv_folds, shuffle=True, random_state=config.split_seed),
        n_jobs=None if config.n_jobs == 1 else config.n_jobs, refit=True, error_score="raise")
    return search.fit(train.X, train.y)


def fit_model(config: RunConfig, train: Dataset, seed: int, **overrides):
    """Fit one TT model per the configured inference mode; returns (model, info)."""
    if config.inference == "cv" and "inference" not in overrides:
        search = cv_search(config, train, seed, **overrides)
        info = {
            "best_beta": float(search.best_params_["beta"]),
            "best_gamma": float(search.best_params_["gamma"]),
            "n_fold_fits": int(len(search.cv_results_["params"]) * search.n_splits_),
            "cv_results": [
                {"beta": float(p["beta"]), "gamma": float(p["gamma"]),
                 "mean_val_nll": float(-m), "std_val_nll": float(s)}
                for p, m, s in zip(search.cv_results_["params"],
                                   search.cv_results_["mean_test_score"],
                                   search.cv_results_["std_test_score"])],
        }
        return search.best_estimator_, info
    model = make_estimator(config, seed, **overrides).fit(train.X, train.y)
    return model, {"beta": model.beta_, "gamma": model.gamma_,
                   "noise_precision": model.noise_precision_, "n_iter": model.n_iter_}


def summarize(values) -> dict:
    values = [float(v) for v in values]
    out = {"mean": float(np.mean(values)), "n": len(values)}
    if len(values) >= 2:
        out["std"] = float(np.std(values, ddof=1))
    return out


# -- artifact writing ---------------------------------------------------------

class RunWriter:
    """Collects artifacts of one command and writes the manifest last."""

    def __init__(self, out_dir, command: str):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.files: list[str] = []
        self.timings: dict = {}

    def json(self, name, obj):
        self._write(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self._write(name, buf.getvalue())

    def _write(self, name, text):
        (self.out / name).write_text(text, encoding="utf-8")
        if name not in self.files:
            self.files.append(name)

    def add_file(self, name):
        if name not in self.files:
            self.files.append(name)

    def finish(self):
        manifest = {
            "command": self.command,
            "created": datetime.now(timezone.utc).isoformat(),
            "timings_seconds": self.timings,
            "files": {n: hashlib.sha256((self.out / n).read_bytes()).hexdigest() for n in sorted(self.files)},
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                                encoding="utf-8")
        return manifest


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _prediction_rows(tag: list, test: Dataset, mean, var):
    for idx, yt, m, v in zip(test.indices, test.y, mean, var):
        yield tag + [int(idx), float(yt), float(m), float(v)]


PRED_COLS = ["index", "y_true", "mean", "var"]


# -- commands -----------------------------------------------------------------

def cmd_train(config: RunConfig) -> dict:
    ds = load_dataset(config)
    config.validate(ds.n_features)
    train, test = split(ds, config.test_fraction, config.split_seed)
    writer = RunWriter(config.out_dir, "train")
    per_seed, pred_rows = [], []
    for i, seed in enumerate(config.seeds):
        t0 = time.perf_counter()
        model, info = fit_model(config, train, seed)
        writer.timings[f"train_seed_{seed}"] = time.perf_counter() - t0
        pred = model.predict_distribution(test.X)
        per_seed.append({"seed": seed, "nll": gaussian_nll(test.y, pred.mean, pred.var),
                         "rmse": rmse(test.y, pred.mean), **_scalar_info(info)})
        pred_rows.extend(_prediction_rows([seed], test, pred.mean, pred.var))
        if i == 0:
            model.save(writer.out / "model.json")
            writer.add_file("model.json")
            if "cv_results" in info:
                writer.json("cv_results.json", info["cv_results"])
    writer.csv("predictions.csv", ["seed"] + PRED_COLS, pred_rows)
    report = {
        "command": "train", "config": config.to_dict(), "scale": "original target units",
        "n_train": train.n_samples, "n_test": test.n_samples,
        "test_index_hash": indices_hash(test.indices),
        "per_seed": per_seed,
        "nll": summarize(r["nll"] for r in per_seed),
        "rmse": summarize(r["rmse"] for r in per_seed),
    }
    writer.json("report.json", report)
    report["timings_seconds"] = writer.finish()["timings_seconds"]
    return report


def _scalar_info(info: dict) -> dict:
    return {k: v for k, v in info.items() if not isinstance(v, (list, dict))}


def cmd_cv(config: RunConfig) -> dict:
    config = dataclasses.replace(config, inference="cv")
    ds = load_dataset(config)
    config.validate(ds.n_features)
    train, test = split(ds, config.test_fraction, config.split_seed)
    writer = RunWriter(config.out_dir, "cv")
    per_seed, pred_rows, grid_rows = [], [], []
    for seed in config.seeds:
        t0 = time.perf_counter()
        model, info = fit_model(config, train, seed)
        writer.timings[f"cv_seed_{seed}"] = time.perf_counter() - t0
        pred = model.predict_distribution(test.X)
        per_seed.append({"seed": seed, "nll": gaussian_nll(test.y, pred.mean, pred.var),
                         "rmse": rmse(test.y, pred.mean), **_scalar_info(info)})
        pred_rows.extend(_prediction_rows([seed], test, pred.mean, pred.var))
        grid_rows.extend([seed, r["gamma"], r["beta"], r["mean_val_nll"], r["std_val_nll"]]
                         for r in info["cv_results"])
    writer.csv("predictions.csv", ["seed"] + PRED_COLS, pred_rows)
    writer.csv("cv_grid.csv", ["seed", "gamma", "beta", "mean_val_nll", "std_val_nll"], grid_rows)
    report = {
        "command": "cv", "config": config.to_dict(), "scale": "original target units",
        "n_train": train.n_samples, "n_test": test.n_samples,
        "test_index_hash": indices_hash(test.indices),
        "per_seed": per_seed,
        "n_fold_fits": int(sum(r["n_fold_fits"] for r in per_seed)),
        "nll": summarize(r["nll"] for r in per_seed),
        "rmse": summarize(r["rmse"] for r in per_seed),
    }
    writer.json("report.json", report)
    report["timings_seconds"] = writer.finish()["timings_seconds"]
    return report


def cmd_predict(model_path, data_path, out_path, target=None, delimiter=",") -> dict:
    model = LaplaceTTKMRegressor.load(model_path)
    header, body = read_numeric_csv(data_path, delimiter)
    if len(header) == model.n_features_in_:
        X, y = body, None
    else:
        ds = load_csv(data_path, target, delimiter)
        X, y = ds.X, ds.y
    pred = model.predict_distribution(X)
    rows = []
    for i, (m, v) in enumerate(zip(pred.mean, pred.var)):
        row = [i, float(m), float(v), float(np.sqrt(v))]
        if y is not None:
            row.insert(1, float(y[i]))
        rows.append(row)
    header = ["index", "mean", "var", "std"] if y is None else ["index", "y_true", "mean", "var", "std"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([[_fmt(v) for v in r] for r in rows])
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(buf.getvalue(), encoding="utf-8")
    return {"n": len(rows), "out": str(out_path)}


def read_predictions(path) -> dict:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: no predictions")
    cols = rows[0].keys()
    if not {"mean", "var"} <= set(cols):
        raise DataError(f"{path}: predictions need 'mean' and 'var' columns")
    return {c: np.array([float(r[c]) for r in rows]) for c in cols if c in ("mean", "var", "y_true")}


def cmd_metrics(predictions_path, truth_path=None, target=None, delimiter=",") -> dict:
    """NLL and RMSE of a predictions CSV against ground truth."""
    pred = read_predictions(predictions_path)
    if truth_path is not None:
        y = load_csv(truth_path, target, delimiter).y
    elif "y_true" in pred:
        y = pred["y_true"]
    else:
        raise ConfigError("no ground truth: pass a truth file or include a y_true column")
    if y.shape != pred["mean"].shape:
        raise DataError(f"length mismatch: {y.shape[0]} targets vs {pred['mean'].shape[0]} predictions")
    if np.any(pred["var"] <= 0):
        raise DataError("predictive variances must be positive")
    return {"nll": gaussian_nll(y, pred["mean"], pred["var"]), "rmse": rmse(y, pred["mean"]),
            "n": int(y.shape[0])}


def _core_sweep(config: RunConfig, train: Dataset, test: Dataset, ranks, tag, pred_rows):
    """Mean test NLL for every choice of Bayesian core (1-based)."""
    D = train.n_features
    col = []
    for d in range(1, D + 1):
        nlls = []
        for seed in config.seeds:
            model, _ = fit_model(config, train, seed, ranks=ranks, bayesian_core=d)
            pred = model.predict_distribution(test.X)
            nlls.append(gaussian_nll(test.y, pred.mean, pred.var))
            pred_rows.extend(_prediction_rows(tag + [d, seed], test, pred.mean, pred.var))
        col.append(float(np.mean(nlls)))
    return col


def best_core_label(col) -> str:
    """``"a/c"``: 1-based argmin of the column out of ``c`` cores."""
    return f"{int(np.argmin(col)) + 1}/{len(col)}"


def cmd_ablate_core(config: RunConfig) -> dict:
    ds = load_dataset(config)
    config.validate(ds.n_features)
    if not np.isscalar(config.ranks):
        raise ConfigError("ablate-core needs a scalar base rank R")
    train, test = split(ds, config.test_fraction, config.split_seed)
    D = ds.n_features
    writer = RunWriter(config.out_dir, "ablate-core")
    columns, pred_rows, patterns = {}, [], {}
    for p in config.rank_patterns:
        try:
            ranks = rank_pattern(p, D, int(config.ranks), config.pattern_middle_rank)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        patterns[f"pattern_{p}"] = ranks
        t0 = time.perf_counter()
        columns[f"pattern_{p}"] = _core_sweep(config, train, test, ranks, [f"pattern_{p}"], pred_rows)
        writer.timings[f"pattern_{p}"] = time.perf_counter() - t0
    names = list(columns)
    writer.csv("ablate_core_nll.csv", ["core"] + names,
               [[d + 1] + [columns[n][d] for n in names] for d in range(D)])
    best = {n: best_core_label(columns[n]) for n in names}
    writer.csv("ablate_core_best.csv", names, [[best[n] for n in names]])
    writer.csv("ablate_core_predictions.csv", ["column", "core", "seed"] + PRED_COLS, pred_rows)
    report = {"command": "ablate-core", "config": config.to_dict(), "ranks": patterns,
              "nll": columns, "best": best, "test_index_hash": indices_hash(test.indices)}
    writer.json("report.json", report)
    writer.finish()
    return report


def cmd_ablate_shift(config: RunConfig) -> dict:
    ds = load_dataset(config)
    config.validate(ds.n_features)
    if not np.isscalar(config.ranks):
        raise ConfigError("ablate-shift needs a scalar rank R (uniform pattern)")
    D = ds.n_features
    bad = [s for s in config.shifts if not 0 <= s < D]
    if bad:
        raise ConfigError(f"shifts must lie in 0..{D - 1}, got {bad}")
    ranks = rank_pattern(1, D, int(config.ranks))
    writer = RunWriter(config.out_dir, "ablate-shift")
    columns, pred_rows = {}, []
    for k in config.shifts:
        shifted = cyclic_shift(ds, k)
        train, test = split(shifted, config.test_fraction, config.split_seed)
        t0 = time.perf_counter()
        columns[f"shift_{k}"] = _core_sweep(config, train, test, ranks, [f"shift_{k}"], pred_rows)
        writer.timings[f"shift_{k}"] = time.perf_counter() - t0
    names = list(columns)
    writer.csv("ablate_shift_nll.csv", ["core"] + names,
               [[d + 1] + [columns[n][d] for n in names] for d in range(D)])
    best = {n: best_core_label(columns[n]) for n in names}
    writer.csv("ablate_shift_best.csv", names, [[best[n] for n in names]])
    writer.csv("ablate_shift_predictions.csv", ["column", "core", "seed"] + PRED_COLS, pred_rows)
    report = {"command": "ablate-shift", "config": config.to_dict(), "ranks": ranks,
              "nll": columns, "best": best}
    writer.json("report.json", report)
    writer.finish()
    return report


def cmd_compare_gp(config: RunConfig) -> dict:
    """TT model with VI, TT model with CV and a full GP on one split (first seed)."""
    ds = load_dataset(config)
    config.validate(ds.n_features)
    train, test = split(ds, config.test_fraction, config.split_seed)
    if train.n_samples > config.gp_max_n:
        raise ConfigError(
            f"{train.n_samples} training rows exceed the full-GP cap of {config.gp_max_n}; "
            "subsample the data or raise gp_max_n if memory allows O(N^2) storage and O(N^3) time")
    seed = config.seeds[0]
    writer = RunWriter(config.out_dir, "compare-gp")
    rows, pred_rows, table = [], [], []
    test_hash = indices_hash(test.indices)

    def run(name, fit):
        t0 = time.perf_counter()
        model, info = fit()
        elapsed = time.perf_counter() - t0
        writer.timings[name] = elapsed
        pred = model.predict_distribution(test.X)
        nll, err = gaussian_nll(test.y, pred.mean, pred.var), rmse(test.y, pred.mean)
        rows.append({"model": name, "nll": nll, "rmse": err, "test_index_hash": test_hash,
                     **_scalar_info(info)})
        table.append({"model": name, "nll": nll, "rmse": err, "time_s": elapsed})
        for idx, yt, m, v in zip(test.indices, test.y, pred.mean, pred.var):
            s = float(np.sqrt(v))
            pred_rows.append([name, int(idx), float(yt), float(m), float(v), m - s, m + s])

    run("LA-TTKM (VI)", lambda: fit_model(dataclasses.replace(config, inference="vi"), train, seed))
    run("LA-TTKM (CV)", lambda: fit_model(dataclasses.replace(config, inference="cv"), train, seed))

    def fit_gp():
        params = select_hyperparameters(train.X, train.y, config.gp_grid, seed=config.split_seed)
        return ExactGPRegressor(**params).fit(train.X, train.y), {f"gp_{k}": v for k, v in params.items()}

    run("Full GP", fit_gp)
    writer.csv("compare_gp.csv", ["model", "nll", "rmse"], [[r["model"], r["nll"], r["rmse"]] for r in rows])
    writer.csv("compare_gp_predictions.csv",
               ["model"] + PRED_COLS + ["lower_1std", "upper_1std"], pred_rows)
    report = {"command": "compare-gp", "config": config.to_dict(), "scale": "original target units",
              "seed": seed, "models": rows}
    writer.json("report.json", report)
    writer.finish()
    return {**report, "table": table}


def cmd_synth(out_path, n_samples=2000, n_dims=6, n_basis=4, rank=2, noise=0.1,
              signal_std=1.0, family="polynomial", seed=0) -> dict:
    ds = make_tt_regression(n_samples=n_samples, n_dims=n_dims, n_basis=n_basis, rank=rank,
                            noise=noise, signal_std=signal_std, family=family, seed=seed)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out_path, ds)
    meta = {"n_samples": n_samples, "n_dims": n_dims, "n_basis": n_basis, "rank": rank,
            "noise": noise, "signal_std": signal_std, "family": family, "seed": seed,
            "noise_precision": 1.0 / noise**2 if noise > 0 else None}
    out_path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
    return meta
