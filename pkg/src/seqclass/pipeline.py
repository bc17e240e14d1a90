"""Experiment orchestration: ingest -> featurize -> (RFF) -> fit -> evaluate.

An experiment repeats `runs` independent repetitions. Repetition i
derives every seed by adding i to the configured base (split, RFF
projector, model init), resamples the train/test split, fits the chosen
model on the train rows and scores the test rows. Per-run metrics plus
their mean and population std land in a JSON report whose bytes are
reproducible: everything time-derived lives under "timing" keys, which
`strip_timing` removes for byte-level comparison. Wall-clock runtime is
measured around fit() only.

The RFF projector is built from (dim, D, gamma, seed) alone and is
instantiated before any test row is touched, so test data cannot leak
into it by construction.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import IO

import numpy as np
import scipy.sparse as sp

from . import linear_models as lm
from . import neural_net as nn
from .errors import DegenerateLabels, InvalidConfig, IoFailure, SeqclassError
from .features import ENCODING_KMERS, ENCODING_OHE, FeaturizedCorpus, featurize_corpus
from .ingest import CLASS_LEVELS, LabeledSequence, SplitSpec, split_indices
from .metrics import RunMetrics, aggregate, confusion, roc_auc_ovr_weighted, summarize
from .rff import default_gamma, new_projector, project
from .version import __version__

MODELS = ("majority", "nb", "lr", "ridge", "nn")


@dataclass
class ExperimentConfig:
    # inputs: either a prebuilt corpus file or fasta+metadata
    fasta: str | None = None
    metadata: str | None = None
    corpus: str | None = None
    # task
    class_level: str = "country"
    encoding: str = ENCODING_KMERS
    k: int = 3
    expected_len: int | None = None
    l2_normalize: bool = False
    # random Fourier features
    use_rff: bool = False
    rff_dim: int = 1000
    rff_gamma: float | None = None  # None -> 1/feature_dim
    rff_seed: int = 0
    # model and hyperparameters
    model: str = "majority"
    lr_l2_lambda: float = 1e-4
    lr_max_iters: int = 1000
    lr_tol: float = 1e-6
    ridge_alpha: float = 1.0
    nn_hidden_width: int | None = None
    nn_batch_size: int = 100
    nn_epochs: int = 10
    nn_learning_rate: float = 0.001
    nn_seed: int = 0
    # split and protocol
    train_fraction: float = 0.10
    stratified: bool = True
    split_seed: int = 0
    runs: int = 5
    parallel_runs: bool = False
    workers: int = 1
    output_dir: str | None = None

    def validate(self) -> None:
        if self.class_level not in CLASS_LEVELS:
            raise InvalidConfig(f"class_level must be one of {CLASS_LEVELS}")
        if self.encoding not in (ENCODING_KMERS, ENCODING_OHE):
            raise InvalidConfig(f"encoding must be 'kmers' or 'ohe', got {self.encoding!r}")
        if self.model not in MODELS:
            raise InvalidConfig(f"model must be one of {MODELS}")
        if self.runs < 1:
            raise InvalidConfig("runs must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidConfig("train_fraction must be in (0,1)")
        if self.use_rff and self.rff_dim < 1:
            raise InvalidConfig("rff_dim must be >= 1")


_BOOL_KEYS = {"use_rff", "l2_normalize", "stratified", "parallel_runs"}
_INT_KEYS = {
    "k", "expected_len", "rff_dim", "rff_seed", "lr_max_iters", "nn_hidden_width",
    "nn_batch_size", "nn_epochs", "nn_seed", "split_seed", "runs", "workers",
}
_FLOAT_KEYS = {
    "rff_gamma", "lr_l2_lambda", "lr_tol", "ridge_alpha", "nn_learning_rate",
    "train_fraction",
}
_OPTIONAL_KEYS = {
    "fasta", "metadata", "corpus", "expected_len", "rff_gamma",
    "nn_hidden_width", "output_dir",
}


def parse_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read config {path!r}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def config_from_mapping(mapping: dict[str, str]) -> ExperimentConfig:
    """Build a config from string key/values (file or CLI overrides)."""
    known = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    kwargs: dict = {}
    for key, raw in mapping.items():
        if key not in known:
            raise InvalidConfig(f"unknown config key {key!r}")
        if raw is None or raw == "" or raw.lower() == "none":
            if key not in _OPTIONAL_KEYS:
                raise InvalidConfig(f"config key {key!r} cannot be empty")
            kwargs[key] = None
            continue
        if key in _BOOL_KEYS:
            if raw.lower() in ("1", "true", "yes", "on"):
                kwargs[key] = True
            elif raw.lower() in ("0", "false", "no", "off"):
                kwargs[key] = False
            else:
                raise InvalidConfig(f"config key {key!r} expects a boolean, got {raw!r}")
        elif key in _INT_KEYS:
            kwargs[key] = int(raw)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(raw)
        else:
            kwargs[key] = raw
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config


def resolved_config(config: ExperimentConfig) -> dict:
    """JSON-friendly snapshot embedded in every report."""
    return asdict(config)


@contextmanager
def _stage(name: str):
    """Prefix pipeline errors with the stage that raised them."""
    try:
        yield
    except SeqclassError as exc:
        exc.args = (f"[stage:{name}] {exc}",)
        raise


def _run_seeds(config: ExperimentConfig, run_index: int) -> dict[str, int]:
    return {
        "split": config.split_seed + run_index,
        "rff": config.rff_seed + run_index,
        "model": config.nn_seed + run_index,
    }


def _fit_and_score(config: ExperimentConfig, X_train, y_train, X_test, class_count: int):
    """Returns (predictions, scores, fit_seconds) for the configured model."""
    model_kind = config.model
    n_test = X_test.shape[0]
    if model_kind == "majority":
        tic = time.perf_counter()
        model = lm.majority_fit(y_train, class_count)
        fit_seconds = time.perf_counter() - tic
        scores = lm.majority_scores(model, n_test)
        return lm.majority_predict(model, n_test), scores, fit_seconds
    if model_kind == "nb":
        tic = time.perf_counter()
        model = lm.gnb_fit(X_train, y_train, class_count)
        fit_seconds = time.perf_counter() - tic
        scores = lm.gnb_scores(model, X_test)
        return np.argmax(scores, axis=1), scores, fit_seconds
    if model_kind == "lr":
        tic = time.perf_counter()
        model = lm.logreg_fit(
            X_train, y_train,
            l2_lambda=config.lr_l2_lambda,
            max_iters=config.lr_max_iters,
            tol=config.lr_tol,
            class_count=class_count,
        )
        fit_seconds = time.perf_counter() - tic
        scores = lm.logreg_proba(model, X_test)
        return np.argmax(scores, axis=1), scores, fit_seconds
    if model_kind == "ridge":
        tic = time.perf_counter()
        model = lm.ridge_fit(X_train, y_train, alpha=config.ridge_alpha, class_count=class_count)
        fit_seconds = time.perf_counter() - tic
        scores = lm.ridge_scores(model, X_test)
        return np.argmax(scores, axis=1), scores, fit_seconds
    # neural net
    if class_count < 2:
        raise DegenerateLabels("the nn model needs at least 2 classes")
    net_config = nn.NetConfig(
        input_dim=X_train.shape[1],
        class_count=class_count,
        hidden_width=config.nn_hidden_width,
        batch_size=config.nn_batch_size,
        epochs=config.nn_epochs,
        learning_rate=config.nn_learning_rate,
        seed=config.nn_seed,
    )
    tic = time.perf_counter()
    net, _trace = nn.nn_train(net_config, X_train, y_train)
    fit_seconds = time.perf_counter() - tic
    scores = nn.nn_scores(net, X_test)
    return np.argmax(scores, axis=1), scores, fit_seconds


def _as_model_input(matrix):
    if sp.issparse(matrix):
        return matrix.astype(np.float64)
    return np.asarray(matrix, dtype=np.float64)


def _single_run(config: ExperimentConfig, feats: FeaturizedCorpus, run_index: int):
    """One repetition: split, optional projection, fit, score."""
    seeds = _run_seeds(config, run_index)
    spec = SplitSpec(
        train_fraction=config.train_fraction,
        seed=seeds["split"],
        stratified=config.stratified,
    )
    with _stage("split"):
        class_labels = [feats.class_names[i] for i in feats.labels] if config.stratified else None
        train_idx, test_idx = split_indices(feats.matrix.shape[0], spec, class_labels)

    X_train = feats.matrix[train_idx]
    y_train = feats.labels[train_idx]
    y_test = feats.labels[test_idx]

    if config.use_rff:
        with _stage("rff"):
            d = feats.matrix.shape[1]
            gamma = config.rff_gamma if config.rff_gamma is not None else default_gamma(d)
            # built from (d, D, gamma, seed) before any test row is read
            projector = new_projector(d, config.rff_dim, gamma, seeds["rff"])
            X_train = project(projector, X_train)
            X_test = project(projector, feats.matrix[test_idx])
    else:
        X_train = _as_model_input(X_train)
        X_test = _as_model_input(feats.matrix[test_idx])

    run_config = replace(config, nn_seed=seeds["model"])
    class_count = len(feats.class_names)
    with _stage("fit"):
        predictions, scores, fit_seconds = _fit_and_score(
            run_config, X_train, y_train, X_test, class_count
        )

    with _stage("metrics"):
        summary = summarize(confusion(y_test, predictions, class_count))
        auc = roc_auc_ovr_weighted(scores, y_test)
    run_metrics = RunMetrics(
        accuracy=summary["accuracy"],
        precision_weighted=summary["precision_weighted"],
        recall_weighted=summary["recall_weighted"],
        f1_weighted=summary["f1_weighted"],
        f1_macro=summary["f1_macro"],
        roc_auc_weighted_ovr=auc,
        train_runtime_seconds=fit_seconds,
    )
    return {
        "run_index": run_index,
        "seeds": seeds,
        "train_size": int(len(train_idx)),
        "test_size": int(len(test_idx)),
        "metrics": {
            "accuracy": run_metrics.accuracy,
            "precision_weighted": run_metrics.precision_weighted,
            "recall_weighted": run_metrics.recall_weighted,
            "f1_weighted": run_metrics.f1_weighted,
            "f1_macro": run_metrics.f1_macro,
            "roc_auc_weighted_ovr": run_metrics.roc_auc_weighted_ovr,
        },
        "timing": {"train_runtime_seconds": run_metrics.train_runtime_seconds},
    }, run_metrics


def _run_worker(args):
    config, feats, run_index = args
    return _single_run(config, feats, run_index)


def run_experiment(
    config: ExperimentConfig,
    data: list[LabeledSequence],
) -> tuple[dict, dict]:
    """Execute the full protocol on an in-memory corpus.

    Returns (report, manifest); artifacts are also written when
    config.output_dir is set (report.json, report.csv, manifest.json).
    """
    config.validate()
    with _stage("featurize"):
        feats = featurize_corpus(
            data,
            config.encoding,
            k=config.k,
            expected_len=config.expected_len,
            class_level=config.class_level,
            workers=config.workers,
            l2_normalize=config.l2_normalize,
        )

    tasks = [(config, feats, i) for i in range(config.runs)]
    if config.parallel_runs and config.runs > 1:
        with ProcessPoolExecutor(max_workers=min(config.runs, config.workers or 1)) as pool:
            results = list(pool.map(_run_worker, tasks))
    else:
        results = [_single_run(config, feats, i) for i in range(config.runs)]

    run_dicts = [r[0] for r in results]
    run_metrics = [r[1] for r in results]
    agg = aggregate(run_metrics)

    quality = [
        "accuracy", "precision_weighted", "recall_weighted",
        "f1_weighted", "f1_macro", "roc_auc_weighted_ovr",
    ]
    report = {
        "format": "seqclass-report/1",
        "tool_version": __version__,
        "config": resolved_config(config),
        "class_names": feats.class_names,
        "corpus_size": int(feats.matrix.shape[0]),
        "feature_dim": int(feats.matrix.shape[1]),
        "runs": run_dicts,
        "aggregate": {
            "run_count": agg.run_count,
            "mean": {k: agg.mean[k] for k in quality},
            "std": {k: agg.std[k] for k in quality},
            "timing": {
                "train_runtime_seconds_mean": agg.mean["train_runtime_seconds"],
                "train_runtime_seconds_std": agg.std["train_runtime_seconds"],
            },
        },
    }
    manifest = {
        "format": "seqclass-manifest/1",
        "tool_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": resolved_config(config),
        "per_run_seeds": [r["seeds"] for r in run_dicts],
        "artifacts": {},
    }

    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        report_json = out / "report.json"
        report_csv = out / "report.csv"
        manifest_json = out / "manifest.json"
        manifest["artifacts"] = {
            "report_json": str(report_json),
            "report_csv": str(report_csv),
            "manifest_json": str(manifest_json),
        }
        write_json(report_json, report)
        with open(report_csv, "w", encoding="utf-8") as f:
            write_report_csv(f, [report])
        write_json(manifest_json, manifest)
    return report, manifest


def write_json(path, payload: dict) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(report_to_json(payload))
    except OSError as exc:
        raise IoFailure(f"cannot write {path!r}: {exc}") from exc


def report_to_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def strip_timing(obj):
    """Recursive copy with every 'timing' key removed (determinism view)."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k != "timing"}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def determinism_bytes(report: dict) -> bytes:
    """Canonical bytes of a report with time-derived fields excluded."""
    return report_to_json(strip_timing(report)).encode("utf-8")


CSV_COLUMNS = (
    "embedding", "algorithm", "accuracy", "precision", "recall",
    "f1_weighted", "f1_macro", "roc_auc", "train_runtime_sec",
)


def _embedding_name(config: dict) -> str:
    base = config["encoding"]
    return f"{base}+rff" if config.get("use_rff") else base


def write_report_csv(handle: IO[str], reports: list[dict]) -> None:
    """One `mean ± std` row per report, with the fixed metric column layout."""
    handle.write(",".join(CSV_COLUMNS) + "\n")
    for report in reports:
        agg = report["aggregate"]
        cells = [
            _embedding_name(report["config"]),
            report["config"]["model"],
        ]
        for key in (
            "accuracy", "precision_weighted", "recall_weighted",
            "f1_weighted", "f1_macro", "roc_auc_weighted_ovr",
        ):
            cells.append(f"{agg['mean'][key]:.4f} ± {agg['std'][key]:.4f}")
        cells.append(
            f"{agg['timing']['train_runtime_seconds_mean']:.3f} ± "
            f"{agg['timing']['train_runtime_seconds_std']:.3f}"
        )
        handle.write(",".join(cells) + "\n")
