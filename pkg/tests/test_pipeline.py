import json

import numpy as np
import pytest

from seqclass.cli import main
from seqclass.errors import InvalidConfig
from seqclass.ingest import save_corpus
from seqclass.pipeline import (
    ExperimentConfig,
    config_from_mapping,
    determinism_bytes,
    parse_config_file,
    run_experiment,
    strip_timing,
    write_report_csv,
)

from conftest import labeled_corpus, random_sequences


def _write_inputs(tmp_path, class_sizes, length=24, seed=0):
    """FASTA + metadata TSV + prebuilt corpus for the same synthetic data."""
    data = labeled_corpus(class_sizes, length=length, seed=seed)
    fasta = tmp_path / "seqs.fasta"
    with open(fasta, "w") as f:
        for item in data:
            f.write(f">{item.record.id}\n{item.record.residues}\n")
    meta = tmp_path / "meta.tsv"
    with open(meta, "w") as f:
        f.write("id\tcontinent\tcountry\tstate\n")
        for item in data:
            f.write(
                f"{item.record.id}\t{item.label.continent}\t{item.label.country}"
                f"\t{item.label.state or ''}\n"
            )
    corpus = tmp_path / "corpus.bin"
    save_corpus(str(corpus), data)
    return data, fasta, meta, corpus


# --- configuration -----------------------------------------------------------

def test_parse_config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# comment\n"
        "model = nb\n"
        "runs=3\n"
        "use_rff = true  # inline comment\n"
        "train_fraction = 0.2\n"
    )
    config = config_from_mapping(parse_config_file(str(path)))
    assert config.model == "nb"
    assert config.runs == 3
    assert config.use_rff is True
    assert config.train_fraction == 0.2


def test_config_rejects_unknown_key():
    with pytest.raises(InvalidConfig):
        config_from_mapping({"frobnicate": "1"})


def test_config_rejects_bad_values():
    with pytest.raises(InvalidConfig):
        config_from_mapping({"use_rff": "maybe"})
    with pytest.raises(InvalidConfig):
        config_from_mapping({"model": "svm"})
    with pytest.raises(InvalidConfig):
        config_from_mapping({"runs": "none"})


def test_config_optional_none():
    config = config_from_mapping({"rff_gamma": "none", "nn_hidden_width": ""})
    assert config.rff_gamma is None
    assert config.nn_hidden_width is None


# --- experiment runs ----------------------------------------------------------

def test_majority_experiment_matches_closed_form():
    data = labeled_corpus({"big": 60, "s1": 10, "s2": 10, "s3": 10, "s4": 10}, seed=7)
    config = ExperimentConfig(model="majority", class_level="country", runs=5)
    report, manifest = run_experiment(config, data)
    agg = report["aggregate"]
    assert agg["mean"]["accuracy"] == pytest.approx(0.60, abs=1e-9)
    assert agg["mean"]["precision_weighted"] == pytest.approx(0.36, abs=1e-9)
    assert agg["mean"]["f1_weighted"] == pytest.approx(0.45, abs=1e-9)
    assert agg["mean"]["f1_macro"] == pytest.approx(0.15, abs=1e-9)
    assert agg["mean"]["roc_auc_weighted_ovr"] == pytest.approx(0.50, abs=1e-9)
    assert all(v == 0.0 for v in agg["std"].values())
    assert manifest["per_run_seeds"][1]["split"] == 1  # seed + run index


def test_single_run_has_zero_std():
    data = labeled_corpus({"a": 30, "b": 20}, seed=3)
    config = ExperimentConfig(model="majority", runs=1)
    report, _ = run_experiment(config, data)
    assert report["aggregate"]["run_count"] == 1
    assert all(v == 0.0 for v in report["aggregate"]["std"].values())


def test_experiment_is_deterministic():
    data = labeled_corpus({"a": 40, "b": 30, "c": 30}, seed=5)
    config = ExperimentConfig(model="ridge", use_rff=True, rff_dim=32, runs=2)
    report_a, _ = run_experiment(config, data)
    report_b, _ = run_experiment(config, data)
    assert determinism_bytes(report_a) == determinism_bytes(report_b)
    # the timing subtree is the only thing stripped
    stripped = strip_timing(report_a)
    assert "timing" not in stripped["runs"][0]
    assert "metrics" in stripped["runs"][0]


def test_rff_path_records_dims():
    data = labeled_corpus({"a": 40, "b": 40}, seed=11)
    config = ExperimentConfig(model="lr", use_rff=True, rff_dim=64,
                              lr_max_iters=50, runs=1)
    report, _ = run_experiment(config, data)
    assert report["config"]["rff_dim"] == 64
    assert report["config"]["use_rff"] is True
    assert report["feature_dim"] == 9261


def test_every_model_runs_end_to_end():
    data = labeled_corpus({"a": 30, "b": 30}, seed=13)
    for model, extra in (
        ("majority", {}),
        ("nb", {}),
        ("lr", {"lr_max_iters": 30}),
        ("ridge", {}),
        ("nn", {"nn_hidden_width": 8, "nn_epochs": 2}),
    ):
        config = ExperimentConfig(model=model, runs=1, use_rff=True, rff_dim=16, **extra)
        report, _ = run_experiment(config, data)
        metrics = report["runs"][0]["metrics"]
        assert 0.0 <= metrics["accuracy"] <= 1.0
        assert 0.0 <= metrics["roc_auc_weighted_ovr"] <= 1.0


def test_parallel_runs_match_sequential():
    data = labeled_corpus({"a": 30, "b": 30}, seed=17)
    base = ExperimentConfig(model="nb", runs=3, workers=2)
    seq_report, _ = run_experiment(base, data)
    from dataclasses import replace

    par_report, _ = run_experiment(replace(base, parallel_runs=True), data)
    # same numbers; only the echoed config (the parallel flag itself) may differ
    for key in ("runs", "aggregate", "class_names", "feature_dim"):
        assert strip_timing(seq_report[key]) == strip_timing(par_report[key])


def test_errors_carry_stage_names():
    # ragged corpus under one-hot encoding fails in the featurize stage
    data = labeled_corpus({"a": 5, "b": 5}, length=20, seed=21)
    data2 = labeled_corpus({"a": 2, "b": 2}, length=10, seed=22)
    from seqclass.errors import LengthMismatch

    with pytest.raises(LengthMismatch, match=r"\[stage:featurize\]"):
        run_experiment(ExperimentConfig(model="majority", encoding="ohe", runs=1), data + data2)


def test_nn_rejects_single_class_corpus():
    from seqclass.errors import DegenerateLabels

    data = labeled_corpus({"only": 30}, seed=23)
    config = ExperimentConfig(model="nn", runs=1, nn_hidden_width=4, stratified=False)
    with pytest.raises(DegenerateLabels):
        run_experiment(config, data)


def test_report_csv_layout(tmp_path):
    data = labeled_corpus({"a": 30, "b": 30}, seed=19)
    config = ExperimentConfig(model="majority", runs=2)
    report, _ = run_experiment(config, data)
    import io

    buf = io.StringIO()
    write_report_csv(buf, [report])
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == (
        "embedding,algorithm,accuracy,precision,recall,"
        "f1_weighted,f1_macro,roc_auc,train_runtime_sec"
    )
    assert lines[1].startswith("kmers,majority,")
    assert "±" in lines[1]


# --- CLI ------------------------------------------------------------------------

def test_cli_end_to_end(tmp_path, capsys):
    _, fasta, meta, _ = _write_inputs(tmp_path, {"a": 30, "b": 30})
    corpus = tmp_path / "built.corpus"
    assert main(["ingest", "--fasta", str(fasta), "--metadata", str(meta),
                 "--out", str(corpus)]) == 0
    assert "60 sequences" in capsys.readouterr().out

    feats = tmp_path / "feat.sqfv"
    labels = tmp_path / "labels.json"
    assert main(["featurize", "--corpus", str(corpus), "--out-features", str(feats),
                 "--out-labels", str(labels)]) == 0
    assert feats.exists() and labels.exists()

    cfg = tmp_path / "exp.cfg"
    out_dir = tmp_path / "out"
    cfg.write_text(
        f"corpus = {corpus}\nmodel = majority\nruns = 2\noutput_dir = {out_dir}\n"
    )
    assert main(["run", "--config", str(cfg)]) == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert report["aggregate"]["run_count"] == 2
    assert (out_dir / "manifest.json").exists()
    assert (out_dir / "report.csv").exists()

    ig_csv = tmp_path / "ig.csv"
    assert main(["ig", "--corpus", str(corpus), "--out", str(ig_csv)]) == 0
    assert ig_csv.read_text().startswith("position,information_gain")

    merged = tmp_path / "merged.csv"
    assert main(["report", str(out_dir / "report.json"), "--out", str(merged)]) == 0
    assert merged.read_text().count("\n") == 2  # header + one row


def test_cli_flag_overrides(tmp_path):
    _, _, _, corpus = _write_inputs(tmp_path, {"a": 30, "b": 30})
    out_dir = tmp_path / "out2"
    code = main([
        "run", "--corpus", str(corpus), "--model", "majority",
        "--runs", "1", "--output-dir", str(out_dir),
    ])
    assert code == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert report["config"]["runs"] == 1


def test_cli_exit_codes(tmp_path):
    # missing input file -> data error
    assert main(["ingest", "--fasta", str(tmp_path / "nope.fa"),
                 "--metadata", str(tmp_path / "nope.tsv"), "--out", str(tmp_path / "x")]) == 3
    # bad config value -> config error
    _, _, _, corpus = _write_inputs(tmp_path, {"a": 10, "b": 10})
    assert main(["run", "--corpus", str(corpus), "--model", "svm"]) == 2
    # run without inputs -> config error
    assert main(["run", "--model", "majority"]) == 2


def test_cli_ig_subsample_and_histograms(tmp_path):
    _, _, _, corpus = _write_inputs(tmp_path, {"a": 20, "b": 20}, length=12)
    out = tmp_path / "ig.csv"
    hist = tmp_path / "hist.json"
    assert main(["ig", "--corpus", str(corpus), "--subsample", "10",
                 "--seed", "3", "--out", str(out), "--histograms", str(hist)]) == 0
    assert len(out.read_text().strip().splitlines()) == 13  # header + 12 positions
    assert json.loads(hist.read_text())["class_names"] == ["a", "b"]
