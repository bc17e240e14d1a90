"""Command-line front end.

Subcommands: ingest (FASTA + metadata TSV -> corpus), featurize (corpus
-> SQFV1 feature container + labels sidecar), run (full multi-run
experiment -> JSON/CSV report), ig (per-position information gain ->
CSV), report (merge aggregate JSONs into one comparison CSV).

Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DataError, NumericalError
from .features import export_features_csv, featurize_corpus, save_features, save_labels
from .infogain import export_histograms, export_ig, information_gain, position_histograms, subsample
from .ingest import join_metadata, load_corpus, parse_fasta, read_metadata_tsv, save_corpus
from .pipeline import (
    ExperimentConfig,
    config_from_mapping,
    parse_config_file,
    run_experiment,
    write_report_csv,
)
from .version import __version__


def _cmd_ingest(args) -> int:
    with open(args.fasta, "r", encoding="utf-8") as f:
        records = parse_fasta(f)
    with open(args.metadata, "r", encoding="utf-8") as f:
        metadata = read_metadata_tsv(f)
    corpus = join_metadata(records, metadata)
    save_corpus(args.out, corpus)
    print(f"wrote {len(corpus)} sequences to {args.out}")
    return 0


def _cmd_featurize(args) -> int:
    data = load_corpus(args.corpus)
    feats = featurize_corpus(
        data,
        args.encoding,
        k=args.k,
        expected_len=args.expected_len,
        class_level=args.class_level,
        workers=args.workers,
        l2_normalize=args.l2_normalize,
    )
    save_features(args.out_features, feats.matrix, feats.encoding)
    save_labels(args.out_labels, feats.labels, feats.class_names, feats.encoding, feats.dim)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as f:
            export_features_csv(f, feats.matrix)
    print(
        f"featurized {feats.matrix.shape[0]} sequences: dim={feats.dim}, "
        f"nnz={feats.matrix.nnz}, classes={len(feats.class_names)}"
    )
    return 0


def _cmd_run(args) -> int:
    mapping: dict[str, str] = {}
    if args.config:
        mapping.update(parse_config_file(args.config))
    for key in ExperimentConfig.__dataclass_fields__:
        value = getattr(args, f"cfg_{key}", None)
        if value is not None:
            mapping[key] = value
    config = config_from_mapping(mapping)

    if config.corpus:
        data = load_corpus(config.corpus)
    elif config.fasta and config.metadata:
        with open(config.fasta, "r", encoding="utf-8") as f:
            records = parse_fasta(f)
        with open(config.metadata, "r", encoding="utf-8") as f:
            metadata = read_metadata_tsv(f)
        data = join_metadata(records, metadata)
    else:
        raise ConfigError("run needs either corpus=... or fasta=...+metadata=...")

    report, _manifest = run_experiment(config, data)
    agg = report["aggregate"]
    print(
        f"{config.model} ({_embedding(config)}) over {agg['run_count']} runs: "
        f"accuracy {agg['mean']['accuracy']:.4f} ± {agg['std']['accuracy']:.4f}, "
        f"F1w {agg['mean']['f1_weighted']:.4f}, F1m {agg['mean']['f1_macro']:.4f}, "
        f"ROC-AUC {agg['mean']['roc_auc_weighted_ovr']:.4f}"
    )
    if config.output_dir:
        print(f"artifacts in {config.output_dir}")
    return 0


def _embedding(config: ExperimentConfig) -> str:
    return f"{config.encoding}+rff" if config.use_rff else config.encoding


def _cmd_ig(args) -> int:
    data = load_corpus(args.corpus)
    if args.subsample:
        data = subsample(data, args.subsample, args.seed)
    table = information_gain(data, class_level=args.class_level)
    export_ig(table, args.out)
    if args.histograms:
        hist, class_names = position_histograms(data, class_level=args.class_level)
        export_histograms(args.histograms, hist, class_names)
    print(
        f"information gain over {table.sequence_length} positions "
        f"(class entropy {table.class_entropy:.4f} bits) -> {args.out}"
    )
    return 0


def _cmd_report(args) -> int:
    import json

    reports = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as f:
            reports.append(json.load(f))
    with open(args.out, "w", encoding="utf-8") as f:
        write_report_csv(f, reports)
    print(f"merged {len(reports)} reports into {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqclass",
        description="Classify amino-acid sequences by categorical labels "
        "using alignment-free features.",
    )
    parser.add_argument("--version", action="version", version=f"seqclass {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse FASTA, join metadata TSV, write a corpus file")
    p.add_argument("--fasta", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("featurize", help="corpus -> feature container + labels sidecar")
    p.add_argument("--corpus", required=True)
    p.add_argument("--encoding", choices=("kmers", "ohe"), default="kmers")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--expected-len", type=int, default=None, dest="expected_len")
    p.add_argument("--class-level", choices=("continent", "country", "state"),
                   default="country", dest="class_level")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--l2-normalize", action="store_true", dest="l2_normalize")
    p.add_argument("--out-features", required=True, dest="out_features")
    p.add_argument("--out-labels", required=True, dest="out_labels")
    p.add_argument("--csv", default=None, help="also export COO triplets as CSV")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("run", help="execute the multi-run train/evaluate protocol")
    p.add_argument("--config", default=None, help="flat key=value config file")
    for key in ExperimentConfig.__dataclass_fields__:
        p.add_argument(f"--{key.replace('_', '-')}", default=None, dest=f"cfg_{key}",
                       help=f"override config key {key}")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ig", help="per-position information gain -> CSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--class-level", choices=("continent", "country", "state"),
                   default="country", dest="class_level")
    p.add_argument("--subsample", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--histograms", default=None, help="also write per-position histograms JSON")
    p.set_defaults(func=_cmd_ig)

    p = sub.add_parser("report", help="merge aggregate report JSONs into one CSV table")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
