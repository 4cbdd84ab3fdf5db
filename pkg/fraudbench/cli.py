# The MIT License (MIT)
# Copyright © 2024 fraudbench contributors

# Permission is hereby granted, free of charge, to any person obtaining a copy of this software and associated
# documentation files (the “Software”), to deal in the Software without restriction, including without limitation
# the rights to use, copy, modify, merge, publish, distribute, sublicense, and/or sell copies of the Software,
# and to permit persons to whom the Software is furnished to do so, subject to the following conditions:

# The above copyright notice and this permission notice shall be included in all copies or substantial portions of
# the Software.

# THE SOFTWARE IS PROVIDED “AS IS”, WITHOUT WARRANTY OF ANY KIND, EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO
# THE WARRANTIES OF MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL
# THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION
# OF CONTRACT, TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER
# DEALINGS IN THE SOFTWARE.

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

import fraudbench
from fraudbench.data.dataset import Schema, class_counts, load_csv, write_csv
from fraudbench.data.preprocess import fit_standardizer
from fraudbench.data.synthetic import SyntheticKind, SyntheticSpec, generate_synthetic
from fraudbench.errors import ConfigError, FraudBenchError, StageError
from fraudbench.harness import emit
from fraudbench.harness.pipeline import make_preprocessor, run_pipeline
from fraudbench.harness.reduce import resolve_methods, run_reductions, subsample
from fraudbench.harness.verify import verify_run
from fraudbench.models import MODEL_REGISTRY, build_model, load_any
from fraudbench.numerics.rng import derive_seed
from fraudbench.protocol import BenchmarkRow, BenchmarkTable
from fraudbench.utils.config import ExperimentConfig, add_args, config_fingerprint, config_from_args, config_help
from fraudbench.utils.logging import setup_console_logging
from fraudbench.utils.misc import staging_directory
from fraudbench.validator.metrics import evaluate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _console() -> Console:
    return Console(soft_wrap=True)


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out) if args.out else Path(cfg.output.dir)


def _load(args, cfg: ExperimentConfig):
    ds = load_csv(args.path, cfg.data.schema_)
    if cfg.data.drop_columns:
        ds = ds.drop_columns(cfg.data.drop_columns)
    return ds


def _print_metrics(table: BenchmarkTable):
    view = Table(title=f"fingerprint {table.fingerprint[:12]}")
    for column in ("Model", "Precision", "Recall", "F1 Score", "ROC AUC"):
        view.add_column(column)
    for row in table.rows:
        view.add_row(row.model, *(f"{v:.4f}" for v in (row.precision, row.recall, row.f1, row.roc_auc)))
    _console().print(view)


# --- subcommands ----------------------------------------------------------------


def cmd_ingest(args) -> int:
    ds = load_csv(args.path, args.schema)
    counts = class_counts(ds)
    view = Table(title=str(args.path), show_header=False)
    view.add_row("rows", str(ds.n_rows))
    view.add_row("columns", str(ds.n_cols))
    view.add_row("fraud", str(counts.n_fraud))
    view.add_row("legit", str(counts.n_legit))
    view.add_row("fraud_ratio", f"{counts.fraud_ratio:g}")
    _console().print(view)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    cfg = config_from_args(args)
    ds = _load(args, cfg)
    result = make_preprocessor(cfg).process(ds)
    out = _out_dir(args, cfg)
    with staging_directory(out) as staging:
        write_csv(result.dataset, staging / "processed.csv")
        emit.emit_preprocess_reports(result, staging)
    for record in result.class_count_records():
        logger.info(f"{record['stage']}: {record['n_fraud']} fraud / {record['n_legit']} legit")
    if result.outliers is not None:
        logger.info(f"removed {result.outliers.rows_removed} outlier rows")
    _console().print(f"wrote {result.dataset.n_rows} rows to {out / 'processed.csv'}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    cfg = config_from_args(args)
    methods = resolve_methods(args.method or cfg.reduce.method)
    ds = _load(args, cfg)
    seed = cfg.pipeline.seed
    ds = subsample(ds, args.max_rows or cfg.reduce.max_rows, derive_seed(seed, "reduce"))
    with staging_directory(_out_dir(args, cfg)) as staging:
        records = run_reductions(ds, methods, staging, cfg.reduce.tsne_config(seed))
    view = Table(title=f"2-D projections of {ds.n_rows} rows")
    view.add_column("method")
    view.add_column("neighbour agreement")
    for record in records:
        view.add_row(record["method"], f"{record['neighbor_agreement']:.4f}")
    _console().print(view)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = config_from_args(args)
    ds = _load(args, cfg)
    model = build_model(args.model, cfg.model_settings(args.model))
    seed = derive_seed(cfg.pipeline.seed, "model", args.model)
    if cfg.pipeline.standardize and args.model in cfg.pipeline.standardize_models:
        scaler = fit_standardizer(ds)
        model.fit(scaler.transform(ds), seed=seed).attach_scaler(scaler)
    else:
        model.fit(ds, seed=seed)
    path = model.save(_out_dir(args, cfg) / emit.model_file_name(args.model))
    if model.loss_curve:
        logger.info(f"{args.model}: final training loss {model.loss_curve[-1]:.6f}")
    _console().print(f"saved {args.model} to {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = config_from_args(args)
    model = load_any(args.model_path)
    ds = _load(args, cfg)
    report = evaluate(model.score_dataset(ds), ds.labels, model.threshold)
    row = BenchmarkRow(
        model=model.name,
        precision=report.macro.precision,
        recall=report.macro.recall,
        f1=report.macro.f1,
        roc_auc=report.roc_auc,
        hyperparameters=model.hyperparameters(),
        report=report,
    )
    table = BenchmarkTable(rows=[row], fingerprint=config_fingerprint(cfg), stage_order=["load", "evaluate"])
    if args.out:
        with staging_directory(args.out) as staging:
            emit.emit_metrics_csv(table, staging / "metrics.csv")
            emit.emit_roc_csv(report.roc_points, staging / emit.roc_file_name(model.name))
    _print_metrics(table)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = config_from_args(args)
    table = run_pipeline(cfg)
    _print_metrics(table)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = SyntheticSpec(
            n_per_class=args.n,
            kind=args.kind,
            n_features=args.features,
            seed=args.seed if args.seed is not None else 0,
            mu=args.mu,
        )
    except ValidationError as exc:
        raise ConfigError(f"invalid synthetic spec: {exc.errors()[0]['msg']}") from None
    ds = generate_synthetic(spec)
    path = write_csv(ds, Path(args.out or ".") / "synth.csv")
    _console().print(f"wrote {ds.n_rows} rows to {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    mismatches = verify_run(args.run_dir)
    if mismatches:
        for mismatch in mismatches:
            print(f"mismatch: {mismatch}", file=sys.stderr)
        return EXIT_RUNTIME
    _console().print(f"{args.run_dir}: every table value matches its ROC curve")
    return EXIT_OK


# --- parser -----------------------------------------------------------------------


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="fraudbench",
        description="Fraud-detection preprocessing, dimensionality reduction and classifier benchmarks.",
    )
    parser.add_argument("--version", action="version", version=f"fraudbench {fraudbench.__version__}")
    sub = parser.add_subparsers(
        dest="command", metavar="{ingest,preprocess,reduce,train,evaluate,benchmark,synth}"
    )
    sub.required = True

    def add(name, handler, help_text, config_required=False, **kwargs):
        p = sub.add_parser(name, help=help_text, description=help_text, **kwargs)
        add_args(p, config_required=config_required)
        p.set_defaults(handler=handler)
        return p

    p = add("ingest", cmd_ingest, "Validate a transaction CSV and summarize its classes.")
    p.add_argument("path", help="CSV file in the legacy2013, modern2023 or generic layout.")
    p.add_argument("--schema", choices=[s.value for s in Schema], default=Schema.AUTO_DETECT.value)

    p = add("preprocess", cmd_preprocess, "Balance and outlier-filter a CSV; write processed.csv and reports.")
    p.add_argument("path")

    p = add("reduce", cmd_reduce, "Project a CSV to 2-D and write scatter SVGs.")
    p.add_argument("path")
    p.add_argument("--method", choices=["tsne", "pca", "tsvd", "all"], default=None)
    p.add_argument("--max-rows", dest="max_rows", type=int, default=None)

    p = add("train", cmd_train, "Fit one model on a CSV and save it.")
    p.add_argument("path")
    p.add_argument("--model", choices=list(MODEL_REGISTRY), required=True)

    p = add("evaluate", cmd_evaluate, "Score a saved model against a labelled CSV.")
    p.add_argument("model_path")
    p.add_argument("path")

    add(
        "benchmark",
        cmd_benchmark,
        "Run the full pipeline and write metrics.csv, table.md, ROC files and models.",
        config_required=True,
        epilog=config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    p = add("synth", cmd_synth, "Generate a synthetic two-class CSV (synth.csv).")
    p.add_argument("--kind", choices=[k.value for k in SyntheticKind], default=SyntheticKind.GAUSSIAN_BLOBS.value)
    p.add_argument("--n", type=int, default=500, help="Rows per class.")
    p.add_argument("--features", type=int, default=2)
    p.add_argument("--mu", type=float, default=3.0)

    p = sub.add_parser("verify")
    p.add_argument("run_dir")
    p.add_argument("--logging.debug", action="store_true", default=False)
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    setup_console_logging(logging.DEBUG if getattr(args, "logging.debug", False) else logging.INFO)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"fraudbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"fraudbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc.cause, ConfigError) else EXIT_RUNTIME
    except FraudBenchError as exc:
        print(f"fraudbench: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
