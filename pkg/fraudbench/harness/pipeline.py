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

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from fraudbench.base.classifier import Classifier
from fraudbench.data.dataset import LabeledDataset, class_counts, load_csv
from fraudbench.data.preprocess import (
    DataPreprocessor,
    PreprocessResult,
    Standardizer,
    fit_standardizer,
    stratified_split,
)
from fraudbench.data.synthetic import generate_synthetic
from fraudbench.errors import ConfigError
from fraudbench.harness import emit
from fraudbench.models import build_model
from fraudbench.numerics.rng import derive_seed
from fraudbench.protocol import BenchmarkRow, BenchmarkTable, EvalReport
from fraudbench.utils.config import DataSource, ExperimentConfig, StageOrder, config_fingerprint
from fraudbench.utils.logging import close_events_logger, setup_events_logger
from fraudbench.utils.misc import pipeline_stage, staging_directory
from fraudbench.validator.metrics import evaluate

logger = logging.getLogger(__name__)


@dataclass
class PipelineState:
    """Intermediate products of one run, kept for the emitters and for tests."""

    dataset: Optional[LabeledDataset] = None
    preprocess: Optional[PreprocessResult] = None
    train: Optional[LabeledDataset] = None
    test: Optional[LabeledDataset] = None
    scaler: Optional[Standardizer] = None
    standardized: Dict[str, bool] = field(default_factory=dict)
    models: Dict[str, Classifier] = field(default_factory=dict)
    reports: Dict[str, EvalReport] = field(default_factory=dict)
    stages: List[str] = field(default_factory=list)


def load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    data = cfg.data
    if data.source == DataSource.SYNTHETIC:
        ds = generate_synthetic(data.synthetic_spec(cfg.pipeline.seed))
    else:
        if not data.path:
            raise ConfigError("data.path is required when data.source = csv")
        ds = load_csv(data.path, data.schema_)
    if data.drop_columns:
        ds = ds.drop_columns(data.drop_columns)
    return ds


def make_preprocessor(cfg: ExperimentConfig) -> DataPreprocessor:
    p = cfg.pipeline
    return DataPreprocessor(
        balance=p.balance,
        outlier_features=p.outlier_features,
        fit_on=p.outlier_fit_on,
        seed=derive_seed(p.seed, "balance"),
        analyze=cfg.output.analysis,
    )


def _model_views(
    cfg: ExperimentConfig, train: LabeledDataset
) -> Tuple[Dict[str, Tuple[LabeledDataset, Optional[Standardizer]]], Optional[Standardizer]]:
    """
    Per model: the training rows it is fitted on and the scaler it keeps for
    scoring (None when it sees raw features). The scaler is fitted on
    training rows only.
    """
    p = cfg.pipeline
    scaler = None
    if p.standardize and any(name in p.standardize_models for name in cfg.models.names):
        scaler = fit_standardizer(train)
        scaled = scaler.transform(train)
    views = {}
    for name in cfg.models.names:
        if scaler is not None and name in p.standardize_models:
            views[name] = (scaled, scaler)
        else:
            views[name] = (train, None)
    return views, scaler


def _fit_models(cfg: ExperimentConfig, views) -> Dict[str, Classifier]:
    seed = cfg.pipeline.seed

    def fit_one(name: str) -> Classifier:
        rows, scaler = views[name]
        model = build_model(name, cfg.model_settings(name))
        model.fit(rows, seed=derive_seed(seed, "model", name))
        if scaler is not None:
            model.attach_scaler(scaler)
        logger.event(f"fitted {name} on {views[name][0].n_rows} rows")
        return model

    names = list(cfg.models.names)
    if cfg.models.workers > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=cfg.models.workers) as pool:
            fitted = list(pool.map(fit_one, names))
    else:
        fitted = [fit_one(name) for name in names]
    return dict(zip(names, fitted))


def _emit_run(cfg, state: PipelineState, table: BenchmarkTable, directory: Path):
    emit.emit_metrics_csv(table, directory / "metrics.csv")
    emit.emit_markdown_table(table, directory / "table.md")
    curves = {}
    for name, report in state.reports.items():
        emit.emit_roc_csv(report.roc_points, directory / emit.roc_file_name(name))
        curves[name] = report.roc_points
    emit.emit_roc_svg(curves, directory / "roc.svg", {n: r.roc_auc for n, r in state.reports.items()})

    if cfg.output.save_models:
        for name, model in state.models.items():
            model.save(directory / "models" / emit.model_file_name(name))

    emit.emit_json(
        {
            "config": cfg.resolved(),
            "fingerprint": table.fingerprint,
            "stage_order": table.stage_order,
            "standardized": state.standardized,
        },
        directory / "config.json",
    )

    if cfg.output.analysis and state.preprocess is not None:
        emit.emit_preprocess_reports(state.preprocess, directory)


def run_pipeline(cfg: ExperimentConfig, state: Optional[PipelineState] = None) -> BenchmarkTable:
    """
    Runs one benchmark end to end and writes its artifacts to cfg.output.dir.

    Stage order is load -> preprocess -> split for the default order and
    load -> split -> preprocess (training rows only) for the leak-free one;
    both continue with standardize -> train -> evaluate -> emit. Any failure
    raises StageError naming the stage, and no artifact of the failed run is
    left in the output directory.
    """
    state = state if state is not None else PipelineState()
    p = cfg.pipeline
    fingerprint = config_fingerprint(cfg)
    out_dir = Path(cfg.output.dir)

    events_handler = None
    if not cfg.output.dont_save_events:
        out_dir.mkdir(parents=True, exist_ok=True)
        events_handler = setup_events_logger(str(out_dir), cfg.output.events_retention_size)
    logger.event(f"run started: fingerprint {fingerprint}, order {p.order.value}, models {cfg.models.names}")

    try:
        with staging_directory(out_dir) as staging:
            with pipeline_stage("load", state.stages):
                state.dataset = load_dataset(cfg)
                counts = class_counts(state.dataset)
                logger.event(f"loaded {counts.total} rows ({counts.n_fraud} fraud, ratio {counts.fraud_ratio:.6f})")

            preprocessor = make_preprocessor(cfg)
            split_seed = derive_seed(p.seed, "split")
            if p.order == StageOrder.BALANCE_FIRST:
                with pipeline_stage("preprocess", state.stages):
                    state.preprocess = preprocessor.process(state.dataset)
                with pipeline_stage("split", state.stages):
                    state.train, state.test = stratified_split(state.preprocess.dataset, p.test_fraction, split_seed)
            else:
                with pipeline_stage("split", state.stages):
                    train_raw, state.test = stratified_split(state.dataset, p.test_fraction, split_seed)
                with pipeline_stage("preprocess", state.stages):
                    state.preprocess = preprocessor.process(train_raw)
                    state.train = state.preprocess.dataset
            logger.event(f"split into {state.train.n_rows} train / {state.test.n_rows} test rows")

            with pipeline_stage("standardize", state.stages):
                views, state.scaler = _model_views(cfg, state.train)
                state.standardized = {name: view[1] is not None for name, view in views.items()}

            with pipeline_stage("train", state.stages):
                state.models = _fit_models(cfg, views)

            rows = []
            with pipeline_stage("evaluate", state.stages):
                for name, model in state.models.items():
                    # Standardized models scale the raw test rows themselves
                    report = evaluate(model.score_dataset(state.test), state.test.labels, model.threshold)
                    state.reports[name] = report
                    hyper = {**model.hyperparameters(), "standardized": state.standardized[name]}
                    rows.append(
                        BenchmarkRow(
                            model=name,
                            precision=report.macro.precision,
                            recall=report.macro.recall,
                            f1=report.macro.f1,
                            roc_auc=report.roc_auc,
                            hyperparameters=hyper,
                            report=report,
                        )
                    )
                    logger.event(
                        f"{name}: precision {report.macro.precision:.4f} recall {report.macro.recall:.4f} "
                        f"f1 {report.macro.f1:.4f} auc {report.roc_auc:.4f}"
                    )

            table = BenchmarkTable(rows=rows, fingerprint=fingerprint, stage_order=state.stages + ["emit"])
            with pipeline_stage("emit", state.stages):
                _emit_run(cfg, state, table, staging)
        logger.event(f"run finished: artifacts in {out_dir}")
        return table
    finally:
        if events_handler is not None:
            close_events_logger(events_handler)
