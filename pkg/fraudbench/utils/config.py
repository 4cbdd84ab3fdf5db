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
import configparser
import enum
import hashlib
import json
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from fraudbench.data.dataset import Schema
from fraudbench.data.preprocess import DEFAULT_OUTLIER_FEATURES, FitOn
from fraudbench.data.synthetic import SyntheticKind, SyntheticSpec
from fraudbench.errors import ConfigError
from fraudbench.models import (
    MODEL_REGISTRY,
    KnnSettings,
    LogisticSettings,
    MlpSettings,
    SvmSettings,
    TransformerSettings,
    TreeSettings,
)
from fraudbench.reduction.tsne import TsneConfig, TsneInit
from fraudbench.utils.logging import DEFAULT_EVENTS_RETENTION_SIZE


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class DataSource(str, enum.Enum):
    CSV = "csv"
    SYNTHETIC = "synthetic"


class StageOrder(str, enum.Enum):
    # balance -> outliers -> split, as the published method describes it
    BALANCE_FIRST = "balance_first"
    # split first; balance and outlier bounds see training rows only
    LEAK_FREE = "leak_free"


class DataSection(_Section):
    source: DataSource = DataSource.CSV
    path: Optional[str] = None
    schema_: Schema = Field(default=Schema.AUTO_DETECT, alias="schema")
    drop_columns: List[str] = Field(default_factory=list)
    synthetic_kind: SyntheticKind = SyntheticKind.GAUSSIAN_BLOBS
    synthetic_n: int = Field(ge=1, default=500)
    synthetic_features: int = Field(ge=2, default=2)
    synthetic_mu: float = 3.0

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    @field_validator("drop_columns", mode="before")
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)

    def synthetic_spec(self, seed: int) -> SyntheticSpec:
        return SyntheticSpec(
            n_per_class=self.synthetic_n,
            kind=self.synthetic_kind,
            n_features=self.synthetic_features,
            seed=seed,
            mu=self.synthetic_mu,
        )


class PipelineSection(_Section):
    seed: int = 0
    order: StageOrder = StageOrder.BALANCE_FIRST
    balance: bool = True
    outlier_features: List[str] = Field(default_factory=lambda: list(DEFAULT_OUTLIER_FEATURES))
    outlier_fit_on: FitOn = FitOn.FRAUD_CLASS_ONLY
    test_fraction: float = Field(gt=0.0, lt=1.0, default=0.2)
    standardize: bool = True
    standardize_models: List[str] = Field(default_factory=lambda: ["knn", "svm", "mlp", "transformer"])

    @field_validator("outlier_features", "standardize_models", mode="before")
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)


class ModelsSection(_Section):
    names: List[str] = Field(default_factory=lambda: list(MODEL_REGISTRY))
    workers: int = Field(ge=1, default=1)

    @field_validator("names", mode="before")
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)

    @field_validator("names")
    @classmethod
    def known_models(cls, names: List[str]) -> List[str]:
        unknown = [n for n in names if n not in MODEL_REGISTRY]
        if unknown:
            raise ValueError(f"unknown model(s) {unknown}; registered: {list(MODEL_REGISTRY)}")
        if not names:
            raise ValueError("at least one model must be listed")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate model names in {names}")
        return names


class OutputSection(_Section):
    dir: str = "runs/default"
    save_models: bool = True
    analysis: bool = True
    dont_save_events: bool = False
    events_retention_size: int = Field(ge=1, default=DEFAULT_EVENTS_RETENTION_SIZE)


class ReduceSection(_Section):
    method: str = "all"
    max_rows: int = Field(ge=10, default=1000)
    perplexity: float = Field(gt=0.0, default=30.0)
    n_iter: int = Field(ge=1, default=1000)
    learning_rate: float = Field(gt=0.0, default=200.0)
    early_exaggeration: float = Field(ge=1.0, default=12.0)
    exaggeration_iters: int = Field(ge=0, default=250)
    init: TsneInit = TsneInit.RANDOM_GAUSSIAN

    @field_validator("method")
    @classmethod
    def known_method(cls, value: str) -> str:
        if value not in ("tsne", "pca", "tsvd", "all"):
            raise ValueError(f"reduce method must be tsne, pca, tsvd or all, got '{value}'")
        return value

    def tsne_config(self, seed: int) -> TsneConfig:
        return TsneConfig(
            perplexity=self.perplexity,
            n_iter=self.n_iter,
            learning_rate=self.learning_rate,
            early_exaggeration=self.early_exaggeration,
            exaggeration_iters=min(self.exaggeration_iters, self.n_iter),
            momentum_switch_iter=min(250, self.n_iter),
            init=self.init,
            seed=seed,
        )


class ExperimentConfig(BaseModel):
    """
    Everything a run depends on. Two runs with equal fingerprints produce
    byte-identical metrics and ROC files.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    data: DataSection = Field(default_factory=DataSection)
    pipeline: PipelineSection = Field(default_factory=PipelineSection)
    models: ModelsSection = Field(default_factory=ModelsSection)
    transformer: TransformerSettings = Field(default_factory=TransformerSettings)
    logistic: LogisticSettings = Field(default_factory=LogisticSettings)
    knn: KnnSettings = Field(default_factory=KnnSettings)
    svm: SvmSettings = Field(default_factory=SvmSettings)
    tree: TreeSettings = Field(default_factory=TreeSettings)
    mlp: MlpSettings = Field(default_factory=MlpSettings)
    output: OutputSection = Field(default_factory=OutputSection)
    reduce: ReduceSection = Field(default_factory=ReduceSection)

    def model_settings(self, name: str):
        return getattr(self, name)

    def with_overrides(self, seed: Optional[int] = None, out: Optional[str] = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = cfg.model_copy(update={"pipeline": cfg.pipeline.model_copy(update={"seed": seed})})
        if out is not None:
            cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"dir": str(out)})})
        return cfg

    def resolved(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


SECTIONS = tuple(ExperimentConfig.model_fields)


def _format_validation_error(exc: ValidationError, source: str) -> str:
    problems = []
    for err in exc.errors():
        location = ".".join(str(p) for p in err["loc"])
        problems.append(f"{location}: {err['msg']}")
    return f"{source}: invalid configuration: " + "; ".join(problems)


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """
    Parse `[section]` / `key = value` text. Lists are comma separated;
    unknown sections and keys are errors.
    """
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), default_section="__defaults__"
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    raw = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]; expected one of {list(SECTIONS)}")
        raw[section] = dict(parser.items(section))
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc, source)) from None


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def config_fingerprint(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON of the resolved config."""
    canonical = json.dumps(cfg.resolved(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def add_args(parser: argparse.ArgumentParser, config_required: bool = False):
    """
    Adds the arguments shared by every subcommand.
    """
    parser.add_argument(
        "--config",
        type=str,
        help="Path to an experiment config file ([section] key = value).",
        required=config_required,
        default=None,
    )

    parser.add_argument(
        "--seed",
        type=int,
        help="Overrides pipeline.seed from the config.",
        default=None,
    )

    parser.add_argument(
        "--out",
        type=str,
        help="Output directory; overrides output.dir from the config.",
        default=None,
    )

    parser.add_argument(
        "--logging.debug",
        action="store_true",
        help="Turn on debug logging (per-epoch losses, bandwidth search).",
        default=False,
    )

    parser.add_argument(
        "--output.dont_save_events",
        action="store_true",
        help="If set, no events.log is written to the output directory.",
        default=False,
    )


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    cfg = cfg.with_overrides(seed=getattr(args, "seed", None), out=getattr(args, "out", None))
    if getattr(args, "output.dont_save_events", False):
        cfg = cfg.model_copy(
            update={"output": cfg.output.model_copy(update={"dont_save_events": True})}
        )
    return cfg


def config_help() -> str:
    """Every config section and key with its default, for --help epilogs."""
    lines = ["config file keys ([section] key = value, lists comma separated):"]
    defaults = ExperimentConfig()
    for section in SECTIONS:
        model = getattr(defaults, section)
        lines.append(f"  [{section}]")
        for name, info in type(model).model_fields.items():
            key = info.alias or name
            value = getattr(model, name)
            if isinstance(value, enum.Enum):
                value = value.value
            elif isinstance(value, list):
                value = ", ".join(str(v) for v in value)
            lines.append(f"    {key} = {value}")
    return "\n".join(lines)
