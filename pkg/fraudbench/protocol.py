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

import typing

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Report models exchanged between the pipeline stages.
# Every stage hands one of these to the next one and to the emitters in
# fraudbench.harness.emit, which flatten them with to_record().


class ClassCounts(BaseModel):
    """
    Label tallies of a dataset.

    Attributes:
    - n_fraud: rows with Class == 1
    - n_legit: rows with Class == 0
    - fraud_ratio: n_fraud / (n_fraud + n_legit), 0 for an empty dataset
    """

    model_config = ConfigDict(frozen=True)

    n_fraud: int = Field(ge=0)
    n_legit: int = Field(ge=0)
    fraud_ratio: float = Field(ge=0.0, le=1.0)

    @property
    def total(self) -> int:
        return self.n_fraud + self.n_legit

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {
            "n_fraud": self.n_fraud,
            "n_legit": self.n_legit,
            "total": self.total,
            "fraud_ratio": self.fraud_ratio,
        }


class IqrBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    feature: str = ""
    q1: float
    q3: float
    iqr: float = Field(ge=0.0)
    lower: float
    upper: float

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return self.model_dump()


class OutlierRemovalReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    bounds: typing.List[IqrBounds]
    fit_on: str
    rows_removed: int = Field(ge=0)
    row_indices_removed: typing.List[int]

    @model_validator(mode="after")
    def check_count(self) -> "OutlierRemovalReport":
        if self.rows_removed != len(self.row_indices_removed):
            raise ValueError("rows_removed must equal len(row_indices_removed)")
        return self

    def to_records(self) -> typing.List[typing.Dict[str, typing.Any]]:
        """One record per feature; removal totals repeated on every line."""
        return [
            {
                **b.to_record(),
                "fit_on": self.fit_on,
                "rows_removed": self.rows_removed,
            }
            for b in self.bounds
        ]


class ConfusionMatrix(BaseModel):
    """Fraud (label 1) is the positive class."""

    model_config = ConfigDict(frozen=True)

    tp: int = Field(ge=0)
    fp: int = Field(ge=0)
    tn: int = Field(ge=0)
    fn: int = Field(ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def flipped(self) -> "ConfusionMatrix":
        """The same tallies read with class 0 as the positive class."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


class ClassMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    support: int = Field(ge=0, default=0)


class RocPoint(typing.NamedTuple):
    fpr: float
    tpr: float
    threshold: float


class EvalReport(BaseModel):
    """
    Full evaluation of one scored test set.

    Attributes:
    - confusion: tallies at `threshold`
    - per_class: precision/recall/F1 with each class taken as positive
    - macro: unweighted mean of the per-class values (the table convention)
    - weighted: support-weighted mean of the per-class values
    - roc_auc: Mann-Whitney AUC with half credit for ties
    - roc_points: (fpr, tpr, threshold) from (0, 0, +inf) to (1, 1)
    """

    model_config = ConfigDict(frozen=True)

    threshold: float
    confusion: ConfusionMatrix
    per_class: typing.Dict[int, ClassMetrics]
    macro: ClassMetrics
    weighted: ClassMetrics
    roc_auc: float = Field(ge=0.0, le=1.0)
    roc_points: typing.List[RocPoint]

    @property
    def fraud(self) -> ClassMetrics:
        return self.per_class[1]

    def to_record(self) -> typing.Dict[str, typing.Any]:
        return {
            "precision": self.macro.precision,
            "recall": self.macro.recall,
            "f1": self.macro.f1,
            "roc_auc": self.roc_auc,
            "weighted_precision": self.weighted.precision,
            "weighted_recall": self.weighted.recall,
            "weighted_f1": self.weighted.f1,
            "fraud_precision": self.fraud.precision,
            "fraud_recall": self.fraud.recall,
            "fraud_f1": self.fraud.f1,
            "tp": self.confusion.tp,
            "fp": self.confusion.fp,
            "tn": self.confusion.tn,
            "fn": self.confusion.fn,
            "n_pos": self.confusion.tp + self.confusion.fn,
            "n_neg": self.confusion.tn + self.confusion.fp,
            "threshold": self.threshold,
        }


class BenchmarkRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: str
    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    roc_auc: float = Field(ge=0.0, le=1.0)
    hyperparameters: typing.Dict[str, typing.Any] = Field(default_factory=dict)
    report: typing.Optional[EvalReport] = None


class BenchmarkTable(BaseModel):
    """
    One row per configured model plus the fingerprint of the resolved config.

    Example:
    >>> table = BenchmarkTable(rows=[], fingerprint="ab12", stage_order=["load"])
    >>> table.models()
    []
    """

    rows: typing.List[BenchmarkRow]
    fingerprint: str
    stage_order: typing.List[str]

    def models(self) -> typing.List[str]:
        return [row.model for row in self.rows]

    def row(self, model: str) -> BenchmarkRow:
        for row in self.rows:
            if row.model == model:
                return row
        raise KeyError(model)
