"""Regression metrics, cross-validation reports and relative performance."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigurationError, DataError, NumericError, ShapeError

METRIC_NAMES = ("train_r2", "train_mae", "test_r2", "test_mae")


def _pair(y_true, y_pred):
    a = np.asarray(y_true, dtype=np.float64).reshape(-1)
    b = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.size} targets vs {b.size} predictions")
    if a.size == 0:
        raise ShapeError("metrics need at least one sample")
    return a, b


def r2(y_true, y_pred) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot."""
    a, b = _pair(y_true, y_pred)
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise NumericError("R2 is undefined for constant targets")
    return 1.0 - float(np.sum((a - b) ** 2)) / ss_tot


def mae(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    return float(np.mean(np.abs(a - b)))


@dataclass
class FoldMetrics:
    train_r2: float
    train_mae: float
    test_r2: float
    test_mae: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_NAMES}


@dataclass
class MetricsReport:
    """Per-fold metrics with mean and sample (n-1) standard deviation."""

    per_fold: list
    meta: dict = field(default_factory=dict)

    def values(self, name: str) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.per_fold], dtype=np.float64)

    def mean(self, name: str) -> float:
        return float(np.mean(self.values(name)))

    def std(self, name: str) -> float:
        v = self.values(name)
        return float(np.std(v, ddof=1)) if v.size > 1 else 0.0

    def summary(self) -> dict:
        return {k: {"mean": self.mean(k), "std": self.std(k)} for k in METRIC_NAMES}

    def format(self, name: str, digits: int = 4) -> str:
        return f"{self.mean(name):.{digits}f} ± {self.std(name):.{digits}f}"

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "per_fold": [f.as_dict() for f in self.per_fold],
            "summary": self.summary(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        try:
            folds = [FoldMetrics(**{k: float(f[k]) for k in METRIC_NAMES}) for f in d["per_fold"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed metrics report: {exc}") from None
        return cls(folds, dict(d.get("meta", {})))

    @classmethod
    def from_means(cls, r2_mean: float, mae_mean: float, **meta) -> "MetricsReport":
        """Single pseudo-fold carrying published test means (for reporting only)."""
        return cls([FoldMetrics(float("nan"), float("nan"), r2_mean, mae_mean)], meta)


def metrics_schema() -> dict:
    text = resources.files("hqnn.resources").joinpath("metrics.schema.json").read_text()
    return json.loads(text)


def validate_metrics(d: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(d, metrics_schema())
    except jsonschema.ValidationError as exc:
        raise DataError(f"metrics JSON fails schema: {exc.message}") from None


def relative_performance(classical: MetricsReport, hqnn: MetricsReport) -> dict:
    """Percent change of the hybrid over the classical model on test metrics.

    Positive is better for both: R2 increase and MAE reduction.
    """
    if len(classical.per_fold) != len(hqnn.per_fold):
        raise ConfigurationError(
            f"reports cover different fold counts ({len(classical.per_fold)} vs {len(hqnn.per_fold)})"
        )
    r2_c, r2_h = classical.mean("test_r2"), hqnn.mean("test_r2")
    mae_c, mae_h = classical.mean("test_mae"), hqnn.mean("test_mae")
    if r2_c == 0.0 or mae_c == 0.0:
        raise NumericError("classical reference metric is zero; relative change undefined")
    return {
        "r2_pct": (r2_h - r2_c) / r2_c * 100.0,
        "mae_pct": (mae_c - mae_h) / mae_c * 100.0,
    }


def relative_performance_csv(property_name: str, model_name: str, classical: MetricsReport, hqnns: dict) -> str:
    """One table row: property, model, then R2 %/MAE % per labelled hybrid run.

    ``hqnns`` maps a column label such as ``"HQFi (4Q)"`` to its report.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["Property", "Model"]
    row = [property_name, model_name]
    for label, rep in hqnns.items():
        rel = relative_performance(classical, rep)
        header += [f"{label} R2", f"{label} MAE"]
        row += [f"{rel['r2_pct']:.2f}", f"{rel['mae_pct']:.2f}"]
    w.writerow(header)
    w.writerow(row)
    return buf.getvalue()

