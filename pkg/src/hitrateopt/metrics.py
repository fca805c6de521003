"""Evaluation metrics for hit-rate prediction models.

All metrics work on prediction errors ``predictions - actuals``.  The hit
rate counts errors inside a closed qualification band; the band-masked
error metrics zero out in-band errors and keep the full sample count in
the denominator, so ``hit fraction + missed fraction == 1`` holds exactly.

Values are returned as plain fractions (e.g. hit rate 0.716, not 71.6%);
percent formatting belongs to the presentation layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, ValidationError

__all__ = [
    "HitInterval",
    "MetricReport",
    "hit_rate",
    "mae",
    "rmse",
    "r2",
    "mape",
    "mape_a",
    "mae_masked",
    "rmse_masked",
    "report",
]


@dataclass(frozen=True)
class HitInterval:
    """Closed qualification band [lower, upper] on the prediction error."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValidationError("hit interval bounds must be finite")
        if self.lower > self.upper:
            raise ValidationError(
                f"hit interval lower bound {self.lower} exceeds upper bound {self.upper}"
            )

    @classmethod
    def symmetric(cls, half_width: float) -> "HitInterval":
        if half_width < 0:
            raise ValidationError("half width must be non-negative")
        return cls(-half_width, half_width)

    def contains(self, errors: np.ndarray) -> np.ndarray:
        """Boolean mask of errors inside the closed band."""
        errors = np.asarray(errors, dtype=float)
        return (errors >= self.lower) & (errors <= self.upper)


def _paired(predictions, actuals) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=float).ravel()
    a = np.asarray(actuals, dtype=float).ravel()
    if p.size == 0:
        raise ValidationError("metrics require at least one sample")
    if p.shape != a.shape:
        raise ValidationError(
            f"predictions and actuals differ in length: {p.size} vs {a.size}"
        )
    return p, a


def hit_rate(predictions, actuals, interval: HitInterval) -> float:
    """Fraction of samples whose error lies inside the closed band."""
    p, a = _paired(predictions, actuals)
    return float(np.count_nonzero(interval.contains(p - a))) / p.size


def mae(predictions, actuals) -> float:
    p, a = _paired(predictions, actuals)
    return float(np.mean(np.abs(p - a)))


def rmse(predictions, actuals) -> float:
    p, a = _paired(predictions, actuals)
    return float(np.sqrt(np.mean((p - a) ** 2)))


def r2(predictions, actuals) -> float:
    """Coefficient of determination, 1 - residual SS / total SS."""
    p, a = _paired(predictions, actuals)
    total = float(np.sum((a - a.mean()) ** 2))
    if total == 0.0:
        raise DegenerateDataError("R^2 undefined: actuals have zero variance")
    residual = float(np.sum((p - a) ** 2))
    return 1.0 - residual / total


def mape(predictions, actuals) -> float:
    """Mean absolute percentage error, as a fraction."""
    p, a = _paired(predictions, actuals)
    if np.any(a == 0.0):
        raise ValidationError("mape undefined for zero actuals; use mape_a")
    return float(np.mean(np.abs((p - a) / a)))


def mape_a(predictions, actuals) -> float:
    """Adjusted MAPE with per-sample denominator max(actual, 1).

    Well-defined for actuals at or around zero, where plain MAPE blows up.
    """
    p, a = _paired(predictions, actuals)
    return float(np.mean(np.abs(p - a) / np.maximum(a, 1.0)))


def _masked_errors(predictions, actuals, interval: HitInterval) -> np.ndarray:
    p, a = _paired(predictions, actuals)
    errors = p - a
    # In-band errors contribute zero; the miss set is the strict complement
    # of the closed hit band, so hit + miss fractions sum to one.
    return np.where(interval.contains(errors), 0.0, errors)


def mae_masked(predictions, actuals, interval: HitInterval) -> float:
    """MAE over the full sample with in-band errors zeroed."""
    return float(np.mean(np.abs(_masked_errors(predictions, actuals, interval))))


def rmse_masked(predictions, actuals, interval: HitInterval) -> float:
    """RMSE over the full sample with in-band errors zeroed."""
    return float(np.sqrt(np.mean(_masked_errors(predictions, actuals, interval) ** 2)))


@dataclass(frozen=True)
class MetricReport:
    """One evaluation row: hit rate plus the error metric suite."""

    hr: float
    mae: float
    rmse: float
    r2: float
    mape: float | None
    mape_a: float
    mae_hr: float
    rmse_hr: float
    interval: HitInterval
    n: int

    # Column order mirrors the results-table layout.
    COLUMNS = ("HR", "MAE", "RMSE", "R2", "MAPE_a", "MAE_hr", "RMSE_hr")

    def row(self) -> tuple[float, ...]:
        return (self.hr, self.mae, self.rmse, self.r2, self.mape_a, self.mae_hr, self.rmse_hr)


def report(predictions, actuals, interval: HitInterval) -> MetricReport:
    """Bundle every metric for one (predictions, actuals) pair.

    ``mape`` is None when any actual is exactly zero (it is undefined
    there); ``mape_a`` is always present.
    """
    p, a = _paired(predictions, actuals)
    plain_mape = None if np.any(a == 0.0) else mape(p, a)
    return MetricReport(
        hr=hit_rate(p, a, interval),
        mae=mae(p, a),
        rmse=rmse(p, a),
        r2=r2(p, a),
        mape=plain_mape,
        mape_a=mape_a(p, a),
        mae_hr=mae_masked(p, a, interval),
        rmse_hr=rmse_masked(p, a, interval),
        interval=interval,
        n=int(p.size),
    )
