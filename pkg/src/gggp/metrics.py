"""Regression metrics used as fitness and in reports."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class UndefinedMetricError(ValueError):
    pass


def _pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions, {t.size} targets")
    if p.size == 0:
        raise ValueError("empty input")
    return p, t


def rmse(pred, target) -> float:
    p, t = _pair(pred, target)
    d = p - t
    out = math.sqrt(float(np.mean(d * d)))
    if out == 0.0 or not math.isfinite(out):
        # squares under- or overflowed; rescale by the largest residual
        m = float(np.max(np.abs(d)))
        if m > 0.0 and math.isfinite(m):
            out = m * math.sqrt(float(np.mean((d / m) ** 2)))
    return out


def mean_abs_error(pred, target) -> float:
    p, t = _pair(pred, target)
    return float(np.mean(np.abs(p - t)))


def r2(pred, target) -> float:
    """Coefficient of determination, ``1 - SS_res / SS_tot``."""
    p, t = _pair(pred, target)
    if p.size < 2:
        raise UndefinedMetricError("r2 needs at least two samples")
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("r2 is undefined for a constant target")
    ss_res = float(np.sum((p - t) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    r2: float
    avg_error: float
    n: int

    @classmethod
    def compute(cls, pred, target) -> MetricReport:
        try:
            r = r2(pred, target)
        except UndefinedMetricError:
            r = math.nan
        return cls(rmse(pred, target), r, mean_abs_error(pred, target), int(np.size(target)))

    def line(self) -> str:
        return f"RMSE={self.rmse:.4f}  R2={self.r2:.4f}  AvgError={self.avg_error:.4f}  n={self.n}"
