"""Least-squares trend fits over reward curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateInputError(ValueError):
    """Too few points or no spread in x."""


@dataclass(frozen=True)
class TrendFit:
    model: str   # "log" (a*ln(x)+b) or "linear" (a*x+b)
    a: float
    b: float
    rmse: float

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if self.model == "log":
            return self.a * np.log(x) + self.b
        return self.a * x + self.b


def fit_trend(points, model: str) -> TrendFit:
    """Ordinary least squares of y on ln(x) or x over all points."""
    if model not in ("log", "linear"):
        raise ValueError(f"model must be 'log' or 'linear', got {model!r}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DegenerateInputError("need at least 3 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if model == "log":
        if np.any(x <= 0):
            raise DegenerateInputError("log model needs x > 0")
        x = np.log(x)
    if np.ptp(x) == 0:
        raise DegenerateInputError("all x identical")
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    return TrendFit(model=model, a=float(a), b=float(b),
                    rmse=float(np.sqrt(np.mean(resid * resid))))
