"""Score aggregation and prediction-vs-label metrics."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidArgumentError, UndefinedCorrelationError


def score_average(score_small: float, score_large: float, weights=(0.5, 0.5)) -> float:
    """Weighted mean of the two judge scores, normalized over the weights."""
    for name, s in (("score_small", score_small), ("score_large", score_large)):
        if not np.isfinite(s) or s < 0.0 or s > 100.0:
            raise InvalidArgumentError(f"{name} must be within [0, 100], got {s!r}")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (2,) or not np.all(np.isfinite(w)) or np.any(w < 0.0) or w.sum() <= 0.0:
        raise InvalidArgumentError(f"weights must be two non-negative numbers with a positive sum, got {weights!r}")
    w = w / w.sum()
    return float(w[0] * score_small + w[1] * score_large)


def _paired(predictions, labels, minimum: int) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(labels, dtype=np.float64)
    if p.ndim != 1 or t.ndim != 1 or p.shape != t.shape:
        raise InvalidArgumentError("predictions and labels must be 1-D and the same length")
    if p.shape[0] < minimum:
        raise InvalidArgumentError(f"need at least {minimum} pairs, got {p.shape[0]}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(t))):
        raise InvalidArgumentError("predictions and labels must be finite")
    return p, t


def rmse(predictions, labels) -> float:
    """Root-mean-square error between paired predictions and labels."""
    p, t = _paired(predictions, labels, minimum=1)
    return float(np.sqrt(np.mean(np.square(p - t))))


def lcc(predictions, labels) -> float:
    """Pearson linear correlation coefficient.

    Raises UndefinedCorrelationError when either input is constant.
    """
    p, t = _paired(predictions, labels, minimum=2)
    dp, dt = p - p.mean(), t - t.mean()
    denom = np.sqrt(np.sum(dp * dp) * np.sum(dt * dt))
    if denom == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant input")
    return float(np.sum(dp * dt) / denom)


def srcc(predictions, labels) -> float:
    """Spearman rank correlation with tie-averaged ranks."""
    p, t = _paired(predictions, labels, minimum=2)
    return lcc(rankdata(p, method="average"), rankdata(t, method="average"))


def relative_improvement(rmse_baseline: float, rmse_new: float) -> float:
    """Percent RMSE reduction of new relative to baseline."""
    if not np.isfinite(rmse_baseline) or rmse_baseline <= 0.0:
        raise InvalidArgumentError(f"baseline RMSE must be finite and positive, got {rmse_baseline!r}")
    if not np.isfinite(rmse_new) or rmse_new < 0.0:
        raise InvalidArgumentError(f"new RMSE must be finite and non-negative, got {rmse_new!r}")
    return 100.0 * (rmse_baseline - rmse_new) / rmse_baseline
