"""Population comparison statistics and the cross-validated regression.

Distribution similarity between patient groups is summarized three ways:
an overlapping index of normalized histograms, Welch's unequal-variance
t test for means, and the two-sample Kolmogorov-Smirnov test for shapes.
A small ordinary least squares model, evaluated in k-fold cross
validation, predicts the difference between two threshold procedures from
the model slope and the anchor score.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special, stats

LOGGER = logging.getLogger(__name__)

__all__ = [
    "overlapping_index",
    "welch_test",
    "ks_test",
    "GlmFold",
    "GlmFit",
    "glm_cv",
]


def overlapping_index(
    x: Sequence[float], y: Sequence[float], bin_width: float
) -> float:
    """Shared probability mass of two samples' normalized histograms.

    Both samples are binned on a common grid aligned to multiples of
    ``bin_width`` across the pooled range; the index sums the smaller of
    the two bin masses, so identical samples give 1 and samples with
    disjoint support give 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValueError("overlapping index needs two non-empty samples")
    if bin_width <= 0.0:
        raise ValueError("bin width must be positive")
    lo = math.floor(min(x.min(), y.min()) / bin_width) * bin_width
    hi = math.ceil(max(x.max(), y.max()) / bin_width) * bin_width
    n_bins = max(1, round((hi - lo) / bin_width))
    edges = lo + bin_width * np.arange(n_bins + 1)
    mass_x = np.histogram(x, bins=edges)[0] / x.size
    mass_y = np.histogram(y, bins=edges)[0] / y.size
    return float(np.minimum(mass_x, mass_y).sum())


def welch_test(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Welch's t test: statistic, Welch-Satterthwaite df, two-tailed p."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or y.size < 2:
        raise ValueError("Welch test needs at least two values per sample")
    vx = x.var(ddof=1)
    vy = y.var(ddof=1)
    if vx == 0.0 and vy == 0.0:
        raise ValueError("Welch test undefined for two zero-variance samples")
    sem2_x = vx / x.size
    sem2_y = vy / y.size
    t_stat = (x.mean() - y.mean()) / math.sqrt(sem2_x + sem2_y)
    df = (sem2_x + sem2_y) ** 2 / (
        sem2_x**2 / (x.size - 1) + sem2_y**2 / (y.size - 1)
    )
    p = 2.0 * float(stats.t.sf(abs(t_stat), df))
    return float(t_stat), float(df), min(p, 1.0)


def ks_test(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic with asymptotic p value.

    The p value uses the Kolmogorov distribution with the small-sample
    effective-size correction (en + 0.12 + 0.11/en), adequate at the
    cohort sizes handled here.
    """
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if x.size == 0 or y.size == 0:
        raise ValueError("KS test needs two non-empty samples")
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / x.size
    cdf_y = np.searchsorted(y, pooled, side="right") / y.size
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    en = math.sqrt(x.size * y.size / (x.size + y.size))
    p = float(special.kolmogorov((en + 0.12 + 0.11 / en) * d))
    return d, min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class GlmFold:
    """Coefficients and diagnostics of one cross-validation fold."""

    fold: int
    beta: tuple[float, float, float]
    se: tuple[float, float, float]
    tstat: tuple[float, float, float]
    p: tuple[float, float, float]
    mse: float


@dataclass(frozen=True)
class GlmFit:
    """Cross-validated linear model for procedure threshold differences."""

    folds: tuple[GlmFold, ...]
    mean_beta: tuple[float, float, float]
    mean_se: tuple[float, float, float]
    mean_tstat: tuple[float, float, float]
    mean_p: tuple[float, float, float]
    rmse_cv: float
    pearson_r: float
    rmse: float
    bias: float
    condition_number: float


def _ols(design: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least squares coefficients and their standard errors."""
    beta, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    residuals = target - design @ beta
    dof = design.shape[0] - design.shape[1]
    sigma2 = float(residuals @ residuals) / dof if dof > 0 else float("nan")
    covariance = sigma2 * np.linalg.inv(design.T @ design)
    return beta, np.sqrt(np.diag(covariance))


def glm_cv(
    rows: Sequence[tuple[float, float, float]], folds: int = 10, seed: int = 0
) -> GlmFit:
    """Fit srt_diff ~ b0 + b1*slope + b2*(wrs - 50) in k-fold cross validation.

    Inputs
    ------
    rows  : (srt_diff dB, slope %/dB, wrs_minus_50 %) per patient
    folds : number of folds; rows are shuffled once under ``seed`` and cut
            into contiguous blocks, so the partition is reproducible
    seed  : shuffle seed

    Each fold is fit on the other folds by ordinary least squares and
    scored on its own rows; rmse_cv is the root of the mean per-fold MSE.
    The headline coefficient row is the mean over folds, not a refit.
    """
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError("rows must be (srt_diff, slope, wrs_minus_50) triples")
    n = data.shape[0]
    if n < folds:
        raise ValueError(f"need at least {folds} rows for {folds}-fold validation")

    target = data[:, 0]
    design = np.column_stack([np.ones(n), data[:, 1], data[:, 2]])
    condition = float(np.linalg.cond(design))
    if condition > 1e10:
        raise ValueError(
            f"collinear design matrix (condition number {condition:.3g})"
        )

    order = np.random.default_rng(seed).permutation(n)
    fold_records: list[GlmFold] = []
    fold_mse: list[float] = []
    predicted = np.empty(n)
    for index, held_out in enumerate(np.array_split(order, folds)):
        train = np.setdiff1d(order, held_out, assume_unique=True)
        beta, se = _ols(design[train], target[train])
        dof = train.size - design.shape[1]
        tstat = beta / se
        p = 2.0 * stats.t.sf(np.abs(tstat), dof)
        predictions = design[held_out] @ beta
        predicted[held_out] = predictions
        mse = float(np.mean((target[held_out] - predictions) ** 2))
        fold_mse.append(mse)
        fold_records.append(
            GlmFold(
                fold=index + 1,
                beta=tuple(float(b) for b in beta),
                se=tuple(float(s) for s in se),
                tstat=tuple(float(t) for t in tstat),
                p=tuple(float(v) for v in p),
                mse=mse,
            )
        )

    stacked_beta = np.array([f.beta for f in fold_records])
    stacked_se = np.array([f.se for f in fold_records])
    stacked_t = np.array([f.tstat for f in fold_records])
    stacked_p = np.array([f.p for f in fold_records])
    residual = target - predicted
    if np.std(predicted) > 0.0 and np.std(target) > 0.0:
        pearson = float(np.corrcoef(predicted, target)[0, 1])
    else:
        pearson = float("nan")
    return GlmFit(
        folds=tuple(fold_records),
        mean_beta=tuple(float(v) for v in stacked_beta.mean(axis=0)),
        mean_se=tuple(float(v) for v in stacked_se.mean(axis=0)),
        mean_tstat=tuple(float(v) for v in stacked_t.mean(axis=0)),
        mean_p=tuple(float(v) for v in stacked_p.mean(axis=0)),
        rmse_cv=float(math.sqrt(np.mean(fold_mse))),
        pearson_r=pearson,
        rmse=float(math.sqrt(np.mean(residual**2))),
        bias=float(np.mean(predicted - target)),
        condition_number=condition,
    )
