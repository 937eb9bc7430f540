"""Measurement uncertainty propagation for the SRT estimation procedures.

Word recognition scores from an n-word list are modelled as binomial counts;
their 95% confidence intervals (exact Clopper-Pearson) feed first order
error terms for the fitted slopes and thresholds. Speech level errors are
taken as zero throughout, and the pure tone average contributes a fixed
test-retest repeatability.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from scipy import stats

from .errors import DataError

LOGGER = logging.getLogger(__name__)

__all__ = [
    "WrsConfidenceTable",
    "binomial_confidence_table",
    "load_confidence_table",
    "wrs_ci",
    "delta_slope_empirical",
    "delta_slope_sii",
    "delta_slope_sii_corrected",
    "delta_srt",
    "delta_srt_nh",
    "delta_d",
]


@dataclass(frozen=True)
class WrsConfidenceTable:
    """Confidence interval per attainable score, all on the percent scale."""

    entries: dict[float, tuple[float, float]]
    step_pct: float
    source: str  # "builtin-binomial" or "external"

    def interval(self, wrs: float) -> tuple[float, float]:
        key = round(wrs / self.step_pct) * self.step_pct
        if abs(wrs - key) > 1e-9 or key not in self.entries:
            raise DataError(f"score {wrs}% not covered by the confidence table")
        return self.entries[key]


def binomial_confidence_table(
    n_words: int = 20, confidence: float = 0.95
) -> WrsConfidenceTable:
    """Exact (Clopper-Pearson) binomial confidence intervals for k/n scores.

    The interval bounds come from the beta distribution quantiles; the edge
    scores 0 and n keep their one-sided exact bounds.
    """
    alpha = 1.0 - confidence
    step = 100.0 / n_words
    entries: dict[float, tuple[float, float]] = {}
    for k in range(n_words + 1):
        if k == 0:
            low = 0.0
        else:
            low = float(stats.beta.ppf(alpha / 2.0, k, n_words - k + 1))
        if k == n_words:
            high = 1.0
        else:
            high = float(stats.beta.ppf(1.0 - alpha / 2.0, k + 1, n_words - k))
        entries[k * step] = (100.0 * low, 100.0 * high)
    return WrsConfidenceTable(entries=entries, step_pct=step, source="builtin-binomial")


def load_confidence_table(path: str | Path, n_words: int = 20) -> WrsConfidenceTable:
    """Load an external table of rows ``wrs, ci_low, ci_high`` (percent).

    A header row is tolerated. Every attainable score of the n-word list must
    be covered and each interval must bracket its score.
    """
    path = Path(path)
    step = 100.0 / n_words
    entries: dict[float, tuple[float, float]] = {}
    with path.open(newline="") as handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            cells = [cell.strip() for cell in row if cell.strip()]
            if not cells:
                continue
            try:
                wrs, low, high = (float(c) for c in cells[:3])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: malformed confidence table row")
            if not low <= wrs <= high:
                raise DataError(
                    f"{path}:{lineno}: interval [{low}, {high}] does not bracket {wrs}"
                )
            entries[round(wrs / step) * step] = (low, high)
    missing = [k * step for k in range(n_words + 1) if k * step not in entries]
    if missing:
        raise DataError(f"confidence table {path} missing scores {missing}")
    return WrsConfidenceTable(entries=entries, step_pct=step, source="external")


def wrs_ci(wrs: float, table: WrsConfidenceTable) -> tuple[float, float, float]:
    """Half-widths (below, above, larger of the two) of the score's CI."""
    low, high = table.interval(wrs)
    below = wrs - low
    above = high - wrs
    return below, above, max(below, above)


def delta_slope_empirical(
    d_wrs_upper: float, d_wrs_lower: float, level_upper: float, level_lower: float
) -> float:
    """Error of a two-point slope from the score errors at its end points."""
    if level_upper == level_lower:
        raise ValueError("slope error undefined for coincident levels")
    return (d_wrs_upper + d_wrs_lower) / (level_upper - level_lower)


def delta_slope_sii(d_sii: float) -> float:
    """Slope error of the SII based procedure, quadrature of two evaluations.

    Kept in the raw root-two-times-delta form (the customary reporting
    convention); see delta_slope_sii_corrected for the dimensionally
    propagated variant.
    """
    if d_sii < 0.0:
        raise ValueError("SII repeatability must be non-negative")
    return math.sqrt(2.0 * d_sii * d_sii)


def delta_slope_sii_corrected(
    d_sii: float,
    level_span_db: float,
    nh_wrs_slope: float = 4.5,
    nh_sii_slope: float = 0.0307,
) -> float:
    """Slope error propagated through the difference quotient and unit map.

    The SII slope is a difference of two index values over a level span, so
    its error is root-two times the per-evaluation error divided by the span,
    then converted from SII/dB to %/dB.
    """
    if level_span_db <= 0.0:
        raise ValueError("level span must be positive")
    return delta_slope_sii(d_sii) / level_span_db * (nh_wrs_slope / nh_sii_slope)


def delta_srt(wrs_anchor: float, d_wrs_anchor: float, slope: float, d_slope: float) -> float:
    """First order SRT error from the anchor score and slope errors.

    The score term scales with the inverse slope; the slope term grows with
    the anchor's distance from the 50% midpoint.
    """
    if slope <= 0.0:
        raise ValueError("SRT error undefined for non-positive slope")
    return (1.0 / slope) * d_wrs_anchor + abs(wrs_anchor - 50.0) * d_slope / (slope * slope)


def delta_srt_nh(srt_n: float, pta_spl: float, srt_reference_spl: float = 29.3) -> float:
    """Error bar of the upper-bound procedure: distance to its lower bound.

    The lower bound is the normal hearing reference or the audibility limit
    ``pta_spl - 10``, whichever is higher.
    """
    return srt_n - max(srt_reference_spl, pta_spl - 10.0)


def delta_d(d_srt: float, d_pta: float = 5.0) -> float:
    """Error attributed to the distortion component, taken literally as the
    SRT error reduced by the pure tone average repeatability."""
    return d_srt - d_pta
