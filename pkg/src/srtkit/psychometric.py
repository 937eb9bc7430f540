"""Logistic discrimination functions and the line fits used on top of them.

Word recognition over presentation level is modelled as a scaled logistic:
the underlying sigmoid runs from 0 to 100% with slope ``slope`` (%/dB) at its
midpoint, and the whole curve is multiplied by ``wrs_max``/100. The ``srt``
parameter is the midpoint of the scaled curve, i.e. the level at which half
of ``wrs_max`` is reached. The slope of the scaled curve at the midpoint is
therefore ``slope * wrs_max / 100``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "PsychometricFunction",
    "fit_line",
    "line_to_srt",
    "invert_nh_logistic",
]

# Slope of the underlying logistic enters the exponent as 4 * slope / 100;
# with the conventional normal hearing slope of 4.5 %/dB this is 0.18 per dB.
_SLOPE_EXPONENT_SCALE = 4.0 / 100.0


@dataclass(frozen=True)
class PsychometricFunction:
    """Scaled logistic recognition curve.

    srt: midpoint level in dB SPL (the level of ``wrs_max / 2``)
    slope: midpoint slope of the unscaled 0..100% sigmoid, %/dB
    wrs_max: saturation recognition score, %
    """

    srt: float
    slope: float
    wrs_max: float

    def __post_init__(self) -> None:
        if self.slope <= 0.0:
            raise ValueError(f"slope must be positive, got {self.slope}")
        if not 0.0 < self.wrs_max <= 100.0:
            raise ValueError(f"wrs_max must lie in (0, 100], got {self.wrs_max}")

    def evaluate(self, level: float) -> float:
        """Recognition score in percent at a presentation level in dB SPL."""
        exponent = 4.0 * (self.slope / 100.0) * (self.srt - level)
        return self.wrs_max / (1.0 + math.exp(exponent))

    def level_at(self, wrs: float) -> float:
        """Level at which the curve reaches ``wrs`` percent (inverse of evaluate)."""
        if not 0.0 < wrs < self.wrs_max:
            raise ValueError(f"wrs must lie strictly inside (0, {self.wrs_max})")
        return self.srt - math.log(self.wrs_max / wrs - 1.0) / (
            4.0 * self.slope / 100.0
        )


def fit_line(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least squares line through (level, wrs) points.

    Two points give the exact connecting line; more give the ordinary least
    squares fit. Returns (slope in %/dB, intercept in %). Raises ValueError
    for fewer than two points or a vertical point set.
    """
    if len(points) < 2:
        raise ValueError("need at least two points to fit a line")
    n = len(points)
    mean_x = sum(p[0] for p in points) / n
    mean_y = sum(p[1] for p in points) / n
    sxx = sum((p[0] - mean_x) ** 2 for p in points)
    if sxx == 0.0:
        raise ValueError("all points share one level; slope is undefined")
    sxy = sum((p[0] - mean_x) * (p[1] - mean_y) for p in points)
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    return slope, intercept


def line_to_srt(slope: float, intercept: float) -> float:
    """Level where a fitted recognition line crosses 50%."""
    if slope <= 0.0:
        raise ValueError(f"slope must be positive, got {slope}")
    return (50.0 - intercept) / slope


def invert_nh_logistic(
    level: float,
    wrs: float,
    nh_slope: float = 4.5,
    boundary_clamp: float = 2.5,
) -> float:
    """SRT of a normal-hearing-slope logistic through one (level, wrs) point.

    The measured score is clamped away from the 0% and 100% boundaries by
    ``boundary_clamp`` (half a word of a 20 word list by default) so the
    inversion stays finite at the scale ends.
    """
    clamped = min(max(wrs, boundary_clamp), 100.0 - boundary_clamp)
    return level + math.log(100.0 / clamped - 1.0) / (4.0 * nh_slope / 100.0)


def curve_samples(
    fn: PsychometricFunction, levels: Iterable[float]
) -> list[tuple[float, float]]:
    """Evaluate a curve on several levels, handy for plots and tests."""
    return [(level, fn.evaluate(level)) for level in levels]
