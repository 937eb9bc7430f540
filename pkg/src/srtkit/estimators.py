"""The three SRT estimation procedures and the Plomp decomposition.

Fully determined patients (two or more points on the rising part of the
recognition curve) get an empirical straight line fit; patients with a
single usable point get a fixed-slope fit whose slope comes from the SII
level response; patients with no usable point get an upper bound from the
normal hearing recognition curve shifted through their best point. Every
estimate carries a propagated error and the audibility/distortion split
of the threshold elevation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .clinical import Category, SpeechPoint
from .psychometric import fit_line, invert_nh_logistic, line_to_srt
from .uncertainty import (
    WrsConfidenceTable,
    delta_d,
    delta_slope_empirical,
    delta_srt,
    delta_srt_nh,
    wrs_ci,
)

LOGGER = logging.getLogger(__name__)

__all__ = [
    "PROCEDURE_EMPIRICAL",
    "PROCEDURE_SII_SLOPE",
    "PROCEDURE_NH_SLOPE",
    "REASON_SRT_BELOW_PTA",
    "REASON_NON_POSITIVE_SLOPE",
    "REASON_DEGENERATE_SII_SLOPE",
    "SrtEstimate",
    "procedures_for",
    "select_anchor",
    "estimate_empirical",
    "estimate_sii_slope",
    "estimate_nh_slope",
    "plomp_components",
]

PROCEDURE_EMPIRICAL = "empirical"
PROCEDURE_SII_SLOPE = "sii_slope"
PROCEDURE_NH_SLOPE = "nh_slope"

REASON_SRT_BELOW_PTA = "srt_below_pta"
REASON_NON_POSITIVE_SLOPE = "non_positive_empirical_slope"
REASON_DEGENERATE_SII_SLOPE = "degenerate_sii_slope"

_PROCEDURES_BY_CATEGORY = {
    Category.FULLY_DETERMINED: (PROCEDURE_EMPIRICAL, PROCEDURE_SII_SLOPE),
    Category.HALF_DETERMINED: (PROCEDURE_SII_SLOPE,),
    Category.UNDETERMINED: (PROCEDURE_NH_SLOPE,),
    Category.NO_ESTIMATION: (),
}


def procedures_for(category: Category) -> tuple[str, ...]:
    """Which estimation procedures apply to a slope category."""
    return _PROCEDURES_BY_CATEGORY[category]


@dataclass(frozen=True)
class SrtEstimate:
    """One procedure's threshold estimate for one patient.

    ``srt`` is None when the procedure could not produce a value at all
    (failed precondition); estimates that produced a value but violate the
    audibility consistency rule keep the value and are marked excluded.
    """

    procedure: str
    srt: float | None
    slope_used: float | None
    anchor: SpeechPoint | None
    fit_points: tuple[SpeechPoint, ...] = ()
    delta_srt: float | None = None
    excluded: bool = False
    exclusion_reason: str | None = None
    anchor_fallback: bool = False
    plomp_a: float | None = None
    plomp_d: float | None = None
    delta_d: float | None = None


def plomp_components(
    srt: float, pta_spl: float, srt_reference_spl: float = 29.3
) -> tuple[float, float]:
    """Audibility and distortion components of the threshold elevation.

    The audibility part is the pure tone average's elevation above the
    normal hearing speech threshold, floored at zero; the distortion part
    is whatever of the SRT the pure tone average does not explain.
    """
    a = max(pta_spl - srt_reference_spl, 0.0)
    d = srt - pta_spl
    return a, d


def select_anchor(
    slope_area: tuple[SpeechPoint, ...],
    pta_spl: float,
    audibility_margin_db: float = 10.0,
) -> tuple[SpeechPoint, bool]:
    """Pick the point the threshold is anchored to.

    Among audible points (level at least ``pta_spl - margin``) the score
    closest to 50% wins; ties go to the lower level. When no point is
    audible the closest-to-50% point is used anyway and flagged.
    """
    if not slope_area:
        raise ValueError("anchor selection needs at least one point")
    audible = [p for p in slope_area if p.level >= pta_spl - audibility_margin_db]
    fallback = not audible
    pool = slope_area if fallback else tuple(audible)
    anchor = min(pool, key=lambda p: (abs(p.wrs - 50.0), p.level))
    return anchor, fallback


def _with_consistency_and_plomp(
    estimate: SrtEstimate,
    pta_spl: float,
    srt_reference_spl: float,
    audibility_margin_db: float,
    d_pta_db: float,
) -> SrtEstimate:
    """Apply the audibility consistency filter and attach the Plomp split."""
    if estimate.srt is None:
        return estimate
    if estimate.srt < pta_spl - audibility_margin_db:
        return replace(estimate, excluded=True, exclusion_reason=REASON_SRT_BELOW_PTA)
    a, d = plomp_components(estimate.srt, pta_spl, srt_reference_spl)
    dd = delta_d(estimate.delta_srt, d_pta_db) if estimate.delta_srt is not None else None
    return replace(estimate, plomp_a=a, plomp_d=d, delta_d=dd)


def estimate_empirical(
    slope_area: tuple[SpeechPoint, ...],
    pta_spl: float,
    ci_table: WrsConfidenceTable,
    *,
    srt_reference_spl: float = 29.3,
    audibility_margin_db: float = 10.0,
    d_pta_db: float = 5.0,
) -> SrtEstimate:
    """Straight line through the slope area points, read off at 50%.

    The slope error combines the score confidence intervals at the two
    outermost fit points; the threshold error is evaluated at the anchor.
    """
    if len(slope_area) < 2:
        raise ValueError("empirical estimation needs at least two points")
    points = tuple(sorted(slope_area, key=lambda p: p.level))
    slope, intercept = fit_line(points)
    if slope <= 0.0:
        return SrtEstimate(
            procedure=PROCEDURE_EMPIRICAL,
            srt=None,
            slope_used=slope,
            anchor=None,
            fit_points=points,
            excluded=True,
            exclusion_reason=REASON_NON_POSITIVE_SLOPE,
        )
    srt = line_to_srt(slope, intercept)
    anchor, fallback = select_anchor(points, pta_spl, audibility_margin_db)
    _, _, d_wrs_anchor = wrs_ci(anchor.wrs, ci_table)
    lower, upper = points[0], points[-1]
    _, _, d_wrs_lower = wrs_ci(lower.wrs, ci_table)
    _, _, d_wrs_upper = wrs_ci(upper.wrs, ci_table)
    d_slope = delta_slope_empirical(d_wrs_upper, d_wrs_lower, upper.level, lower.level)
    estimate = SrtEstimate(
        procedure=PROCEDURE_EMPIRICAL,
        srt=srt,
        slope_used=slope,
        anchor=anchor,
        fit_points=points,
        delta_srt=delta_srt(anchor.wrs, d_wrs_anchor, slope, d_slope),
        anchor_fallback=fallback,
    )
    return _with_consistency_and_plomp(
        estimate, pta_spl, srt_reference_spl, audibility_margin_db, d_pta_db
    )


def estimate_sii_slope(
    anchor: SpeechPoint,
    slope_h: float,
    d_slope_h: float,
    pta_spl: float,
    ci_table: WrsConfidenceTable,
    *,
    anchor_fallback: bool = False,
    srt_reference_spl: float = 29.3,
    audibility_margin_db: float = 10.0,
    d_pta_db: float = 5.0,
) -> SrtEstimate:
    """Fixed-slope line through one anchor point, slope from the SII model."""
    if not slope_h > 0.0:
        return SrtEstimate(
            procedure=PROCEDURE_SII_SLOPE,
            srt=None,
            slope_used=slope_h,
            anchor=anchor,
            excluded=True,
            exclusion_reason=REASON_DEGENERATE_SII_SLOPE,
            anchor_fallback=anchor_fallback,
        )
    srt = anchor.level - (anchor.wrs - 50.0) / slope_h
    _, _, d_wrs_anchor = wrs_ci(anchor.wrs, ci_table)
    estimate = SrtEstimate(
        procedure=PROCEDURE_SII_SLOPE,
        srt=srt,
        slope_used=slope_h,
        anchor=anchor,
        fit_points=(anchor,),
        delta_srt=delta_srt(anchor.wrs, d_wrs_anchor, slope_h, d_slope_h),
        anchor_fallback=anchor_fallback,
    )
    return _with_consistency_and_plomp(
        estimate, pta_spl, srt_reference_spl, audibility_margin_db, d_pta_db
    )


def estimate_nh_slope(
    wrs_max_point: SpeechPoint,
    pta_spl: float,
    *,
    nh_wrs_slope: float = 4.5,
    srt_reference_spl: float = 29.3,
    wrs_boundary_clamp: float = 2.5,
    audibility_margin_db: float = 10.0,
    d_pta_db: float = 5.0,
) -> SrtEstimate:
    """Upper bound for the threshold from the normal hearing curve shape.

    The normal shaped recognition curve (maximum 100%, reference slope) is
    shifted through the best measured point; since no real curve is steeper,
    the resulting threshold cannot undershoot the true one by more than the
    score granularity. Its error bar reaches down to the larger of the
    normal hearing threshold and the audibility limit.
    """
    srt = invert_nh_logistic(
        wrs_max_point.level,
        wrs_max_point.wrs,
        nh_slope=nh_wrs_slope,
        boundary_clamp=wrs_boundary_clamp,
    )
    estimate = SrtEstimate(
        procedure=PROCEDURE_NH_SLOPE,
        srt=srt,
        slope_used=nh_wrs_slope,
        anchor=wrs_max_point,
        fit_points=(wrs_max_point,),
        delta_srt=delta_srt_nh(srt, pta_spl, srt_reference_spl),
    )
    return _with_consistency_and_plomp(
        estimate, pta_spl, srt_reference_spl, audibility_margin_db, d_pta_db
    )
