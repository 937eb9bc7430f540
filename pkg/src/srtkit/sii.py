"""Critical band speech intelligibility index and its level response.

Implements the ANSI S3.5 style critical band procedure: 21 bands, speech and
internal noise spectrum levels per band, self speech masking, upward spread
of masking, an audiogram dependent equivalent internal noise, and the high
level distortion factor. On top of the single-level computation sits a
search for the level range where the index grows linearly, which yields the
SII-per-dB slope used to individualize recognition curve slopes.

Band data lives in a plain TSV table (see ``data/sii_bands_v1.tsv``) so the
spectra can be swapped without touching code. A calibration mode replaces
the banded speech spectrum with its importance weighted audibility offset
and a level gain chosen so that the zero audiogram slope equals the normal
hearing reference exactly; see ``load_sii_parameters``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .clinical import Audiogram
from .config import AUDIOGRAM_FREQUENCIES_HZ, PipelineConfig
from .errors import SrtkitError

LOGGER = logging.getLogger(__name__)

__all__ = [
    "REFERENCE_SPEECH_LEVEL_SPL",
    "DegenerateSiiError",
    "SiiParameters",
    "SiiCurve",
    "load_sii_parameters",
    "compute_sii",
    "sii_at_levels",
    "find_linear_range",
    "convert_slope",
]

# Overall level of the normal vocal effort speech spectrum, dB SPL.
REFERENCE_SPEECH_LEVEL_SPL = 62.35

# Audibility window: a band contributes from 15 dB below to 15 dB above its
# disturbance level, i.e. over a 30 dB speech dynamic range.
_AUDIBILITY_HALF_WINDOW_DB = 15.0
_AUDIBILITY_RANGE_DB = 30.0

# Self speech masking sits 24 dB below the speech spectrum level.
_SELF_MASKING_DROP_DB = 24.0


class DegenerateSiiError(SrtkitError):
    """The SII level response has no rising part (e.g. total deafness)."""


@dataclass(frozen=True)
class SiiParameters:
    """Loaded band table plus evaluation options.

    Arrays all have length 21 and are aligned by band. ``calibration_gain``
    and ``calibration_offset`` are None in the default (tabled spectrum)
    mode; in calibration mode the equivalent speech spectrum level of band i
    at overall level L is ``noise_ref[i] + offset + gain * (L - 62.35)``.
    """

    center_hz: np.ndarray
    low_hz: np.ndarray
    high_hz: np.ndarray
    speech_db: np.ndarray
    noise_ref_db: np.ndarray
    importance: np.ndarray
    noise_level_spl: float = -50.0
    level_distortion: bool = True
    calibration_gain: float | None = None
    calibration_offset: float | None = None

    def n_bands(self) -> int:
        return len(self.center_hz)


def _read_band_table(path: Path) -> dict[str, np.ndarray]:
    header: list[str] | None = None
    columns: dict[str, list[float]] = {}
    for line in path.read_text().splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = stripped.split("\t")
        if header is None:
            header = cells
            for name in header:
                columns[name] = []
            continue
        for name, cell in zip(header, cells):
            columns[name].append(float(cell))
    if header is None:
        raise SrtkitError(f"band table {path} has no header row")
    required = ("center_hz", "low_hz", "high_hz", "speech_db", "noise_db", "importance")
    missing = [c for c in required if c not in columns]
    if missing:
        raise SrtkitError(f"band table {path} missing columns {missing}")
    return {name: np.asarray(values, dtype=float) for name, values in columns.items()}


def load_sii_parameters(config: PipelineConfig) -> SiiParameters:
    """Load band data and derive evaluation options from the run config."""
    if config.sii_band_table is not None:
        table_path = Path(config.sii_band_table)
    else:
        table_path = Path(
            str(resources.files("srtkit").joinpath("data/sii_bands_v1.tsv"))
        )
    table = _read_band_table(table_path)

    if config.sii_importance == "flat":
        importance = np.full(len(table["center_hz"]), 1.0)
    else:
        importance = table["importance"].copy()
    importance = importance / importance.sum()

    gain: float | None = None
    offset: float | None = None
    if config.sii_calibration:
        gain = _AUDIBILITY_RANGE_DB * config.nh_sii_slope
        offset = float(
            np.sum(importance * (table["speech_db"] - table["noise_db"]))
        )
        LOGGER.debug("SII calibration: gain=%.6f dB/dB, offset=%.3f dB", gain, offset)

    return SiiParameters(
        center_hz=table["center_hz"],
        low_hz=table["low_hz"],
        high_hz=table["high_hz"],
        speech_db=table["speech_db"],
        noise_ref_db=table["noise_db"],
        importance=importance,
        noise_level_spl=config.sii_noise_level_spl,
        level_distortion=config.sii_level_distortion,
        calibration_gain=gain,
        calibration_offset=offset,
    )


def band_thresholds(audiogram: Audiogram | Sequence[float], params: SiiParameters) -> np.ndarray:
    """Interpolate a nine frequency audiogram onto the band centers.

    Interpolation is linear on a log frequency axis; band centers outside the
    audiometric range take the nearest measured value.
    """
    if isinstance(audiogram, Audiogram):
        if not audiogram.is_complete():
            raise ValueError("audiogram must be imputed before SII evaluation")
        values = np.asarray(audiogram.thresholds, dtype=float)
    else:
        values = np.asarray(audiogram, dtype=float)
        if values.shape != (len(AUDIOGRAM_FREQUENCIES_HZ),):
            raise ValueError(
                f"expected {len(AUDIOGRAM_FREQUENCIES_HZ)} thresholds, got {values.shape}"
            )
    log_audio = np.log10(np.asarray(AUDIOGRAM_FREQUENCIES_HZ, dtype=float))
    return np.interp(np.log10(params.center_hz), log_audio, values)


def _equivalent_speech(params: SiiParameters, levels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per band equivalent speech spectrum levels and the normal effort reference.

    Returns (E, U): E has shape (n_levels, n_bands), U has shape (n_bands,).
    """
    shift = (levels - REFERENCE_SPEECH_LEVEL_SPL)[:, None]
    if params.calibration_gain is None:
        return params.speech_db[None, :] + shift, params.speech_db
    base = params.noise_ref_db + params.calibration_offset
    return base[None, :] + params.calibration_gain * shift, base


def sii_at_levels(
    thresholds: np.ndarray, levels: Sequence[float] | np.ndarray, params: SiiParameters
) -> np.ndarray:
    """SII at several speech levels for one set of band thresholds.

    Inputs
    ------
    thresholds : per band hearing thresholds in dB HL (from band_thresholds)
    levels     : overall speech levels in dB SPL, each within [-10, 130]
    params     : loaded SiiParameters

    Output: array of SII values in [0, 1], one per level.
    """
    levels = np.asarray(levels, dtype=float)
    if np.any(levels < -10.0) or np.any(levels > 130.0):
        raise ValueError("speech levels must lie within [-10, 130] dB SPL")

    E, U = _equivalent_speech(params, levels)
    noise = U + (params.noise_level_spl - REFERENCE_SPEECH_LEVEL_SPL)

    # Masking spectrum: external noise floor plus upward spread from lower
    # bands, whose source level is the larger of noise and self speech
    # masking. The spread slope steepens with the source level.
    V = E - _SELF_MASKING_DROP_DB
    B = np.maximum(noise[None, :], V)
    ten_log_bw = 10.0 * np.log10(params.high_hz - params.low_hz)
    C = -80.0 + 0.6 * (B + ten_log_bw[None, :])
    log_ratio = np.log10(params.center_hz[None, :] / params.high_hz[:, None])
    spread = B[:, :, None] + 3.32 * C[:, :, None] * log_ratio[None, :, :]
    from_below = np.triu(np.ones((params.n_bands(), params.n_bands())), k=1)
    masking_power = np.where(from_below[None, :, :] > 0, 10.0 ** (0.1 * spread), 0.0)
    Z = 10.0 * np.log10(10.0 ** (0.1 * noise)[None, :] + masking_power.sum(axis=1))

    X = params.noise_ref_db + thresholds
    disturbance = np.maximum(Z, X[None, :])
    audibility = np.clip(
        (E - disturbance + _AUDIBILITY_HALF_WINDOW_DB) / _AUDIBILITY_RANGE_DB, 0.0, 1.0
    )
    if params.level_distortion:
        distortion = np.clip(1.0 - (E - U[None, :] - 10.0) / 160.0, 0.0, 1.0)
        audibility = audibility * distortion
    return np.clip(audibility @ params.importance, 0.0, 1.0)


def compute_sii(
    audiogram: Audiogram | Sequence[float], speech_level: float, params: SiiParameters
) -> float:
    """SII for one audiogram at one overall speech level in dB SPL."""
    thresholds = band_thresholds(audiogram, params)
    return float(sii_at_levels(thresholds, [speech_level], params)[0])


@dataclass(frozen=True)
class SiiCurve:
    """Result of the linear range search over the SII level response."""

    slope_per_db: float                      # SII per dB in the linear range
    r_squared: float                         # linearity of the winning triple
    converged: bool                          # r_squared reached the threshold
    triple_levels: tuple[float, float, float]
    samples: tuple[tuple[float, float], ...]  # all (level, sii) evaluations

    def level_span(self) -> float:
        return self.triple_levels[2] - self.triple_levels[0]


def _pearson_r2(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    syy = sum((y - mean_y) ** 2 for y in ys)
    if syy == 0.0 or sxx == 0.0:
        return None
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    return (sxy * sxy) / (sxx * syy)


def _crossing(levels: list[float], values: list[float], target: float) -> float:
    """First level where the piecewise linear curve reaches ``target``."""
    if values[0] >= target:
        return levels[0]
    for (l0, v0), (l1, v1) in zip(zip(levels, values), zip(levels[1:], values[1:])):
        if v0 < target <= v1:
            return l0 + (target - v0) / (v1 - v0) * (l1 - l0)
    return levels[-1]


def _best_triple(
    samples: list[tuple[float, float]]
) -> tuple[int, float, float] | None:
    """Index, r squared, and slope of the most linear rising triple."""
    best: tuple[int, float, float] | None = None
    for i in range(len(samples) - 2):
        xs = [samples[i][0], samples[i + 1][0], samples[i + 2][0]]
        ys = [samples[i][1], samples[i + 1][1], samples[i + 2][1]]
        slope = (ys[2] - ys[0]) / (xs[2] - xs[0])
        if slope <= 0.0:
            continue
        r2 = _pearson_r2(xs, ys)
        if r2 is None:
            continue
        if best is None or (r2, slope) > (best[1], best[2]):
            best = (i, r2, slope)
    return best


def find_linear_range(
    thresholds: np.ndarray,
    params: SiiParameters,
    coarse_levels: Sequence[float] = (10.0, 40.0, 70.0, 100.0),
    r2_threshold: float = 0.99,
    level_resolution_db: float = 0.5,
    max_refinements: int = 100,
) -> SiiCurve:
    """Locate the rising, linear part of SII over level and measure its slope.

    The curve is probed on a coarse grid first; the rising range is taken
    between the 10% and 90% crossings of the coarse maximum and seeded with
    four equidistant levels. The most linear triple of consecutive samples
    (Pearson r squared, positive slope required) is then refined by inserting
    midpoints into its wider gap until r squared reaches the threshold or new
    midpoints would duplicate existing levels at the configured resolution.

    Raises DegenerateSiiError when the curve never rises (flat zero).
    """
    samples: list[tuple[float, float]] = []

    def evaluate(levels: Sequence[float]) -> None:
        new_levels = [
            level
            for level in levels
            if all(abs(level - l) >= 1e-9 for l, _ in samples)
        ]
        if not new_levels:
            return
        values = sii_at_levels(thresholds, new_levels, params)
        samples.extend(zip(new_levels, (float(v) for v in values)))
        samples.sort(key=lambda pair: pair[0])

    evaluate(list(coarse_levels))
    coarse_max = max(v for _, v in samples)
    if coarse_max <= 0.0:
        raise DegenerateSiiError("SII level response has no positive slope")

    levels_now = [l for l, _ in samples]
    values_now = [v for _, v in samples]
    low = _crossing(levels_now, values_now, 0.1 * coarse_max)
    high = _crossing(levels_now, values_now, 0.9 * coarse_max)
    if high <= low:
        high = low + 2.0 * level_resolution_db
    evaluate(list(np.linspace(low, high, 4)))

    best = _best_triple(samples)
    if best is None:
        raise DegenerateSiiError("SII level response has no positive slope")

    for _ in range(max_refinements):
        index, r2, _slope = best
        if r2 >= r2_threshold:
            break
        triple = samples[index : index + 3]
        gaps = [
            (triple[1][0] - triple[0][0], (triple[0][0] + triple[1][0]) / 2.0),
            (triple[2][0] - triple[1][0], (triple[1][0] + triple[2][0]) / 2.0),
        ]
        gaps.sort(reverse=True)
        inserted = False
        for _, midpoint in gaps:
            if all(abs(midpoint - l) >= level_resolution_db for l, _ in samples):
                evaluate([midpoint])
                inserted = True
                break
        if not inserted:
            break
        best = _best_triple(samples)
        if best is None:
            raise DegenerateSiiError("SII level response has no positive slope")

    index, r2, slope = best
    triple = samples[index : index + 3]
    return SiiCurve(
        slope_per_db=slope,
        r_squared=float(r2),
        converged=bool(r2 >= r2_threshold),
        triple_levels=(triple[0][0], triple[1][0], triple[2][0]),
        samples=tuple(samples),
    )


def convert_slope(
    sii_slope: float, nh_wrs_slope: float = 4.5, nh_sii_slope: float = 0.0307
) -> float:
    """Convert an SII-per-dB slope to a recognition slope in %/dB.

    The mapping is proportional through the normal hearing reference pair, so
    the reference SII slope converts to the reference recognition slope
    without rounding residue.
    """
    return (sii_slope / nh_sii_slope) * nh_wrs_slope
