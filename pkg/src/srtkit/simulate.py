"""Synthetic cohorts with known ground truth for validating the estimators.

Audiograms are drawn from the ten IEC 60118-15 (Bisgaard) standard
audiogram classes with small per-frequency jitter; each patient gets a true
recognition curve whose midpoint sits a random offset above the pure tone
average. The clinical fixed-level protocol is then replayed against that
curve: ascending presentation levels, stopping once the score has clearly
saturated, with either noise-free quantized scores or binomial word counts.

Randomness is counter-based (Philox) with one stream per patient and
purpose, so cohorts are reproducible regardless of worker count or
evaluation order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clinical import Audiogram, PatientRecord, SpeechPoint, compute_pta
from .config import PipelineConfig
from .errors import ConfigError
from .psychometric import PsychometricFunction

LOGGER = logging.getLogger(__name__)

__all__ = [
    "BISGAARD_CLASSES",
    "SimulatedPatient",
    "generate_cohort",
    "simulate_protocol",
    "simulate_cohort",
    "patient_record",
]

# Standard audiogram classes N1-N7 (flat/moderately sloping) and S1-S3
# (steeply sloping), dB HL at 250/500/1000/1500/2000/3000/4000/6000/8000 Hz.
# The standard defines values up to 6 kHz; 8 kHz repeats the 6 kHz value.
BISGAARD_CLASSES: dict[str, tuple[float, ...]] = {
    "N1": (10, 10, 10, 10, 15, 20, 30, 40, 40),
    "N2": (20, 20, 25, 30, 35, 40, 45, 50, 50),
    "N3": (35, 35, 40, 45, 50, 55, 60, 65, 65),
    "N4": (55, 55, 55, 60, 65, 70, 75, 80, 80),
    "N5": (65, 70, 75, 80, 80, 80, 80, 80, 80),
    "N6": (75, 80, 85, 90, 90, 95, 100, 100, 100),
    "N7": (90, 95, 105, 105, 105, 105, 105, 105, 105),
    "S1": (10, 10, 10, 10, 15, 30, 55, 70, 70),
    "S2": (20, 20, 25, 35, 55, 75, 95, 95, 95),
    "S3": (30, 35, 60, 70, 75, 80, 80, 85, 85),
}

_CLASS_NAMES = tuple(sorted(BISGAARD_CLASSES))

# Sub-stream selectors so generation and measurement noise never share a
# counter sequence for the same patient.
_STREAM_GENERATE = 0
_STREAM_MEASURE = 1


@dataclass(frozen=True)
class SimulatedPatient:
    """Ground truth for one synthetic patient."""

    patient_id: str
    bisgaard_class: str
    audiogram: Audiogram
    truth: PsychometricFunction
    pta_hl: float
    pta_spl: float
    gender: str
    age: int
    seed: int
    index: int

    def truth_srt50(self) -> float | None:
        """Level of the true 50% crossing, None when the curve stays below 50%."""
        if self.truth.wrs_max > 50.0:
            if self.truth.wrs_max == 100.0:
                return self.truth.srt
            shift = 25.0 * math.log(self.truth.wrs_max / 50.0 - 1.0) / self.truth.slope
            return self.truth.srt - shift
        return None


def _patient_rng(seed: int, index: int, stream: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(2 * index + stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _wrs_max_choices(low: float, high: float) -> np.ndarray:
    grid = np.arange(math.ceil(low / 5.0) * 5.0, high + 1e-9, 5.0)
    if grid.size == 0:
        raise ConfigError(f"wrs_max range [{low}, {high}] contains no 5% multiple")
    return grid


def generate_cohort(
    n: int, config: PipelineConfig, seed: int | None = None
) -> list[SimulatedPatient]:
    """Draw ``n`` patients with audiograms, demographics, and true curves."""
    if n < 1:
        raise ConfigError("cohort size must be at least 1")
    seed = config.seed if seed is None else seed
    jitter = config.sim_jitter_db
    step = config.sim_jitter_step_db
    if jitter < 0 or step <= 0:
        raise ConfigError("jitter and jitter step must be non-negative/positive")
    jitter_ticks = int(jitter // step)
    offset_low, offset_high = config.sim_srt_offset_range
    slope_low, slope_high = config.sim_slope_range
    if offset_low > offset_high or slope_low > slope_high:
        raise ConfigError("simulator ranges must be ordered low <= high")
    if slope_low <= 0:
        raise ConfigError("simulated slopes must be positive")
    if offset_low < -10.0:
        raise ConfigError(
            "srt offset below -10 dB would contradict the audibility filter"
        )
    wrs_max_grid = _wrs_max_choices(*config.sim_wrs_max_range)
    pta_offset = config.pta_offset_db()

    width = max(6, len(str(n - 1)))
    patients: list[SimulatedPatient] = []
    for index in range(n):
        rng = _patient_rng(seed, index, _STREAM_GENERATE)
        name = _CLASS_NAMES[int(rng.integers(0, len(_CLASS_NAMES)))]
        base = np.asarray(BISGAARD_CLASSES[name], dtype=float)
        if jitter_ticks > 0:
            ticks = rng.integers(-jitter_ticks, jitter_ticks + 1, size=base.size)
            thresholds = np.clip(base + step * ticks, -10.0, 120.0)
        else:
            thresholds = base
        audiogram = Audiogram(
            thresholds=tuple(float(t) for t in thresholds),
            imputed=(False,) * base.size,
        )
        pta_hl = compute_pta(audiogram)
        pta_spl = pta_hl + pta_offset
        offset = float(rng.uniform(offset_low, offset_high))
        slope = float(rng.uniform(slope_low, slope_high))
        wrs_max = float(wrs_max_grid[int(rng.integers(0, wrs_max_grid.size))])
        gender = "f" if int(rng.integers(0, 2)) else "m"
        age = int(rng.integers(18, 95))
        patients.append(
            SimulatedPatient(
                patient_id=f"sim-{index:0{width}d}",
                bisgaard_class=name,
                audiogram=audiogram,
                truth=PsychometricFunction(
                    srt=pta_spl + offset, slope=slope, wrs_max=wrs_max
                ),
                pta_hl=pta_hl,
                pta_spl=pta_spl,
                gender=gender,
                age=age,
                seed=seed,
                index=index,
            )
        )
    return patients


def _quantize_score(value: float, step: float = 5.0) -> float:
    return math.floor(value / step + 0.5) * step


def simulate_protocol(
    patient: SimulatedPatient,
    noise: str = "none",
    *,
    levels: Sequence[float] = (60.0, 80.0, 100.0, 110.0),
    n_words: int = 20,
    stop_increment: float = 5.0,
    stop_rule: str = "plateau",
) -> tuple[SpeechPoint, ...]:
    """Replay the ascending fixed-level protocol against the true curve.

    Levels are presented in ascending order. Measurement stops at a perfect
    score, or (under the default plateau rule) once a score fails to exceed
    the previous one by more than one word, the clinical signal that the
    maximum has been characterized.
    """
    if noise not in ("none", "binomial"):
        raise ConfigError(f"unknown measurement noise model: {noise!r}")
    if stop_rule not in ("plateau", "ceiling_only"):
        raise ConfigError(f"unknown stop rule: {stop_rule!r}")
    rng = (
        _patient_rng(patient.seed, patient.index, _STREAM_MEASURE)
        if noise == "binomial"
        else None
    )
    grid_step = 100.0 / n_words
    points: list[SpeechPoint] = []
    previous: float | None = None
    for level in sorted(levels):
        expected = patient.truth.evaluate(level)
        if rng is not None:
            correct = int(rng.binomial(n_words, expected / 100.0))
            measured = correct * grid_step
        else:
            measured = _quantize_score(expected, grid_step)
        points.append(SpeechPoint(level=float(level), wrs=float(measured)))
        if measured >= 100.0:
            break
        if (
            stop_rule == "plateau"
            and previous is not None
            and measured - previous <= stop_increment
        ):
            break
        previous = measured
    return tuple(points)


def patient_record(patient: SimulatedPatient, points: tuple[SpeechPoint, ...]) -> PatientRecord:
    """Package a simulated patient as an ingested clinical record."""
    return PatientRecord(
        patient_id=patient.patient_id,
        ear="right",
        audiogram=patient.audiogram,
        speech=points,
        gender=patient.gender,
        age=patient.age,
        test_date="2024-01-01",
        pta_hl=patient.pta_hl,
        pta_spl=patient.pta_spl,
    )


def simulate_cohort(
    n: int, config: PipelineConfig, seed: int | None = None, noise: str | None = None
) -> tuple[list[SimulatedPatient], list[PatientRecord]]:
    """Generate patients and their measured records in one step."""
    noise = config.sim_noise if noise is None else noise
    patients = generate_cohort(n, config, seed)
    records = [
        patient_record(
            patient,
            simulate_protocol(
                patient,
                noise,
                levels=config.sim_levels,
                n_words=config.n_test_words,
                stop_increment=config.sim_stop_increment,
                stop_rule=config.sim_stop_rule,
            ),
        )
        for patient in patients
    ]
    return patients, records
