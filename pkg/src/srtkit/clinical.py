"""Clinical record types, ingestion, audiogram completion, and grouping.

The input schema is one row per measured ear: patient metadata, a nine
frequency audiogram (dB HL, 250 Hz to 8 kHz), and word recognition scores at
the fixed presentation ladder 60/80/100/110 dB SPL. Audiograms may have
gaps, score columns may be empty where a level was not measured.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .config import AUDIOGRAM_FREQUENCIES_HZ, PTA_FREQUENCIES_HZ
from .errors import DataError

LOGGER = logging.getLogger(__name__)

__all__ = [
    "SPEECH_LEVELS",
    "SpeechPoint",
    "Audiogram",
    "PatientRecord",
    "Category",
    "CategoryResult",
    "IngestResult",
    "ingest_csv",
    "ingest_json",
    "impute_audiogram",
    "compute_pta",
    "prepare_record",
    "better_ear",
    "categorize",
    "deduplicate_audiograms",
]

# Fixed presentation ladder of the word test, dB SPL.
SPEECH_LEVELS: tuple[float, ...] = (60.0, 80.0, 100.0, 110.0)

THRESHOLD_FLOOR_DB = -10.0
THRESHOLD_CEILING_DB = 120.0

_AUDIOGRAM_COLUMNS = tuple(f"ag{f}" for f in AUDIOGRAM_FREQUENCIES_HZ)
_SPEECH_COLUMNS = tuple(f"wrs{int(level)}" for level in SPEECH_LEVELS)
REQUIRED_COLUMNS = ("id", "ear", "gender", "age", "date") + _AUDIOGRAM_COLUMNS + _SPEECH_COLUMNS


class SpeechPoint(NamedTuple):
    level: float  # dB SPL
    wrs: float    # percent correct, multiple of 5


@dataclass(frozen=True)
class Audiogram:
    """Thresholds in dB HL aligned with AUDIOGRAM_FREQUENCIES_HZ.

    ``thresholds`` may contain None before imputation; ``imputed`` marks
    entries that were filled in rather than measured.
    """

    thresholds: tuple[float | None, ...]
    imputed: tuple[bool, ...] = (False,) * len(AUDIOGRAM_FREQUENCIES_HZ)

    def __post_init__(self) -> None:
        n = len(AUDIOGRAM_FREQUENCIES_HZ)
        if len(self.thresholds) != n or len(self.imputed) != n:
            raise ValueError(f"audiogram needs exactly {n} threshold slots")

    def is_complete(self) -> bool:
        return all(t is not None for t in self.thresholds)

    def threshold_at(self, frequency_hz: int) -> float | None:
        return self.thresholds[AUDIOGRAM_FREQUENCIES_HZ.index(frequency_hz)]

    def key(self) -> tuple[float, ...]:
        """Hashable identity used for deduplication (values only)."""
        if not self.is_complete():
            raise ValueError("cannot key an incomplete audiogram")
        return tuple(float(t) for t in self.thresholds)  # type: ignore[arg-type]


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    ear: str  # "left" or "right"
    audiogram: Audiogram
    speech: tuple[SpeechPoint, ...]
    gender: str | None = None
    age: float | None = None
    test_date: _dt.date | None = None
    pta_hl: float | None = None
    pta_spl: float | None = None


class Category(str, Enum):
    """How well the measured points determine the recognition curve slope."""

    FULLY_DETERMINED = "fully_determined"
    HALF_DETERMINED = "half_determined"
    UNDETERMINED = "undetermined"
    NO_ESTIMATION = "no_estimation"


@dataclass(frozen=True)
class CategoryResult:
    category: Category
    wrs_max: float
    wrs_max_point: SpeechPoint
    slope_area: tuple[SpeechPoint, ...]


@dataclass
class IngestResult:
    records: list[PatientRecord]
    dropped: Counter = field(default_factory=Counter)
    row_errors: list[str] = field(default_factory=list)


def impute_audiogram(audiogram: Audiogram) -> Audiogram:
    """Fill audiogram gaps from the measured neighbors.

    Interior gaps are interpolated linearly across the standard audiometric
    frequency ladder (positions on the nine step grid, which is close to
    uniform on a log frequency axis); edge gaps copy the nearest measured
    value. Results are clamped to [-10, 120] dB HL.
    """
    values = list(audiogram.thresholds)
    measured = [i for i, v in enumerate(values) if v is not None]
    if not measured:
        raise ValueError("audiogram has no measured thresholds to impute from")
    if len(measured) == len(values):
        return audiogram

    imputed = list(audiogram.imputed)
    for i, v in enumerate(values):
        if v is not None:
            continue
        lower = max((j for j in measured if j < i), default=None)
        upper = min((j for j in measured if j > i), default=None)
        if lower is None:
            filled = values[upper]  # type: ignore[index]
        elif upper is None:
            filled = values[lower]
        else:
            span = upper - lower
            weight = (i - lower) / span
            filled = values[lower] + weight * (values[upper] - values[lower])  # type: ignore[operator]
        values[i] = min(max(filled, THRESHOLD_FLOOR_DB), THRESHOLD_CEILING_DB)
        imputed[i] = True
    return Audiogram(tuple(values), tuple(imputed))


def compute_pta(audiogram: Audiogram) -> float:
    """Pure tone average over 0.5/1/2/4 kHz in dB HL (audiogram must be complete)."""
    if not audiogram.is_complete():
        raise ValueError("impute the audiogram before computing the PTA")
    return sum(audiogram.threshold_at(f) for f in PTA_FREQUENCIES_HZ) / len(  # type: ignore[misc]
        PTA_FREQUENCIES_HZ
    )


def prepare_record(record: PatientRecord, pta_offset_db: float) -> PatientRecord:
    """Impute the audiogram and attach PTA in dB HL and dB SPL."""
    audiogram = impute_audiogram(record.audiogram)
    pta_hl = compute_pta(audiogram)
    return replace(
        record,
        audiogram=audiogram,
        pta_hl=pta_hl,
        pta_spl=pta_hl + pta_offset_db,
    )


def better_ear(records: Sequence[PatientRecord], tie_break: str = "right") -> PatientRecord:
    """Pick the ear with the lower PTA; ties go to the configured side."""
    if not records:
        raise ValueError("no records to choose from")
    for record in records:
        if record.pta_spl is None:
            raise ValueError("prepare_record must run before better_ear")
    best = records[0]
    for record in records[1:]:
        if record.pta_spl < best.pta_spl:  # type: ignore[operator]
            best = record
        elif record.pta_spl == best.pta_spl and record.ear != best.ear:
            if record.ear == tie_break:
                best = record
    return best


def categorize(
    points: Sequence[SpeechPoint],
    no_estimation_floor: float = 10.0,
    slope_area_low: float = 0.15,
    slope_area_high: float = 0.85,
) -> CategoryResult:
    """Classify a measurement by how many points pin down the slope.

    The maximum score point (rightmost on the level axis when several tie) is
    set aside; remaining points inside [low, high] * WRS_max form the slope
    area. Two or more such points fully determine an empirical slope, exactly
    one half determines it, none leaves the curve undetermined. A maximum
    score below the floor supports no estimation at all.
    """
    if not points:
        raise ValueError("cannot categorize an empty measurement")
    wrs_max = max(p.wrs for p in points)
    wrs_max_point = max(
        (p for p in points if p.wrs == wrs_max), key=lambda p: p.level
    )
    if wrs_max < no_estimation_floor:
        return CategoryResult(Category.NO_ESTIMATION, wrs_max, wrs_max_point, ())
    low = slope_area_low * wrs_max
    high = slope_area_high * wrs_max
    slope_area = tuple(
        p for p in points if p != wrs_max_point and low <= p.wrs <= high
    )
    if len(slope_area) >= 2:
        category = Category.FULLY_DETERMINED
    elif len(slope_area) == 1:
        category = Category.HALF_DETERMINED
    else:
        category = Category.UNDETERMINED
    return CategoryResult(category, wrs_max, wrs_max_point, slope_area)


def deduplicate_audiograms(
    records: Sequence[PatientRecord],
) -> dict[tuple[float, ...], list[int]]:
    """Group record indices by identical audiogram threshold vectors."""
    groups: dict[tuple[float, ...], list[int]] = {}
    for index, record in enumerate(records):
        groups.setdefault(record.audiogram.key(), []).append(index)
    return groups


# ---------------------------------------------------------------------------
# Ingestion


def _parse_optional_float(text: str | None) -> float | None:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    return float(text)


def _row_to_record(row: dict[str, str | None], where: str) -> PatientRecord | None:
    patient_id = (row.get("id") or "").strip()
    if not patient_id:
        raise ValueError("missing patient id")
    ear = (row.get("ear") or "").strip().lower()
    if ear not in ("left", "right"):
        raise ValueError(f"ear must be 'left' or 'right', got {row.get('ear')!r}")

    thresholds: list[float | None] = []
    for column in _AUDIOGRAM_COLUMNS:
        value = _parse_optional_float(row.get(column))
        if value is not None and not (
            THRESHOLD_FLOOR_DB <= value <= THRESHOLD_CEILING_DB
        ):
            raise ValueError(f"{column}={value} outside [-10, 120] dB HL")
        thresholds.append(value)

    points: list[SpeechPoint] = []
    for column, level in zip(_SPEECH_COLUMNS, SPEECH_LEVELS):
        wrs = _parse_optional_float(row.get(column))
        if wrs is None:
            continue
        if not 0.0 <= wrs <= 100.0:
            raise ValueError(f"{column}={wrs} outside [0, 100]%")
        if wrs % 5.0 != 0.0:
            raise ValueError(f"{column}={wrs} is not a multiple of 5%")
        points.append(SpeechPoint(level, wrs))

    date_text = (row.get("date") or "").strip()
    test_date = _dt.date.fromisoformat(date_text) if date_text else None
    gender = (row.get("gender") or "").strip() or None
    age = _parse_optional_float(row.get("age"))

    if all(t is None for t in thresholds):
        LOGGER.debug("%s: no audiogram, dropping", where)
        return None  # caller counts this
    return PatientRecord(
        patient_id=patient_id,
        ear=ear,
        audiogram=Audiogram(tuple(thresholds)),
        speech=tuple(points),
        gender=gender,
        age=age,
        test_date=test_date,
    )


def _merge_same_day(records: list[PatientRecord], where: str) -> PatientRecord:
    """Merge rows for one ear measured on the same date."""
    base = records[0]
    thresholds = list(base.audiogram.thresholds)
    points: dict[float, float] = {p.level: p.wrs for p in base.speech}
    for other in records[1:]:
        for i, value in enumerate(other.audiogram.thresholds):
            if thresholds[i] is None:
                thresholds[i] = value
        for p in other.speech:
            if p.level in points and points[p.level] != p.wrs:
                LOGGER.warning(
                    "%s: duplicate level %g dB for %s/%s, keeping higher score",
                    where, p.level, base.patient_id, base.ear,
                )
                points[p.level] = max(points[p.level], p.wrs)
            else:
                points.setdefault(p.level, p.wrs)
    speech = tuple(
        SpeechPoint(level, points[level]) for level in sorted(points)
    )
    return replace(base, audiogram=Audiogram(tuple(thresholds)), speech=speech)


def _collapse_sessions(records: list[PatientRecord], dropped: Counter) -> list[PatientRecord]:
    """Keep the earliest session per (patient, ear); merge same day rows."""
    by_ear: dict[tuple[str, str], list[PatientRecord]] = {}
    order: list[tuple[str, str]] = []
    for record in records:
        key = (record.patient_id, record.ear)
        if key not in by_ear:
            order.append(key)
        by_ear.setdefault(key, []).append(record)

    out: list[PatientRecord] = []
    for key in order:
        group = by_ear[key]
        if len(group) == 1:
            out.append(group[0])
            continue
        dates = [r.test_date for r in group]
        if any(d is None for d in dates):
            LOGGER.warning("undated repeat rows for %s/%s, keeping first", *key)
            earliest = [r for r in group if r.test_date is None] + [
                r for r in group if r.test_date is not None
            ]
            keep = [earliest[0]]
        else:
            first_date = min(dates)  # type: ignore[type-var]
            keep = [r for r in group if r.test_date == first_date]
            dropped["later_sessions"] += len(group) - len(keep)
        out.append(_merge_same_day(keep, f"{key[0]}/{key[1]}"))
    return out


def _ingest_rows(rows: Iterable[dict[str, str | None]], source: str) -> IngestResult:
    result = IngestResult(records=[])
    raw_records: list[PatientRecord] = []
    for lineno, row in enumerate(rows, start=2):  # row 1 is the header
        where = f"{source}:{lineno}"
        try:
            record = _row_to_record(row, where)
        except (ValueError, TypeError) as exc:
            result.row_errors.append(f"{where}: {exc}")
            result.dropped["invalid_rows"] += 1
            LOGGER.warning("%s: %s", where, exc)
            continue
        if record is None:
            result.dropped["no_audiogram"] += 1
            continue
        if not record.speech:
            result.dropped["no_speech_points"] += 1
            continue
        raw_records.append(record)
    if not raw_records and not result.row_errors and not result.dropped:
        raise DataError(f"{source}: no data rows")
    result.records = _collapse_sessions(raw_records, result.dropped)
    return result


def ingest_csv(path: str | Path) -> IngestResult:
    """Read the delimited input schema; returns records plus drop counters."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        extra = [c for c in reader.fieldnames if c not in REQUIRED_COLUMNS]
        if extra:
            LOGGER.warning("%s: ignoring columns %s", path, extra)
        return _ingest_rows(reader, str(path))


def ingest_json(path: str | Path) -> IngestResult:
    """Read the JSON mirror of the schema: a list of row objects."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise DataError(f"{path}: expected a list of row objects")
    if not payload:
        raise DataError(f"{path}: no data rows")
    rows = [
        {key: None if value is None else str(value) for key, value in row.items()}
        for row in payload
    ]
    return _ingest_rows(rows, str(path))
