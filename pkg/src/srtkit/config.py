"""Run configuration: defaults, plain-text config files, canonical hashing.

The config file format is deliberately simple: one ``key = value`` pair per
line, ``#`` starts a comment, blank lines are ignored. Keys mirror the field
names of :class:`PipelineConfig`. Tuple-valued fields take comma separated
numbers, the audiometric offset table takes ``frequency:dB`` pairs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

__all__ = [
    "AUDIOGRAM_FREQUENCIES_HZ",
    "PTA_FREQUENCIES_HZ",
    "DEFAULT_HL_TO_SPL_DB",
    "PipelineConfig",
    "load_config",
]

# The nine audiometric frequencies carried by every record, in Hz.
AUDIOGRAM_FREQUENCIES_HZ: tuple[int, ...] = (
    250, 500, 1000, 1500, 2000, 3000, 4000, 6000, 8000,
)

# Frequencies entering the pure tone average.
PTA_FREQUENCIES_HZ: tuple[int, ...] = (500, 1000, 2000, 4000)

# Hearing level to sound pressure level offsets in dB, per frequency.
# Default values follow the reference equivalent threshold levels of a
# circumaural audiometric headphone (ISO 389-8 style table); replace through
# the config file when a different transducer reference applies.
DEFAULT_HL_TO_SPL_DB: dict[int, float] = {
    250: 18.0,
    500: 11.0,
    1000: 5.5,
    1500: 5.5,
    2000: 4.5,
    3000: 2.5,
    4000: 9.5,
    6000: 17.0,
    8000: 17.5,
}


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the estimation pipeline, with working defaults."""

    # Reference constants for a monosyllabic word test in quiet.
    srt_reference_spl: float = 29.3     # normal hearing SRT, dB SPL
    nh_wrs_slope: float = 4.5           # normal hearing WRS slope, %/dB
    nh_sii_slope: float = 0.0307        # normal hearing SII slope, 1/dB
    sii_repeatability: float = 0.00084  # test-retest SII uncertainty
    pta_repeatability_db: float = 5.0   # test-retest PTA uncertainty, dB

    # Clinical data handling.
    hl_to_spl_offsets: dict[int, float] = field(
        default_factory=lambda: dict(DEFAULT_HL_TO_SPL_DB)
    )
    no_estimation_floor: float = 10.0   # WRS_max below this: no estimation, %
    better_ear_tie_break: str = "right"
    n_test_words: int = 20
    ci_confidence: float = 0.95
    ci_table_path: str | None = None    # external WRS confidence table (CSV)

    # Slope area and anchor selection.
    slope_area_low: float = 0.15        # fraction of WRS_max
    slope_area_high: float = 0.85
    audibility_margin_db: float = 10.0  # anchor must satisfy level >= PTA - margin
    wrs_boundary_clamp: float = 2.5     # 0% and 100% move this far inside, %
    corrected_sii_slope_error: bool = False

    # SII model.
    sii_band_table: str | None = None   # packaged default when None
    sii_importance: str = "spin"        # "spin" or "flat"
    sii_noise_level_spl: float = -50.0  # masker overall level (quiet condition)
    sii_level_distortion: bool = True
    sii_calibration: bool = False
    sii_coarse_levels: tuple[float, ...] = (10.0, 40.0, 70.0, 100.0)
    sii_r2_threshold: float = 0.99
    sii_level_resolution_db: float = 0.5

    # Measurement protocol simulation.
    sim_levels: tuple[float, ...] = (60.0, 80.0, 100.0, 110.0)
    sim_srt_offset_range: tuple[float, float] = (-5.0, 25.0)
    sim_slope_range: tuple[float, float] = (1.0, 6.0)
    sim_wrs_max_range: tuple[float, float] = (50.0, 100.0)
    sim_jitter_db: float = 5.0
    sim_jitter_step_db: float = 5.0
    sim_noise: str = "binomial"         # "binomial" or "none"
    sim_stop_increment: float = 5.0
    sim_stop_rule: str = "plateau"      # "plateau" or "ceiling_only"

    # Reporting pipeline.
    workers: int = 1
    seed: int = 0
    percentiles: tuple[float, ...] = (10.0, 30.0, 50.0, 70.0, 90.0)
    pta_bin_db: float = 5.0
    srt_loss_bin_db: float = 5.0
    discrimination_bin_pct: float = 5.0
    glm_folds: int = 10
    render_figures: bool = True

    def validate(self) -> None:
        if self.better_ear_tie_break not in ("right", "left"):
            raise ConfigError(
                f"better_ear_tie_break must be 'right' or 'left', "
                f"got {self.better_ear_tie_break!r}"
            )
        if self.sim_noise not in ("binomial", "none"):
            raise ConfigError(f"sim_noise must be 'binomial' or 'none', got {self.sim_noise!r}")
        if self.sim_stop_rule not in ("plateau", "ceiling_only"):
            raise ConfigError(f"unknown sim_stop_rule {self.sim_stop_rule!r}")
        if self.sii_importance not in ("spin", "flat"):
            raise ConfigError(f"sii_importance must be 'spin' or 'flat', got {self.sii_importance!r}")
        if not 0.0 < self.slope_area_low < self.slope_area_high <= 1.0:
            raise ConfigError("slope area bounds must satisfy 0 < low < high <= 1")
        if self.n_test_words < 1:
            raise ConfigError("n_test_words must be positive")
        if not 0.0 < self.ci_confidence < 1.0:
            raise ConfigError("ci_confidence must lie strictly between 0 and 1")
        if self.glm_folds < 2:
            raise ConfigError("glm_folds must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        missing = [f for f in AUDIOGRAM_FREQUENCIES_HZ if f not in self.hl_to_spl_offsets]
        if missing:
            raise ConfigError(f"hl_to_spl_offsets missing frequencies: {missing}")

    def pta_offset_db(self) -> float:
        """Mean HL to SPL offset over the PTA frequencies."""
        return sum(self.hl_to_spl_offsets[f] for f in PTA_FREQUENCIES_HZ) / len(
            PTA_FREQUENCIES_HZ
        )

    # Execution knobs that change how results are computed, never what they
    # are; kept out of the canonical view so reruns with a different worker
    # count hash identically.
    _EXECUTION_ONLY = ("workers", "render_figures")

    def canonical_dict(self) -> dict[str, Any]:
        """JSON-serializable view with deterministic key order."""
        out: dict[str, Any] = {}
        for f_ in dataclasses.fields(self):
            if f_.name in self._EXECUTION_ONLY:
                continue
            value = getattr(self, f_.name)
            if isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, dict):
                value = {str(k): v for k, v in sorted(value.items())}
            out[f_.name] = value
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _parse_scalar(text: str, kind: type) -> Any:
    text = text.strip()
    if kind is bool:
        lowered = text.lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _parse_value(name: str, raw: str) -> Any:
    fieldinfo = _FIELD_TYPES[name]
    default = fieldinfo.default
    if name == "hl_to_spl_offsets":
        table: dict[int, float] = {}
        for chunk in raw.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            freq_text, _, db_text = chunk.partition(":")
            table[int(freq_text.strip())] = float(db_text.strip())
        return table
    if isinstance(default, tuple):
        return tuple(float(x) for x in raw.split(",") if x.strip())
    if default is None and raw.strip().lower() == "none":
        return None
    if isinstance(default, bool):
        return _parse_scalar(raw, bool)
    if isinstance(default, int):
        return _parse_scalar(raw, int)
    if isinstance(default, float):
        return _parse_scalar(raw, float)
    return raw.strip()


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Build a config from an optional file plus programmatic overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                values[key] = _parse_value(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    if overrides:
        for key, value in overrides.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            if value is None:
                continue
            try:
                values[key] = _parse_value(key, value) if isinstance(value, str) else value
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
    config = PipelineConfig(**values)
    config.validate()
    return config
