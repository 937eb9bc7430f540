"""srtkit: speech recognition threshold estimation from incomplete data.

Clinical word recognition tests often stop before the 50% point of the
recognition curve is bracketed. This package categorizes such measurements
by how well they determine the curve slope, estimates the speech
recognition threshold with an empirical line fit, an SII-model-based
fixed-slope fit, or a normal-hearing-slope upper bound, propagates
measurement uncertainty through each, and splits the resulting threshold
elevation into audibility and distortion components. A protocol simulator
with known ground truth validates the whole chain.
"""

from .clinical import (
    Audiogram,
    Category,
    CategoryResult,
    PatientRecord,
    SpeechPoint,
    better_ear,
    categorize,
    compute_pta,
    impute_audiogram,
    ingest_csv,
    ingest_json,
    prepare_record,
)
from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, SrtkitError
from .estimators import (
    SrtEstimate,
    estimate_empirical,
    estimate_nh_slope,
    estimate_sii_slope,
    plomp_components,
    select_anchor,
)
from .pipeline import (
    PipelineResult,
    run_pipeline,
    validate_cohort,
    write_reports,
    write_validation_report,
)
from .psychometric import (
    PsychometricFunction,
    fit_line,
    invert_nh_logistic,
    line_to_srt,
)
from .sii import (
    SiiCurve,
    SiiParameters,
    compute_sii,
    convert_slope,
    find_linear_range,
    load_sii_parameters,
)
from .simulate import (
    BISGAARD_CLASSES,
    SimulatedPatient,
    generate_cohort,
    simulate_cohort,
    simulate_protocol,
)
from .stats import GlmFit, glm_cv, ks_test, overlapping_index, welch_test
from .uncertainty import (
    WrsConfidenceTable,
    binomial_confidence_table,
    delta_d,
    delta_slope_empirical,
    delta_slope_sii,
    delta_srt,
    wrs_ci,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Audiogram",
    "BISGAARD_CLASSES",
    "Category",
    "CategoryResult",
    "ConfigError",
    "DataError",
    "GlmFit",
    "PatientRecord",
    "PipelineConfig",
    "PipelineResult",
    "PsychometricFunction",
    "SiiCurve",
    "SiiParameters",
    "SimulatedPatient",
    "SpeechPoint",
    "SrtEstimate",
    "SrtkitError",
    "WrsConfidenceTable",
    "better_ear",
    "binomial_confidence_table",
    "categorize",
    "compute_pta",
    "compute_sii",
    "convert_slope",
    "delta_d",
    "delta_slope_empirical",
    "delta_slope_sii",
    "delta_srt",
    "estimate_empirical",
    "estimate_nh_slope",
    "estimate_sii_slope",
    "find_linear_range",
    "fit_line",
    "generate_cohort",
    "glm_cv",
    "impute_audiogram",
    "ingest_csv",
    "ingest_json",
    "invert_nh_logistic",
    "ks_test",
    "line_to_srt",
    "load_config",
    "load_sii_parameters",
    "overlapping_index",
    "plomp_components",
    "prepare_record",
    "run_pipeline",
    "select_anchor",
    "simulate_cohort",
    "simulate_protocol",
    "validate_cohort",
    "welch_test",
    "write_reports",
    "write_validation_report",
    "wrs_ci",
]
