"""Batch pipeline: records in, estimate and report files out.

Stages run in fixed order: ingest, audiogram preparation, better ear
selection, slope categorization, SII slopes for the patients that need
them (deduplicated by audiogram, optionally in parallel), the three
estimation procedures, then population statistics and report writing.
Every aggregation iterates patients in sorted id order and formats floats
through one helper, so reruns and parallel runs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .clinical import (
    Category,
    CategoryResult,
    PatientRecord,
    better_ear,
    categorize,
    deduplicate_audiograms,
    ingest_csv,
    ingest_json,
    prepare_record,
)
from .config import PipelineConfig
from .errors import DataError, SrtkitError
from .estimators import (
    PROCEDURE_EMPIRICAL,
    PROCEDURE_NH_SLOPE,
    PROCEDURE_SII_SLOPE,
    SrtEstimate,
    estimate_empirical,
    estimate_nh_slope,
    estimate_sii_slope,
    procedures_for,
    select_anchor,
)
from .sii import (
    DegenerateSiiError,
    SiiParameters,
    band_thresholds,
    convert_slope,
    find_linear_range,
    load_sii_parameters,
)
from .simulate import SimulatedPatient
from .stats import GlmFit, glm_cv, ks_test, overlapping_index, welch_test
from .uncertainty import (
    WrsConfidenceTable,
    binomial_confidence_table,
    delta_slope_sii,
    delta_slope_sii_corrected,
    load_confidence_table,
)

LOGGER = logging.getLogger(__name__)

__all__ = [
    "SiiSlopeInfo",
    "PatientResult",
    "PipelineResult",
    "run_pipeline",
    "write_reports",
    "percentile_series",
    "validate_cohort",
    "write_validation_report",
]

_PROCEDURE_ORDER = (PROCEDURE_EMPIRICAL, PROCEDURE_SII_SLOPE, PROCEDURE_NH_SLOPE)


@dataclass(frozen=True)
class SiiSlopeInfo:
    """Outcome of the SII slope derivation for one audiogram."""

    slope_pct_per_db: float | None
    slope_sii_per_db: float | None
    r_squared: float | None
    converged: bool
    level_span_db: float | None
    failed: bool


@dataclass(frozen=True)
class PatientResult:
    record: PatientRecord
    category: CategoryResult
    sii: SiiSlopeInfo | None
    estimates: tuple[SrtEstimate, ...]


@dataclass
class PipelineResult:
    patients: list[PatientResult]
    counts: dict[str, Any]
    stats_rows: list[dict[str, Any]]
    glm: GlmFit | None
    config: PipelineConfig


def _curve_task(
    args: tuple[tuple[float, ...], SiiParameters, tuple[float, ...], float, float]
) -> tuple[float | None, float | None, bool, float | None, bool]:
    """Worker: linear range search for one unique audiogram."""
    thresholds, params, coarse, r2_threshold, resolution = args
    try:
        curve = find_linear_range(
            band_thresholds(np.asarray(thresholds), params),
            params,
            coarse_levels=coarse,
            r2_threshold=r2_threshold,
            level_resolution_db=resolution,
        )
    except DegenerateSiiError:
        return None, None, False, None, True
    return curve.slope_per_db, curve.r_squared, curve.converged, curve.level_span(), False


def _compute_sii_slopes(
    records: Sequence[PatientRecord],
    needs_sii: Sequence[int],
    config: PipelineConfig,
    params: SiiParameters,
) -> dict[tuple[float, ...], SiiSlopeInfo]:
    """One linear-range search per unique audiogram among the given indices."""
    groups = deduplicate_audiograms([records[i] for i in needs_sii])
    keys = sorted(groups)
    tasks = [
        (key, params, tuple(config.sii_coarse_levels), config.sii_r2_threshold,
         config.sii_level_resolution_db)
        for key in keys
    ]
    if config.workers > 1 and len(tasks) > 1:
        chunksize = max(1, len(tasks) // (config.workers * 8))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            raw = list(pool.map(_curve_task, tasks, chunksize=chunksize))
    else:
        raw = [_curve_task(task) for task in tasks]

    out: dict[tuple[float, ...], SiiSlopeInfo] = {}
    for key, (slope_sii, r2, converged, span, failed) in zip(keys, raw):
        if failed or slope_sii is None or slope_sii <= 0.0:
            out[key] = SiiSlopeInfo(None, slope_sii, r2, converged, span, True)
            continue
        out[key] = SiiSlopeInfo(
            slope_pct_per_db=convert_slope(
                slope_sii, config.nh_wrs_slope, config.nh_sii_slope
            ),
            slope_sii_per_db=slope_sii,
            r_squared=r2,
            converged=converged,
            level_span_db=span,
            failed=False,
        )
    return out


def _sii_slope_error(config: PipelineConfig, info: SiiSlopeInfo) -> float:
    if config.corrected_sii_slope_error and info.level_span_db:
        return delta_slope_sii_corrected(
            config.sii_repeatability,
            info.level_span_db,
            config.nh_wrs_slope,
            config.nh_sii_slope,
        )
    return delta_slope_sii(config.sii_repeatability)


def _estimate_patient(
    record: PatientRecord,
    category: CategoryResult,
    sii: SiiSlopeInfo | None,
    config: PipelineConfig,
    ci_table: WrsConfidenceTable,
) -> tuple[SrtEstimate, ...]:
    pta_spl = record.pta_spl
    assert pta_spl is not None
    shared = dict(
        srt_reference_spl=config.srt_reference_spl,
        audibility_margin_db=config.audibility_margin_db,
        d_pta_db=config.pta_repeatability_db,
    )
    estimates: list[SrtEstimate] = []
    for procedure in procedures_for(category.category):
        if procedure == PROCEDURE_EMPIRICAL:
            estimates.append(
                estimate_empirical(category.slope_area, pta_spl, ci_table, **shared)
            )
        elif procedure == PROCEDURE_SII_SLOPE:
            if category.category is Category.HALF_DETERMINED:
                anchor, fallback = category.slope_area[0], False
            else:
                anchor, fallback = select_anchor(
                    category.slope_area, pta_spl, config.audibility_margin_db
                )
            if sii is None or sii.failed or sii.slope_pct_per_db is None:
                slope_h, d_slope_h = float("nan"), float("nan")
            else:
                slope_h = sii.slope_pct_per_db
                d_slope_h = _sii_slope_error(config, sii)
            estimates.append(
                estimate_sii_slope(
                    anchor,
                    slope_h,
                    d_slope_h,
                    pta_spl,
                    ci_table,
                    anchor_fallback=fallback,
                    **shared,
                )
            )
        else:
            estimates.append(
                estimate_nh_slope(
                    category.wrs_max_point,
                    pta_spl,
                    nh_wrs_slope=config.nh_wrs_slope,
                    wrs_boundary_clamp=config.wrs_boundary_clamp,
                    **shared,
                )
            )
    return tuple(estimates)


def _confidence_table(config: PipelineConfig) -> WrsConfidenceTable:
    if config.ci_table_path:
        return load_confidence_table(config.ci_table_path, config.n_test_words)
    return binomial_confidence_table(config.n_test_words, config.ci_confidence)


def run_pipeline(
    config: PipelineConfig,
    *,
    records: Sequence[PatientRecord] | None = None,
    input_path: str | Path | None = None,
    input_format: str = "csv",
) -> PipelineResult:
    """Run every stage on ingested or directly supplied records."""
    config.validate()
    counts: dict[str, Any] = {}

    if records is None:
        if input_path is None:
            raise DataError("run_pipeline needs an input path or records")
        ingest = ingest_csv(input_path) if input_format == "csv" else ingest_json(input_path)
        counts["dropped"] = dict(sorted(ingest.dropped.items()))
        counts["row_errors"] = len(ingest.row_errors)
        for message in ingest.row_errors[:20]:
            LOGGER.warning("ingest: %s", message)
        source_records: list[PatientRecord] = ingest.records
    else:
        counts["dropped"] = {}
        counts["row_errors"] = 0
        source_records = list(records)
    counts["input_records"] = len(source_records)

    pta_offset = config.pta_offset_db()
    prepared = [
        record if record.pta_spl is not None else prepare_record(record, pta_offset)
        for record in source_records
    ]

    by_patient: dict[str, list[PatientRecord]] = {}
    for record in prepared:
        by_patient.setdefault(record.patient_id, []).append(record)
    chosen = [
        better_ear(ears, config.better_ear_tie_break)
        for _, ears in sorted(by_patient.items())
    ]
    counts["patients"] = len(chosen)

    categories = [
        categorize(
            record.speech,
            no_estimation_floor=config.no_estimation_floor,
            slope_area_low=config.slope_area_low,
            slope_area_high=config.slope_area_high,
        )
        for record in chosen
    ]
    category_counts = {c.value: 0 for c in Category}
    for result in categories:
        category_counts[result.category.value] += 1
    counts["categories"] = category_counts
    if sum(category_counts.values()) != len(chosen):
        raise SrtkitError("patient conservation violated at categorization")

    needs_sii = [
        i
        for i, result in enumerate(categories)
        if result.category in (Category.FULLY_DETERMINED, Category.HALF_DETERMINED)
    ]
    params = load_sii_parameters(config)
    slope_map = _compute_sii_slopes(chosen, needs_sii, config, params)
    counts["sii"] = {
        "patients_needing_slope": len(needs_sii),
        "unique_audiograms": len(slope_map),
        "degenerate_curves": sum(1 for info in slope_map.values() if info.failed),
    }

    ci_table = _confidence_table(config)
    needs_set = set(needs_sii)
    patients: list[PatientResult] = []
    for i, (record, category) in enumerate(zip(chosen, categories)):
        sii_info = slope_map.get(record.audiogram.key()) if i in needs_set else None
        estimates = _estimate_patient(record, category, sii_info, config, ci_table)
        patients.append(
            PatientResult(record=record, category=category, sii=sii_info, estimates=estimates)
        )

    expected_rows = (
        2 * category_counts[Category.FULLY_DETERMINED.value]
        + category_counts[Category.HALF_DETERMINED.value]
        + category_counts[Category.UNDETERMINED.value]
    )
    actual_rows = sum(len(p.estimates) for p in patients)
    if actual_rows != expected_rows:
        raise SrtkitError("estimate rows do not reconcile with category counts")
    by_procedure: dict[str, int] = {name: 0 for name in _PROCEDURE_ORDER}
    excluded: dict[str, int] = {}
    for patient in patients:
        for estimate in patient.estimates:
            by_procedure[estimate.procedure] += 1
            if estimate.excluded and estimate.exclusion_reason:
                excluded[estimate.exclusion_reason] = (
                    excluded.get(estimate.exclusion_reason, 0) + 1
                )
    counts["estimates"] = {
        "rows": actual_rows,
        "by_procedure": by_procedure,
        "excluded_by_reason": dict(sorted(excluded.items())),
    }

    stats_rows = _group_statistics(patients, config)
    glm, glm_rows = _fit_glm(patients, config)
    counts["glm_rows"] = glm_rows
    return PipelineResult(
        patients=patients, counts=counts, stats_rows=stats_rows, glm=glm, config=config
    )


def _group_statistics(
    patients: Sequence[PatientResult], config: PipelineConfig
) -> list[dict[str, Any]]:
    """Compare fully and half determined groups on PTA and maximum score."""
    groups: dict[Category, list[PatientResult]] = {
        Category.FULLY_DETERMINED: [],
        Category.HALF_DETERMINED: [],
    }
    for patient in patients:
        if patient.category.category in groups:
            groups[patient.category.category].append(patient)
    fully = groups[Category.FULLY_DETERMINED]
    half = groups[Category.HALF_DETERMINED]

    variables = {
        "pta_spl": (
            [p.record.pta_spl for p in fully],
            [p.record.pta_spl for p in half],
            config.pta_bin_db,
        ),
        "wrs_max": (
            [p.category.wrs_max for p in fully],
            [p.category.wrs_max for p in half],
            config.discrimination_bin_pct,
        ),
    }
    rows: list[dict[str, Any]] = []
    for name, (x, y, bin_width) in variables.items():
        row: dict[str, Any] = {
            "variable": name,
            "overlap_eta": None,
            "welch_t": None,
            "welch_df": None,
            "p_mean": None,
            "ks_d": None,
            "p_dist": None,
            "n_fully": len(x),
            "n_half": len(y),
        }
        try:
            row["overlap_eta"] = overlapping_index(x, y, bin_width)
            t_stat, df, p_mean = welch_test(x, y)
            row.update(welch_t=t_stat, welch_df=df, p_mean=p_mean)
            d, p_dist = ks_test(x, y)
            row.update(ks_d=d, p_dist=p_dist)
        except ValueError as exc:
            LOGGER.warning("statistics for %s not computable: %s", name, exc)
        rows.append(row)
    return rows


def _fit_glm(
    patients: Sequence[PatientResult], config: PipelineConfig
) -> tuple[GlmFit | None, int]:
    """Regress the empirical-minus-SII threshold difference on its drivers."""
    rows: list[tuple[float, float, float]] = []
    for patient in patients:
        if patient.category.category is not Category.FULLY_DETERMINED:
            continue
        by_name = {e.procedure: e for e in patient.estimates}
        emp = by_name.get(PROCEDURE_EMPIRICAL)
        sii = by_name.get(PROCEDURE_SII_SLOPE)
        if not emp or not sii or emp.excluded or sii.excluded:
            continue
        if emp.srt is None or sii.srt is None or sii.anchor is None:
            continue
        rows.append(
            (emp.srt - sii.srt, sii.slope_used or 0.0, sii.anchor.wrs - 50.0)
        )
    if len(rows) < max(config.glm_folds, 10):
        return None, len(rows)
    try:
        return glm_cv(rows, folds=config.glm_folds, seed=config.seed), len(rows)
    except ValueError as exc:
        LOGGER.warning("GLM not fitted: %s", exc)
        return None, len(rows)


def percentile_series(
    values_by_bin: dict[float, list[float]], percentiles: Sequence[float]
) -> list[tuple[float, list[float], int]]:
    """Per-bin percentile rows (bin, percentile values, count), bins sorted."""
    rows: list[tuple[float, list[float], int]] = []
    for bin_left in sorted(values_by_bin):
        values = values_by_bin[bin_left]
        if not values:
            continue
        levels = np.percentile(np.asarray(values, dtype=float), list(percentiles))
        rows.append((bin_left, [float(v) for v in levels], len(values)))
    return rows


def _fmt(value: Any) -> str:
    """One float formatting policy so report bytes are reproducible."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.10g}"
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _bin_left(value: float, width: float) -> float:
    return math.floor(value / width) * width


ESTIMATES_HEADER = (
    "patient_id",
    "ear",
    "category",
    "procedure",
    "srt_db_spl",
    "slope_pct_per_db",
    "delta_srt_db",
    "anchor_level_db_spl",
    "anchor_wrs_pct",
    "anchor_fallback",
    "plomp_a_db",
    "plomp_d_db",
    "delta_d_db",
    "pta_hl_db",
    "pta_spl_db",
    "wrs_max_pct",
    "sii_slope_per_db",
    "sii_r_squared",
    "excluded",
    "exclusion_reason",
)


def _estimate_rows(patients: Sequence[PatientResult]) -> Iterable[Sequence[Any]]:
    for patient in patients:
        record = patient.record
        for estimate in patient.estimates:
            anchor = estimate.anchor
            yield (
                record.patient_id,
                record.ear,
                patient.category.category.value,
                estimate.procedure,
                estimate.srt,
                estimate.slope_used,
                estimate.delta_srt,
                anchor.level if anchor else None,
                anchor.wrs if anchor else None,
                estimate.anchor_fallback,
                estimate.plomp_a,
                estimate.plomp_d,
                estimate.delta_d,
                record.pta_hl,
                record.pta_spl,
                patient.category.wrs_max,
                patient.sii.slope_sii_per_db if patient.sii else None,
                patient.sii.r_squared if patient.sii else None,
                estimate.excluded,
                estimate.exclusion_reason or "",
            )


def _population_rows(
    patients: Sequence[PatientResult], config: PipelineConfig
) -> Iterable[Sequence[Any]]:
    order = [c.value for c in Category]
    counts = {name: 0 for name in order}
    grid: dict[tuple[float, float], int] = {}
    for patient in patients:
        counts[patient.category.category.value] += 1
        key = (
            patient.category.wrs_max,
            _bin_left(patient.record.pta_spl, config.pta_bin_db),
        )
        grid[key] = grid.get(key, 0) + 1
    for name in order:
        yield ("category", name, None, None, counts[name])
    yield ("category", "total", None, None, len(patients))
    for (wrs_max, pta_bin) in sorted(grid):
        yield ("grid", "", wrs_max, pta_bin, grid[(wrs_max, pta_bin)])


def aggregate_srt_loss_grid(
    patients: Sequence[PatientResult], config: PipelineConfig, procedure: str
) -> dict[tuple[float, float], int]:
    """Binned (pta, srt - reference) counts over non-excluded estimates."""
    counts: dict[tuple[float, float], int] = {}
    for patient in patients:
        for estimate in patient.estimates:
            if estimate.procedure != procedure or estimate.excluded:
                continue
            if estimate.srt is None:
                continue
            key = (
                _bin_left(patient.record.pta_spl, config.pta_bin_db),
                _bin_left(estimate.srt - config.srt_reference_spl, config.srt_loss_bin_db),
            )
            counts[key] = counts.get(key, 0) + 1
    return counts


def aggregate_distortion_by_discrimination(
    patients: Sequence[PatientResult], config: PipelineConfig, procedure: str
) -> dict[float, list[float]]:
    """Plomp D values grouped by binned discrimination loss (100 - WRS_max)."""
    values: dict[float, list[float]] = {}
    for patient in patients:
        for estimate in patient.estimates:
            if estimate.procedure != procedure or estimate.excluded:
                continue
            if estimate.plomp_d is None:
                continue
            bin_left = _bin_left(
                100.0 - patient.category.wrs_max, config.discrimination_bin_pct
            )
            values.setdefault(bin_left, []).append(estimate.plomp_d)
    return values


def _plotdata_files(
    patients: Sequence[PatientResult], config: PipelineConfig, plot_dir: Path
) -> list[Path]:
    written: list[Path] = []
    percent_labels = [f"p{int(p)}" for p in config.percentiles]
    for procedure in _PROCEDURE_ORDER:
        srt_counts = aggregate_srt_loss_grid(patients, config, procedure)
        if not srt_counts:
            continue
        scatter_path = plot_dir / f"srt_loss_vs_pta_{procedure}.csv"
        _write_csv(
            scatter_path,
            ("pta_spl_db", "srt_loss_db", "count"),
            ((pta, loss, n) for (pta, loss), n in sorted(srt_counts.items())),
        )
        written.append(scatter_path)
        d_by_bin = aggregate_distortion_by_discrimination(patients, config, procedure)
        series = percentile_series(d_by_bin, config.percentiles)
        series_path = plot_dir / f"d_vs_discrimination_loss_{procedure}.csv"
        _write_csv(
            series_path,
            ("discrimination_loss_pct", *percent_labels, "n"),
            ((bin_left, *values, n) for bin_left, values, n in series),
        )
        written.append(series_path)
    return written


STATS_HEADER = (
    "variable",
    "overlap_eta",
    "welch_t",
    "welch_df",
    "p_mean",
    "ks_d",
    "p_dist",
    "n_fully",
    "n_half",
)

GLM_HEADER = (
    "fold",
    "beta0",
    "se0",
    "tstat0",
    "p0",
    "beta1",
    "se1",
    "tstat1",
    "p1",
    "beta2",
    "se2",
    "tstat2",
    "p2",
    "mse",
)


def _glm_rows(glm: GlmFit) -> Iterable[Sequence[Any]]:
    for fold in glm.folds:
        yield (
            fold.fold,
            fold.beta[0], fold.se[0], fold.tstat[0], fold.p[0],
            fold.beta[1], fold.se[1], fold.tstat[1], fold.p[1],
            fold.beta[2], fold.se[2], fold.tstat[2], fold.p[2],
            fold.mse,
        )
    mean_mse = sum(f.mse for f in glm.folds) / len(glm.folds)
    yield (
        "mean",
        glm.mean_beta[0], glm.mean_se[0], glm.mean_tstat[0], glm.mean_p[0],
        glm.mean_beta[1], glm.mean_se[1], glm.mean_tstat[1], glm.mean_p[1],
        glm.mean_beta[2], glm.mean_se[2], glm.mean_tstat[2], glm.mean_p[2],
        mean_mse,
    )


def write_reports(result: PipelineResult, out_dir: str | Path) -> list[Path]:
    """Write every report file; returns the paths written."""
    config = result.config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plot_dir = out / "plotdata"
    plot_dir.mkdir(exist_ok=True)
    written: list[Path] = []

    estimates_path = out / "estimates.csv"
    _write_csv(estimates_path, ESTIMATES_HEADER, _estimate_rows(result.patients))
    written.append(estimates_path)

    population_path = out / "population.csv"
    _write_csv(
        population_path,
        ("section", "category", "wrs_max_pct", "pta_spl_db", "count"),
        _population_rows(result.patients, config),
    )
    written.append(population_path)

    stats_path = out / "stats.csv"
    _write_csv(
        stats_path,
        STATS_HEADER,
        ([row[name] for name in STATS_HEADER] for row in result.stats_rows),
    )
    written.append(stats_path)
    stats_json_path = out / "stats.json"
    stats_json_path.write_text(
        json.dumps(
            [
                {key: row[key] for key in STATS_HEADER}
                for row in result.stats_rows
            ],
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    written.append(stats_json_path)

    if result.glm is not None:
        glm_path = out / "glm.csv"
        _write_csv(glm_path, GLM_HEADER, _glm_rows(result.glm))
        written.append(glm_path)

    written.extend(_plotdata_files(result.patients, config, plot_dir))

    if config.render_figures:
        from . import figures

        written.extend(figures.render_all(result, out / "figures"))

    manifest = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "counts": result.counts,
        "glm": None
        if result.glm is None
        else {
            "rmse_cv": result.glm.rmse_cv,
            "pearson_r": result.glm.pearson_r,
            "rmse": result.glm.rmse,
            "bias": result.glm.bias,
            "condition_number": result.glm.condition_number,
            "mean_beta": list(result.glm.mean_beta),
        },
        "reports": sorted(str(p.relative_to(out)) for p in written),
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(manifest_path)
    return written


VALIDATION_HEADER = (
    "section",
    "label",
    "n",
    "n_excluded",
    "n_with_truth",
    "bias_db",
    "rmse_db",
    "coverage",
    "median_delta_srt_db",
)


def validate_cohort(
    simulated: Sequence[SimulatedPatient], result: PipelineResult
) -> list[dict[str, Any]]:
    """Score pipeline estimates against simulator ground truth.

    Bias, RMSE, and interval coverage are computed against the true 50%
    crossing, over non-excluded estimates of patients whose true curve
    actually crosses 50%.
    """
    truth_by_id = {p.patient_id: p for p in simulated}
    rows: list[dict[str, Any]] = []
    for procedure in _PROCEDURE_ORDER:
        errors: list[float] = []
        covered = 0
        n_total = 0
        n_excluded = 0
        deltas: list[float] = []
        for patient in result.patients:
            for estimate in patient.estimates:
                if estimate.procedure != procedure:
                    continue
                n_total += 1
                if estimate.excluded or estimate.srt is None:
                    n_excluded += 1
                    continue
                if estimate.delta_srt is not None:
                    deltas.append(estimate.delta_srt)
                truth = truth_by_id.get(patient.record.patient_id)
                srt50 = truth.truth_srt50() if truth else None
                if srt50 is None:
                    continue
                error = estimate.srt - srt50
                errors.append(error)
                if estimate.delta_srt is not None and abs(error) <= estimate.delta_srt:
                    covered += 1
        if n_total == 0:
            continue
        arr = np.asarray(errors)
        rows.append(
            {
                "section": "procedure",
                "label": procedure,
                "n": n_total,
                "n_excluded": n_excluded,
                "n_with_truth": len(errors),
                "bias_db": float(arr.mean()) if arr.size else None,
                "rmse_db": float(np.sqrt(np.mean(arr**2))) if arr.size else None,
                "coverage": covered / arr.size if arr.size else None,
                "median_delta_srt_db": float(np.median(deltas)) if deltas else None,
            }
        )
    for name, count in result.counts["categories"].items():
        rows.append(
            {
                "section": "category",
                "label": name,
                "n": count,
                "n_excluded": None,
                "n_with_truth": None,
                "bias_db": None,
                "rmse_db": None,
                "coverage": None,
                "median_delta_srt_db": None,
            }
        )
    return rows


def write_validation_report(rows: Sequence[dict[str, Any]], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "validation.csv"
    _write_csv(
        path,
        VALIDATION_HEADER,
        ([row[name] for name in VALIDATION_HEADER] for row in rows),
    )
    return path
