"""Command line entry points.

Subcommands:
  run            ingest a clinical export and write the full report set
  simulate       write a synthetic cohort in the ingestion CSV schema
  calibrate-sii  report the zero-audiogram SII slope and calibration gain
  validate       simulate, estimate, and score estimates against the truth

All failures exit non-zero (2 configuration, 3 data, 4 internal) and leave
a machine readable ``error.json`` next to the requested output.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from .clinical import REQUIRED_COLUMNS, SPEECH_LEVELS
from .config import AUDIOGRAM_FREQUENCIES_HZ, PipelineConfig, load_config
from .errors import ConfigError, DataError, SrtkitError
from .pipeline import (
    run_pipeline,
    validate_cohort,
    write_reports,
    write_validation_report,
)
from .sii import band_thresholds, find_linear_range, load_sii_parameters
from .simulate import simulate_cohort

LOGGER = logging.getLogger(__name__)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = _parse_overrides(getattr(args, "set", []) or [])
    for name in ("seed", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = str(value)
    if getattr(args, "no_figures", False):
        overrides["render_figures"] = "false"
    noise = getattr(args, "noise", None)
    if noise is not None:
        overrides["sim_noise"] = noise
    jitter = getattr(args, "jitter", None)
    if jitter is not None:
        overrides["sim_jitter_db"] = str(jitter)
    config = load_config(getattr(args, "config", None), overrides)
    config.validate()
    return config


def _write_error(out_dir: Path | None, exc: BaseException, exit_code: int) -> None:
    payload = {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": exit_code,
    }
    target = (out_dir or Path.cwd()) / "error.json"
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError:  # the error report must never mask the original failure
        LOGGER.error("could not write error report to %s", target)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args)
    result = run_pipeline(
        config, input_path=args.input, input_format=args.format
    )
    written = write_reports(result, args.out)
    print(f"wrote {len(written)} report files to {args.out}")
    for name, count in result.counts["categories"].items():
        print(f"  {name}: {count}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    patients, records = simulate_cohort(args.n, config, seed=config.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(REQUIRED_COLUMNS)
        for record in records:
            scores = {p.level: p.wrs for p in record.speech}
            writer.writerow(
                [
                    record.patient_id,
                    record.ear,
                    record.gender,
                    record.age,
                    record.test_date,
                ]
                + [f"{t:g}" for t in record.audiogram.thresholds]
                + [
                    f"{scores[level]:g}" if level in scores else ""
                    for level in SPEECH_LEVELS
                ]
            )
    print(f"wrote {len(records)} simulated patients to {out}")
    if args.truth_out:
        truth_path = Path(args.truth_out)
        truth_path.parent.mkdir(parents=True, exist_ok=True)
        with truth_path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(
                (
                    "id",
                    "bisgaard_class",
                    "pta_spl_db",
                    "srt_mid_db_spl",
                    "srt50_db_spl",
                    "slope_pct_per_db",
                    "wrs_max_pct",
                )
            )
            for patient in patients:
                srt50 = patient.truth_srt50()
                writer.writerow(
                    (
                        patient.patient_id,
                        patient.bisgaard_class,
                        f"{patient.pta_spl:.10g}",
                        f"{patient.truth.srt:.10g}",
                        "" if srt50 is None else f"{srt50:.10g}",
                        f"{patient.truth.slope:.10g}",
                        f"{patient.truth.wrs_max:g}",
                    )
                )
        print(f"wrote ground truth to {truth_path}")
    return EXIT_OK


def _cmd_calibrate_sii(args: argparse.Namespace) -> int:
    config = _build_config(args)
    zeros = np.zeros(len(AUDIOGRAM_FREQUENCIES_HZ))

    def slope_report(cfg: PipelineConfig) -> dict[str, float | bool]:
        params = load_sii_parameters(cfg)
        curve = find_linear_range(
            band_thresholds(zeros, params),
            params,
            coarse_levels=cfg.sii_coarse_levels,
            r2_threshold=cfg.sii_r2_threshold,
            level_resolution_db=cfg.sii_level_resolution_db,
        )
        return {
            "slope_per_db": curve.slope_per_db,
            "r_squared": curve.r_squared,
            "converged": curve.converged,
        }

    payload = {
        "target_slope_per_db": config.nh_sii_slope,
        "default_spectrum": slope_report(
            dataclasses.replace(config, sii_calibration=False)
        ),
        "calibrated": slope_report(dataclasses.replace(config, sii_calibration=True)),
    }
    calibrated_params = load_sii_parameters(
        dataclasses.replace(config, sii_calibration=True)
    )
    payload["calibration_gain_db_per_db"] = calibrated_params.calibration_gain
    payload["calibration_offset_db"] = calibrated_params.calibration_offset
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    patients, records = simulate_cohort(args.n, config, seed=config.seed)
    result = run_pipeline(config, records=records)
    rows = validate_cohort(patients, result)
    out_dir = Path(args.out)
    write_reports(result, out_dir)
    path = write_validation_report(rows, out_dir)
    print(f"wrote validation report to {path}")
    for row in rows:
        if row["section"] != "procedure":
            continue
        median = row["median_delta_srt_db"]
        coverage = row["coverage"]
        print(
            f"  {row['label']}: n={row['n']}"
            f" median_delta_srt={'n/a' if median is None else f'{median:.2f} dB'}"
            f" coverage={'n/a' if coverage is None else f'{coverage:.3f}'}"
        )
    return EXIT_OK


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="plain-text key=value config file")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one config entry (repeatable)",
    )
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--workers", type=int, help="parallel worker count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srtkit",
        description="Estimate speech recognition thresholds from incomplete "
        "clinical word recognition data.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress details")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline on a clinical export")
    run.add_argument("--input", required=True, help="input CSV or JSON file")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--out", required=True, help="report output directory")
    run.add_argument(
        "--no-figures", action="store_true", help="skip rendering PNG figures"
    )
    _add_config_options(run)
    run.set_defaults(handler=_cmd_run)

    sim = sub.add_parser("simulate", help="write a synthetic cohort CSV")
    sim.add_argument("--n", type=int, required=True, help="number of patients")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--noise", choices=("binomial", "none"), help="score noise model")
    sim.add_argument("--jitter", type=float, help="audiogram jitter in dB")
    sim.add_argument("--truth-out", help="also write ground-truth parameters here")
    _add_config_options(sim)
    sim.set_defaults(handler=_cmd_simulate)

    cal = sub.add_parser(
        "calibrate-sii", help="report zero-audiogram SII slopes and calibration"
    )
    cal.add_argument("--out", help="also write the JSON report to this file")
    _add_config_options(cal)
    cal.set_defaults(handler=_cmd_calibrate_sii)

    val = sub.add_parser(
        "validate", help="simulate a cohort and score the estimators against truth"
    )
    val.add_argument("--n", type=int, required=True, help="number of patients")
    val.add_argument("--out", required=True, help="report output directory")
    val.add_argument("--noise", choices=("binomial", "none"), help="score noise model")
    val.add_argument("--jitter", type=float, help="audiogram jitter in dB")
    val.add_argument(
        "--no-figures", action="store_true", help="skip rendering PNG figures"
    )
    _add_config_options(val)
    val.set_defaults(handler=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    out_dir: Path | None = None
    raw_out = getattr(args, "out", None)
    if raw_out and args.command in ("run", "validate"):
        out_dir = Path(raw_out)
    try:
        return args.handler(args)
    except ConfigError as exc:
        LOGGER.error("configuration error: %s", exc)
        _write_error(out_dir, exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except DataError as exc:
        LOGGER.error("data error: %s", exc)
        _write_error(out_dir, exc, EXIT_DATA)
        return EXIT_DATA
    except SrtkitError as exc:
        LOGGER.error("pipeline error: %s", exc)
        _write_error(out_dir, exc, EXIT_INTERNAL)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports everything
        LOGGER.error("internal error:\n%s", traceback.format_exc())
        _write_error(out_dir, exc, EXIT_INTERNAL)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
