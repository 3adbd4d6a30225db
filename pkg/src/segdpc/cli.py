"""Command-line entry point: config-driven experiment runner.

Each subcommand optionally reads a JSON config file (``--config``), applies
flag overrides on top of it, and writes all outputs under one directory:
``--out`` if given, else the ``SEGDPC_OUTPUT_DIR`` environment variable, else
the working directory.  Runs are deterministic given a seed, so rerunning a
command overwrites its outputs byte-for-byte.

Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from .bench import (
    EconomicSpec,
    SweepSpec,
    _corruption_generators,
    export_results,
    run_economic,
    run_heatmaps,
    run_sweep,
    run_timing,
    run_trace,
)
from .controller import ControllerConfig, run_closed_loop
from .hankel import (
    TrajectoryLog,
    check_excitation,
    partition_training,
    required_training_length,
)
from .plant import (
    PHASE_CLOSED_LOOP,
    PHASE_TRAINING,
    ROLE_DISTURBANCE,
    ROLE_EXCITATION,
    ROLE_NOISE,
    generate_training,
    two_mass_factory,
)
from .signals import RandomHold, UniformNoise, stream_seed

__all__ = ["main", "load_config", "CONFIG_SCHEMAS", "OUTPUT_DIR_ENV"]

OUTPUT_DIR_ENV = "SEGDPC_OUTPUT_DIR"

_MODES = ["segmented", "unsegmented"]
_VARIANTS = ["disturbance", "noise", "none"]

_INT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_HORIZONS = {"type": "array", "items": _INT, "minItems": 1}

#: Documented JSON config schema per subcommand; flags override config keys.
CONFIG_SCHEMAS: dict[str, dict] = {
    "train": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "scenario": {"enum": ["two_mass"]},
            "seed": _SEED,
            "duration": _INT,
            "t_ini": _INT,
            "horizon": _INT,
            "order_bound": {"type": "integer", "minimum": 0},
            "vary": {"enum": _VARIANTS},
            "hold": {"type": "number", "exclusiveMinimum": 0},
        },
    },
    "run": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "mode": {"enum": _MODES},
            "seed": _SEED,
            "horizon": _INT,
            "vary": {"enum": _VARIANTS},
            "realization": {"type": "integer", "minimum": 0},
            "duration": _INT,
            "t_ini": _INT,
            "lambda_g": _NONNEG,
            "order_bound": {"type": "integer", "minimum": 0},
            "training_scale": {"type": "number", "minimum": 1},
            "training": {"type": "string"},
        },
    },
    "sweep": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED,
            "horizons": _HORIZONS,
            "realizations": _INT,
            "vary": {"enum": _VARIANTS},
            "duration": _INT,
            "t_ini": _INT,
            "lambda_g": _NONNEG,
            "order_bound": {"type": "integer", "minimum": 0},
            "training_scale": {"type": "number", "minimum": 1},
            "jobs": _INT,
        },
    },
    "timing": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED,
            "horizons": _HORIZONS,
            "repeats": {"type": "integer", "minimum": 3},
            "t_ini": _INT,
            "lambda_g": _NONNEG,
            "order_bound": {"type": "integer", "minimum": 0},
        },
    },
    "economic": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED,
            "horizons": _HORIZONS,
            "duration": _INT,
            "price_scale": {"type": "number", "exclusiveMinimum": 0},
            "lambda_g": _NONNEG,
            "night_price": _NONNEG,
            "day_price": _NONNEG,
            "efficiency": {"type": "number", "exclusiveMinimum": 0},
        },
    },
    "heatmap": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED,
            "t_ini": _INT,
            "horizon": _INT,
            "order_bound": {"type": "integer", "minimum": 0},
        },
    },
}


class ConfigError(ValueError):
    """A config file failed to parse or validate."""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the documented usage code is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def load_config(path: str | os.PathLike, command: str) -> dict:
    """Parse and schema-validate a JSON config file for ``command``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    try:
        jsonschema.validate(config, CONFIG_SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}: {exc.json_path}: {exc.message}") from exc
    return config


def _resolve_out(args) -> Path:
    out = args.out or os.environ.get(OUTPUT_DIR_ENV) or "."
    return Path(out)


def _settings(args, defaults: dict) -> dict:
    """Defaults, overlaid with the config file, overlaid with explicit flags."""
    merged = dict(defaults)
    if args.config is not None:
        merged.update(load_config(args.config, args.command))
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _horizons(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("horizons must be positive integers")
    return values


def _report_written(paths) -> None:
    for p in paths:
        print(f"wrote {p}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    s = _settings(args, {
        "scenario": "two_mass", "seed": 2024, "duration": 109, "t_ini": 5,
        "horizon": 40, "order_bound": 10, "vary": "none", "hold": None,
    })
    minimum = required_training_length(1, s["t_ini"], s["t_ini"], s["order_bound"])
    if s["duration"] < minimum:
        warnings.warn(
            f"duration {s['duration']} is below the shortest usable record "
            f"({minimum} samples); the record is written anyway", stacklevel=2)
    plant = two_mass_factory()
    excitation = (UniformNoise(-1.0, 1.0) if s["hold"] is None
                  else RandomHold(float(s["hold"]), -1.0, 1.0))
    dist_gen, noise_gen = _corruption_generators(s["vary"])
    log = generate_training(
        plant, s["duration"], excitation,
        disturbance=dist_gen, noise=noise_gen,
        excitation_seed=stream_seed(s["seed"], ROLE_EXCITATION, 0, PHASE_TRAINING),
        disturbance_seed=stream_seed(s["seed"], ROLE_DISTURBANCE, 0, PHASE_TRAINING),
        noise_seed=stream_seed(s["seed"], ROLE_NOISE, 0, PHASE_TRAINING),
    )
    out = _resolve_out(args)
    os.makedirs(out, exist_ok=True)

    training_csv = out / "training.csv"
    with open(training_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s"]
                        + [f"u{i + 1}" for i in range(log.n_inputs)]
                        + [f"y{i + 1}" for i in range(log.n_outputs)])
        for k in range(log.length):
            writer.writerow([f"{k * log.sample_period:.17g}"]
                            + [f"{v:.17g}" for v in log.inputs[:, k]]
                            + [f"{v:.17g}" for v in log.outputs[:, k]])

    depth = s["t_ini"] + s["horizon"] + s["order_bound"]
    if log.length >= depth:
        report = check_excitation(log.inputs, depth)
        order, rank, required = report.order, report.rank, report.required_rank
        pe = report.is_persistently_exciting
        print(report)
    else:
        # too short to even form one depth-sized window: trivially not PE
        order, rank, required = depth, 0, log.n_inputs * depth
        pe = False
        print(f"excitation order {depth}: record too short ({log.length} samples)")
    excitation_json = out / "excitation.json"
    with open(excitation_json, "w") as fh:
        json.dump({
            "schema_version": 1,
            "scenario": s["scenario"],
            "seed": s["seed"],
            "vary": s["vary"],
            "n_samples": log.length,
            "sample_period": log.sample_period,
            "order": order,
            "rank": rank,
            "required_rank": required,
            "is_persistently_exciting": pe,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _report_written([training_csv, excitation_json])
    return 0


def _load_training(path: str) -> TrajectoryLog:
    """Read a ``training.csv`` written by ``segdpc train`` back into a log."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"training file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.asarray(rows[1:], dtype=float)
    if header[0] != "time_s" or data.shape[0] < 2:
        raise ValueError(f"{path}: not a training CSV (need a time_s column and >= 2 rows)")
    n_u = sum(name.startswith("u") for name in header)
    return TrajectoryLog(
        inputs=data[:, 1:1 + n_u].T,
        outputs=data[:, 1 + n_u:].T,
        sample_period=float(data[1, 0] - data[0, 0]),
    )


def cmd_run(args) -> int:
    s = _settings(args, {
        "mode": "segmented", "seed": 2024, "horizon": 40, "vary": "disturbance",
        "realization": 0, "duration": 100, "t_ini": 5, "lambda_g": 0.5,
        "order_bound": 10, "training_scale": 2.0, "training": None,
    })
    spec = SweepSpec(
        horizons=(s["horizon"],), realizations=s["realization"] + 1,
        vary=s["vary"], duration=s["duration"], seed=s["seed"],
        t_ini=s["t_ini"], lambda_g=s["lambda_g"], order_bound=s["order_bound"],
        training_scale=s["training_scale"],
    )
    if s["training"] is None:
        log, digest = run_trace(spec, s["mode"], s["horizon"], s["realization"])
    else:
        blocks = partition_training(
            _load_training(s["training"]),
            s["t_ini"],
            s["t_ini"] if s["mode"] == "segmented" else s["horizon"],
            order_bound=s["order_bound"],
        )
        cfg = ControllerConfig(
            t_ini=s["t_ini"], horizon=s["horizon"], lambda_g=s["lambda_g"],
            mode=s["mode"], input_bounds=((-1.0, 1.0),), order_bound=s["order_bound"],
        )
        dist_gen, noise_gen = _corruption_generators(s["vary"])
        log = run_closed_loop(
            two_mass_factory(), blocks, cfg, s["duration"],
            setpoint=spec.setpoint_profile(),
            disturbance=dist_gen, noise=noise_gen,
            disturbance_seed=stream_seed(s["seed"], ROLE_DISTURBANCE,
                                         s["realization"], PHASE_CLOSED_LOOP),
            noise_seed=stream_seed(s["seed"], ROLE_NOISE,
                                   s["realization"], PHASE_CLOSED_LOOP),
        )
        stream = (log.disturbance_stream if s["vary"] == "disturbance"
                  else log.noise_stream)
        digest = (hashlib.sha256(stream.tobytes()).hexdigest()
                  if stream is not None else "none")

    out = _resolve_out(args)
    paths = export_results(log, out)
    run_json = out / "run.json"
    with open(run_json, "w") as fh:
        json.dump({
            "schema_version": 1,
            "mode": s["mode"],
            "horizon": s["horizon"],
            "realization": s["realization"],
            "vary": s["vary"],
            "seed": s["seed"],
            "stream_hash": digest,
            "setpoint_error": log.setpoint_error(),
            "flagged_steps": log.flagged_steps(),
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"stream {digest}  setpoint error {log.setpoint_error():.6g}  "
          f"flagged {log.flagged_steps()}")
    _report_written([*paths, run_json])
    return 0


def _sweep_settings(args) -> dict:
    defaults = {
        "seed": 2024, "horizons": (10, 20, 40, 100), "realizations": 20,
        "vary": "disturbance", "duration": 100, "t_ini": 5, "lambda_g": 0.5,
        "order_bound": 10, "training_scale": 2.0, "jobs": os.cpu_count() or 1,
    }
    if args.paper_scale:
        defaults.update(horizons=(10, 20, 40, 60, 80, 100), realizations=100)
    return _settings(args, defaults)


def cmd_sweep(args) -> int:
    s = _sweep_settings(args)
    spec = SweepSpec(
        horizons=tuple(s["horizons"]), realizations=s["realizations"],
        vary=s["vary"], duration=s["duration"], seed=s["seed"],
        t_ini=s["t_ini"], lambda_g=s["lambda_g"], order_bound=s["order_bound"],
        training_scale=s["training_scale"],
    )
    result = run_sweep(spec, jobs=s["jobs"])
    for n, stats in sorted(result.per_horizon.items()):
        print(f"N={n:<4d} outperforming {100 * stats['outperforming_fraction']:.0f}%  "
              f"mean improvement {stats['avg_improvement_percent']:.0f}%")
    _report_written(export_results(result, _resolve_out(args)))
    return 0


def cmd_timing(args) -> int:
    s = _settings(args, {
        "seed": 2024, "horizons": (10, 20, 40, 60, 80, 100), "repeats": 7,
        "t_ini": 5, "lambda_g": 0.5, "order_bound": 10,
    })
    result = run_timing(
        horizons=tuple(s["horizons"]), repeats=s["repeats"], t_ini=s["t_ini"],
        lambda_g=s["lambda_g"], order_bound=s["order_bound"], seed=s["seed"],
    )
    for mode, slope in sorted(result.slopes.items()):
        print(f"{mode}: slope {'n/a' if slope is None else f'{slope:.2f}'}")
    _report_written(export_results(result, _resolve_out(args)))
    return 0


def _economic_settings(args) -> dict:
    defaults = {
        "seed": 2024, "horizons": (10, 48), "duration": 96, "price_scale": 1.0,
        "lambda_g": 3.0, "night_price": 7.0, "day_price": 20.0, "efficiency": 2.5,
    }
    if args.paper_scale:
        defaults.update(horizons=(10, 95), duration=144)
    return _settings(args, defaults)


def cmd_economic(args) -> int:
    s = _economic_settings(args)
    spec = EconomicSpec(
        horizons=tuple(s["horizons"]), duration=s["duration"], seed=s["seed"],
        price_scale=s["price_scale"], lambda_g=s["lambda_g"],
        night_price=s["night_price"], day_price=s["day_price"],
        efficiency=s["efficiency"],
    )
    result = run_economic(spec)
    for c in result.cells:
        print(f"{c.mode:<12s} N={c.horizon:<4d} cost {c.cost:10.2f}  "
              f"discomfort {c.discomfort:8.3f} K·h  flagged {c.flagged}")
    _report_written(export_results(result, _resolve_out(args)))
    return 0


def cmd_heatmap(args) -> int:
    s = _settings(args, {
        "seed": 2024, "t_ini": 5, "horizon": 30, "order_bound": 10,
    })
    summaries = run_heatmaps(
        t_ini=s["t_ini"], horizon=s["horizon"], seed=s["seed"],
        order_bound=s["order_bound"],
    )
    for key, summary in sorted(summaries.items()):
        print(f"{key}: upper mass {summary.upper_mass:.3e}, "
              f"lower mass {summary.lower_mass:.3e}")
    _report_written(export_results(summaries, _resolve_out(args)))
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> _Parser:
    parser = _Parser(prog="segdpc", description=__doc__.splitlines()[0])
    subparsers = parser.add_subparsers(dest="command", required=True)

    def sub(name, handler, help_text):
        p = subparsers.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
        p.add_argument("--seed", type=int)
        return p

    p = sub("train", cmd_train, "record an open-loop training trajectory")
    p.add_argument("--scenario", choices=["two_mass"])
    p.add_argument("--duration", type=int, help="number of samples to record")
    p.add_argument("--t-ini", type=int, dest="t_ini")
    p.add_argument("--N", type=int, dest="horizon")
    p.add_argument("--order-bound", type=int, dest="order_bound")
    p.add_argument("--vary", choices=_VARIANTS)
    p.add_argument("--hold", type=float,
                   help="hold time (s) for piecewise-constant excitation; default i.i.d.")

    p = sub("run", cmd_run, "run one closed-loop scenario and write its trace")
    p.add_argument("--mode", choices=_MODES)
    p.add_argument("--N", type=int, dest="horizon")
    p.add_argument("--vary", choices=_VARIANTS)
    p.add_argument("--realization", type=int)
    p.add_argument("--duration", type=int)
    p.add_argument("--t-ini", type=int, dest="t_ini")
    p.add_argument("--lambda-g", type=float, dest="lambda_g")
    p.add_argument("--order-bound", type=int, dest="order_bound")
    p.add_argument("--training-scale", type=float, dest="training_scale",
                   help="training record length as a multiple of the minimum")
    p.add_argument("--training", help="reuse a training.csv instead of regenerating")

    p = sub("sweep", cmd_sweep, "paired realization sweep over modes and horizons")
    p.add_argument("--horizons", type=_horizons)
    p.add_argument("--realizations", type=int)
    p.add_argument("--vary", choices=_VARIANTS)
    p.add_argument("--duration", type=int)
    p.add_argument("--t-ini", type=int, dest="t_ini")
    p.add_argument("--lambda-g", type=float, dest="lambda_g")
    p.add_argument("--order-bound", type=int, dest="order_bound")
    p.add_argument("--training-scale", type=float, dest="training_scale",
                   help="training record length as a multiple of the minimum")
    p.add_argument("--jobs", type=int, help="parallel workers (default: all cores)")
    p.add_argument("--paper-scale", action="store_true",
                   help="100 realizations over horizons 10..100")

    p = sub("timing", cmd_timing, "median solve time of the tracking level per horizon")
    p.add_argument("--horizons", type=_horizons)
    p.add_argument("--repeats", type=int)
    p.add_argument("--t-ini", type=int, dest="t_ini")
    p.add_argument("--lambda-g", type=float, dest="lambda_g")
    p.add_argument("--order-bound", type=int, dest="order_bound")

    p = sub("economic", cmd_economic, "multi-zone heating study under a two-rate tariff")
    p.add_argument("--horizons", type=_horizons)
    p.add_argument("--duration", type=int)
    p.add_argument("--price-scale", type=float, dest="price_scale")
    p.add_argument("--lambda-g", type=float, dest="lambda_g")
    p.add_argument("--paper-scale", action="store_true",
                   help="full-day lookahead horizons (10, 95)")

    p = sub("heatmap", cmd_heatmap, "predictor-gain causality grids, clean and disturbed")
    p.add_argument("--t-ini", type=int, dest="t_ini")
    p.add_argument("--N", type=int, dest="horizon")
    p.add_argument("--order-bound", type=int, dest="order_bound")

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"segdpc: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures exit 2, per the CLI contract
        print(f"segdpc: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
