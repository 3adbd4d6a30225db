"""Synthetic results directory matching the documented exporter formats."""

from __future__ import annotations

import csv
import json
import math

import pytest


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sweep(d):
    rows = []
    for mode, base in (("segmented", 0.21), ("unsegmented", 0.27)):
        for n in (10, 40):
            for r in range(3):
                err = base * (1 + 0.08 * r) * (1 + n / 200)
                rows.append([mode, n, r, f"{err:.17g}", 0, f"{r:08x}" * 8, ""])
    # one failed cell: no error value, must be skipped by the box plot
    rows.append(["segmented", 40, 3, "nan", 0, "deadbeef" * 8, "solver error"])
    _write_csv(
        d / "sweep.csv",
        ["mode", "horizon", "realization", "setpoint_error", "flagged",
         "stream_hash", "failure"],
        rows,
    )
    _write_json(d / "summary.json", {
        "schema_version": 1, "kind": "sweep", "scenario": "two_mass",
        "vary": "disturbance", "seed": 2024, "duration": 120, "t_ini": 5,
        "lambda_g": 0.5, "order_bound": 10, "horizons": [10, 40],
        "realizations": 3, "modes": ["segmented", "unsegmented"],
        "per_mode": {}, "per_horizon": {}, "max_lock_violation": -1e-9,
        "failures": [],
    })


def _timing(d):
    rows = []
    slopes = {"segmented": 1.0, "unsegmented": 2.2}
    for mode, slope in slopes.items():
        for n in (10, 20, 40):
            rows.append([mode, n, 6 * n, f"{1e-4 * n ** slope:.17g}", 7])
    _write_csv(
        d / "timing.csv",
        ["mode", "horizon", "n_variables", "median_seconds", "repeats"],
        rows,
    )
    _write_json(d / "timing_summary.json", {
        "schema_version": 1, "kind": "timing", "slopes": slopes, "rows": [],
    })


def _economic(d):
    rows = [
        ["segmented", 10, "1", "1640.2", "6.95", 0, "-2.1e-09"],
        ["unsegmented", 10, "1", "1689.8", "3.55", 0, "-1.4e-09"],
        ["segmented", 48, "1", "1642.5", "22.2", 0, "-3.0e-09"],
        ["unsegmented", 48, "1", "1684.1", "1.53", 0, "-8.8e-10"],
    ]
    _write_csv(
        d / "economic.csv",
        ["mode", "horizon", "price_scale", "cost", "discomfort_kelvin_hours",
         "flagged", "lock_violation"],
        rows,
    )
    _write_json(d / "economic_summary.json", {
        "schema_version": 1, "kind": "economic", "seed": 2024, "duration": 96,
        "price_scale": 1.0, "efficiency": 2.5, "horizons": [10, 48],
        "modes": ["segmented", "unsegmented"], "cells": [],
    })
    zones = 2
    header = (["step", "price", "ambient"]
              + [f"y{z + 1}" for z in range(zones)]
              + [f"u{z + 1}" for z in range(zones)]
              + [f"band_lo{z + 1}" for z in range(zones)]
              + [f"band_hi{z + 1}" for z in range(zones)])
    rows = []
    for k in range(16):
        price = 7.0 if k < 8 else 20.0
        ambient = 8.0 + 4.0 * math.sin(k / 5)
        y = [19.5 + 0.1 * z + 0.05 * k for z in range(zones)]
        u = [1.2 - 0.03 * k + 0.1 * z for z in range(zones)]
        lo, hi = ([16.0] * zones, [26.0] * zones) if k < 8 else \
                 ([20.0] * zones, [22.0] * zones)
        rows.append([k, price, ambient] + y + u + lo + hi)
    _write_csv(d / "traces_economic_segmented_N10.csv", header, rows)


def _heatmaps(d):
    size, block = 10, 5
    for mode in ("segmented", "unsegmented"):
        for label in ("clean", "disturbed"):
            rows, upper = [], 0.0
            for i in range(size):
                row = []
                for j in range(size):
                    if j // block <= i // block:
                        v = 0.8 / (1 + abs(i - j))
                    else:
                        v = 0.0 if mode == "segmented" else \
                            (0.01 if label == "clean" else 0.3)
                        upper += v
                    row.append(f"{v:.17g}")
                rows.append(row)
            _write_csv(d / f"heatmap_{mode}_{label}.csv",
                       [f"c{j}" for j in range(size)], rows)
            _write_json(d / f"heatmap_{mode}_{label}.json", {
                "upper_mass": upper, "lower_mass": 21.7,
                "n_rows": size, "n_cols": size, "block_size": block,
            })


def _trace(d):
    header = ["step", "u1", "y1", "y_meas1", "y_sp1", "flagged", "status",
              "j1", "j2", "j3", "j1_at_final", "tracking_slack_final",
              "iterations", "predicted_cost"]
    rows = []
    for k in range(40):
        sp = 0.4 if k < 20 else -0.2
        y = sp * (1 - math.exp(-k % 20 / 3))
        rows.append([k, 0.5 * sp - 0.01 * k, f"{y:.17g}", f"{y + 1e-3:.17g}",
                     sp, 0, "ok", "0", f"{abs(sp - y):.17g}", "0",
                     "0", "0", 2, f"{abs(sp):.17g}"])
    _write_csv(d / "trace.csv", header, rows)


@pytest.fixture()
def results_dir(tmp_path):
    d = tmp_path / "results"
    d.mkdir()
    _sweep(d)
    _timing(d)
    _economic(d)
    _heatmaps(d)
    _trace(d)
    return d
