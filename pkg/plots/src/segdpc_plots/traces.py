"""Closed-loop trace figure from ``trace.csv`` or an economic per-cell trace.

Two layouts, picked from the columns present:

* tracking (``y_sp*`` or plain ``y*``/``u*``): outputs with set-point and
  measurement overlays on top, piecewise-constant inputs below;
* economic (``ambient`` + ``band_lo*`` + ``price``): one panel per zone with
  the comfort band shaded, plus a bottom panel for tariff and ambient.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from .io import column, make_parser, read_table, require_columns, script_main


def _channels(names: list[str], prefix: str) -> list[str]:
    pattern = re.compile(rf"{prefix}(\d+)$")
    found = [(int(m.group(1)), c) for c in names if (m := pattern.fullmatch(c))]
    return [c for _, c in sorted(found)]


def _render_economic(steps, names, rows):
    import matplotlib.pyplot as plt

    zones = _channels(names, "y")
    n_rows = math.ceil(len(zones) / 2) + 1
    fig, axes = plt.subplots(
        n_rows, 2, figsize=(9.0, 1.9 * n_rows), sharex=True,
        constrained_layout=True,
    )
    grid = axes.ravel()
    for z, name in enumerate(zones):
        ax = grid[z]
        lo = np.array(column(rows, f"band_lo{z + 1}"))
        hi = np.array(column(rows, f"band_hi{z + 1}"))
        ax.fill_between(steps, lo, hi, color="#88aa88", alpha=0.25, lw=0)
        ax.plot(steps, column(rows, name), color="#224488", lw=1.2)
        ax.set_ylabel(f"zone {z + 1} [°C]", fontsize=8)
        ax.grid(alpha=0.25)
    for ax in grid[len(zones):-2]:
        ax.set_visible(False)

    # bottom row: tariff on the left axis, ambient on the right
    gs = grid[-2].get_gridspec()
    for ax in grid[-2:]:
        ax.remove()
    bottom = fig.add_subplot(gs[-1, :])
    bottom.step(steps, column(rows, "price"), where="post", color="#884422",
                lw=1.2, label="price")
    bottom.set_ylabel("price", color="#884422", fontsize=8)
    bottom.set_xlabel("step")
    twin = bottom.twinx()
    twin.plot(steps, column(rows, "ambient"), color="#448888", lw=1.0,
              ls="--", label="ambient")
    twin.set_ylabel("ambient [°C]", color="#448888", fontsize=8)
    bottom.grid(alpha=0.25)
    return fig, {"layout": "economic", "zones": len(zones)}


def _render_tracking(steps, names, rows):
    import matplotlib.pyplot as plt

    outputs = _channels(names, "y")
    inputs = _channels(names, "u")
    setpoints = _channels(names, "y_sp")
    measured = _channels(names, "y_meas")
    fig, (top, bot) = plt.subplots(
        2, 1, figsize=(8.0, 5.0), sharex=True, constrained_layout=True,
        height_ratios=[2, 1],
    )
    for i, name in enumerate(outputs):
        (line,) = top.plot(steps, column(rows, name), lw=1.3, label=name)
        if i < len(measured):
            top.plot(steps, column(rows, measured[i]), lw=0.7, alpha=0.45,
                     color=line.get_color())
    for name in setpoints:
        top.plot(steps, column(rows, name), ls="--", color="#555555", lw=1.0,
                 label=name)
    if "band_lo1" in names:
        for i in range(len(outputs)):
            lo = np.array(column(rows, f"band_lo{i + 1}"))
            hi = np.array(column(rows, f"band_hi{i + 1}"))
            top.fill_between(steps, lo, hi, color="#88aa88", alpha=0.2, lw=0)
    top.set_ylabel("output")
    top.legend(fontsize=8, ncol=2)
    top.grid(alpha=0.25)
    for name in inputs:
        bot.step(steps, column(rows, name), where="post", lw=1.1, label=name)
    bot.set_ylabel("input")
    bot.set_xlabel("step")
    bot.legend(fontsize=8, ncol=2)
    bot.grid(alpha=0.25)
    return fig, {"layout": "tracking", "zones": len(outputs)}


def render(in_path):
    """Build the figure.  Returns ``(figure, info_dict)``."""
    in_path = Path(in_path)
    names, rows = read_table(in_path)
    require_columns(names, ("step", "y1", "u1"), in_path)
    steps = column(rows, "step")
    if "ambient" in names and "band_lo1" in names and "price" in names:
        return _render_economic(steps, names, rows)
    return _render_tracking(steps, names, rows)


def main(argv=None) -> int:
    parser = make_parser(
        "traces",
        "a closed-loop trace (tracking or economic layout, by columns)",
        "trace.csv or traces_economic_<mode>_N<horizon>.csv",
    )
    return script_main(argv, parser, render)


if __name__ == "__main__":
    raise SystemExit(main())
