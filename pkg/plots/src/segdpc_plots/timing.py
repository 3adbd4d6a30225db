"""Log-log solve-time scaling per mode from ``timing.csv``.

One series per mode with the fitted log-log slope annotated; slopes come
from ``timing_summary.json`` when it sits next to the CSV, otherwise from a
least-squares fit on the table itself.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np

from .io import (InputError, check_schema, make_parser, read_table,
                 require_columns, script_main)

_STYLE = {"segmented": ("#4878a8", "o"), "unsegmented": ("#d8854f", "s")}


def render(in_path):
    """Build the figure.  Returns ``(figure, info_dict)``."""
    import matplotlib.pyplot as plt

    in_path = Path(in_path)
    names, rows = read_table(in_path)
    require_columns(names, ("mode", "horizon", "median_seconds"), in_path)
    summary = check_schema(in_path.parent / "timing_summary.json")

    series: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for row in rows:
        series[row["mode"]].append(
            (int(row["horizon"]), float(row["median_seconds"]))
        )
    slopes: dict[str, float] = {}
    fig, ax = plt.subplots(figsize=(6.4, 4.6), constrained_layout=True)
    for mode in sorted(series):
        pts = sorted(series[mode])
        horizons = np.array([n for n, _ in pts], dtype=float)
        times = np.array([t for _, t in pts])
        if summary and mode in summary.get("slopes", {}):
            slope = float(summary["slopes"][mode])
        elif len(pts) >= 2 and np.all(times > 0):
            slope = float(np.polyfit(np.log(horizons), np.log(times), 1)[0])
        else:
            raise InputError(
                f"{in_path.name}: cannot fit a slope for mode {mode!r}"
            )
        slopes[mode] = slope
        color, marker = _STYLE.get(mode, ("#777777", "x"))
        ax.loglog(horizons, times, marker=marker, color=color, lw=1.3,
                  label=f"{mode} (slope {slope:.2f})")
        ax.annotate(
            f"{slope:.2f}", (horizons[-1], times[-1]), textcoords="offset points",
            xytext=(6, -4), color=color, fontsize=9,
        )
    ax.set_xlabel("prediction horizon N")
    ax.set_ylabel("median solve time [s]")
    ax.grid(True, which="both", alpha=0.25)
    ax.legend(fontsize=9)
    return fig, {"series": len(series), "slopes": slopes}


def main(argv=None) -> int:
    parser = make_parser(
        "timing",
        "solve-time scaling on log-log axes with fitted slopes",
        "timing.csv from a results directory",
    )
    return script_main(argv, parser, render)


if __name__ == "__main__":
    raise SystemExit(main())
