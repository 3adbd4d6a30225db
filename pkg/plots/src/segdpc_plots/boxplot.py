"""Notched box plot of tracking error per (mode, horizon) from ``sweep.csv``."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

from .io import (InputError, check_schema, make_parser, read_table,
                 require_columns, script_main)

_FACE = {"segmented": "#4878a8", "unsegmented": "#d8854f"}


def render(in_path):
    """Build the figure.  Returns ``(figure, n_boxes)``."""
    import matplotlib.pyplot as plt

    in_path = Path(in_path)
    names, rows = read_table(in_path)
    require_columns(
        names, ("mode", "horizon", "realization", "setpoint_error"), in_path
    )
    summary = check_schema(in_path.parent / "summary.json")

    groups: dict[tuple[int, str], list[float]] = defaultdict(list)
    for row in rows:
        if row.get("failure"):
            continue  # failed cells carry no error value
        groups[(int(row["horizon"]), row["mode"])].append(
            float(row["setpoint_error"])
        )
    if not groups:
        raise InputError(f"{in_path.name}: no usable rows")

    keys = sorted(groups)
    data = [groups[k] for k in keys]
    fig, ax = plt.subplots(
        figsize=(1.6 + 1.1 * len(keys), 4.2), constrained_layout=True
    )
    artists = ax.boxplot(
        data,
        notch=True,
        patch_artist=True,
        widths=0.6,
        tick_labels=[f"{mode}\nN={n}" for n, mode in keys],
        medianprops={"color": "black"},
        flierprops={"marker": ".", "markersize": 4},
    )
    for patch, (_, mode) in zip(artists["boxes"], keys):
        patch.set_facecolor(_FACE.get(mode, "#999999"))
        patch.set_alpha(0.75)
    ax.set_ylabel("accumulated set-point error")
    lo, hi = min(min(d) for d in data), max(max(d) for d in data)
    if lo > 0 and hi / lo > 50:
        ax.set_yscale("log")
    if summary:
        vary = summary.get("vary") or "none"
        ax.set_title(
            f"corruption: {vary}, {summary.get('realizations', '?')} realizations"
        )
    ax.grid(axis="y", alpha=0.3)
    return fig, len(artists["boxes"])


def main(argv=None) -> int:
    parser = make_parser(
        "boxplot",
        "per-(mode, horizon) tracking-error distributions as notched boxes",
        "sweep.csv from a results directory",
    )
    return script_main(argv, parser, render)


if __name__ == "__main__":
    raise SystemExit(main())
