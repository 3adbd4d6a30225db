"""Energy cost against comfort violation per cell from ``economic.csv``."""

from __future__ import annotations

from pathlib import Path

from .io import (check_schema, make_parser, read_table, require_columns,
                 script_main)

_STYLE = {"segmented": ("#4878a8", "o"), "unsegmented": ("#d8854f", "s")}


def render(in_path):
    """Build the figure.  Returns ``(figure, n_points)``."""
    import matplotlib.pyplot as plt

    in_path = Path(in_path)
    names, rows = read_table(in_path)
    require_columns(
        names, ("mode", "horizon", "cost", "discomfort_kelvin_hours"), in_path
    )
    check_schema(in_path.parent / "economic_summary.json")

    fig, ax = plt.subplots(figsize=(6.2, 4.8), constrained_layout=True)
    seen = set()
    for row in rows:
        mode = row["mode"]
        color, marker = _STYLE.get(mode, ("#777777", "x"))
        ax.scatter(
            float(row["discomfort_kelvin_hours"]), float(row["cost"]),
            c=color, marker=marker, s=55, alpha=0.85,
            label=None if mode in seen else mode,
        )
        seen.add(mode)
        tag = f"N={row['horizon']}"
        scale = float(row.get("price_scale", 1.0) or 1.0)
        if scale != 1.0:
            tag += f" (price x{scale:g})"
        ax.annotate(
            tag,
            (float(row["discomfort_kelvin_hours"]), float(row["cost"])),
            textcoords="offset points", xytext=(7, 4), fontsize=8,
        )
    ax.set_xlabel("comfort violation [K h]")
    ax.set_ylabel("energy cost [currency]")
    ax.grid(alpha=0.25)
    ax.legend(fontsize=9)
    return fig, len(rows)


def main(argv=None) -> int:
    parser = make_parser(
        "scatter",
        "energy cost against comfort violation, one marker per cell",
        "economic.csv from a results directory",
    )
    return script_main(argv, parser, render)


if __name__ == "__main__":
    raise SystemExit(main())
