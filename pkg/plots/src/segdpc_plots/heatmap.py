"""2x2 panel of future-input gain magnitudes from ``heatmap_*.csv``/``.json``.

Rows are the two predictor modes, columns the clean and disturbance-corrupted
training records.  Panel titles carry the above-diagonal (acausal) mass from
the JSON sidecars; block boundaries are overlaid at the summary's block size.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .io import InputError, make_parser, read_json, script_main

PANEL_MODES = ("segmented", "unsegmented")
PANEL_LABELS = ("clean", "disturbed")


def _load_grid(csv_path: Path) -> np.ndarray:
    if not csv_path.is_file():
        raise InputError(f"input not found: {csv_path}")
    grid = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    if grid.size == 0:
        raise InputError(f"{csv_path.name}: empty grid")
    return grid


def render(in_path):
    """Build the figure from a results directory (or any file inside one).

    Returns ``(figure, info_dict)``.
    """
    import matplotlib.pyplot as plt

    in_path = Path(in_path)
    in_dir = in_path if in_path.is_dir() else in_path.parent
    grids, masses, block = {}, {}, None
    for mode in PANEL_MODES:
        for label in PANEL_LABELS:
            key = f"{mode}_{label}"
            grids[key] = _load_grid(in_dir / f"heatmap_{key}.csv")
            meta = read_json(in_dir / f"heatmap_{key}.json")
            try:
                masses[key] = float(meta["upper_mass"])
                block = int(meta["block_size"])
            except KeyError as exc:
                raise InputError(
                    f"heatmap_{key}.json: missing field {exc}"
                ) from exc

    vmax = max(float(np.abs(g).max()) for g in grids.values()) or 1.0
    fig, axes = plt.subplots(
        2, 2, figsize=(8.6, 7.4), constrained_layout=True
    )
    image = None
    for i, mode in enumerate(PANEL_MODES):
        for j, label in enumerate(PANEL_LABELS):
            key = f"{mode}_{label}"
            ax = axes[i, j]
            grid = np.abs(grids[key])
            image = ax.imshow(
                grid, cmap="magma", vmin=0.0, vmax=vmax, aspect="auto",
                interpolation="nearest",
            )
            for edge in range(block, grid.shape[0], block):
                ax.axhline(edge - 0.5, color="white", lw=0.5, alpha=0.5)
            for edge in range(block, grid.shape[1], block):
                ax.axvline(edge - 0.5, color="white", lw=0.5, alpha=0.5)
            ax.set_title(
                f"{mode}, {label}\nacausal mass {masses[key]:.3g}", fontsize=9
            )
            ax.set_xlabel("planned-input index", fontsize=8)
            ax.set_ylabel("predicted-output index", fontsize=8)
    fig.colorbar(image, ax=axes, shrink=0.8, label="|gain|")
    return fig, {"panels": len(grids), "block_size": block}


def main(argv=None) -> int:
    parser = make_parser(
        "heatmap",
        "a 2x2 panel of predictor future-gain magnitudes",
        "results directory holding the four heatmap_*.csv/.json pairs",
    )
    return script_main(argv, parser, render)


if __name__ == "__main__":
    raise SystemExit(main())
