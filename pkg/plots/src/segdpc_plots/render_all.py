"""Sweep a results directory and render every figure it has inputs for."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import boxplot, heatmap, scatter, timing, traces
from .io import InputError, save_figure

# (trigger file, renderer taking a path, output name)
_KINDS = (
    ("sweep.csv", boxplot.render, "boxplot.png"),
    ("timing.csv", timing.render, "timing.png"),
    ("economic.csv", scatter.render, "cost_vs_discomfort.png"),
    ("heatmap_segmented_clean.csv", lambda p: heatmap.render(p.parent),
     "heatmaps.png"),
    ("trace.csv", traces.render, "trace.png"),
)


def render_directory(in_dir: str | Path, out_dir: str | Path,
                     dpi: int = 150) -> list[Path]:
    """Render everything recognised under ``in_dir`` into ``out_dir``.

    Raises InputError when the directory holds nothing renderable or any
    recognised input fails to parse.
    """
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    if not in_dir.is_dir():
        raise InputError(f"not a directory: {in_dir}")
    jobs: list[tuple[Path, object, str]] = [
        (in_dir / trigger, render, out_name)
        for trigger, render, out_name in _KINDS
        if (in_dir / trigger).is_file()
    ]
    jobs += [
        (path, traces.render, f"{path.stem}.png")
        for path in sorted(in_dir.glob("traces_economic_*.csv"))
    ]
    if not jobs:
        raise InputError(f"no renderable inputs under {in_dir}")
    written = []
    for src, render, out_name in jobs:
        fig, _ = render(src)
        written.append(save_figure(fig, out_dir / out_name, dpi))
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="segdpc-figures",
        description="Render every recognised figure from a results directory.",
    )
    parser.add_argument("--in", dest="input", required=True,
                        help="results directory")
    parser.add_argument("--out", dest="output", required=True,
                        help="directory for the rendered images")
    parser.add_argument("--dpi", type=int, default=150,
                        help="raster resolution (default 150)")
    args = parser.parse_args(argv)
    try:
        written = render_directory(args.input, args.output, args.dpi)
    except InputError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
