"""Shared input handling: table/JSON readers, schema checks, script glue."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import SCHEMA_VERSION


class InputError(ValueError):
    """Unusable input: missing file, empty table, missing columns, or a
    summary written under a different schema version."""


def read_table(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    """Read a CSV into (column names, list of row dicts)."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames
        rows = list(reader)
    if not names or not rows:
        raise InputError(f"{path.name}: empty table")
    return list(names), rows


def require_columns(names, wanted, path) -> None:
    missing = [c for c in wanted if c not in names]
    if missing:
        raise InputError(f"{Path(path).name}: missing columns: {', '.join(missing)}")


def read_json(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path.name}: invalid JSON ({exc})") from exc


def check_schema(summary_path: str | Path) -> dict | None:
    """Validate the version of a summary JSON sitting next to a CSV input.

    An absent sidecar is fine (the CSV alone is enough to render); a sidecar
    from a different schema version is not.  Returns the parsed summary, or
    None when the file does not exist.
    """
    path = Path(summary_path)
    if not path.is_file():
        return None
    summary = read_json(path)
    version = summary.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InputError(
            f"{path.name}: schema version {version!r}, this tool reads "
            f"version {SCHEMA_VERSION}"
        )
    return summary


def column(rows: list[dict], name: str):
    """A CSV column as a list of floats."""
    return [float(r[name]) for r in rows]


def make_parser(kind: str, what: str, input_help: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=f"segdpc-plot-{kind}", description=f"Render {what}."
    )
    parser.add_argument("--in", dest="input", required=True, help=input_help)
    parser.add_argument("--out", dest="output", required=True,
                        help="output image path (.png)")
    parser.add_argument("--dpi", type=int, default=150,
                        help="raster resolution (default 150)")
    return parser


def save_figure(fig, out_path: str | Path, dpi: int) -> Path:
    import matplotlib.pyplot as plt

    out_path = Path(out_path)
    if str(out_path.parent) not in ("", "."):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=dpi)
    plt.close(fig)
    return out_path


def script_main(argv, parser: argparse.ArgumentParser, render) -> int:
    """Parse --in/--out, call ``render``, save the figure.  Returns the
    process exit code: 0 on success, 1 on any input problem."""
    args = parser.parse_args(argv)
    try:
        fig, _ = render(args.input)
    except InputError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 1
    out = save_figure(fig, args.output, args.dpi)
    print(f"wrote {out}")
    return 0
