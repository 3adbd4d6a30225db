"""Figure rendering for benchmark result directories.

Every renderer consumes only the documented CSV/JSON files written by the
``segdpc`` exporters and never mutates its inputs.  One console script per
figure kind (``segdpc-plot-*``) plus ``segdpc-figures``, which sweeps a
results directory and renders everything it recognises.
"""

from __future__ import annotations

import matplotlib

# Rendering is headless and deterministic; never touch an interactive backend.
matplotlib.use("Agg")

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION"]
