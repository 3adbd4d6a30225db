"""Trajectory storage, block-Hankel construction and excitation checks.

Recorded input/output trajectories are the only "model" the rest of the
package sees: predictors and controllers are built from Hankel matrices of
the raw data.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "TrajectoryLog",
    "HankelBlocks",
    "ExcitationReport",
    "build_hankel",
    "check_excitation",
    "partition_training",
    "required_training_length",
]

#: Relative singular-value cutoff shared by rank decisions and pseudoinverses.
DEFAULT_RANK_RTOL = 1e-10


def _as_channel_major(w: np.ndarray, name: str) -> np.ndarray:
    """Return ``w`` as a (channels, samples) float array."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    """An input/output record of one experiment on a plant.

    Attributes:
        inputs: Input samples, shape ``(n_inputs, length)``.
        outputs: Output samples, shape ``(n_outputs, length)``.
        sample_period: Sampling period in seconds.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    sample_period: float

    def __post_init__(self) -> None:
        u = _as_channel_major(self.inputs, "inputs")
        y = _as_channel_major(self.outputs, "outputs")
        if u.shape[1] != y.shape[1]:
            raise ValueError(
                f"inputs and outputs disagree on length: {u.shape[1]} vs {y.shape[1]}"
            )
        if u.shape[1] < 1:
            raise ValueError("trajectory must contain at least one sample")
        if not (self.sample_period > 0):
            raise ValueError(f"sample_period must be positive, got {self.sample_period}")
        u = np.ascontiguousarray(u)
        y = np.ascontiguousarray(y)
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.outputs.shape[0]

    @property
    def length(self) -> int:
        return self.inputs.shape[1]

    def save_csv(self, path: str | Path) -> None:
        """Write the log as a CSV table plus a ``.meta.json`` sidecar.

        Columns are ``t, u1..um, y1..yp`` with one row per sample; the sidecar
        records the sample period and channel counts so the file round-trips.
        """
        path = Path(path)
        t = np.arange(self.length) * self.sample_period
        table = np.vstack([t, self.inputs, self.outputs]).T
        header = ",".join(
            ["t"]
            + [f"u{i + 1}" for i in range(self.n_inputs)]
            + [f"y{i + 1}" for i in range(self.n_outputs)]
        )
        np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")
        meta = {
            "sample_period": self.sample_period,
            "n_inputs": self.n_inputs,
            "n_outputs": self.n_outputs,
        }
        path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def load_csv(cls, path: str | Path) -> "TrajectoryLog":
        """Load a log written by :meth:`save_csv`."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"training file not found: {path}")
        meta_path = path.with_suffix(".meta.json")
        if not meta_path.exists():
            raise FileNotFoundError(f"metadata sidecar not found: {meta_path}")
        meta = json.loads(meta_path.read_text())
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        m, p = int(meta["n_inputs"]), int(meta["n_outputs"])
        expected = 1 + m + p
        if table.shape[1] != expected:
            raise ValueError(
                f"{path} has {table.shape[1]} columns, expected {expected} "
                f"(t + {m} inputs + {p} outputs)"
            )
        return cls(
            inputs=table[:, 1 : 1 + m].T,
            outputs=table[:, 1 + m :].T,
            sample_period=float(meta["sample_period"]),
        )


def build_hankel(w: np.ndarray, depth: int) -> np.ndarray:
    """Stack a signal into a block-Hankel matrix of the given depth.

    For a signal with ``c`` channels and ``T`` samples the result has shape
    ``(c * depth, T - depth + 1)``; column ``j`` holds the window
    ``w[:, j : j + depth]`` flattened sample-major (all channels of sample
    ``j`` first, then sample ``j + 1``, ...).

    Args:
        w: Signal, shape ``(channels, samples)`` or ``(samples,)``.
        depth: Window length ``L >= 1``.

    Returns:
        The block-Hankel matrix.

    Raises:
        ValueError: If ``depth`` exceeds the signal length or is < 1.
    """
    arr = _as_channel_major(w, "signal")
    c, T = arr.shape
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if depth > T:
        raise ValueError(f"depth {depth} exceeds signal length {T}")
    q = T - depth + 1
    H = np.empty((c * depth, q))
    for k in range(depth):
        H[k * c : (k + 1) * c, :] = arr[:, k : k + q]
    return H


@dataclass(frozen=True, eq=False)
class ExcitationReport:
    """Outcome of a persistence-of-excitation rank check."""

    order: int
    rank: int
    required_rank: int
    is_persistently_exciting: bool
    singular_values: np.ndarray

    def __str__(self) -> str:
        verdict = "PE" if self.is_persistently_exciting else "not PE"
        return (
            f"excitation order {self.order}: rank {self.rank}/{self.required_rank} "
            f"({verdict})"
        )


def check_excitation(
    u: np.ndarray, order: int, rank_rtol: float = DEFAULT_RANK_RTOL
) -> ExcitationReport:
    """Check persistence of excitation of ``u`` at a given order.

    The signal is persistently exciting of order ``L`` when its depth-``L``
    block-Hankel matrix has full row rank ``m * L``.  Rank counts singular
    values above ``max(n_rows, n_cols) * sigma_1 * rank_rtol``.
    """
    H = build_hankel(u, order)
    sigma = np.linalg.svd(H, compute_uv=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        rank = 0
    else:
        tol = max(H.shape) * sigma[0] * rank_rtol
        rank = int(np.count_nonzero(sigma > tol))
    required = H.shape[0]
    return ExcitationReport(
        order=order,
        rank=rank,
        required_rank=required,
        is_persistently_exciting=rank == required,
        singular_values=sigma,
    )


def required_training_length(
    n_inputs: int, t_ini: int, horizon_block: int, order_bound: int
) -> int:
    """Minimum sample count for a depth ``t_ini + horizon_block`` partition.

    This is the persistence-of-excitation length condition
    ``(m + 1) * (t_ini + horizon_block + n_hat) - 1`` where ``n_hat`` is an
    upper bound on the plant order.
    """
    if order_bound < 0:
        raise ValueError(f"order_bound must be >= 0, got {order_bound}")
    return (n_inputs + 1) * (t_ini + horizon_block + order_bound) - 1


@dataclass(frozen=True, eq=False)
class HankelBlocks:
    """Past/future Hankel partition of a training log.

    The four blocks share columns: column ``j`` of every block comes from the
    same window of the training record.  ``u_past``/``y_past`` hold the first
    ``t_ini`` samples of each window, ``u_future``/``y_future`` the remaining
    ``block_horizon`` samples.

    ``length_satisfied`` reports whether the training record met the minimum
    length for the caller-supplied plant-order bound; it is advisory only.
    """

    u_past: np.ndarray
    y_past: np.ndarray
    u_future: np.ndarray
    y_future: np.ndarray
    t_ini: int
    block_horizon: int
    n_inputs: int
    n_outputs: int
    training_length: int
    order_bound: int | None = None
    length_satisfied: bool | None = None

    @property
    def n_columns(self) -> int:
        return self.u_past.shape[1]

    @property
    def depth(self) -> int:
        return self.t_ini + self.block_horizon

    def data_matrix(self) -> np.ndarray:
        """Stack ``[u_past; y_past; u_future]`` (the regressor of the predictor fit)."""
        return np.vstack([self.u_past, self.y_past, self.u_future])


def partition_training(
    log: TrajectoryLog,
    t_ini: int,
    horizon_block: int,
    order_bound: int | None = None,
) -> HankelBlocks:
    """Split a training log into past/future Hankel blocks.

    Args:
        log: The training record.
        t_ini: Length of the initialization window (samples).
        horizon_block: Length of the prediction window per block (samples).
            For an unsegmented predictor this is the full horizon ``N``; for a
            segmented predictor it equals ``t_ini``.
        order_bound: Optional upper bound on the plant order.  When given, the
            minimum-length condition is evaluated and a warning is emitted if
            the record is too short; the partition is still returned.

    Raises:
        ValueError: If the record is shorter than one full window.
    """
    if t_ini < 1:
        raise ValueError(f"t_ini must be >= 1, got {t_ini}")
    if horizon_block < 1:
        raise ValueError(f"horizon_block must be >= 1, got {horizon_block}")
    depth = t_ini + horizon_block
    if log.length < depth:
        raise ValueError(
            f"training record of length {log.length} is shorter than one "
            f"window of depth {depth}"
        )
    Hu = build_hankel(log.inputs, depth)
    Hy = build_hankel(log.outputs, depth)
    m, p = log.n_inputs, log.n_outputs
    length_satisfied = None
    if order_bound is not None:
        minimum = required_training_length(m, t_ini, horizon_block, order_bound)
        length_satisfied = log.length >= minimum
        if not length_satisfied:
            warnings.warn(
                f"training record has {log.length} samples but the length "
                f"condition for order bound {order_bound} needs {minimum}; "
                "the data cannot be persistently exciting at this depth",
                stacklevel=2,
            )
    return HankelBlocks(
        u_past=Hu[: m * t_ini, :],
        y_past=Hy[: p * t_ini, :],
        u_future=Hu[m * t_ini :, :],
        y_future=Hy[p * t_ini :, :],
        t_ini=t_ini,
        block_horizon=horizon_block,
        n_inputs=m,
        n_outputs=p,
        training_length=log.length,
        order_bound=order_bound,
        length_satisfied=length_satisfied,
    )
