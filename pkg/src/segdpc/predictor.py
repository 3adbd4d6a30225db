"""Multi-step output predictors fitted from Hankel data.

A predictor maps an initialization window (recent inputs and outputs) plus a
planned future input sequence to the predicted future outputs.  It is fitted
in one least-squares solve from the Hankel partition of a single training
record.  Chaining several short predictors end to end gives the segmented
predictor, which is block-lower-triangular by construction — future inputs
cannot influence earlier segments regardless of data quality.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hankel import DEFAULT_RANK_RTOL, HankelBlocks

__all__ = [
    "PredictorModel",
    "StackedPredictor",
    "CausalitySummary",
    "fit_predictor",
    "predict",
    "stack_segmented",
    "predict_stacked",
    "causality_heatmap",
    "export_heatmap",
]


@dataclass(frozen=True, eq=False)
class PredictorModel:
    """Least-squares multi-step predictor with its data projection.

    ``y_f = u_ini_gain @ u_ini + y_ini_gain @ y_ini + u_f_gain @ u_f``.

    ``projection`` is the orthogonal projector onto the row space of the
    regressor matrix; ``I - projection`` penalizes combinations that leave
    the span of the training data.
    """

    u_ini_gain: np.ndarray   # (p H, m t_ini)
    y_ini_gain: np.ndarray   # (p H, p t_ini)
    u_f_gain: np.ndarray     # (p H, m H)
    projection: np.ndarray   # (q, q)
    t_ini: int
    horizon_block: int
    n_inputs: int
    n_outputs: int

    def __post_init__(self) -> None:
        m, p, L, H = self.n_inputs, self.n_outputs, self.t_ini, self.horizon_block
        if self.u_ini_gain.shape != (p * H, m * L):
            raise ValueError("u_ini_gain has inconsistent shape")
        if self.y_ini_gain.shape != (p * H, p * L):
            raise ValueError("y_ini_gain has inconsistent shape")
        if self.u_f_gain.shape != (p * H, m * H):
            raise ValueError("u_f_gain has inconsistent shape")
        q = self.projection.shape[0]
        if self.projection.shape != (q, q):
            raise ValueError("projection must be square")


def fit_predictor(
    blocks: HankelBlocks, rank_rtol: float = DEFAULT_RANK_RTOL
) -> PredictorModel:
    """Fit the multi-step predictor from a Hankel partition.

    Solves ``min ||y_future - P M||_F`` for ``M = [u_past; y_past; u_future]``
    via the SVD pseudoinverse (singular values below
    ``max(M.shape) * sigma_1 * rank_rtol`` are treated as zero) and splits the
    solution into the three gain blocks.  The projection is ``pinv(M) @ M``,
    computed from the same SVD.

    Emits a warning and returns an all-zero predictor when the data matrix
    has rank zero.
    """
    M = blocks.data_matrix()
    q = blocks.n_columns
    U, sigma, Vt = np.linalg.svd(M, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        rank = 0
    else:
        tol = max(M.shape) * sigma[0] * rank_rtol
        rank = int(np.count_nonzero(sigma > tol))
    if rank == 0:
        warnings.warn(
            "training data matrix has rank 0; predictor is identically zero",
            stacklevel=2,
        )
        P = np.zeros((blocks.y_future.shape[0], M.shape[0]))
        projection = np.zeros((q, q))
    else:
        Ur = U[:, :rank]
        Vr = Vt[:rank, :].T
        inv_sigma = 1.0 / sigma[:rank]
        # P = Y_future M^+  with  M^+ = V_r diag(1/s) U_r'
        P = (blocks.y_future @ Vr) * inv_sigma @ Ur.T
        projection = Vr @ Vr.T
    m, p, L = blocks.n_inputs, blocks.n_outputs, blocks.t_ini
    return PredictorModel(
        u_ini_gain=P[:, : m * L],
        y_ini_gain=P[:, m * L : (m + p) * L],
        u_f_gain=P[:, (m + p) * L :],
        projection=projection,
        t_ini=L,
        horizon_block=blocks.block_horizon,
        n_inputs=m,
        n_outputs=p,
    )


def predict(
    model: PredictorModel,
    u_ini: np.ndarray,
    y_ini: np.ndarray,
    u_f: np.ndarray,
) -> np.ndarray:
    """Predicted future outputs for one initialization and input plan.

    All arguments are flat, sample-major vectors (channel values of the first
    sample first).  Returns the flat ``p * H`` output prediction.
    """
    u_ini = np.asarray(u_ini, dtype=float).ravel()
    y_ini = np.asarray(y_ini, dtype=float).ravel()
    u_f = np.asarray(u_f, dtype=float).ravel()
    if u_ini.size != model.u_ini_gain.shape[1]:
        raise ValueError(
            f"u_ini has {u_ini.size} entries, expected {model.u_ini_gain.shape[1]}"
        )
    if y_ini.size != model.y_ini_gain.shape[1]:
        raise ValueError(
            f"y_ini has {y_ini.size} entries, expected {model.y_ini_gain.shape[1]}"
        )
    if u_f.size != model.u_f_gain.shape[1]:
        raise ValueError(
            f"u_f has {u_f.size} entries, expected {model.u_f_gain.shape[1]}"
        )
    return model.u_ini_gain @ u_ini + model.y_ini_gain @ y_ini + model.u_f_gain @ u_f


@dataclass(frozen=True, eq=False)
class StackedPredictor:
    """Chained segment predictors flattened to one horizon-wide linear map.

    ``phi3`` is block-lower-triangular with ``segment_length``-step blocks:
    inputs of segment ``j`` cannot reach outputs of segments ``i < j``, and
    those blocks are exact zeros by construction.  When the horizon is not a
    multiple of the segment length the trailing rows and columns of the last
    block row/column are dropped.
    """

    phi1: np.ndarray   # (p N, m t_ini)
    phi2: np.ndarray   # (p N, p t_ini)
    phi3: np.ndarray   # (p N, m N)
    n_segments: int
    segment_length: int
    tail_length: int
    horizon: int
    n_inputs: int
    n_outputs: int


def stack_segmented(model: PredictorModel, horizon: int, n_segments: int) -> StackedPredictor:
    """Chain a segment predictor into a full-horizon stacked predictor.

    Each segment feeds the next: segment ``i`` uses segment ``i-1``'s
    predicted inputs/outputs as its initialization.  Substituting the chain
    into one linear map gives, with ``P1/P2/P3`` the segment gains,

    * ``phi1`` block ``i`` = ``P2^(i-1) P1``,
    * ``phi2`` block ``i`` = ``P2^i``,
    * ``phi3`` block ``(i, j)`` = ``P3`` on the diagonal and
      ``P2^(i-j-1) (P1 + P2 P3)`` below it.

    Args:
        model: Segment predictor whose block horizon equals its ``t_ini``.
        horizon: Total prediction horizon ``N``.
        n_segments: Must equal ``ceil(N / t_ini)``.

    Raises:
        ValueError: If the model is not a segment predictor or the segment
            count is inconsistent with the horizon.
    """
    L = model.t_ini
    if model.horizon_block != L:
        raise ValueError(
            f"segment predictor needs block horizon == t_ini, got "
            f"{model.horizon_block} != {L}"
        )
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    expected_f = -(-horizon // L)
    if n_segments != expected_f:
        raise ValueError(
            f"n_segments {n_segments} inconsistent with horizon {horizon} and "
            f"t_ini {L} (expected {expected_f})"
        )
    m, p = model.n_inputs, model.n_outputs
    P1, P2, P3 = model.u_ini_gain, model.y_ini_gain, model.u_f_gain
    F = n_segments

    phi1_blocks = [P1]
    phi2_blocks = [P2]
    for _ in range(1, F):
        phi1_blocks.append(P2 @ phi1_blocks[-1])
        phi2_blocks.append(P2 @ phi2_blocks[-1])

    # phi3 sub-diagonal band: offset 0 is P3, offset 1 is P1 + P2 P3, each
    # further offset left-multiplies by P2 (one more chaining step)
    band = [P3, P1 + P2 @ P3]
    for _ in range(2, F):
        band.append(P2 @ band[-1])

    phi1 = np.vstack(phi1_blocks)
    phi2 = np.vstack(phi2_blocks)
    phi3 = np.zeros((F * p * L, F * m * L))
    for i in range(F):
        for j in range(i + 1):
            phi3[i * p * L : (i + 1) * p * L, j * m * L : (j + 1) * m * L] = band[i - j]

    tail = horizon - (F - 1) * L
    return StackedPredictor(
        phi1=phi1[: p * horizon, :],
        phi2=phi2[: p * horizon, :],
        phi3=phi3[: p * horizon, : m * horizon],
        n_segments=F,
        segment_length=L,
        tail_length=tail,
        horizon=horizon,
        n_inputs=m,
        n_outputs=p,
    )


def predict_stacked(
    stacked: StackedPredictor,
    u_ini: np.ndarray,
    y_ini: np.ndarray,
    u_f: np.ndarray,
) -> np.ndarray:
    """Full-horizon prediction through the stacked map (diagnostic path)."""
    u_ini = np.asarray(u_ini, dtype=float).ravel()
    y_ini = np.asarray(y_ini, dtype=float).ravel()
    u_f = np.asarray(u_f, dtype=float).ravel()
    if (
        u_ini.size != stacked.phi1.shape[1]
        or y_ini.size != stacked.phi2.shape[1]
        or u_f.size != stacked.phi3.shape[1]
    ):
        raise ValueError("argument lengths do not match the stacked partitions")
    return stacked.phi1 @ u_ini + stacked.phi2 @ y_ini + stacked.phi3 @ u_f


@dataclass(frozen=True, eq=False)
class CausalitySummary:
    """Absolute-value grid of a future-input gain with its triangular split.

    ``upper_mass`` sums entries strictly above the block diagonal (influence
    of inputs on *earlier* outputs — acausal), ``lower_mass`` the rest.  The
    block size is ``outputs_per_step * block_steps`` rows by
    ``inputs_per_step * block_steps`` columns.
    """

    grid: np.ndarray
    upper_mass: float
    lower_mass: float
    n_rows: int
    n_cols: int
    block_rows: int
    block_cols: int


def causality_heatmap(
    matrix: np.ndarray,
    outputs_per_step: int,
    inputs_per_step: int | None = None,
    block_steps: int = 1,
) -> CausalitySummary:
    """Split a future-input gain matrix into causal and acausal mass.

    Args:
        matrix: The ``p N x m N`` map from planned inputs to predicted
            outputs.
        outputs_per_step: Output channels per time step (``p``).
        inputs_per_step: Input channels per time step; defaults to
            ``outputs_per_step``.
        block_steps: Steps per block for the triangular split.  ``1``
            classifies entry ``(i, j)`` by time step; a segment length
            classifies at segment granularity.
    """
    A = np.abs(np.asarray(matrix, dtype=float))
    if A.ndim != 2:
        raise ValueError("matrix must be 2-D")
    p = int(outputs_per_step)
    m = int(inputs_per_step) if inputs_per_step is not None else p
    if p < 1 or m < 1 or block_steps < 1:
        raise ValueError("block sizes must be >= 1")
    br, bc = p * block_steps, m * block_steps
    rows, cols = A.shape
    # block index (ceil-partitioned so ragged tails join the last block)
    bi = np.minimum(np.arange(rows) // br, -(-rows // br) - 1)
    bj = np.minimum(np.arange(cols) // bc, -(-cols // bc) - 1)
    upper = bj[np.newaxis, :] > bi[:, np.newaxis]
    upper_mass = float(A[upper].sum())
    lower_mass = float(A[~upper].sum())
    return CausalitySummary(
        grid=A,
        upper_mass=upper_mass,
        lower_mass=lower_mass,
        n_rows=rows,
        n_cols=cols,
        block_rows=br,
        block_cols=bc,
    )


def export_heatmap(
    summary: CausalitySummary, csv_path: str | Path, json_path: str | Path
) -> None:
    """Write the absolute-value grid as CSV and the mass summary as JSON."""
    csv_path, json_path = Path(csv_path), Path(json_path)
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"c{j}" for j in range(summary.n_cols)])
        for row in summary.grid:
            writer.writerow([f"{v:.17g}" for v in row])
    payload = {
        "upper_mass": summary.upper_mass,
        "lower_mass": summary.lower_mass,
        "n_rows": summary.n_rows,
        "n_cols": summary.n_cols,
        "block_size": summary.block_rows,
    }
    json_path.write_text(json.dumps(payload, indent=2) + "\n")
