"""Receding-horizon controller built on Hankel data and lexicographic solves.

The controller never identifies a model: constraints couple decision weights
``g`` directly to the training-data Hankel blocks.  In segmented mode the
horizon is covered by ``F`` short chained blocks, each spanning one
initialization length; the chain is enforced by equality/inequality
constraints between consecutive segments.  Unsegmented mode is the same
program with a single full-horizon block.

Tracking solves two priority levels (initialization-consistency slack, then
set-point deviation plus a data-consistency regularizer); the economic
variant adds a third level minimizing price-weighted input energy while a
lock constraint preserves the achieved comfort.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .hankel import HankelBlocks
from .lexopt import (
    DEFAULT_LOCK_SLACK,
    ConvexLevel,
    SolverFailure,
    solve_lexicographic,
)
from .plant import PlantModel, simulate_step
from .predictor import fit_predictor
from .signals import SignalGen

__all__ = [
    "NotWarmError",
    "EconomicConfig",
    "ControllerConfig",
    "ControllerState",
    "ControlProblem",
    "ComfortBand",
    "Controller",
    "StepResult",
    "RunLog",
    "assemble_tracking",
    "assemble_economic",
    "step",
    "run_closed_loop",
]


class NotWarmError(RuntimeError):
    """The controller was asked to act before its buffers were filled."""


@dataclass(frozen=True)
class EconomicConfig:
    """Price profile and conversion efficiency for the economic level.

    ``prices`` holds one price per step (currency per energy unit); windows
    shorter than the full profile are sliced by the caller.  ``efficiency``
    scales the price term (the heat-supply coefficient of performance).
    """

    prices: np.ndarray
    efficiency: float = 2.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=float).ravel())
        if self.efficiency <= 0:
            raise ValueError("efficiency must be positive")


@dataclass(frozen=True)
class ControllerConfig:
    """Static controller parameters shared by every step of a run."""

    t_ini: int
    horizon: int
    lambda_g: float
    mode: str = "segmented"
    input_bounds: tuple[tuple[float, float], ...] | None = None
    output_bounds: tuple | None = None
    economic: EconomicConfig | None = None
    order_bound: int | None = None
    lock_slack: float = DEFAULT_LOCK_SLACK

    def __post_init__(self) -> None:
        if not (1 <= self.t_ini <= self.horizon):
            raise ValueError(
                f"need 1 <= t_ini <= horizon, got t_ini={self.t_ini}, horizon={self.horizon}"
            )
        if self.lambda_g < 0:
            raise ValueError("lambda_g must be nonnegative")
        if self.mode not in ("segmented", "unsegmented"):
            raise ValueError(f"mode must be 'segmented' or 'unsegmented', got {self.mode!r}")
        if self.input_bounds is not None:
            for lo, hi in self.input_bounds:
                if lo > hi:
                    raise ValueError(f"infeasible input bounds [{lo}, {hi}]")

    @property
    def n_segments(self) -> int:
        return math.ceil(self.horizon / self.t_ini) if self.mode == "segmented" else 1


class ControllerState:
    """Ring buffers of the most recent applied inputs and measured outputs."""

    def __init__(self, t_ini: int, n_inputs: int, n_outputs: int):
        self.t_ini = t_ini
        self.n_inputs = n_inputs
        self.n_outputs = n_outputs
        self._u: deque[np.ndarray] = deque(maxlen=t_ini)
        self._y: deque[np.ndarray] = deque(maxlen=t_ini)
        self.step_count = 0

    @property
    def warm(self) -> bool:
        return len(self._u) == self.t_ini

    def record(self, u, y) -> None:
        """Append one (applied input, measured output) pair."""
        self._u.append(np.asarray(u, dtype=float).reshape(self.n_inputs))
        self._y.append(np.asarray(y, dtype=float).reshape(self.n_outputs))
        self.step_count += 1

    def u_ini(self) -> np.ndarray:
        if not self.warm:
            raise NotWarmError(
                f"only {len(self._u)}/{self.t_ini} samples recorded"
            )
        return np.concatenate(list(self._u))

    def y_ini(self) -> np.ndarray:
        if not self.warm:
            raise NotWarmError(
                f"only {len(self._y)}/{self.t_ini} samples recorded"
            )
        return np.concatenate(list(self._y))

    def last_input(self) -> np.ndarray:
        if self._u:
            return self._u[-1].copy()
        return np.zeros(self.n_inputs)


@dataclass(frozen=True)
class ComfortBand:
    """Per-step comfort band (and optionally prices) for economic references."""

    lower: np.ndarray
    upper: np.ndarray
    prices: np.ndarray | None = None


@dataclass(eq=False)
class ControlProblem:
    """Assembled levels plus the variable bookkeeping to read solutions back."""

    levels: list[ConvexLevel]
    n_segments: int
    n_columns: int
    t_ini: int
    horizon: int
    n_inputs: int
    n_outputs: int
    u_future_block: np.ndarray
    y_future_block: np.ndarray
    g_length: int = field(init=False)
    g_length_required: int | None = None

    def __post_init__(self) -> None:
        self.g_length = self.n_segments * self.n_columns

    def _g_segments(self, values: np.ndarray) -> list[np.ndarray]:
        q = self.n_columns
        return [values[i * q : (i + 1) * q] for i in range(self.n_segments)]

    def input_plan(self, values: np.ndarray) -> np.ndarray:
        """Planned inputs over the horizon, flat sample-major (m per step)."""
        parts = [self.u_future_block @ g for g in self._g_segments(values)]
        return np.concatenate(parts)[: self.n_inputs * self.horizon]

    def output_plan(self, values: np.ndarray) -> np.ndarray:
        """Predicted outputs over the horizon, flat sample-major (p per step)."""
        parts = [self.y_future_block @ g for g in self._g_segments(values)]
        return np.concatenate(parts)[: self.n_outputs * self.horizon]

    def first_input(self, values: np.ndarray) -> np.ndarray:
        return self.input_plan(values)[: self.n_inputs]

    def init_slack(self, values: np.ndarray) -> np.ndarray:
        q, F, p, L = self.n_columns, self.n_segments, self.n_outputs, self.t_ini
        return values[F * q : F * q + F * p * L]

    def tracking_slack(self, values: np.ndarray) -> np.ndarray:
        q, F, p, L = self.n_columns, self.n_segments, self.n_outputs, self.t_ini
        return values[F * q + F * p * L :]


@dataclass(eq=False)
class _CondensedProblem(ControlProblem):
    """Control problem whose variables are trajectory windows, not weights.

    The solution vector holds one window ``w_i = [u_ini; y_ini; u_f; y_f]``
    per segment (``w_rows`` entries each) followed by the usual slack blocks,
    so the plan accessors slice the solution directly instead of multiplying
    Hankel blocks.  ``g_length`` still reports the weight dimension of the
    underlying formulation.
    """

    w_rows: int = 0
    block_steps: int = 0
    u_plan_offset: int = 0
    y_plan_offset: int = 0

    def _windows(self, values: np.ndarray, offset: int, width: int) -> np.ndarray:
        rho = self.w_rows
        parts = [
            values[i * rho + offset : i * rho + offset + width]
            for i in range(self.n_segments)
        ]
        return np.concatenate(parts)

    def input_plan(self, values: np.ndarray) -> np.ndarray:
        width = self.n_inputs * self.block_steps
        plan = self._windows(values, self.u_plan_offset, width)
        return plan[: self.n_inputs * self.horizon]

    def output_plan(self, values: np.ndarray) -> np.ndarray:
        width = self.n_outputs * self.block_steps
        plan = self._windows(values, self.y_plan_offset, width)
        return plan[: self.n_outputs * self.horizon]

    def init_slack(self, values: np.ndarray) -> np.ndarray:
        F, p, L = self.n_segments, self.n_outputs, self.t_ini
        off = F * self.w_rows
        return values[off : off + F * p * L]

    def tracking_slack(self, values: np.ndarray) -> np.ndarray:
        F, p, L = self.n_segments, self.n_outputs, self.t_ini
        return values[F * self.w_rows + F * p * L :]


def _per_step_bounds(bounds, channels: int, n_steps: int, name: str):
    """Materialize per-channel bounds to (channels, n_steps) lo/hi arrays."""
    lo = np.full((channels, n_steps), -np.inf)
    hi = np.full((channels, n_steps), np.inf)
    if bounds is None:
        return lo, hi
    if len(bounds) != channels:
        raise ValueError(f"{name} must give one (lo, hi) pair per channel")

    def per_step(value, ch):
        if np.ndim(value) == 0:
            return np.full(n_steps, float(value))
        arr = np.asarray(value, dtype=float).ravel()
        if arr.size == 1:
            return np.full(n_steps, arr[0])
        if arr.size != n_steps:
            raise ValueError(
                f"{name} channel {ch} sequence must have length {n_steps}, got {arr.size}"
            )
        return arr

    for ch, (lo_ch, hi_ch) in enumerate(bounds):
        lo_arr, hi_arr = per_step(lo_ch, ch), per_step(hi_ch, ch)
        if np.any(lo_arr > hi_arr):
            raise ValueError(f"infeasible {name} for channel {ch} (lo > hi)")
        lo[ch], hi[ch] = lo_arr, hi_arr
    return lo, hi


class _ProblemStructure:
    """Constant matrices of the per-step programs, built once per controller.

    Every receding-horizon step reuses the same constraint matrices and only
    swaps the right-hand sides (initialization windows, set-point/band
    windows) and, for the economic level, the price-weighted cost vector.
    """

    def __init__(self, blocks: HankelBlocks, cfg: ControllerConfig):
        if blocks.t_ini != cfg.t_ini:
            raise ValueError(
                f"blocks have t_ini={blocks.t_ini}, config wants {cfg.t_ini}"
            )
        expected_h = cfg.t_ini if cfg.mode == "segmented" else cfg.horizon
        if blocks.block_horizon != expected_h:
            raise ValueError(
                f"{cfg.mode} mode needs block horizon {expected_h}, "
                f"blocks have {blocks.block_horizon}"
            )
        self.blocks = blocks
        self.cfg = cfg
        m, p, L, N = blocks.n_inputs, blocks.n_outputs, cfg.t_ini, cfg.horizon
        S = blocks.block_horizon            # steps covered by one block
        F = cfg.n_segments
        q = blocks.n_columns
        self.m, self.p, self.L, self.N, self.S, self.F, self.q = m, p, L, N, S, F, q

        n_g = F * q
        n_ef = F * p * L
        n_ey = p * N
        self.n_vars = n_g + n_ef + n_ey
        self.ef_off = n_g
        self.ey_off = n_g + n_ef

        Ua, Ya = blocks.u_past, blocks.y_past
        Ub, Yb = blocks.u_future, blocks.y_future

        # --- equalities: initialization input match + segment input chaining
        eq = sp.lil_matrix((F * m * L, self.n_vars))
        eq[0 : m * L, 0:q] = Ua
        for i in range(1, F):
            r = i * m * L
            eq[r : r + m * L, i * q : (i + 1) * q] = Ua
            eq[r : r + m * L, (i - 1) * q : i * q] = -Ub
        self.eq = eq.tocsc()
        self.eq_rhs_template = np.zeros(F * m * L)

        # --- shared inequalities (present in every level)
        base = sp.lil_matrix(((2 * p * L) * F + n_ef, self.n_vars))
        r = 0
        # |Ya g_1 - y_ini| <= ef_1
        base[r : r + p * L, 0:q] = Ya
        base[r : r + p * L, self.ef_off : self.ef_off + p * L] = -sp.eye(p * L)
        r += p * L
        base[r : r + p * L, 0:q] = -Ya
        base[r : r + p * L, self.ef_off : self.ef_off + p * L] = -sp.eye(p * L)
        r += p * L
        # |Ya g_i - Yb g_{i-1}| <= ef_i for the chained segments
        for i in range(1, F):
            ef = self.ef_off + i * p * L
            for sign in (1.0, -1.0):
                base[r : r + p * L, i * q : (i + 1) * q] = sign * Ya
                base[r : r + p * L, (i - 1) * q : i * q] = -sign * Yb
                base[r : r + p * L, ef : ef + p * L] = -sp.eye(p * L)
                r += p * L
        # ef >= 0
        base[r : r + n_ef, self.ef_off : self.ef_off + n_ef] = -sp.eye(n_ef)
        r += n_ef
        self._n_abs_rows = r
        ineq_blocks = [base]
        ineq_rhs_parts = [np.zeros(r)]   # init rows overwritten per step
        self._y_ini_rows = (0, p * L)    # +y_ini then -y_ini

        # --- input / output bound rows for plan steps 0..N-1
        u_lo, u_hi = _per_step_bounds(cfg.input_bounds, m, N, "input_bounds")
        y_lo, y_hi = _per_step_bounds(cfg.output_bounds, p, N, "output_bounds")
        bound = sp.lil_matrix((0, self.n_vars))
        bound_rows = []
        bound_rhs = []
        for t in range(N):
            seg, lt = divmod(t, S)
            u_row = Ub[lt * m : (lt + 1) * m, :]
            y_row = Yb[lt * p : (lt + 1) * p, :]
            for ch in range(m):
                if np.isfinite(u_hi[ch, t]):
                    bound_rows.append((seg, u_row[ch], 1.0))
                    bound_rhs.append(u_hi[ch, t])
                if np.isfinite(u_lo[ch, t]):
                    bound_rows.append((seg, u_row[ch], -1.0))
                    bound_rhs.append(-u_lo[ch, t])
            for ch in range(p):
                if np.isfinite(y_hi[ch, t]):
                    bound_rows.append((seg, y_row[ch], 1.0))
                    bound_rhs.append(y_hi[ch, t])
                if np.isfinite(y_lo[ch, t]):
                    bound_rows.append((seg, y_row[ch], -1.0))
                    bound_rhs.append(-y_lo[ch, t])
        if bound_rows:
            bound = sp.lil_matrix((len(bound_rows), self.n_vars))
            for k, (seg, row, sign) in enumerate(bound_rows):
                bound[k, seg * q : (seg + 1) * q] = sign * row
        ineq_blocks.append(bound)
        ineq_rhs_parts.append(np.asarray(bound_rhs, dtype=float))

        self.ineq_l1 = sp.vstack(ineq_blocks).tocsc()
        self.ineq_l1_rhs_template = np.concatenate(ineq_rhs_parts)

        # --- set-point / band deviation rows (level 2 and up)
        dev = sp.lil_matrix((2 * p * N + n_ey, self.n_vars))
        r = 0
        for sign in (1.0, -1.0):
            for t in range(N):
                seg, lt = divmod(t, S)
                y_row = Yb[lt * p : (lt + 1) * p, :]
                dev[r : r + p, seg * q : (seg + 1) * q] = sign * y_row
                ey = self.ey_off + t * p
                dev[r : r + p, ey : ey + p] = -sp.eye(p)
                r += p
        dev[r : r + n_ey, self.ey_off :] = -sp.eye(n_ey)
        self.ineq_l2 = sp.vstack([self.ineq_l1, dev.tocsc()]).tocsc()
        self._dev_rows = (self.ineq_l1.shape[0], 2 * p * N)

        # --- cost vectors and quadratics
        self.c_l1 = np.zeros(self.n_vars)
        self.c_l1[self.ef_off : self.ef_off + n_ef] = 1.0
        self.c_l2 = np.zeros(self.n_vars)
        self.c_l2[self.ey_off :] = 1.0
        self.lock_l2 = self.c_l2.copy()

        if cfg.lambda_g > 0:
            proj = fit_predictor(blocks).projection
            S_mat = np.eye(q) - proj
            W = S_mat.T @ S_mat
            W = 0.5 * (W + W.T)
            self.q_l2 = sp.block_diag(
                [cfg.lambda_g * W] * F + [sp.csc_matrix((n_ef + n_ey, n_ef + n_ey))]
            ).tocsc()
            gram_l3 = sp.identity(n_g) * cfg.lambda_g
            self.q_l3 = sp.block_diag(
                [gram_l3, sp.csc_matrix((n_ef + n_ey, n_ef + n_ey))]
            ).tocsc()
        else:
            self.q_l2 = None
            self.q_l3 = None

        if cfg.order_bound is not None:
            n_hat = cfg.order_bound
            if cfg.mode == "segmented":
                self.g_length_required = F * (m * (2 * L + n_hat) + n_hat)
            else:
                self.g_length_required = m * (L + N + n_hat) + n_hat
        else:
            self.g_length_required = None

    # -- per-step instantiation -------------------------------------------

    def _rhs_vectors(self, u_ini, y_ini):
        eq_rhs = self.eq_rhs_template.copy()
        eq_rhs[: self.m * self.L] = u_ini
        l1_rhs = self.ineq_l1_rhs_template.copy()
        a, n = self._y_ini_rows
        l1_rhs[a : a + n] = y_ini
        l1_rhs[a + n : a + 2 * n] = -y_ini
        return eq_rhs, l1_rhs

    def _level1(self, eq_rhs, l1_rhs) -> ConvexLevel:
        return ConvexLevel(
            n_variables=self.n_vars,
            linear_cost=self.c_l1,
            eq_matrix=self.eq,
            eq_rhs=eq_rhs,
            ineq_matrix=self.ineq_l1,
            ineq_rhs=l1_rhs,
            label="init-consistency",
            lock_floor=0.0,
        )

    def tracking_levels(self, u_ini, y_ini, y_sp):
        eq_rhs, l1_rhs = self._rhs_vectors(u_ini, y_ini)
        l2_rhs = np.concatenate([l1_rhs, y_sp, -y_sp, np.zeros(self.p * self.N)])
        l2 = ConvexLevel(
            n_variables=self.n_vars,
            linear_cost=self.c_l2,
            quadratic_cost=self.q_l2,
            eq_matrix=self.eq,
            eq_rhs=eq_rhs,
            ineq_matrix=self.ineq_l2,
            ineq_rhs=l2_rhs,
            label="tracking",
            lock_cost=self.lock_l2,
            lock_floor=0.0,
        )
        return [self._level1(eq_rhs, l1_rhs), l2]

    def economic_levels(self, u_ini, y_ini, lower, upper, prices):
        eq_rhs, l1_rhs = self._rhs_vectors(u_ini, y_ini)
        l2_rhs = np.concatenate([l1_rhs, upper, -lower, np.zeros(self.p * self.N)])
        l2 = ConvexLevel(
            n_variables=self.n_vars,
            linear_cost=self.c_l2,
            quadratic_cost=self.q_l2,
            eq_matrix=self.eq,
            eq_rhs=eq_rhs,
            ineq_matrix=self.ineq_l2,
            ineq_rhs=l2_rhs,
            label="comfort",
            lock_cost=self.lock_l2,
            lock_floor=0.0,
        )
        eta = self.cfg.economic.efficiency
        c3 = np.zeros(self.n_vars)
        Ub = self.blocks.u_future
        for seg in range(self.F):
            w = np.zeros(self.m * self.S)
            for lt in range(self.S):
                t = seg * self.S + lt
                if t < self.N:
                    w[lt * self.m : (lt + 1) * self.m] = eta * prices[t]
            c3[seg * self.q : (seg + 1) * self.q] = Ub.T @ w
        # The energy term is solved in price-normalized units: actuation
        # decisions depend on the *shape* of the price profile, not on the
        # currency it happens to be quoted in, so quoting the same tariff in
        # pence instead of pounds leaves the closed loop bit-for-bit
        # unchanged and only rescales the reported cost.  Normalization also
        # keeps the gradient O(1) next to the lock rows, where the raw
        # price-times-power magnitudes would cost the solver absolute
        # accuracy.  The regularization weight applies on the normalized
        # scale; the run log's predicted cost is computed from the plan
        # directly and is unaffected.
        scale = float(np.abs(c3).max()) or 1.0
        l3 = ConvexLevel(
            n_variables=self.n_vars,
            linear_cost=c3 / scale,
            quadratic_cost=self.q_l3,
            eq_matrix=self.eq,
            eq_rhs=eq_rhs,
            ineq_matrix=self.ineq_l2,
            ineq_rhs=l2_rhs,
            label="energy-cost",
        )
        return [self._level1(eq_rhs, l1_rhs), l2, l3]

    def problem(self, levels) -> ControlProblem:
        return ControlProblem(
            levels=levels,
            n_segments=self.F,
            n_columns=self.q,
            t_ini=self.L,
            horizon=self.N,
            n_inputs=self.m,
            n_outputs=self.p,
            u_future_block=self.blocks.u_future,
            y_future_block=self.blocks.y_future,
            g_length_required=self.g_length_required,
        )


class _CondensedStructure:
    """The same per-step programs posed over trajectory windows.

    Every constraint and cost of the weight-space program touches a
    segment's weights ``g_i`` only through the stacked block map
    ``w_i = [U_p; Y_p; U_f; Y_f] g_i``, so the programs can be condensed to
    the windows ``w_i`` without changing any achieved objective, lock, plan
    or slack (the two assemblies are cross-checked in the test suite):

    * every dense Hankel row (initialization match, chaining, bounds,
      deviations) becomes a one- or two-entry selector row on ``w``;
    * rows spanning the left null space of the stack pin ``w_i`` to the
      image of the training data — they only appear when the stack is rank
      deficient, e.g. on noise-free records;
    * the level-2 consistency penalty ``||(I - P) g||^2`` is minimized in
      closed form over the weights realizing a given window, leaving a
      quadratic in ``w_i`` assembled from the stack's SVD, and the
      ``||g||^2`` term of the economic level reduces to the minimum-norm
      weights ``||H^+ w_i||^2``.

    The payoff is that the interior-point solver factors small
    mostly-sparse systems instead of programs with hundreds of dense
    Hankel rows; receding-horizon loops get one to two orders of magnitude
    faster with unchanged semantics.
    """

    def __init__(self, blocks: HankelBlocks, cfg: ControllerConfig):
        if blocks.t_ini != cfg.t_ini:
            raise ValueError(
                f"blocks have t_ini={blocks.t_ini}, config wants {cfg.t_ini}"
            )
        expected_h = cfg.t_ini if cfg.mode == "segmented" else cfg.horizon
        if blocks.block_horizon != expected_h:
            raise ValueError(
                f"{cfg.mode} mode needs block horizon {expected_h}, "
                f"blocks have {blocks.block_horizon}"
            )
        self.blocks = blocks
        self.cfg = cfg
        m, p, L, N = blocks.n_inputs, blocks.n_outputs, cfg.t_ini, cfg.horizon
        S = blocks.block_horizon
        F = cfg.n_segments
        q = blocks.n_columns
        self.m, self.p, self.L, self.N, self.S, self.F, self.q = m, p, L, N, S, F, q

        # window layout within one segment
        rho = (m + p) * (L + S)
        self.rho = rho
        self.o_ua = 0
        self.o_ya = m * L
        self.o_ub = (m + p) * L
        self.o_yb = (m + p) * L + m * S

        n_w = F * rho
        n_ef = F * p * L
        n_ey = p * N
        self.n_vars = n_w + n_ef + n_ey
        self.ef_off = n_w
        self.ey_off = n_w + n_ef

        H = np.vstack(
            [blocks.u_past, blocks.y_past, blocks.u_future, blocks.y_future]
        )
        U, sing, _vt = np.linalg.svd(H, full_matrices=True)
        cut = sing[0] * max(H.shape) * np.finfo(float).eps if sing.size else 0.0
        r = int((sing > cut).sum())
        self.stack_rank = r
        Ur, sr = U[:, :r], sing[:r]
        Vr = _vt[:r].T
        null_rows = U[:, r:].T          # (rho - r, rho); empty on noisy data

        # --- equalities: initialization inputs, segment input chaining,
        # --- then data-image membership for every window
        eq = sp.lil_matrix((F * m * L + F * null_rows.shape[0], self.n_vars))
        eq[0 : m * L, self.o_ua : self.o_ua + m * L] = sp.eye(m * L)
        for i in range(1, F):
            rr = i * m * L
            eq[rr : rr + m * L, i * rho + self.o_ua : i * rho + self.o_ua + m * L] = sp.eye(m * L)
            eq[rr : rr + m * L, (i - 1) * rho + self.o_ub : (i - 1) * rho + self.o_ub + m * L] = -sp.eye(m * L)
        if null_rows.shape[0]:
            base_r = F * m * L
            for i in range(F):
                rr = base_r + i * null_rows.shape[0]
                eq[rr : rr + null_rows.shape[0], i * rho : (i + 1) * rho] = null_rows
        self.eq = eq.tocsc()
        self.eq_rhs_template = np.zeros(eq.shape[0])

        # --- shared inequalities, same row order as the weight-space build
        base = sp.lil_matrix(((2 * p * L) * F + n_ef, self.n_vars))
        rr = 0
        # |w_1[y_ini] - y_ini| <= ef_1
        for sign in (1.0, -1.0):
            base[rr : rr + p * L, self.o_ya : self.o_ya + p * L] = sign * sp.eye(p * L)
            base[rr : rr + p * L, self.ef_off : self.ef_off + p * L] = -sp.eye(p * L)
            rr += p * L
        # |w_i[y_ini] - w_{i-1}[y_f]| <= ef_i for the chained segments
        for i in range(1, F):
            ef = self.ef_off + i * p * L
            for sign in (1.0, -1.0):
                base[rr : rr + p * L, i * rho + self.o_ya : i * rho + self.o_ya + p * L] = sign * sp.eye(p * L)
                base[rr : rr + p * L, (i - 1) * rho + self.o_yb : (i - 1) * rho + self.o_yb + p * L] = -sign * sp.eye(p * L)
                base[rr : rr + p * L, ef : ef + p * L] = -sp.eye(p * L)
                rr += p * L
        # ef >= 0
        base[rr : rr + n_ef, self.ef_off : self.ef_off + n_ef] = -sp.eye(n_ef)
        rr += n_ef
        ineq_blocks = [base]
        ineq_rhs_parts = [np.zeros(rr)]
        self._y_ini_rows = (0, p * L)

        # --- input / output bound rows for plan steps 0..N-1
        u_lo, u_hi = _per_step_bounds(cfg.input_bounds, m, N, "input_bounds")
        y_lo, y_hi = _per_step_bounds(cfg.output_bounds, p, N, "output_bounds")
        bound_cols = []
        bound_signs = []
        bound_rhs = []
        for t in range(N):
            seg, lt = divmod(t, S)
            for ch in range(m):
                col = seg * rho + self.o_ub + lt * m + ch
                if np.isfinite(u_hi[ch, t]):
                    bound_cols.append(col); bound_signs.append(1.0); bound_rhs.append(u_hi[ch, t])
                if np.isfinite(u_lo[ch, t]):
                    bound_cols.append(col); bound_signs.append(-1.0); bound_rhs.append(-u_lo[ch, t])
            for ch in range(p):
                col = seg * rho + self.o_yb + lt * p + ch
                if np.isfinite(y_hi[ch, t]):
                    bound_cols.append(col); bound_signs.append(1.0); bound_rhs.append(y_hi[ch, t])
                if np.isfinite(y_lo[ch, t]):
                    bound_cols.append(col); bound_signs.append(-1.0); bound_rhs.append(-y_lo[ch, t])
        bound = sp.csr_matrix(
            (bound_signs, (np.arange(len(bound_cols)), bound_cols)),
            shape=(len(bound_cols), self.n_vars),
        )
        ineq_blocks.append(bound)
        ineq_rhs_parts.append(np.asarray(bound_rhs, dtype=float))

        self.ineq_l1 = sp.vstack(ineq_blocks).tocsc()
        self.ineq_l1_rhs_template = np.concatenate(ineq_rhs_parts)

        # --- set-point / band deviation rows (level 2 and up)
        dev = sp.lil_matrix((2 * p * N + n_ey, self.n_vars))
        rr = 0
        for sign in (1.0, -1.0):
            for t in range(N):
                seg, lt = divmod(t, S)
                for ch in range(p):
                    dev[rr, seg * rho + self.o_yb + lt * p + ch] = sign
                    dev[rr, self.ey_off + t * p + ch] = -1.0
                    rr += 1
        dev[rr : rr + n_ey, self.ey_off :] = -sp.eye(n_ey)
        self.ineq_l2 = sp.vstack([self.ineq_l1, dev.tocsc()]).tocsc()

        # --- cost vectors and quadratics
        self.c_l1 = np.zeros(self.n_vars)
        self.c_l1[self.ef_off : self.ef_off + n_ef] = 1.0
        self.c_l2 = np.zeros(self.n_vars)
        self.c_l2[self.ey_off :] = 1.0
        self.lock_l2 = self.c_l2.copy()

        if cfg.lambda_g > 0:
            proj = fit_predictor(blocks).projection
            resid = np.eye(q) - proj
            # penalty after minimizing over the weights that realize a
            # window: || row-space restriction of (I - P) H^+ w ||^2
            C = Vr.T @ resid @ Vr
            D = C * (1.0 / sr)[np.newaxis, :]
            core2 = Ur @ (D.T @ D) @ Ur.T
            core2 = 0.5 * (core2 + core2.T)
            core3 = Ur @ ((1.0 / sr**2)[:, np.newaxis] * Ur.T)
            core3 = 0.5 * (core3 + core3.T)
            self.q_l2 = sp.block_diag(
                [cfg.lambda_g * core2] * F
                + [sp.csc_matrix((n_ef + n_ey, n_ef + n_ey))]
            ).tocsc()
            self.q_l3 = sp.block_diag(
                [cfg.lambda_g * core3] * F
                + [sp.csc_matrix((n_ef + n_ey, n_ef + n_ey))]
            ).tocsc()
        else:
            self.q_l2 = None
            self.q_l3 = None

        if cfg.order_bound is not None:
            n_hat = cfg.order_bound
            if cfg.mode == "segmented":
                self.g_length_required = F * (m * (2 * L + n_hat) + n_hat)
            else:
                self.g_length_required = m * (L + N + n_hat) + n_hat
        else:
            self.g_length_required = None

    # -- per-step instantiation -------------------------------------------

    def _rhs_vectors(self, u_ini, y_ini):
        eq_rhs = self.eq_rhs_template.copy()
        eq_rhs[: self.m * self.L] = u_ini
        l1_rhs = self.ineq_l1_rhs_template.copy()
        a, n = self._y_ini_rows
        l1_rhs[a : a + n] = y_ini
        l1_rhs[a + n : a + 2 * n] = -y_ini
        return eq_rhs, l1_rhs

    def _level1(self, eq_rhs, l1_rhs) -> ConvexLevel:
        return ConvexLevel(
            n_variables=self.n_vars,
            linear_cost=self.c_l1,
            eq_matrix=self.eq,
            eq_rhs=eq_rhs,
            ineq_matrix=self.ineq_l1,
            ineq_rhs=l1_rhs,
            label="init-consistency",
            lock_floor=0.0,
        )

    def tracking_levels(self, u_ini, y_ini, y_sp):
        eq_rhs, l1_rhs = self._rhs_vectors(u_ini, y_ini)
        l2_rhs = np.concatenate([l1_rhs, y_sp, -y_sp, np.zeros(self.p * self.N)])
        l2 = ConvexLevel(
            n_variables=self.n_vars,
            linear_cost=self.c_l2,
            quadratic_cost=self.q_l2,
            eq_matrix=self.eq,
            eq_rhs=eq_rhs,
            ineq_matrix=self.ineq_l2,
            ineq_rhs=l2_rhs,
            label="tracking",
            lock_cost=self.lock_l2,
            lock_floor=0.0,
        )
        return [self._level1(eq_rhs, l1_rhs), l2]

    def economic_levels(self, u_ini, y_ini, lower, upper, prices):
        eq_rhs, l1_rhs = self._rhs_vectors(u_ini, y_ini)
        l2_rhs = np.concatenate([l1_rhs, upper, -lower, np.zeros(self.p * self.N)])
        l2 = ConvexLevel(
            n_variables=self.n_vars,
            linear_cost=self.c_l2,
            quadratic_cost=self.q_l2,
            eq_matrix=self.eq,
            eq_rhs=eq_rhs,
            ineq_matrix=self.ineq_l2,
            ineq_rhs=l2_rhs,
            label="comfort",
            lock_cost=self.lock_l2,
            lock_floor=0.0,
        )
        eta = self.cfg.economic.efficiency
        c3 = np.zeros(self.n_vars)
        Ub = self.blocks.u_future
        # normalization matches the weight-space gradient so both
        # assemblies solve the identical program (see that build for why
        # the price term is normalized at all)
        scale = 0.0
        for seg in range(self.F):
            w = np.zeros(self.m * self.S)
            for lt in range(self.S):
                t = seg * self.S + lt
                if t < self.N:
                    w[lt * self.m : (lt + 1) * self.m] = eta * prices[t]
            c3[seg * self.rho + self.o_ub : seg * self.rho + self.o_yb] = w
            if w.any():
                scale = max(scale, float(np.abs(Ub.T @ w).max()))
        scale = scale or 1.0
        l3 = ConvexLevel(
            n_variables=self.n_vars,
            linear_cost=c3 / scale,
            quadratic_cost=self.q_l3,
            eq_matrix=self.eq,
            eq_rhs=eq_rhs,
            ineq_matrix=self.ineq_l2,
            ineq_rhs=l2_rhs,
            label="energy-cost",
        )
        return [self._level1(eq_rhs, l1_rhs), l2, l3]

    def problem(self, levels) -> ControlProblem:
        return _CondensedProblem(
            levels=levels,
            n_segments=self.F,
            n_columns=self.q,
            t_ini=self.L,
            horizon=self.N,
            n_inputs=self.m,
            n_outputs=self.p,
            u_future_block=self.blocks.u_future,
            y_future_block=self.blocks.y_future,
            g_length_required=self.g_length_required,
            w_rows=self.rho,
            block_steps=self.S,
            u_plan_offset=self.o_ub,
            y_plan_offset=self.o_yb,
        )


def _ini_windows(state, cfg: ControllerConfig, m: int, p: int):
    if isinstance(state, ControllerState):
        return state.u_ini(), state.y_ini()
    u_ini, y_ini = state
    u_ini = np.asarray(u_ini, dtype=float).ravel()
    y_ini = np.asarray(y_ini, dtype=float).ravel()
    if u_ini.size != m * cfg.t_ini or y_ini.size != p * cfg.t_ini:
        raise ValueError("initialization windows do not match t_ini")
    return u_ini, y_ini


def _flat_window(x, channels: int, n_steps: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2:
        if arr.shape != (channels, n_steps):
            raise ValueError(f"{name} must have shape ({channels}, {n_steps})")
        return arr.T.ravel()
    arr = arr.ravel()
    if arr.size == n_steps and channels == 1:
        return arr
    if arr.size != channels * n_steps:
        raise ValueError(f"{name} must have {channels * n_steps} entries, got {arr.size}")
    return arr


def assemble_tracking(blocks: HankelBlocks, cfg: ControllerConfig, state, y_sp) -> ControlProblem:
    """Build the two-level tracking program for one initialization window.

    ``state`` is a warm :class:`ControllerState` or an ``(u_ini, y_ini)``
    pair; ``y_sp`` is the set-point window over the horizon (``(p, N)`` or
    flat).  See the module docstring for the constraint layout.
    """
    struct = _ProblemStructure(blocks, cfg)
    u_ini, y_ini = _ini_windows(state, cfg, struct.m, struct.p)
    sp_flat = _flat_window(y_sp, struct.p, struct.N, "y_sp")
    return struct.problem(struct.tracking_levels(u_ini, y_ini, sp_flat))


def assemble_economic(
    blocks: HankelBlocks,
    cfg: ControllerConfig,
    state,
    band_lower,
    band_upper,
    prices=None,
) -> ControlProblem:
    """Build the three-level economic program (comfort band plus price level).

    ``band_lower``/``band_upper`` are per-step comfort bounds over the
    horizon; deviation slack is charged outside the band only.  ``prices``
    defaults to the head of the configured price profile.
    """
    if cfg.economic is None:
        raise ValueError("economic config missing from ControllerConfig")
    struct = _ProblemStructure(blocks, cfg)
    u_ini, y_ini = _ini_windows(state, cfg, struct.m, struct.p)
    lower = _flat_window(band_lower, struct.p, struct.N, "band_lower")
    upper = _flat_window(band_upper, struct.p, struct.N, "band_upper")
    if np.any(lower > upper):
        raise ValueError("comfort band has lower > upper")
    if prices is None:
        prices = cfg.economic.prices
    prices = np.asarray(prices, dtype=float).ravel()
    if prices.size < struct.N:
        raise ValueError(f"price window shorter than horizon ({prices.size} < {struct.N})")
    return struct.problem(
        struct.economic_levels(u_ini, y_ini, lower, upper, prices[: struct.N])
    )


@dataclass(eq=False)
class StepResult:
    """One receding-horizon decision with its diagnostics."""

    u_applied: np.ndarray
    flagged: bool
    status: str
    level_objectives: list[float]
    lock_values: list[float]
    j1_at_final: float
    tracking_slack_at_final: float
    solve_time: float
    iterations: int
    input_plan: np.ndarray | None
    output_plan: np.ndarray | None
    predicted_cost: float | None = None


class Controller:
    """Receding-horizon engine: constant problem structure, per-step solves.

    The per-step programs are posed in the condensed trajectory-window form
    (see :class:`_CondensedStructure`) — an exact reduction of the
    weight-space programs that :func:`assemble_tracking` and
    :func:`assemble_economic` expose for inspection.
    """

    def __init__(self, blocks: HankelBlocks, cfg: ControllerConfig):
        self.cfg = cfg
        self._struct = _CondensedStructure(blocks, cfg)
        lo, hi = _per_step_bounds(
            cfg.input_bounds, self._struct.m, 1, "input_bounds"
        )
        self._u_lo, self._u_hi = lo[:, 0], hi[:, 0]
        # last (regularization, tolerance) that solved each level, reused as
        # the first attempt on later steps (the problem family barely changes
        # between receding-horizon steps)
        self._attempt_hints: dict[str, tuple[float | None, float]] = {}

    @property
    def n_inputs(self) -> int:
        return self._struct.m

    @property
    def n_outputs(self) -> int:
        return self._struct.p

    def make_problem(self, state, references) -> ControlProblem:
        struct = self._struct
        u_ini, y_ini = _ini_windows(state, self.cfg, struct.m, struct.p)
        if isinstance(references, ComfortBand):
            lower = _flat_window(references.lower, struct.p, struct.N, "band_lower")
            upper = _flat_window(references.upper, struct.p, struct.N, "band_upper")
            prices = references.prices
            if prices is None:
                if self.cfg.economic is None:
                    raise ValueError("economic references need prices or economic config")
                prices = self.cfg.economic.prices
            prices = np.asarray(prices, dtype=float).ravel()[: struct.N]
            levels = struct.economic_levels(u_ini, y_ini, lower, upper, prices)
        else:
            sp_flat = _flat_window(references, struct.p, struct.N, "y_sp")
            levels = struct.tracking_levels(u_ini, y_ini, sp_flat)
        return struct.problem(levels)

    def step(self, state, references) -> StepResult:
        """Solve the lexicographic stack and return the first planned input.

        On solver failure the previous applied input (clipped to bounds,
        zero before anything was applied) is returned with ``flagged=True``.
        """
        if isinstance(state, ControllerState) and not state.warm:
            raise NotWarmError(
                f"controller needs {state.t_ini} recorded samples before stepping"
            )
        problem = self.make_problem(state, references)
        prices = references.prices if isinstance(references, ComfortBand) else None
        hints = [self._attempt_hints.get(lv.label) for lv in problem.levels]
        try:
            sol = solve_lexicographic(
                problem.levels, lock_slack=self.cfg.lock_slack, attempt_hints=hints
            )
        except SolverFailure as exc:
            fallback = state.last_input() if isinstance(state, ControllerState) \
                else np.zeros(self._struct.m)
            fallback = np.clip(fallback, self._u_lo, self._u_hi)
            return StepResult(
                u_applied=fallback,
                flagged=True,
                status=exc.status,
                level_objectives=[],
                lock_values=[],
                j1_at_final=np.nan,
                tracking_slack_at_final=np.nan,
                solve_time=np.nan,
                iterations=0,
                input_plan=None,
                output_plan=None,
            )
        z = sol.values
        for lv, attempt in zip(problem.levels, sol.level_attempts):
            self._attempt_hints[lv.label] = attempt
        predicted_cost = None
        if isinstance(references, ComfortBand):
            eta = self.cfg.economic.efficiency if self.cfg.economic else 1.0
            if prices is None and self.cfg.economic is not None:
                prices = self.cfg.economic.prices
            price_win = np.asarray(prices, dtype=float).ravel()[: self._struct.N]
            u_plan = problem.input_plan(z).reshape(self._struct.N, self._struct.m)
            predicted_cost = float(eta * price_win @ u_plan.sum(axis=1))
        return StepResult(
            u_applied=problem.first_input(z),
            flagged=False,
            status="optimal",
            level_objectives=sol.level_objectives,
            lock_values=sol.lock_values,
            j1_at_final=problem.levels[0].objective_value(z),
            tracking_slack_at_final=float(np.abs(problem.tracking_slack(z)).sum()),
            solve_time=float(sum(sol.level_solve_times)),
            iterations=int(sum(sol.level_iterations)),
            input_plan=problem.input_plan(z),
            output_plan=problem.output_plan(z),
            predicted_cost=predicted_cost,
        )


def step(blocks: HankelBlocks, cfg: ControllerConfig, state, references) -> StepResult:
    """One-shot receding-horizon step (builds the problem structure afresh).

    Loops should use :class:`Controller`, which caches the constant matrices.
    """
    return Controller(blocks, cfg).step(state, references)


def _pad_window(profile: np.ndarray, k: int, n: int) -> np.ndarray:
    """Columns k..k+n-1 of a (channels, T) profile, edge-padded at the end."""
    T = profile.shape[1]
    idx = np.minimum(np.arange(k, k + n), T - 1)
    return profile[:, idx]


@dataclass(eq=False)
class RunLog:
    """Closed-loop record of one run (arrays indexed by step)."""

    inputs: np.ndarray            # (m, T) applied inputs
    outputs: np.ndarray           # (p, T) true plant outputs
    measured: np.ndarray          # (p, T) outputs as seen by the controller
    setpoint: np.ndarray | None   # (p, T) tracking target, if tracking
    band_lower: np.ndarray | None
    band_upper: np.ndarray | None
    prices: np.ndarray | None
    flags: np.ndarray             # (T,) bool, True = fallback step
    statuses: list[str]
    level_objectives: np.ndarray  # (T, 3), nan-padded
    lock_values: np.ndarray       # (T, 2), nan-padded
    j1_at_final: np.ndarray
    tracking_slack_at_final: np.ndarray
    solve_time: np.ndarray
    iterations: np.ndarray
    predicted_cost: np.ndarray
    warmup: int
    sample_period: float
    lock_slack: float
    disturbance_stream: np.ndarray | None = None
    noise_stream: np.ndarray | None = None

    @property
    def duration(self) -> int:
        return self.inputs.shape[1]

    def setpoint_error(self) -> float:
        """Total absolute set-point deviation after the warm-up phase."""
        if self.setpoint is None:
            raise ValueError("run has no tracking set-point")
        err = np.abs(self.outputs[:, self.warmup :] - self.setpoint[:, self.warmup :])
        return float(err.sum())

    def band_violation(self) -> float:
        """Total absolute comfort-band violation (output units x samples)."""
        if self.band_lower is None:
            raise ValueError("run has no comfort band")
        y = self.outputs[:, self.warmup :]
        lo = self.band_lower[:, self.warmup :]
        hi = self.band_upper[:, self.warmup :]
        viol = np.maximum(0.0, lo - y) + np.maximum(0.0, y - hi)
        return float(viol.sum())

    def flagged_steps(self) -> int:
        return int(self.flags.sum())

    def lock_violation(self) -> float:
        """Worst violation of the level-1 lock across solved steps (<= 0 when honored)."""
        ok = ~self.flags
        ok &= ~np.isnan(self.j1_at_final)
        if not ok.any():
            return float("-inf")
        j1 = self.level_objectives[ok, 0]
        bound = j1 + self.lock_slack * (1.0 + np.abs(j1))
        return float((self.j1_at_final[ok] - bound).max())

    def to_csv(self, path) -> None:
        """Per-step diagnostics table (one row per closed-loop step)."""
        import csv

        m, p = self.inputs.shape[0], self.outputs.shape[0]
        header = (
            ["step"]
            + [f"u{i+1}" for i in range(m)]
            + [f"y{i+1}" for i in range(p)]
            + [f"y_meas{i+1}" for i in range(p)]
            + ([f"y_sp{i+1}" for i in range(p)] if self.setpoint is not None else [])
            + (
                [f"band_lo{i+1}" for i in range(p)] + [f"band_hi{i+1}" for i in range(p)]
                if self.band_lower is not None
                else []
            )
            + (["price"] if self.prices is not None else [])
            + [
                "flagged", "status", "j1", "j2", "j3",
                "j1_at_final", "tracking_slack_final", "iterations",
                "predicted_cost",
            ]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(self.duration):
                row: list = [k]
                row += [f"{v:.17g}" for v in self.inputs[:, k]]
                row += [f"{v:.17g}" for v in self.outputs[:, k]]
                row += [f"{v:.17g}" for v in self.measured[:, k]]
                if self.setpoint is not None:
                    row += [f"{v:.17g}" for v in self.setpoint[:, k]]
                if self.band_lower is not None:
                    row += [f"{v:.17g}" for v in self.band_lower[:, k]]
                    row += [f"{v:.17g}" for v in self.band_upper[:, k]]
                if self.prices is not None:
                    row.append(f"{self.prices[k]:.17g}")
                row.append(int(self.flags[k]))
                row.append(self.statuses[k])
                row += [f"{v:.17g}" for v in self.level_objectives[k]]
                row.append(f"{self.j1_at_final[k]:.17g}")
                row.append(f"{self.tracking_slack_at_final[k]:.17g}")
                row.append(int(self.iterations[k]))
                row.append(f"{self.predicted_cost[k]:.17g}")
                writer.writerow(row)


def run_closed_loop(
    plant: PlantModel,
    blocks: HankelBlocks,
    cfg: ControllerConfig,
    duration: int,
    setpoint=None,
    band=None,
    prices=None,
    disturbance: SignalGen | Sequence[SignalGen] | None = None,
    noise: SignalGen | Sequence[SignalGen] | None = None,
    disturbance_seed=None,
    noise_seed=None,
    warmup_input: np.ndarray | None = None,
) -> RunLog:
    """Run the plant under receding-horizon control for ``duration`` steps.

    The first ``t_ini`` steps apply ``warmup_input`` (zero clipped to bounds
    by default) to fill the measurement buffers; the controller acts from
    step ``t_ini`` on.  Exactly one of ``setpoint`` (tracking) or ``band``
    (economic, ``(lower, upper)`` arrays with ``prices``) must be given;
    profiles are per-channel arrays over the full duration and are
    edge-padded when the horizon looks past the end.

    Measurement noise corrupts what the controller sees and records; the
    returned log keeps both the true and the measured outputs.
    """
    if (setpoint is None) == (band is None):
        raise ValueError("give exactly one of setpoint or band")
    m, p = plant.n_inputs, plant.n_outputs
    controller = Controller(blocks, cfg)
    state = ControllerState(cfg.t_ini, m, p)

    sp_profile = None
    lo_profile = hi_profile = None
    price_profile = None
    if setpoint is not None:
        sp_profile = np.atleast_2d(np.asarray(setpoint, dtype=float))
        if sp_profile.shape != (p, duration):
            raise ValueError(f"setpoint must have shape ({p}, {duration})")
    else:
        lo_profile = np.atleast_2d(np.asarray(band[0], dtype=float))
        hi_profile = np.atleast_2d(np.asarray(band[1], dtype=float))
        if lo_profile.shape != (p, duration) or hi_profile.shape != (p, duration):
            raise ValueError(f"band profiles must have shape ({p}, {duration})")
        if prices is None:
            raise ValueError("economic runs need a price profile")
        price_profile = np.asarray(prices, dtype=float).ravel()
        if price_profile.size != duration:
            raise ValueError("price profile must cover the full duration")

    def _streams(gen, channels, seed):
        if gen is None:
            return None
        gens = [gen] if isinstance(gen, SignalGen) else list(gen)
        if len(gens) != channels:
            raise ValueError(f"expected {channels} generators, got {len(gens)}")
        cols = []
        for i, g in enumerate(gens):
            s = seed if len(gens) == 1 else (None if seed is None else [*np.atleast_1d(seed).tolist(), i])
            cols.append(g.samples(duration, plant.sample_period, seed=s))
        return np.vstack(cols)

    d_stream = _streams(disturbance, plant.n_disturbances, disturbance_seed)
    e_stream = _streams(noise, p, noise_seed)

    if warmup_input is None:
        warmup_input = np.zeros(m)
    warmup_input = np.asarray(warmup_input, dtype=float).reshape(m)
    u_lo, u_hi = _per_step_bounds(cfg.input_bounds, m, 1, "input_bounds")
    warmup_input = np.clip(warmup_input, u_lo[:, 0], u_hi[:, 0])

    inputs = np.zeros((m, duration))
    outputs = np.zeros((p, duration))
    measured = np.zeros((p, duration))
    flags = np.zeros(duration, dtype=bool)
    statuses: list[str] = []
    level_obj = np.full((duration, 3), np.nan)
    lock_vals = np.full((duration, 2), np.nan)
    j1_final = np.full(duration, np.nan)
    slack_final = np.full(duration, np.nan)
    solve_time = np.full(duration, np.nan)
    iterations = np.zeros(duration, dtype=int)
    predicted_cost = np.full(duration, np.nan)

    N = cfg.horizon
    for k in range(duration):
        if not state.warm:
            u = warmup_input
            statuses.append("warmup")
        else:
            if sp_profile is not None:
                refs = _pad_window(sp_profile, k, N).T.ravel()
            else:
                refs = ComfortBand(
                    lower=_pad_window(lo_profile, k, N),
                    upper=_pad_window(hi_profile, k, N),
                    prices=_pad_window(price_profile[np.newaxis, :], k, N)[0],
                )
            result = controller.step(state, refs)
            u = result.u_applied
            flags[k] = result.flagged
            statuses.append(result.status)
            if not result.flagged:
                for i, v in enumerate(result.level_objectives[:3]):
                    level_obj[k, i] = v
                for i, v in enumerate(result.lock_values[:2]):
                    lock_vals[k, i] = v
                j1_final[k] = result.j1_at_final
                slack_final[k] = result.tracking_slack_at_final
                solve_time[k] = result.solve_time
                iterations[k] = result.iterations
                if result.predicted_cost is not None:
                    predicted_cost[k] = result.predicted_cost
        y_true = simulate_step(
            plant, u, disturbance=None if d_stream is None else d_stream[:, k]
        )
        y_meas = y_true if e_stream is None else y_true + e_stream[:, k]
        state.record(u, y_meas)
        inputs[:, k] = u
        outputs[:, k] = y_true
        measured[:, k] = y_meas

    return RunLog(
        inputs=inputs,
        outputs=outputs,
        measured=measured,
        setpoint=sp_profile,
        band_lower=lo_profile,
        band_upper=hi_profile,
        prices=price_profile,
        flags=flags,
        statuses=statuses,
        level_objectives=level_obj,
        lock_values=lock_vals,
        j1_at_final=j1_final,
        tracking_slack_at_final=slack_final,
        solve_time=solve_time,
        iterations=iterations,
        predicted_cost=predicted_cost,
        warmup=cfg.t_ini,
        sample_period=plant.sample_period,
        lock_slack=cfg.lock_slack,
        disturbance_stream=d_stream,
        noise_stream=e_stream,
    )
