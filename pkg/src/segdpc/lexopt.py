"""Lexicographic (prioritized) convex optimization over a sparse conic solver.

Levels are solved in priority order; after each level its achieved objective
is frozen with a lock constraint (a small relative slack keeps the lock
numerically feasible) before the next level is solved.  Objectives follow the
``z' Q z + c' z`` convention.  The backend is Clarabel, a sparse
interior-point conic solver; every solution is re-checked against its KKT
conditions before being accepted.
"""

from __future__ import annotations

import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

import clarabel

__all__ = [
    "ConvexLevel",
    "LevelResult",
    "LexSolution",
    "SolverFailure",
    "InfeasibleLevelError",
    "UnboundedLevelError",
    "solve_qp",
    "solve_lexicographic",
    "kkt_residual",
    "dump_problem",
    "DEFAULT_LOCK_SLACK",
]

DEFAULT_LOCK_SLACK = 1e-7
DEFAULT_KKT_TOL = 1e-6


class SolverFailure(RuntimeError):
    """A level did not reach a verified optimal solution."""

    def __init__(self, message: str, label: str = "", status: str = "failed"):
        super().__init__(message)
        self.label = label
        self.status = status


class InfeasibleLevelError(SolverFailure):
    def __init__(self, label: str):
        super().__init__(f"level '{label}' is infeasible", label, "infeasible")


class UnboundedLevelError(SolverFailure):
    def __init__(self, label: str):
        super().__init__(f"level '{label}' is unbounded", label, "unbounded")


def _to_csc(matrix, n_vars: int, name: str) -> sp.csc_matrix:
    if matrix is None:
        return sp.csc_matrix((0, n_vars))
    M = sp.csc_matrix(matrix)
    if M.shape[1] != n_vars:
        raise ValueError(f"{name} has {M.shape[1]} columns, expected {n_vars}")
    return M


@dataclass(eq=False)
class ConvexLevel:
    """One priority level: ``min z' Q z + c' z`` over shared variables ``z``.

    Equalities are ``A z = b``, inequalities ``G z <= h``.  ``lock_cost``
    names the linear functional frozen for later levels; it defaults to the
    objective when the objective is purely linear.  Levels with a quadratic
    objective that are followed by further levels must set ``lock_cost``
    explicitly (only linear functionals can be locked).
    """

    n_variables: int
    linear_cost: np.ndarray
    quadratic_cost: sp.csc_matrix | None = None
    eq_matrix: sp.csc_matrix | None = None
    eq_rhs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ineq_matrix: sp.csc_matrix | None = None
    ineq_rhs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    label: str = ""
    lock_cost: np.ndarray | None = None
    # Known lower bound of the lock functional over the feasible set (0 for a
    # sum of nonnegative slacks).  The solver can report an achieved value a
    # hair below the attainable minimum; without the floor that value would
    # turn into an infeasible lock constraint for the next level.
    lock_floor: float | None = None

    def __post_init__(self) -> None:
        n = int(self.n_variables)
        if n < 1:
            raise ValueError("n_variables must be >= 1")
        self.linear_cost = np.asarray(self.linear_cost, dtype=float).reshape(n)
        if self.quadratic_cost is not None:
            self.quadratic_cost = sp.csc_matrix(self.quadratic_cost)
            if self.quadratic_cost.shape != (n, n):
                raise ValueError("quadratic_cost must be n x n")
            if self.quadratic_cost.nnz == 0:
                self.quadratic_cost = None
        self.eq_matrix = _to_csc(self.eq_matrix, n, "eq_matrix")
        self.ineq_matrix = _to_csc(self.ineq_matrix, n, "ineq_matrix")
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).reshape(self.eq_matrix.shape[0])
        self.ineq_rhs = np.asarray(self.ineq_rhs, dtype=float).reshape(
            self.ineq_matrix.shape[0]
        )
        if self.lock_cost is not None:
            self.lock_cost = np.asarray(self.lock_cost, dtype=float).reshape(n)

    @property
    def is_linear(self) -> bool:
        return self.quadratic_cost is None

    def objective_value(self, z: np.ndarray) -> float:
        val = float(self.linear_cost @ z)
        if self.quadratic_cost is not None:
            val += float(z @ (self.quadratic_cost @ z))
        return val

    def lock_vector(self) -> np.ndarray:
        if self.lock_cost is not None:
            return self.lock_cost
        if self.is_linear:
            return self.linear_cost
        raise ValueError(
            f"level '{self.label}' has a quadratic objective and no lock_cost; "
            "only linear functionals can be locked for later levels"
        )

    def validate(self, psd_tol: float = 1e-8) -> None:
        """Check symmetry and positive semidefiniteness of the quadratic cost.

        Dense eigenvalue check — intended for tests and small problems, not
        the per-step hot path.
        """
        if self.quadratic_cost is None:
            return
        Q = self.quadratic_cost.toarray()
        scale = 1.0 + np.abs(Q).max()
        if np.abs(Q - Q.T).max() > psd_tol * scale:
            raise ValueError(f"level '{self.label}': quadratic_cost is not symmetric")
        min_eig = float(np.linalg.eigvalsh(0.5 * (Q + Q.T)).min())
        if min_eig < -psd_tol * scale:
            raise ValueError(
                f"level '{self.label}': quadratic_cost has negative eigenvalue {min_eig:g}"
            )


@dataclass(eq=False)
class LevelResult:
    values: np.ndarray
    objective: float
    status: str
    solve_time: float
    iterations: int
    kkt_residual: float
    attempt: tuple[float | None, float] | None = None


@dataclass(eq=False)
class LexSolution:
    """Final variables plus per-level bookkeeping of a lexicographic solve."""

    values: np.ndarray
    level_objectives: list[float]
    level_statuses: list[str]
    level_solve_times: list[float]
    level_iterations: list[int]
    lock_values: list[float]
    level_attempts: list[tuple[float | None, float] | None] = field(default_factory=list)


# "Almost" infeasibility/unboundedness is not treated as a certificate: on
# degenerate-but-feasible programs (tight lexicographic locks plus saturated
# bounds) the solver can emit it spuriously, and a regularized retry usually
# converges.  Only the exact statuses short-circuit the retry ladder.
_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "failed",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "failed",
    "MaxIterations": "max-iter",
    "MaxTime": "max-iter",
}


def kkt_residual(
    level: ConvexLevel,
    values: np.ndarray,
    eq_duals: np.ndarray,
    ineq_duals: np.ndarray,
    extra_ineq: sp.csc_matrix | None = None,
    extra_rhs: np.ndarray | None = None,
    extra_duals: np.ndarray | None = None,
) -> float:
    """Max relative violation of the KKT conditions at a candidate point.

    Covers stationarity, primal feasibility of both constraint families,
    dual nonnegativity and complementary slackness.  Extra inequality rows
    (the lexicographic locks) are folded in when supplied.
    """
    z = np.asarray(values, dtype=float)
    c = level.linear_cost
    grad = c.copy()
    scale = 1.0 + float(np.abs(c).max(initial=0.0))
    if level.quadratic_cost is not None:
        qz = 2.0 * (level.quadratic_cost @ z)
        grad = grad + qz
        scale += float(np.abs(qz).max(initial=0.0))
    G = level.ineq_matrix
    h = level.ineq_rhs
    mu = np.asarray(ineq_duals, dtype=float)
    if extra_ineq is not None and extra_ineq.shape[0] > 0:
        G = sp.vstack([G, extra_ineq]).tocsc()
        h = np.concatenate([h, extra_rhs])
        mu = np.concatenate([mu, extra_duals])
    if level.eq_matrix.shape[0] > 0:
        at_nu = level.eq_matrix.T @ np.asarray(eq_duals, dtype=float)
        grad = grad + at_nu
        scale += float(np.abs(at_nu).max(initial=0.0))
    if G.shape[0] > 0:
        gt_mu = G.T @ mu
        grad = grad + gt_mu
        scale += float(np.abs(gt_mu).max(initial=0.0))
    res = float(np.abs(grad).max(initial=0.0)) / scale
    if level.eq_matrix.shape[0] > 0:
        eq_viol = np.abs(level.eq_matrix @ z - level.eq_rhs)
        res = max(res, float(eq_viol.max()) / (1.0 + float(np.abs(level.eq_rhs).max())))
    if G.shape[0] > 0:
        slack = h - G @ z
        res = max(res, float(np.maximum(-slack, 0.0).max()) / (1.0 + float(np.abs(h).max())))
        mu_scale = 1.0 + float(np.abs(mu).max(initial=0.0))
        res = max(res, float(np.maximum(-mu, 0.0).max(initial=0.0)) / mu_scale)
        # pointwise complementarity, relative to the size of each pair so a
        # tight active constraint with a large multiplier is judged by its
        # feasibility accuracy rather than by the raw product
        comp = np.abs(mu * slack) / (1.0 + np.abs(mu) + np.abs(slack))
        res = max(res, float(comp.max(initial=0.0)))
    return res


# Retry ladder: (static regularization, solver tolerance) pairs tried in
# order.  Stronger diagonal regularization of the interior-point KKT system
# rescues degenerate programs (flat optimal faces, zero right-hand sides) on
# which the factorization stalls; standard-tolerance rungs catch problems
# where the tight targets are simply unattainable and the solver would churn
# to its iteration limit instead of returning its (perfectly adequate)
# iterate.  Every accepted solution passes the same KKT verification.
_TIGHT_TOL = 1e-10
_STANDARD_TOL = 1e-8
_ATTEMPT_LADDER = (
    (None, _TIGHT_TOL),
    (1e-7, _TIGHT_TOL),
    (1e-6, _TIGHT_TOL),
    (None, _STANDARD_TOL),
    (1e-6, _STANDARD_TOL),
    (1e-5, _STANDARD_TOL),
)


def _solve_conic(
    level: ConvexLevel,
    extra_ineq: sp.csc_matrix | None,
    extra_rhs: np.ndarray | None,
    max_iter: int | None,
    static_reg: float | None = None,
    tol: float = _TIGHT_TOL,
) -> tuple[str, np.ndarray | None, float, int, float]:
    n = level.n_variables
    if level.quadratic_cost is not None:
        P = sp.triu(2.0 * level.quadratic_cost).tocsc()
    else:
        P = sp.csc_matrix((n, n))
    G = level.ineq_matrix
    h = level.ineq_rhs
    if extra_ineq is not None and extra_ineq.shape[0] > 0:
        G = sp.vstack([G, extra_ineq]).tocsc()
        h = np.concatenate([h, extra_rhs])
    n_eq, n_ineq = level.eq_matrix.shape[0], G.shape[0]
    A = sp.vstack([level.eq_matrix, G]).tocsc()
    b = np.concatenate([level.eq_rhs, h])
    cones = []
    if n_eq:
        cones.append(clarabel.ZeroConeT(n_eq))
    if n_ineq:
        cones.append(clarabel.NonnegativeConeT(n_ineq))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    # Defaults (1e-8) leave KKT residuals hovering around the verification
    # threshold; tighter targets cost a few interior-point iterations on
    # problems this size and keep lock rows honored to well below the slack.
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    if static_reg is not None:
        settings.static_regularization_constant = static_reg
    if max_iter is not None:
        settings.max_iter = max_iter
    solver = clarabel.DefaultSolver(P, level.linear_cost, A, b, cones, settings)
    t0 = time.perf_counter()
    sol = solver.solve()
    elapsed = time.perf_counter() - t0
    status = _STATUS_MAP.get(str(sol.status), "failed")
    if status != "optimal":
        return status, None, elapsed, int(sol.iterations), np.inf
    x = np.asarray(sol.x)
    duals = np.asarray(sol.z)
    res = kkt_residual(
        level,
        x,
        duals[:n_eq],
        duals[n_eq : n_eq + level.ineq_matrix.shape[0]],
        extra_ineq=extra_ineq,
        extra_rhs=extra_rhs,
        extra_duals=duals[n_eq + level.ineq_matrix.shape[0] :],
    )
    return status, x, elapsed, int(sol.iterations), res


def solve_qp(
    level: ConvexLevel,
    warm_start: np.ndarray | None = None,
    extra_ineq: sp.csc_matrix | None = None,
    extra_rhs: np.ndarray | None = None,
    kkt_tol: float = DEFAULT_KKT_TOL,
    max_iter: int | None = None,
    attempt_hint: tuple[float | None, float] | None = None,
) -> LevelResult:
    """Solve one level (LP or QP) and verify its KKT conditions.

    ``warm_start`` is accepted for interface compatibility and ignored — the
    interior-point backend does not use initial points.  ``attempt_hint`` is
    a (regularization, tolerance) pair known to work for this problem family;
    it is moved to the front of the retry ladder so steady-state
    receding-horizon loops stop paying for failed attempts.  The accepted
    solution still has to pass the same KKT verification.

    Raises:
        InfeasibleLevelError / UnboundedLevelError / SolverFailure when no
        verified optimum is found.
    """
    del warm_start
    total_time = 0.0
    best: tuple[float, str] = (np.inf, "failed")
    ladder = _ATTEMPT_LADDER
    if attempt_hint is not None:
        ladder = (attempt_hint, *(a for a in ladder if a != attempt_hint))
    for static_reg, tol in ladder:
        status, x, elapsed, iters, res = _solve_conic(
            level, extra_ineq, extra_rhs, max_iter, static_reg, tol
        )
        total_time += elapsed
        if status == "infeasible":
            raise InfeasibleLevelError(level.label)
        if status == "unbounded":
            raise UnboundedLevelError(level.label)
        if status == "optimal" and res <= kkt_tol:
            return LevelResult(
                values=x,
                objective=level.objective_value(x),
                status=status,
                solve_time=total_time,
                iterations=iters,
                kkt_residual=res,
                attempt=(static_reg, tol),
            )
        best = min(best, (res, status))
    res, status = best
    if status != "optimal":
        raise SolverFailure(
            f"level '{level.label}' did not converge (status {status})",
            level.label,
            status,
        )
    raise SolverFailure(
        f"level '{level.label}': KKT residual {res:.3e} exceeds {kkt_tol:.1e}",
        level.label,
        "failed",
    )


def solve_lexicographic(
    levels: list[ConvexLevel],
    lock_slack: float = DEFAULT_LOCK_SLACK,
    kkt_tol: float = DEFAULT_KKT_TOL,
    max_iter: int | None = None,
    attempt_hints: Sequence[tuple[float | None, float] | None] | None = None,
) -> LexSolution:
    """Solve levels in priority order, locking each achieved objective.

    After level ``k`` is solved, the inequality
    ``lock_k' z <= lock_k' z_k* + lock_slack * (1 + |lock_k' z_k*|)``
    is guaranteed for every later level.  The row is enforced at half the
    slack so that the guarantee survives the solver's own feasibility
    residual on an active lock row.  Each level's own constraint set must
    already be complete; this routine adds only the lock rows.

    Returns the final level's variables together with all achieved
    objectives, statuses and lock reference values.
    """
    if not levels:
        raise ValueError("at least one level required")
    n = levels[0].n_variables
    for lv in levels[1:]:
        if lv.n_variables != n:
            raise ValueError("levels disagree on variable dimension")
    if attempt_hints is not None and len(attempt_hints) != len(levels):
        raise ValueError("attempt_hints length must match the number of levels")
    lock_rows: list[np.ndarray] = []
    lock_rhs: list[float] = []
    objectives: list[float] = []
    statuses: list[str] = []
    times: list[float] = []
    iterations: list[int] = []
    lock_values: list[float] = []
    attempts: list[tuple[float | None, float] | None] = []
    values = None
    for k, level in enumerate(levels):
        extra = sp.csc_matrix(np.vstack(lock_rows)) if lock_rows else None
        rhs = np.asarray(lock_rhs) if lock_rows else None
        result = solve_qp(
            level,
            extra_ineq=extra,
            extra_rhs=rhs,
            kkt_tol=kkt_tol,
            max_iter=max_iter,
            attempt_hint=None if attempt_hints is None else attempt_hints[k],
        )
        values = result.values
        objectives.append(result.objective)
        statuses.append(result.status)
        times.append(result.solve_time)
        iterations.append(result.iterations)
        attempts.append(result.attempt)
        if k < len(levels) - 1:
            lock = level.lock_vector()
            achieved = float(lock @ values)
            if level.lock_floor is not None:
                achieved = max(achieved, level.lock_floor)
            lock_values.append(achieved)
            lock_rows.append(lock)
            lock_rhs.append(achieved + 0.5 * lock_slack * (1.0 + abs(achieved)))
    return LexSolution(
        values=values,
        level_objectives=objectives,
        level_statuses=statuses,
        level_solve_times=times,
        level_iterations=iterations,
        lock_values=lock_values,
        level_attempts=attempts,
    )


def dump_problem(level: ConvexLevel, path: str | Path) -> None:
    """Write a plain-text serialization of a level for offline debugging.

    Sections list dimensions and sparse triplets (row, col, value) of each
    matrix plus the rhs vectors.
    """
    lines = [f"level {level.label or '(unnamed)'}", f"variables {level.n_variables}"]

    def triplets(name: str, M: sp.spmatrix | None) -> None:
        if M is None or M.shape[0] == 0:
            lines.append(f"{name} 0x0 nnz 0")
            return
        coo = sp.coo_matrix(M)
        lines.append(f"{name} {coo.shape[0]}x{coo.shape[1]} nnz {coo.nnz}")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            lines.append(f"  {i} {j} {v:.17g}")

    triplets("quadratic", level.quadratic_cost)
    lines.append(f"linear nnz {int(np.count_nonzero(level.linear_cost))}")
    for i in np.flatnonzero(level.linear_cost):
        lines.append(f"  {i} {level.linear_cost[i]:.17g}")
    triplets("equalities", level.eq_matrix)
    lines.append("eq_rhs " + " ".join(f"{v:.17g}" for v in level.eq_rhs))
    triplets("inequalities", level.ineq_matrix)
    lines.append("ineq_rhs " + " ".join(f"{v:.17g}" for v in level.ineq_rhs))
    Path(path).write_text("\n".join(lines) + "\n")
