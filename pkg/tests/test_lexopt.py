import numpy as np
import pytest
import scipy.sparse as sp

from oracles import lp_oracle, qp_dual_pg_oracle
from segdpc.lexopt import (
    ConvexLevel,
    InfeasibleLevelError,
    UnboundedLevelError,
    dump_problem,
    solve_lexicographic,
    solve_qp,
)


def test_unconstrained_scalar_qp():
    # min x^2 - 2x  ->  x = 1, objective -1
    level = ConvexLevel(
        n_variables=1, linear_cost=np.array([-2.0]), quadratic_cost=sp.eye(1), label="scalar"
    )
    res = solve_qp(level)
    assert res.values[0] == pytest.approx(1.0, abs=1e-7)
    assert res.objective == pytest.approx(-1.0, abs=1e-7)
    assert res.status == "optimal"
    assert res.kkt_residual <= 1e-6


def test_infeasible_detected():
    # x <= -1 and x >= 1
    level = ConvexLevel(
        n_variables=1,
        linear_cost=np.zeros(1),
        ineq_matrix=np.array([[1.0], [-1.0]]),
        ineq_rhs=np.array([-1.0, -1.0]),
        label="impossible",
    )
    with pytest.raises(InfeasibleLevelError, match="impossible"):
        solve_qp(level)


def test_unbounded_detected():
    level = ConvexLevel(n_variables=1, linear_cost=np.array([1.0]), label="free-fall")
    with pytest.raises(UnboundedLevelError, match="free-fall"):
        solve_qp(level)


def random_qp(rng, n=20, n_ineq=10, n_eq=0):
    R = rng.standard_normal((n, n))
    Q = R.T @ R / n + 0.5 * np.eye(n)
    c = rng.standard_normal(n)
    z0 = rng.standard_normal(n)
    G = rng.standard_normal((n_ineq, n))
    h = G @ z0 + rng.uniform(0.1, 1.0, n_ineq)
    A = rng.standard_normal((n_eq, n)) if n_eq else None
    b = A @ z0 if n_eq else None
    return Q, c, G, h, A, b


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_qp_matches_projected_gradient_oracle(seed):
    rng = np.random.default_rng(seed)
    Q, c, G, h, A, b = random_qp(rng, n_eq=3 if seed == 2 else 0)
    level = ConvexLevel(
        n_variables=20,
        linear_cost=c,
        quadratic_cost=sp.csc_matrix(Q),
        ineq_matrix=G,
        ineq_rhs=h,
        eq_matrix=A,
        eq_rhs=b if b is not None else np.zeros(0),
        label=f"random-{seed}",
    )
    res = solve_qp(level)
    _, obj_ref = qp_dual_pg_oracle(Q, c, G, h, A, b)
    assert abs(res.objective - obj_ref) <= 1e-5 * (1 + abs(obj_ref))


def test_lp_matches_linprog_oracle():
    rng = np.random.default_rng(3)
    n = 8
    c = rng.standard_normal(n)
    G = np.vstack([rng.standard_normal((6, n)), np.eye(n), -np.eye(n)])
    h = np.concatenate([rng.uniform(0.5, 2.0, 6), np.full(2 * n, 5.0)])
    level = ConvexLevel(n_variables=n, linear_cost=c, ineq_matrix=G, ineq_rhs=h)
    res = solve_qp(level)
    _, obj_ref = lp_oracle(c, G, h)
    assert abs(res.objective - obj_ref) <= 1e-6 * (1 + abs(obj_ref))


def test_single_level_lexicographic():
    # min x^2 s.t. x >= 3
    level = ConvexLevel(
        n_variables=1,
        linear_cost=np.zeros(1),
        quadratic_cost=sp.eye(1),
        ineq_matrix=np.array([[-1.0]]),
        ineq_rhs=np.array([-3.0]),
        label="floor",
    )
    sol = solve_lexicographic([level])
    assert sol.values[0] == pytest.approx(3.0, abs=1e-6)
    assert sol.level_objectives[0] == pytest.approx(9.0, abs=1e-5)
    assert sol.level_statuses == ["optimal"]
    assert sol.lock_values == []


def test_two_level_analytic():
    # variables (x, y, s): L1 min |x-1| via slack s, L2 min y^2 s.t. y >= x
    l1 = ConvexLevel(
        n_variables=3,
        linear_cost=np.array([0.0, 0.0, 1.0]),
        ineq_matrix=np.array(
            [[1.0, 0.0, -1.0], [-1.0, 0.0, -1.0], [0.0, 0.0, -1.0]]
        ),
        ineq_rhs=np.array([1.0, -1.0, 0.0]),
        label="abs-x",
    )
    l2 = ConvexLevel(
        n_variables=3,
        linear_cost=np.zeros(3),
        quadratic_cost=sp.diags([0.0, 1.0, 0.0]),
        ineq_matrix=np.vstack([l1.ineq_matrix.toarray(), [[1.0, -1.0, 0.0]]]),
        ineq_rhs=np.concatenate([l1.ineq_rhs, [0.0]]),
        label="y-sq",
    )
    sol = solve_lexicographic([l1, l2])
    assert sol.values[0] == pytest.approx(1.0, abs=1e-5)
    assert sol.values[1] == pytest.approx(1.0, abs=1e-5)
    assert sol.level_objectives[0] == pytest.approx(0.0, abs=1e-6)
    assert sol.level_objectives[1] == pytest.approx(1.0, abs=1e-4)


def two_level_random_problem(seed):
    """Random bounded two-level problem over 10 variables."""
    rng = np.random.default_rng(seed)
    n = 10
    c1 = rng.standard_normal(n)
    z0 = rng.standard_normal(n)
    G = rng.standard_normal((8, n))
    h = G @ z0 + rng.uniform(0.2, 1.0, 8)
    box_G = np.vstack([np.eye(n), -np.eye(n)])
    box_h = np.full(2 * n, 10.0)
    G_all = np.vstack([G, box_G])
    h_all = np.concatenate([h, box_h])
    R = rng.standard_normal((n, n))
    Q2 = R.T @ R / n + 0.3 * np.eye(n)
    c2 = rng.standard_normal(n)
    l1 = ConvexLevel(n_variables=n, linear_cost=c1, ineq_matrix=G_all, ineq_rhs=h_all, label="L1")
    l2 = ConvexLevel(
        n_variables=n,
        linear_cost=c2,
        quadratic_cost=sp.csc_matrix(Q2),
        ineq_matrix=G_all,
        ineq_rhs=h_all,
        label="L2",
    )
    return l1, l2, (c1, G_all, h_all, Q2, c2)


@pytest.mark.parametrize("seed", [10, 11, 12])
def test_two_level_random_matches_hardcoded_lock_oracle(seed):
    l1, l2, (c1, G, h, Q2, c2) = two_level_random_problem(seed)
    sol = solve_lexicographic([l1, l2])

    # oracle: level-1 optimum from an independent LP solve, then level 2 with
    # the lock hard-coded as one more inequality, solved by the PG oracle
    _, j1 = lp_oracle(c1, G, h)
    slack = 1e-7 * (1 + abs(j1))
    G_lock = np.vstack([G, c1])
    h_lock = np.concatenate([h, [j1 + slack]])
    _, obj_ref = qp_dual_pg_oracle(Q2, c2, G_lock, h_lock)

    assert abs(sol.level_objectives[0] - j1) <= 1e-6 * (1 + abs(j1))
    assert abs(sol.level_objectives[1] - obj_ref) <= 1e-5 * (1 + abs(obj_ref))


def test_lock_monotonicity_three_levels():
    rng = np.random.default_rng(20)
    n = 6
    z0 = rng.standard_normal(n)
    G = np.vstack([rng.standard_normal((5, n)), np.eye(n), -np.eye(n)])
    h = np.concatenate([G[:5] @ z0 + 0.5, np.full(2 * n, 8.0)])
    levels = []
    costs = []
    for k in range(3):
        ck = rng.standard_normal(n)
        costs.append(ck)
        levels.append(
            ConvexLevel(n_variables=n, linear_cost=ck, ineq_matrix=G, ineq_rhs=h, label=f"L{k+1}")
        )
    sol = solve_lexicographic(levels)
    z = sol.values
    for k in range(2):
        jk = sol.level_objectives[k]
        bound = sol.lock_values[k] + 1e-7 * (1 + abs(sol.lock_values[k]))
        assert costs[k] @ z <= bound + 1e-8
        assert sol.lock_values[k] == pytest.approx(jk, abs=1e-9)
    # final point feasible for the declared constraints
    assert np.max(G @ z - h) <= 1e-6


def test_scaling_invariance_strictly_convex():
    rng = np.random.default_rng(21)
    Q, c, G, h, _, _ = random_qp(rng, n=12, n_ineq=6)
    base = ConvexLevel(
        n_variables=12, linear_cost=c, quadratic_cost=sp.csc_matrix(Q),
        ineq_matrix=G, ineq_rhs=h,
    )
    scaled = ConvexLevel(
        n_variables=12, linear_cost=7.0 * c, quadratic_cost=sp.csc_matrix(7.0 * Q),
        ineq_matrix=G, ineq_rhs=h,
    )
    z1 = solve_qp(base).values
    z2 = solve_qp(scaled).values
    assert np.linalg.norm(z1 - z2) <= 1e-6 * (1 + np.linalg.norm(z1))


def test_quadratic_level_requires_explicit_lock():
    q_level = ConvexLevel(
        n_variables=2,
        linear_cost=np.zeros(2),
        quadratic_cost=sp.eye(2),
        label="quad-first",
    )
    final = ConvexLevel(n_variables=2, linear_cost=np.ones(2),
                        ineq_matrix=-np.eye(2), ineq_rhs=np.zeros(2))
    with pytest.raises(ValueError, match="lock_cost"):
        solve_lexicographic([q_level, final])
    # with an explicit linear lock the same stack solves
    q_level.lock_cost = np.array([1.0, 0.0])
    q_level.ineq_matrix = sp.csc_matrix(-np.eye(2))
    q_level.ineq_rhs = np.zeros(2)
    sol = solve_lexicographic(
        [
            ConvexLevel(
                n_variables=2, linear_cost=np.zeros(2), quadratic_cost=sp.eye(2),
                ineq_matrix=-np.eye(2), ineq_rhs=np.zeros(2),
                lock_cost=np.array([1.0, 0.0]), label="quad",
            ),
            final,
        ]
    )
    assert len(sol.lock_values) == 1


def test_infeasibility_reports_level_label():
    l1 = ConvexLevel(
        n_variables=1, linear_cost=np.zeros(1),
        ineq_matrix=np.array([[1.0]]), ineq_rhs=np.array([1.0]), label="ok"
    )
    l2 = ConvexLevel(
        n_variables=1, linear_cost=np.zeros(1),
        ineq_matrix=np.array([[1.0], [-1.0]]), ineq_rhs=np.array([-2.0, 1.0]),
        label="broken-second",
    )
    with pytest.raises(InfeasibleLevelError, match="broken-second"):
        solve_lexicographic([l1, l2])


def test_validate_rejects_bad_quadratics():
    asym = ConvexLevel(
        n_variables=2, linear_cost=np.zeros(2),
        quadratic_cost=sp.csc_matrix(np.array([[1.0, 1.0], [0.0, 1.0]])),
        label="asym",
    )
    with pytest.raises(ValueError, match="symmetric"):
        asym.validate()
    indef = ConvexLevel(
        n_variables=2, linear_cost=np.zeros(2),
        quadratic_cost=sp.csc_matrix(np.array([[1.0, 0.0], [0.0, -1.0]])),
        label="indef",
    )
    with pytest.raises(ValueError, match="negative eigenvalue"):
        indef.validate()
    # PSD passes
    ConvexLevel(
        n_variables=2, linear_cost=np.zeros(2), quadratic_cost=sp.eye(2)
    ).validate()


def test_mismatched_dimensions_rejected():
    with pytest.raises(ValueError, match="columns"):
        ConvexLevel(
            n_variables=3, linear_cost=np.zeros(3), ineq_matrix=np.ones((2, 4)),
            ineq_rhs=np.zeros(2),
        )
    l_a = ConvexLevel(n_variables=2, linear_cost=np.zeros(2),
                      ineq_matrix=-np.eye(2), ineq_rhs=np.zeros(2))
    l_b = ConvexLevel(n_variables=3, linear_cost=np.zeros(3),
                      ineq_matrix=-np.eye(3), ineq_rhs=np.zeros(3))
    with pytest.raises(ValueError, match="variable dimension"):
        solve_lexicographic([l_a, l_b])


def test_dump_problem(tmp_path):
    level = ConvexLevel(
        n_variables=2,
        linear_cost=np.array([1.0, 0.0]),
        quadratic_cost=sp.eye(2),
        eq_matrix=np.array([[1.0, 1.0]]),
        eq_rhs=np.array([2.0]),
        ineq_matrix=-np.eye(2),
        ineq_rhs=np.zeros(2),
        label="dumped",
    )
    path = tmp_path / "level.txt"
    dump_problem(level, path)
    text = path.read_text()
    assert "level dumped" in text
    assert "variables 2" in text
    assert "equalities 1x2" in text
    assert "inequalities 2x2" in text
