import json

import numpy as np
import pytest

from segdpc.hankel import TrajectoryLog, partition_training
from segdpc.plant import PlantModel, generate_training, simulate_step, two_mass_factory
from segdpc.predictor import (
    PredictorModel,
    causality_heatmap,
    export_heatmap,
    fit_predictor,
    predict,
    predict_stacked,
    stack_segmented,
)
from segdpc.signals import UniformNoise


def scalar_log(n=20, seed=0):
    """Trajectory of y[k+1] = 0.5 y[k] + u[k] recorded as (u[k], y[k])."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 1, n)
    y = np.zeros(n)
    for k in range(1, n):
        y[k] = 0.5 * y[k - 1] + u[k - 1]
    return TrajectoryLog(inputs=u, outputs=y, sample_period=1.0)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-30)


def test_scalar_system_closed_form_gains():
    blocks = partition_training(scalar_log(), t_ini=1, horizon_block=1)
    model = fit_predictor(blocks)
    # y[k+1] = 1.0 u[k] + 0.5 y[k] + 0 u[k+1]
    assert model.u_ini_gain[0, 0] == pytest.approx(1.0, abs=1e-8)
    assert model.y_ini_gain[0, 0] == pytest.approx(0.5, abs=1e-8)
    assert model.u_f_gain[0, 0] == pytest.approx(0.0, abs=1e-8)


def test_zero_data_gives_zero_predictor_with_warning():
    log = TrajectoryLog(inputs=np.zeros(15), outputs=np.zeros(15), sample_period=1.0)
    blocks = partition_training(log, 2, 3)
    with pytest.warns(UserWarning, match="rank 0"):
        model = fit_predictor(blocks)
    assert np.all(model.u_ini_gain == 0)
    assert np.all(model.y_ini_gain == 0)
    assert np.all(model.u_f_gain == 0)
    assert np.all(model.projection == 0)


def two_mass_log(n, seed):
    plant = two_mass_factory()
    return generate_training(plant, n, UniformNoise(-1, 1), excitation_seed=seed)


def held_out_windows(log, t_ini, horizon, n_windows=5):
    """Initialization/future windows cut from a fresh trajectory."""
    out = []
    step = (log.length - t_ini - horizon) // n_windows
    for w in range(n_windows):
        k = w * step
        u_ini = log.inputs[:, k : k + t_ini].T.ravel()
        y_ini = log.outputs[:, k : k + t_ini].T.ravel()
        u_f = log.inputs[:, k + t_ini : k + t_ini + horizon].T.ravel()
        y_f = log.outputs[:, k + t_ini : k + t_ini + horizon].T.ravel()
        out.append((u_ini, y_ini, u_f, y_f))
    return out


def test_two_mass_noise_free_exactness_short():
    blocks = partition_training(two_mass_log(200, [3, 0]), 5, 5)
    model = fit_predictor(blocks)
    held = two_mass_log(60, [3, 1])
    for u_ini, y_ini, u_f, y_f in held_out_windows(held, 5, 5):
        assert rel_err(predict(model, u_ini, y_ini, u_f), y_f) <= 1e-6


def test_two_mass_noise_free_exactness_long_horizon():
    blocks = partition_training(two_mass_log(400, [4, 0]), 5, 40)
    model = fit_predictor(blocks)
    held = two_mass_log(120, [4, 1])
    for u_ini, y_ini, u_f, y_f in held_out_windows(held, 5, 40):
        assert rel_err(predict(model, u_ini, y_ini, u_f), y_f) <= 1e-6


def test_mimo_exactness():
    # 2-input 2-output random stable plant; catches channel-ordering mistakes
    rng = np.random.default_rng(5)
    a = rng.standard_normal((3, 3))
    a *= 0.8 / np.max(np.abs(np.linalg.eigvals(a)))
    plant = PlantModel(
        a_d=a,
        b_d=rng.standard_normal((3, 2)),
        c=rng.standard_normal((2, 3)),
        d_mat=np.zeros((2, 2)),
        sample_period=1.0,
    )
    log = generate_training(
        plant, 300, [UniformNoise(-1, 1), UniformNoise(-1, 1)], excitation_seed=[6]
    )
    model = fit_predictor(partition_training(log, 4, 6))
    plant.reset()
    held = generate_training(
        plant, 80, [UniformNoise(-1, 1), UniformNoise(-1, 1)], excitation_seed=[7]
    )
    for u_ini, y_ini, u_f, y_f in held_out_windows(held, 4, 6):
        assert rel_err(predict(model, u_ini, y_ini, u_f), y_f) <= 1e-6


def test_predict_linearity_and_zero():
    model = fit_predictor(partition_training(two_mass_log(200, [8, 0]), 5, 5))
    z = predict(model, np.zeros(5), np.zeros(5), np.zeros(5))
    np.testing.assert_array_equal(z, np.zeros(5))
    rng = np.random.default_rng(9)
    a = [rng.standard_normal(5) for _ in range(3)]
    b = [rng.standard_normal(5) for _ in range(3)]
    lhs = predict(model, a[0] + b[0], a[1] + b[1], a[2] + b[2])
    rhs = predict(model, *a) + predict(model, *b)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_predict_dimension_errors():
    model = fit_predictor(partition_training(two_mass_log(200, [8, 0]), 5, 5))
    with pytest.raises(ValueError, match="u_ini"):
        predict(model, np.zeros(4), np.zeros(5), np.zeros(5))
    with pytest.raises(ValueError, match="y_ini"):
        predict(model, np.zeros(5), np.zeros(4), np.zeros(5))
    with pytest.raises(ValueError, match="u_f"):
        predict(model, np.zeros(5), np.zeros(5), np.zeros(6))


def test_projection_is_projector_onto_row_space():
    blocks = partition_training(two_mass_log(60, [10, 0]), 5, 5)
    model = fit_predictor(blocks)
    Pi = model.projection
    norm = np.linalg.norm(Pi)
    assert np.linalg.norm(Pi @ Pi - Pi) <= 1e-8 * (1 + norm)
    assert np.linalg.norm(Pi - Pi.T) <= 1e-8 * (1 + norm)
    # rows of the data matrix are fixed points
    M = blocks.data_matrix()
    np.testing.assert_allclose(Pi @ M.T, M.T, atol=1e-8 * np.linalg.norm(M))


def random_model(rng, m=1, p=1, t_ini=3):
    L = t_ini
    return PredictorModel(
        u_ini_gain=rng.standard_normal((p * L, m * L)),
        y_ini_gain=rng.standard_normal((p * L, p * L)),
        u_f_gain=rng.standard_normal((p * L, m * L)),
        projection=np.eye(7),
        t_ini=L,
        horizon_block=L,
        n_inputs=m,
        n_outputs=p,
    )


def test_stack_single_segment_is_identity_operation():
    model = random_model(np.random.default_rng(11))
    st = stack_segmented(model, horizon=3, n_segments=1)
    np.testing.assert_array_equal(st.phi1, model.u_ini_gain)
    np.testing.assert_array_equal(st.phi2, model.y_ini_gain)
    np.testing.assert_array_equal(st.phi3, model.u_f_gain)
    assert st.tail_length == 3


def test_stack_structural_zeros_exact():
    model = random_model(np.random.default_rng(12), m=2, p=2, t_ini=3)
    st = stack_segmented(model, horizon=9, n_segments=3)
    p, m, L = 2, 2, 3
    for i in range(3):
        for j in range(3):
            block = st.phi3[i * p * L : (i + 1) * p * L, j * m * L : (j + 1) * m * L]
            if j > i:
                assert np.all(block == 0.0), f"block ({i},{j}) must be exactly zero"
            if j == i:
                np.testing.assert_array_equal(block, model.u_f_gain)


def test_stack_subdiagonal_recursion():
    model = random_model(np.random.default_rng(13), t_ini=3)
    P1, P2, P3 = model.u_ini_gain, model.y_ini_gain, model.u_f_gain
    st = stack_segmented(model, horizon=9, n_segments=3)
    L = 3
    # first sub-diagonal: one chaining step feeds segment i's inputs into i+1
    np.testing.assert_allclose(st.phi3[L : 2 * L, :L], P1 + P2 @ P3, atol=1e-13)
    np.testing.assert_allclose(st.phi3[2 * L :, L : 2 * L], P1 + P2 @ P3, atol=1e-13)
    # second sub-diagonal: one more application of the output-chaining gain
    np.testing.assert_allclose(st.phi3[2 * L :, :L], P2 @ (P1 + P2 @ P3), atol=1e-13)
    # initialization gains follow the same chain
    np.testing.assert_allclose(st.phi1[L : 2 * L, :], P2 @ P1, atol=1e-13)
    np.testing.assert_allclose(st.phi2[2 * L :, :], P2 @ P2 @ P2, atol=1e-13)


def test_stack_inconsistent_args_rejected():
    model = random_model(np.random.default_rng(14))
    with pytest.raises(ValueError, match="inconsistent"):
        stack_segmented(model, horizon=9, n_segments=2)
    bad = fit_predictor(partition_training(two_mass_log(200, [15, 0]), 5, 10))
    with pytest.raises(ValueError, match="block horizon"):
        stack_segmented(bad, horizon=20, n_segments=2)


def test_segmented_matches_unsegmented_noise_free():
    """Chained segment predictions must agree with the one-shot predictor."""
    train = two_mass_log(400, [16, 0])
    seg_model = fit_predictor(partition_training(train, 5, 5))
    full_model = fit_predictor(partition_training(train, 5, 40))
    stacked = stack_segmented(seg_model, horizon=40, n_segments=8)

    held = two_mass_log(120, [16, 1])
    for u_ini, y_ini, u_f, y_f in held_out_windows(held, 5, 40):
        y_seg = predict_stacked(stacked, u_ini, y_ini, u_f)
        y_unseg = predict(full_model, u_ini, y_ini, u_f)
        assert rel_err(y_seg, y_unseg) <= 1e-6
        assert rel_err(y_seg, y_f) <= 1e-6


def test_stack_tail_truncation():
    # N = 12, t_ini = 5 -> F = 3, tail of 2 steps dropped from the grid
    train = two_mass_log(400, [17, 0])
    seg_model = fit_predictor(partition_training(train, 5, 5))
    stacked = stack_segmented(seg_model, horizon=12, n_segments=3)
    assert stacked.phi1.shape == (12, 5)
    assert stacked.phi2.shape == (12, 5)
    assert stacked.phi3.shape == (12, 12)
    assert stacked.tail_length == 2

    held = two_mass_log(60, [17, 1])
    for u_ini, y_ini, u_f, y_f in held_out_windows(held, 5, 12):
        y_hat = predict_stacked(stacked, u_ini, y_ini, u_f)
        assert rel_err(y_hat, y_f) <= 1e-6


def test_causality_heatmap_identity():
    s = causality_heatmap(np.eye(8), outputs_per_step=1)
    assert s.upper_mass == 0.0
    assert s.lower_mass == 8.0


def test_causality_heatmap_handmade():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    s = causality_heatmap(A, outputs_per_step=1)
    assert s.upper_mass == 2.0
    assert s.lower_mass == 8.0
    # grouping both steps into one block makes everything causal
    s2 = causality_heatmap(A, outputs_per_step=1, block_steps=2)
    assert s2.upper_mass == 0.0
    assert s2.lower_mass == 10.0


def test_causality_heatmap_multichannel_blocks():
    # p = 2 outputs per step: rows (0,1) are step 0, rows (2,3) step 1
    A = np.zeros((4, 2))
    A[0, 1] = 5.0  # output step 0 from input step 1: acausal
    A[3, 0] = 7.0  # output step 1 from input step 0: causal
    s = causality_heatmap(A, outputs_per_step=2, inputs_per_step=1)
    assert s.upper_mass == 5.0
    assert s.lower_mass == 7.0


def test_segment_blocks_of_stacked_map_are_causal_mass_free():
    model = random_model(np.random.default_rng(18), t_ini=4)
    st = stack_segmented(model, horizon=12, n_segments=3)
    s = causality_heatmap(st.phi3, outputs_per_step=1, block_steps=4)
    assert s.upper_mass == 0.0


def test_export_heatmap(tmp_path):
    rng = np.random.default_rng(19)
    s = causality_heatmap(rng.standard_normal((6, 6)), outputs_per_step=1)
    csv_path = tmp_path / "grid.csv"
    json_path = tmp_path / "grid.json"
    export_heatmap(s, csv_path, json_path)
    grid = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    np.testing.assert_allclose(grid, s.grid, atol=1e-15)
    meta = json.loads(json_path.read_text())
    assert meta["upper_mass"] == pytest.approx(s.upper_mass)
    assert meta["lower_mass"] == pytest.approx(s.lower_mass)
    assert meta["n_rows"] == 6 and meta["n_cols"] == 6
    assert meta["block_size"] == 1
