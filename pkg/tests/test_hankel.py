import json

import numpy as np
import pytest

from segdpc.hankel import (
    HankelBlocks,
    TrajectoryLog,
    build_hankel,
    check_excitation,
    partition_training,
    required_training_length,
)


def hankel_oracle(w, depth):
    """Element-by-element block-Hankel construction (independent of build_hankel)."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    c, T = w.shape
    q = T - depth + 1
    H = np.zeros((c * depth, q))
    for col in range(q):
        for k in range(depth):
            for ch in range(c):
                H[k * c + ch, col] = w[ch, col + k]
    return H


def test_build_hankel_scalar_matches_oracle():
    rng = np.random.default_rng(7)
    w = rng.standard_normal(23)
    for depth in (1, 2, 5, 23):
        np.testing.assert_array_equal(build_hankel(w, depth), hankel_oracle(w, depth))


def test_build_hankel_multichannel_matches_oracle():
    rng = np.random.default_rng(8)
    w = rng.standard_normal((3, 17))
    for depth in (1, 4, 9):
        np.testing.assert_array_equal(build_hankel(w, depth), hankel_oracle(w, depth))


def test_build_hankel_known_small_case():
    # depth-2 Hankel of [1, 2, 3, 4] written out by hand
    H = build_hankel(np.array([1.0, 2.0, 3.0, 4.0]), 2)
    np.testing.assert_array_equal(H, [[1, 2, 3], [2, 3, 4]])


def test_build_hankel_column_is_window():
    rng = np.random.default_rng(9)
    w = rng.standard_normal((2, 12))
    H = build_hankel(w, 5)
    # column j must be the window w[:, j:j+5] flattened sample-major
    for j in range(H.shape[1]):
        np.testing.assert_array_equal(H[:, j], w[:, j : j + 5].T.ravel())


def test_build_hankel_rejects_bad_depth():
    w = np.ones(5)
    with pytest.raises(ValueError):
        build_hankel(w, 6)
    with pytest.raises(ValueError):
        build_hankel(w, 0)


def test_check_excitation_iid_noise_is_pe():
    rng = np.random.default_rng(10)
    u = rng.uniform(-1, 1, size=200)
    rep = check_excitation(u, order=12)
    assert rep.is_persistently_exciting
    assert rep.rank == rep.required_rank == 12


def test_check_excitation_constant_signal_rank_one():
    u = np.ones(50)
    rep = check_excitation(u, order=6)
    assert not rep.is_persistently_exciting
    assert rep.rank == 1


def test_check_excitation_matches_numpy_rank():
    rng = np.random.default_rng(11)
    # rank-deficient by construction: a sum of two sinusoids has rank <= 4
    t = np.arange(120)
    u = np.sin(0.3 * t) + 0.5 * np.sin(1.1 * t + 0.2)
    rep = check_excitation(u, order=9)
    H = build_hankel(u, 9)
    assert rep.rank == np.linalg.matrix_rank(H)
    assert rep.rank == 4
    assert not rep.is_persistently_exciting


def test_required_training_length_formula():
    # (m + 1) * (t_ini + horizon + order_bound) - 1, checked against hand values
    assert required_training_length(1, 5, 40, 10) == 2 * 55 - 1 == 109
    assert required_training_length(1, 5, 5, 10) == 39
    assert required_training_length(2, 3, 7, 4) == 3 * 14 - 1


def test_partition_training_blocks_are_windows():
    rng = np.random.default_rng(12)
    log = TrajectoryLog(
        inputs=rng.standard_normal((2, 30)),
        outputs=rng.standard_normal((1, 30)),
        sample_period=0.5,
    )
    blocks = partition_training(log, t_ini=3, horizon_block=4)
    depth = 7
    q = 30 - depth + 1
    assert blocks.u_past.shape == (2 * 3, q)
    assert blocks.y_past.shape == (1 * 3, q)
    assert blocks.u_future.shape == (2 * 4, q)
    assert blocks.y_future.shape == (1 * 4, q)
    # column j of u_past + u_future must reassemble the full input window
    Hu = hankel_oracle(log.inputs, depth)
    np.testing.assert_array_equal(np.vstack([blocks.u_past, blocks.u_future]), Hu)
    Hy = hankel_oracle(log.outputs, depth)
    np.testing.assert_array_equal(np.vstack([blocks.y_past, blocks.y_future]), Hy)


def test_partition_training_length_check_warns_but_returns():
    rng = np.random.default_rng(13)
    log = TrajectoryLog(
        inputs=rng.standard_normal(40),
        outputs=rng.standard_normal(40),
        sample_period=1.0,
    )
    # minimum for m=1, t_ini=5, H=40, n_hat=10 is 109 > 40
    with pytest.warns(UserWarning, match="length condition"):
        blocks = partition_training(log, 5, 34, order_bound=10)
    assert blocks.length_satisfied is False
    assert isinstance(blocks, HankelBlocks)

    long_log = TrajectoryLog(
        inputs=rng.standard_normal(120),
        outputs=rng.standard_normal(120),
        sample_period=1.0,
    )
    blocks = partition_training(long_log, 5, 40, order_bound=10)
    assert blocks.length_satisfied is True


def test_partition_training_too_short_raises():
    log = TrajectoryLog(
        inputs=np.ones(5), outputs=np.ones(5), sample_period=1.0
    )
    with pytest.raises(ValueError, match="shorter than one"):
        partition_training(log, 3, 3)


def test_trajectory_log_validation():
    with pytest.raises(ValueError, match="length"):
        TrajectoryLog(inputs=np.ones(4), outputs=np.ones(5), sample_period=1.0)
    with pytest.raises(ValueError, match="sample_period"):
        TrajectoryLog(inputs=np.ones(4), outputs=np.ones(4), sample_period=0.0)
    with pytest.raises(ValueError, match="non-finite"):
        TrajectoryLog(
            inputs=np.array([1.0, np.nan]), outputs=np.ones(2), sample_period=1.0
        )


def test_trajectory_log_is_immutable():
    log = TrajectoryLog(inputs=np.ones(4), outputs=np.ones(4), sample_period=1.0)
    with pytest.raises(ValueError):
        log.inputs[0, 0] = 5.0


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(14)
    log = TrajectoryLog(
        inputs=rng.standard_normal((2, 25)),
        outputs=rng.standard_normal((3, 25)),
        sample_period=0.25,
    )
    path = tmp_path / "train.csv"
    log.save_csv(path)
    assert path.exists()
    meta = json.loads((tmp_path / "train.meta.json").read_text())
    assert meta["n_inputs"] == 2 and meta["n_outputs"] == 3

    back = TrajectoryLog.load_csv(path)
    np.testing.assert_allclose(back.inputs, log.inputs, rtol=0, atol=1e-15)
    np.testing.assert_allclose(back.outputs, log.outputs, rtol=0, atol=1e-15)
    assert back.sample_period == log.sample_period


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="training file"):
        TrajectoryLog.load_csv(tmp_path / "nope.csv")
