import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from romrl.errors import ConfigurationError
from romrl.plants.wake import WakePlant
from romrl.reduction import (SparseMeasurement, captured_energy, pod, project,
                             reconstruct, sparse_measure, two_stage_pod)


def _random_snapshots(seed, n=30, count=40, rank=6):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(count, rank)) @ rng.normal(size=(rank, n)) + rng.normal(size=n)


def test_rank_one_energy():
    rng = np.random.default_rng(0)
    profile = rng.normal(size=50)
    X = np.outer(rng.normal(size=20), profile)
    b = pod(X, 1)
    assert abs(b.energy[0] - 1.0) < 1e-12


def test_two_orthogonal_profiles_energy_split():
    n = 64
    x = np.linspace(0, 2 * np.pi, n, endpoint=False)
    p1, p2 = np.sin(x), np.cos(x)
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    # zero-mean, orthogonal time coefficients with amplitude ratio 2:1
    X = np.outer(2 * np.sin(t), p1) + np.outer(np.cos(t), p2)
    b = pod(X, 2)
    np.testing.assert_allclose(b.energy, [0.8, 0.2], atol=1e-12)


def test_full_reconstruction():
    X = _random_snapshots(1)
    b = pod(X, 6)
    err = np.linalg.norm(reconstruct(project(X, b), b) - X) / np.linalg.norm(X)
    assert err < 1e-10


def test_pod_truncates_to_rank():
    X = _random_snapshots(2, rank=3)
    b = pod(X, 10)
    assert b.truncated and b.r == 3


def test_pod_needs_enough_snapshots():
    with pytest.raises(ConfigurationError):
        pod(np.ones((2, 5)), 3)


def test_two_stage_identical_sets_degenerate():
    X = _random_snapshots(3)
    b = two_stage_pod(X, X, 6, 4)
    ctrl_sv = np.asarray(b.meta["control_singular_values"])
    assert np.all(ctrl_sv < 1e-8 * b.singular_values[0])
    assert b.degenerate and b.r_c == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 5), st.integers(1, 5))
def test_two_stage_orthonormal(seed, r_a, r_c):
    rng = np.random.default_rng(seed)
    Xa = _random_snapshots(seed, rank=5)
    Xc = Xa[:20] + rng.normal(size=(20, 5)) @ rng.normal(size=(5, 30))
    b = two_stage_pod(Xa, Xc, r_a, r_c)
    assert b.r_a + b.r_c == b.r
    assert np.max(np.abs(b.modes.T @ b.modes - np.eye(b.r))) < 1e-10
    assert np.max(np.abs(b.V_c.T @ b.V_a), initial=0.0) < 1e-10
    for stage in (b.energy[:b.r_a], b.energy[b.r_a:]):
        assert np.all((stage >= 0) & (stage <= 1))
        assert np.all(np.diff(stage) <= 1e-15)


def test_energy_monotone_in_modes():
    X = _random_snapshots(4, rank=8)
    e = [captured_energy(pod(X, r), X) for r in range(1, 9)]
    assert np.all(np.diff(e) >= -1e-14)
    assert e[-1] == pytest.approx(1.0, abs=1e-12)


def test_project_mean_and_mode():
    X = _random_snapshots(5)
    b = pod(X, 4)
    assert np.all(project(b.mean, b) == 0)
    q = b.mean + 3 * b.modes[:, 1]
    np.testing.assert_allclose(project(q, b), [0, 3, 0, 0], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_projection_contraction_and_idempotence(seed):
    X = _random_snapshots(6)
    b = pod(X, 3)
    q = np.random.default_rng(seed).normal(size=b.n) * 5
    p1 = reconstruct(project(q, b), b)
    p2 = reconstruct(project(p1, b), b)
    assert np.linalg.norm(q - p1) <= np.linalg.norm(q - b.mean) + 1e-12
    assert np.max(np.abs(p2 - p1)) < 1e-12 * (1 + np.max(np.abs(p1)))


def test_dimension_mismatch():
    b = pod(_random_snapshots(7), 2)
    with pytest.raises(ConfigurationError):
        project(np.zeros(b.n + 1), b)
    with pytest.raises(ConfigurationError):
        reconstruct(np.zeros(3), b)


def test_sparse_measure_selection():
    C = SparseMeasurement.selection([0, 3, 7], 10)
    assert np.all(sparse_measure(np.ones(10), C) == 1)
    assert np.all(sparse_measure(np.zeros(10), C) == 0)
    with pytest.raises(ConfigurationError):
        SparseMeasurement.selection([10], 10)


def test_sparse_measure_matches_matrix():
    rng = np.random.default_rng(8)
    C = SparseMeasurement(12, [[0, 1], [5], [11, 2, 3]], [[0.25, 0.75], [1.0], [0.2, 0.3, 0.5]])
    q = rng.normal(size=(4, 12))
    np.testing.assert_allclose(sparse_measure(q, C), q @ C.matrix().T, rtol=1e-14)


def test_wake_layout_samples_mode():
    plant = WakePlant()
    rng = np.random.default_rng(9)
    X = rng.normal(size=(20, 3)) @ np.stack([plant.base, plant.shift, plant.y1])
    phi1 = pod(X, 1).modes[:, 0]
    C = SparseMeasurement.selection(plant.sensor_index, plant.n_field)
    assert C.m == 47
    np.testing.assert_array_equal(sparse_measure(phi1, C), phi1[plant.sensor_index])
