import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from romrl.errors import ConfigurationError, RankDeficiencyError
from romrl.sysid import DiscreteLti, LinearRom, era_fit, estimate_derivatives, opinf_fit


def _linear_data(A, B, n=200, dt=0.01, seed=0):
    """States, exact derivatives and a persistently exciting input."""
    rng = np.random.default_rng(seed)
    r = A.shape[0]
    Q = rng.normal(size=(r, n))
    U = rng.normal(size=n)
    return Q, A @ Q + np.outer(B, U), U


def test_constant_trajectory_zero_derivative():
    d = estimate_derivatives(np.full((20, 3), 2.5), dt=0.1)
    assert np.all(d == 0)


def test_polynomial_exactness():
    t = 0.3 + 0.05 * np.arange(40)
    d = estimate_derivatives(t ** 5, t=t)
    np.testing.assert_allclose(d, 5 * t ** 4, rtol=1e-9)


def test_sixth_order_convergence():
    errs = []
    for dt in (0.1, 0.05):
        t = np.arange(0, 10 + dt / 2, dt)
        d = estimate_derivatives(np.sin(t), dt=dt)
        errs.append(np.max(np.abs(d[3:-3] - np.cos(t[3:-3]))))
    assert errs[0] / errs[1] >= 40


def test_nonuniform_grid_rejected():
    t = np.r_[0.0, np.cumsum(np.linspace(0.1, 0.2, 10))]
    with pytest.raises(ConfigurationError):
        estimate_derivatives(np.sin(t), t=t)
    with pytest.raises(ConfigurationError):
        estimate_derivatives(np.zeros(6), dt=0.1)


def test_opinf_zero_data():
    rom = opinf_fit(np.zeros((2, 10)), np.zeros((2, 10)), np.zeros(10), ridge=1.0)
    assert np.all(rom.A == 0) and np.all(rom.B == 0)


def test_opinf_recovers_rotation():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    B = np.array([0.0, 1.0])
    Q, dQ, U = _linear_data(A, B)
    rom = opinf_fit(Q, dQ, U, ridge=0.0)
    assert np.linalg.norm(np.c_[rom.A - A, rom.B - B]) < 1e-10
    shrunk = opinf_fit(Q, dQ, U, ridge=1e6)
    assert np.linalg.norm(shrunk.A) < np.linalg.norm(rom.A)


def test_opinf_rank_deficiency_named():
    Q = np.vstack([np.ones(20), np.arange(20.0)])
    with pytest.raises(RankDeficiencyError) as exc:
        opinf_fit(Q, np.zeros((2, 20)), np.zeros(20), ridge=0.0)
    assert "u" in str(exc.value)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_opinf_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    B = rng.normal(size=3)
    Q, dQ, U = _linear_data(A, B, n=50, seed=seed)
    dQ = dQ + 0.01 * rng.normal(size=dQ.shape)
    perm = rng.permutation(50)
    a = opinf_fit(Q, dQ, U)
    b = opinf_fit(Q[:, perm], dQ[:, perm], U[perm])
    np.testing.assert_allclose(b.A, a.A, atol=1e-10)
    np.testing.assert_allclose(b.B, a.B, atol=1e-10)


def test_opinf_with_fd_derivatives_from_trajectory():
    A = np.array([[-0.2, 1.0], [-1.0, -0.2]])
    B = np.array([0.0, 1.0])
    dt = 0.01
    t = np.arange(0, 20, dt)
    u = np.sin(1.3 * t) + 0.5 * np.cos(3.1 * t)
    # exact zero-order-free trajectory: integrate with a tiny-step matrix exponential
    M = expm(np.block([[A, B[:, None]], [np.zeros((1, 3))]]) * dt / 20)
    q = np.zeros(2)
    traj = [q]
    for k in range(t.size - 1):
        for j in range(20):
            s = t[k] + j * dt / 20
            uu = np.sin(1.3 * s) + 0.5 * np.cos(3.1 * s)
            q = (M @ np.r_[q, uu])[:2]
        traj.append(q)
    Q = np.array(traj).T
    dQ = estimate_derivatives(Q.T, dt=dt).T
    rom = opinf_fit(Q, dQ, u)
    # the sub-stepped input hold limits accuracy, not the derivative stencil
    assert np.linalg.norm(rom.A - A) < 5e-2


def test_era_scalar_geometric():
    Y = np.r_[0.0, 0.9 ** np.arange(0, 399)]
    lti = era_fit(Y, 1)
    rec = lti.markov(201)[:, 0, 0]
    np.testing.assert_allclose(rec[1:], Y[1:201], atol=1e-10)


def test_era_zero_data_degenerate():
    lti = era_fit(np.zeros(50), 2)
    assert lti.degenerate and np.all(lti.markov(10) == 0)


def test_era_damped_rotation_poles():
    rho, th = 0.95, 0.3
    A = rho * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    true = DiscreteLti(1.0, A, [[1.0], [0.0]], [[1.0, 0.5]])
    lti = era_fit(true.markov(200), 2)
    poles = np.sort_complex(lti.poles())
    expected = np.sort_complex(rho * np.exp(np.array([-1j, 1j]) * th))
    np.testing.assert_allclose(poles, expected, atol=1e-8)
    np.testing.assert_allclose(lti.markov(150), true.markov(150), atol=1e-10)


def test_era_order_above_rank_truncates():
    Y = np.r_[0.0, 0.5 ** np.arange(60)]
    with pytest.warns(UserWarning):
        lti = era_fit(Y, 3)
    assert lti.truncated and lti.order == 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_era_markov_basis_independent(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    A *= 0.8 / np.max(np.abs(np.linalg.eigvals(A)))
    true = DiscreteLti(0.1, A, rng.normal(size=(3, 1)), rng.normal(size=(1, 3)))
    T = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    Ti = np.linalg.inv(T)
    other = DiscreteLti(0.1, T @ A @ Ti, T @ true.B, true.C @ Ti)
    a = era_fit(true.markov(120), 3)
    b = era_fit(other.markov(120), 3)
    np.testing.assert_allclose(a.markov(60), b.markov(60), atol=1e-8)


def test_linear_rom_validation():
    with pytest.raises(ConfigurationError):
        LinearRom(np.eye(2), np.ones(3))
