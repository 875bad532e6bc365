import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from romrl.control.bilinear import FrequencyWarpingError, bilinear_resample
from romrl.control.controllers import (DiscreteTf, NeuralPolicy, Proportional, ZeroController,
                                       controller_eval, controller_from_blocks,
                                       controller_to_blocks)
from romrl.control.costs import CostSpec, cost_j1, cost_j2, cost_total, quadratic_cost, wake_cost
from romrl.control.pressure import (MIN_SAMPLES, antisymmetric_signals, pressure_map_eval,
                                    pressure_map_fit)
from romrl.control.sensors import (PlacementBenchmark, PlacementEntry, gaussian_sensor_read,
                                   optimize_sensor_placement, placement_cost,
                                   run_placement_benchmark)
from romrl.control.stabilize import (input_ranges, policy_distance, repulsive_penalty,
                                     sample_grid)
from romrl.errors import ConfigurationError
from romrl.romcore.linear import discretize_rk4

K1 = DiscreteTf([-0.64, -1.52], [-0.990131], 1.0)


# controllers --------------------------------------------------------------------

def test_constant_controller():
    a, _ = controller_eval(DiscreteTf([-223.65]), [1.0])
    assert a == -223.65
    assert controller_eval(Proportional([-223.65]), [1.0])[0] == -223.65


def test_zero_inputs_give_zero_action():
    ctrls = [Proportional([2.0, -1.0]), K1, NeuralPolicy(n_inputs=2, hidden=(5, 5), seed=1),
             ZeroController(2)]
    for c in ctrls:
        assert controller_eval(c, np.zeros(c.n_inputs))[0] == 0.0


def test_k1_step_response_matches_recursion():
    out = K1.response(np.ones(20))
    a_prev, y_prev, expected = 0.0, 0.0, []
    for _ in range(20):
        a = -0.64 * 1.0 - 1.52 * y_prev + 0.990131 * a_prev
        expected.append(a)
        a_prev, y_prev = a, 1.0
    np.testing.assert_allclose(out, expected, atol=1e-12)


def _long_division(b, a, n):
    """Impulse response of b(z^-1)/(1 + a(z^-1)) by power-series division."""
    h = np.zeros(n)
    for k in range(n):
        acc = b[k] if k < len(b) else 0.0
        for i in range(1, min(k, len(a)) + 1):
            acc -= a[i - 1] * h[k - i]
        h[k] = acc
    return h


def test_difference_equation_equals_long_division():
    rng = np.random.default_rng(0)
    for _ in range(50):
        nb, na = rng.integers(1, 4), rng.integers(0, 3)
        poles = rng.uniform(-0.8, 0.8, na)
        a = np.poly(poles)[1:] if na else np.zeros(0)
        b = rng.normal(size=nb)
        y = rng.normal(size=60)
        out = DiscreteTf(b, a).response(y)
        ref = np.convolve(_long_division(b, a, 60), y)[:60]
        np.testing.assert_allclose(out, ref, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e8, 1e8), st.floats(-1e8, 1e8))
def test_neural_policy_bounded(y1, y2):
    pol = NeuralPolicy(n_inputs=2, hidden=(6, 6), scale=0.7, seed=3, init_scale=5.0)
    assert abs(pol.act([y1, y2])[0]) <= 0.7


def test_controller_block_round_trip():
    pol = NeuralPolicy(n_inputs=2, hidden=(4,), scale=2.0, seed=5)
    meta, blocks = controller_to_blocks(pol)
    back = controller_from_blocks(meta, blocks)
    assert np.array_equal(back.params, pol.params) and back.scale == 2.0
    meta, blocks = controller_to_blocks(K1)
    assert np.array_equal(controller_from_blocks(meta, blocks).params, K1.params)


def test_controller_arity_checked():
    with pytest.raises(ConfigurationError):
        controller_eval(Proportional([1.0]), [1.0, 2.0])


# bilinear resampling ------------------------------------------------------------

def test_bilinear_identity_step():
    tf = DiscreteTf([0.3, -0.2, 0.05], [-1.2, 0.4], 0.1)
    out = bilinear_resample(tf, 0.1)
    np.testing.assert_allclose(out.params, tf.params, atol=1e-12)


def test_bilinear_round_trip():
    tf = DiscreteTf([0.3, -0.2, 0.05], [-1.2, 0.4], 0.1)
    back = bilinear_resample(bilinear_resample(tf, 0.037), 0.1)
    np.testing.assert_allclose(back.params, tf.params, atol=1e-12)


def test_bilinear_constant_controller():
    out = bilinear_resample(DiscreteTf([-223.65], [], 0.1), 0.02)
    assert out.b.size == 1 and out.b[0] == pytest.approx(-223.65, rel=1e-14)


@pytest.mark.parametrize("dt_new", [0.5, 0.05, 0.013, 2.0])
def test_bilinear_dc_gain(dt_new):
    tf = DiscreteTf([-0.64, -1.52], [-0.990131], 0.1)
    assert abs(bilinear_resample(tf, dt_new).dc_gain() - tf.dc_gain()) <= 1e-10 * abs(
        tf.dc_gain())


def test_bilinear_low_pass_frequency_response():
    p, dt = 0.9, 0.1
    tf = DiscreteTf([1 - p], [-p], dt)
    half = bilinear_resample(tf, dt / 2)
    w = np.linspace(0, 0.1 * np.pi / dt, 200)
    rel = np.abs(half.freq_response(w) - tf.freq_response(w)) / np.abs(tf.freq_response(w))
    assert rel.max() < 0.01


def test_bilinear_pole_at_minus_one_rejected():
    with pytest.raises(FrequencyWarpingError):
        bilinear_resample(DiscreteTf([1.0], [1.0], 0.1), 0.05)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 0.98), min_size=1, max_size=3),
       st.lists(st.floats(-np.pi, np.pi), min_size=3, max_size=3),
       st.floats(0.2, 5.0))
def test_bilinear_preserves_stability(radii, angles, ratio):
    poles = [r * np.exp(1j * a) for r, a in zip(radii, angles)]
    poles = poles + [np.conj(z) for z in poles if abs(z.imag) > 1e-9]
    a = np.real(np.poly(poles))[1:]
    tf = DiscreteTf(np.ones(a.size + 1), a, 1.0)
    try:
        out = bilinear_resample(tf, 1.0 / ratio)
    except FrequencyWarpingError:
        return
    new_poles = np.roots(np.r_[1.0, out.a]) if out.a.size else np.zeros(0)
    assert np.all(np.abs(new_poles) < 1.0 + 1e-9)


# costs --------------------------------------------------------------------------

def test_j_zero_signal():
    t = np.linspace(0, 10, 101)
    assert cost_j1(t, np.zeros(101), (2, 8)) == 0 and cost_j2(t, np.zeros(101), (2, 8)) == 0


def test_j1_sinusoid_four_periods():
    T = 5.0
    t = np.arange(0, 30 + 1e-9, 0.01)
    u = np.sin(2 * np.pi * t / T)
    spec = CostSpec(t1=25.0, period=T)
    assert abs(cost_j1(t, u, spec) - 2 * T) < 1e-6
    assert cost_j2(t, u, spec) < 1e-20


def test_j_constant_signal():
    t = np.linspace(0, 10, 1001)
    c, W = 1.7, 6.0
    assert cost_j1(t, np.full(t.size, c), (2, 8)) == pytest.approx(c * c * W, rel=1e-12)
    assert cost_j2(t, np.full(t.size, c), (2, 8)) == pytest.approx(c * c * W * W, rel=1e-12)


def test_window_not_covered():
    t = np.linspace(0, 10, 11)
    with pytest.raises(ConfigurationError):
        cost_j1(t, np.ones(11), (5, 12))


def test_window_integral_off_grid_is_exact_for_linear():
    t = np.linspace(0, 1, 11)
    # the interpolant of a linear signal is exact, so off-grid windows integrate exactly
    _, g = cost_j2(t, t, (0.23, 0.71), return_grad=True)
    m = np.sqrt(cost_j2(t, t, (0.23, 0.71)))
    assert m == pytest.approx((0.71 ** 2 - 0.23 ** 2) / 2, rel=1e-13)


def test_cost_total_examples():
    spec = CostSpec(t0=0, t_end=1)
    assert cost_total([1.0, 2.0], [1e-6, 0.0], spec) == 3.0
    assert cost_total([0.0], [spec.j2_threshold + 1.0], spec) == pytest.approx(1000.0, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_cost_total_monotone_in_j2(x, y):
    spec = CostSpec(t0=0, t_end=1)
    lo, hi = sorted([x, y])
    assert cost_total([0.5], [lo], spec) <= cost_total([0.5], [hi], spec)


def test_relu_gradient_branches():
    spec = CostSpec(t0=0, t_end=1)
    _, g1, g2 = cost_total([0.3, 0.2], [1e-7, 1e-3], spec, return_grad=True)
    assert np.array_equal(g1, [1.0, 1.0])
    assert g2[0] == 0.0 and g2[1] == spec.alpha
    # threshold itself belongs to the inactive branch
    assert cost_total([0.0], [spec.j2_threshold], spec, return_grad=True)[2][0] == 0.0


def test_wake_cost_examples():
    t = np.arange(0, 20 + 1e-9, 0.01)
    s = np.sin(2 * np.pi * t / 5)
    assert wake_cost(t, 0 * t, 0 * t, (5, 15)) == 0
    assert wake_cost(t, s, s, (5, 15)) == pytest.approx(2 * cost_j1(t, s, (5, 15)), rel=1e-14)
    u1, u2 = np.cos(t), np.sin(3 * t)
    assert wake_cost(t, 2 * u1, 2 * u2, (5, 15)) == pytest.approx(
        4 * wake_cost(t, u1, u2, (5, 15)), rel=1e-14)


def test_cost_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    t = np.linspace(0, 3, 31)
    u = rng.normal(size=31)
    a = rng.normal(size=30)
    for f in (lambda u: cost_j1(t, u, (0.55, 2.4), True),
              lambda u: cost_j2(t, u, (0.55, 2.4), True)):
        val, g = f(u)
        d = rng.normal(size=31)
        fd = (f(u + 1e-6 * d)[0] - f(u - 1e-6 * d)[0]) / 2e-6
        assert fd == pytest.approx(g @ d, rel=1e-6)
    _, gq, ga = quadratic_cost(t, u, a, (0.5, 2.5), 0.3, True)
    d = rng.normal(size=30)
    fd = (quadratic_cost(t, u, a + 1e-6 * d, (0.5, 2.5), 0.3)
          - quadratic_cost(t, u, a - 1e-6 * d, (0.5, 2.5), 0.3)) / 2e-6
    assert fd == pytest.approx(ga @ d, rel=1e-6)


# Gaussian sensors ---------------------------------------------------------------

def _grid():
    x = np.linspace(0, 4, 41)
    y = np.linspace(-1, 1, 21)
    X, Y = np.meshgrid(x, y, indexing="ij")
    return X.ravel(), Y.ravel()


def test_sensor_uniform_field():
    X, Y = _grid()
    assert gaussian_sensor_read(np.full(X.size, 2.5), X, Y, 1.33, 0.21, 0.3, 0.2) == \
        pytest.approx(2.5, rel=1e-14)


def test_sensor_narrow_width_reads_node():
    X, Y = _grid()
    f = np.sin(X) * np.cos(2 * Y)
    node = 17 * 21 + 5
    val = gaussian_sensor_read(f, X, Y, X[node], Y[node], 0.01, 0.01)
    assert abs(val - f[node]) < 1e-6


def test_sensor_gradient_matches_finite_differences():
    X, Y = _grid()
    f = np.sin(X) * np.cos(2 * Y) + 0.3 * X
    _, gx, gy = gaussian_sensor_read(f, X, Y, 1.37, 0.18, 0.3, 0.2, return_grad=True)
    h = 1e-6
    fdx = (gaussian_sensor_read(f, X, Y, 1.37 + h, 0.18, 0.3, 0.2)
           - gaussian_sensor_read(f, X, Y, 1.37 - h, 0.18, 0.3, 0.2)) / (2 * h)
    fdy = (gaussian_sensor_read(f, X, Y, 1.37, 0.18 + h, 0.3, 0.2)
           - gaussian_sensor_read(f, X, Y, 1.37, 0.18 - h, 0.3, 0.2)) / (2 * h)
    assert fdx == pytest.approx(gx, rel=1e-5)
    assert fdy == pytest.approx(gy, rel=1e-5)


def test_sensor_far_outside_domain_rejected():
    X, Y = _grid()
    with pytest.raises(ConfigurationError):
        gaussian_sensor_read(np.ones(X.size), X, Y, 500.0, 0.0, 0.1, 0.1)


# stabilized training ------------------------------------------------------------

def test_repulsive_penalty_examples():
    pol = NeuralPolicy(n_inputs=2, hidden=(5,), seed=0, init_scale=1.0)
    X = sample_grid([(-1, 1), (-2, 2)])
    assert X.shape == (1024, 2)
    th = pol.params
    assert policy_distance(pol, th, th, X) == 0
    assert repulsive_penalty(pol, th, [th], X, tau=0.1, lambda_rep=3.0) == 3.0
    other = th + 0.3
    d = policy_distance(pol, th, other, X)
    pen = repulsive_penalty(pol, th, [other], X, tau=d / 5, lambda_rep=3.0)
    assert pen < 2e-11 * 3.0
    assert repulsive_penalty(pol, th, [], X, tau=0.1, lambda_rep=3.0) == 0


def test_repulsive_gradient_matches_finite_differences():
    pol = NeuralPolicy(n_inputs=2, hidden=(5,), seed=0, init_scale=1.0)
    X = sample_grid([(-1, 1), (-1, 1)], n=8)
    th = pol.params
    bad = [th + 0.05 * np.random.default_rng(1).normal(size=th.size)]
    _, g = repulsive_penalty(pol, th, bad, X, 1e-3, 1.0, return_grad=True)
    d = np.random.default_rng(2).normal(size=th.size)
    h = 1e-7
    fd = (repulsive_penalty(pol, th + h * d, bad, X, 1e-3, 1.0)
          - repulsive_penalty(pol, th - h * d, bad, X, 1e-3, 1.0)) / (2 * h)
    assert fd == pytest.approx(g @ d, rel=1e-5)


def test_empty_ranges_rejected():
    with pytest.raises(ConfigurationError):
        sample_grid([])
    with pytest.raises(ConfigurationError):
        input_ranges([])


# pressure map -------------------------------------------------------------------

def test_antisymmetric_bookkeeping():
    y1, y2 = antisymmetric_signals(np.array([1.0, 2.0, 3.0, 4.0]))
    assert y1[0] == -3 and y2[0] == -1


def test_pressure_map_constant_target():
    rng = np.random.default_rng(0)
    q = rng.normal(size=(100, 3))
    g = pressure_map_fit(q, np.tile([0.1, -0.2, 0.3, 0.4], (100, 1)), hidden=(8,), epochs=5)
    p, _, _ = pressure_map_eval(g, rng.normal(size=(20, 3)))
    assert np.abs(p - [0.1, -0.2, 0.3, 0.4]).max() < 1e-4


def test_pressure_map_linear_recovery():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(4, 3))
    q = rng.normal(size=(250, 3))
    p = q @ M.T
    g = pressure_map_fit(q[:200], p[:200], hidden=(16, 16), epochs=20)
    pred = pressure_map_eval(g, q[200:])[0]
    assert np.linalg.norm(pred - p[200:]) / np.linalg.norm(p[200:]) < 0.01


def test_pressure_map_needs_samples():
    with pytest.raises(ConfigurationError):
        pressure_map_fit(np.zeros((MIN_SAMPLES - 1, 2)), np.zeros((MIN_SAMPLES - 1, 4)))


# sensor placement ---------------------------------------------------------------

def _random_entries(seed, n_entries=2, r=3):
    rng = np.random.default_rng(seed)
    X, Y = _grid()
    out = []
    for _ in range(n_entries):
        A = 0.4 * rng.normal(size=(r, r)) - np.eye(r)
        Phi, Gam = discretize_rk4(A, rng.normal(size=r), 0.1)
        modes = np.stack([np.sin((k + 1) * X) * np.cos((k + 1) * Y) for k in range(r)], axis=1)
        out.append(PlacementEntry(Phi, Gam, 0.2 * np.cos(X + Y), modes, rng.normal(size=r), 0.0,
                                  rng.normal(size=r), 0.1 * np.arange(121), k_on=10))
    return out, (X, Y)


@pytest.mark.parametrize("threshold", [1e3, 1e-9])
def test_placement_gradient_matches_finite_differences(threshold):
    entries, grid = _random_entries(3)
    ctrl = DiscreteTf([0.3, -0.1], [-0.2], 0.1)
    spec = CostSpec(t0=2.0, t_end=12.0, j2_threshold=threshold)
    pos = np.array([1.7, 0.15])
    _, g_th, g_pos = placement_cost(entries, ctrl, ctrl.params, pos, grid, (0.3, 0.2), spec)
    h = 1e-6
    for i in range(2):
        e = np.eye(2)[i] * h
        fd = (placement_cost(entries, ctrl, ctrl.params, pos + e, grid, (0.3, 0.2), spec)[0]
              - placement_cost(entries, ctrl, ctrl.params, pos - e, grid, (0.3, 0.2), spec)[0])
        assert fd / (2 * h) == pytest.approx(g_pos[i], rel=1e-5)
    d = np.array([0.3, -0.5, 0.8])
    fd = (placement_cost(entries, ctrl, ctrl.params + h * d, pos, grid, (0.3, 0.2), spec)[0]
          - placement_cost(entries, ctrl, ctrl.params - h * d, pos, grid, (0.3, 0.2), spec)[0])
    assert fd / (2 * h) == pytest.approx(g_th @ d, rel=1e-5)


def test_placement_zero_learning_rate_unchanged():
    entries, grid = _random_entries(4)
    ctrl = DiscreteTf([0.3, -0.1], [-0.2], 0.1)
    spec = CostSpec(t0=2.0, t_end=12.0)
    out, pos, _ = optimize_sensor_placement(entries, ctrl, (1.7, 0.15), grid, (0.3, 0.2), spec,
                                            steps=5, lr_theta=0.0, lr_pos=0.0)
    assert pos == (1.7, 0.15) and np.array_equal(out.params, ctrl.params)


def test_placement_benchmark_recovers_optimum():
    bench = PlacementBenchmark()
    pos, hist = run_placement_benchmark(bench)
    sx, sy = bench.span()
    assert abs(pos[0] - bench.x_star) <= 0.05 * sx
    assert abs(pos[1] - bench.y_star) <= 0.05 * sy
    assert min(h[0] for h in hist) <= hist[0][0]
