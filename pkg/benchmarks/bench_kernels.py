"""Compare the numba and pure-numpy implementations of the hot kernels.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is called once
per backend to warm up (compilation is excluded), then timed with
``timeit``; the two results are also checked for agreement.
"""

import argparse
import timeit

import numpy as np

from romrl import _kernels
from romrl.plants.convective import ConvectivePlant
from romrl.plants.wake import WakePlant
from romrl.romcore.linear import discretize_rk4


def _cases():
    rng = np.random.default_rng(0)
    gl = ConvectivePlant()
    q = rng.normal(scale=1e-3, size=gl.n_state)
    gl_args = (q, np.zeros(gl.n_state // 2), gl.dt, gl.mu, gl._coef)
    wk = WakePlant()
    wk_args = (wk.limit_cycle_state(), 0.1, wk.dt, wk._p)

    r = 8
    A = 0.3 * rng.normal(size=(r, r)) - np.eye(r)
    Phi, Gam = discretize_rk4(A, rng.normal(size=r), 0.1)
    R = rng.normal(size=r)
    b, c = np.array([0.6, -0.4, 0.2]), np.array([-0.6, 0.01])
    q0 = rng.normal(size=r)
    n = 2000
    states, ys, acts, _ = _kernels.lti_tf_rollout_numpy(Phi, Gam, R, 0.0, b, c, q0, n, 0)
    gq = rng.normal(size=states.shape)
    ga = np.zeros(n)
    return {
        "gl_rk4_step": gl_args,
        "wake_rk4_step": wk_args,
        "lti_tf_rollout": (Phi, Gam, R, 0.0, b, c, q0, n, 0),
        "lti_tf_adjoint": (Phi, Gam, R, b, c, states, ys, acts, gq, ga, 0),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--number", type=int, default=200, help="calls per timing")
    args = p.parse_args(argv)
    if not _kernels.USE_NUMBA:
        print("numba path disabled (ROMRL_DISABLE_NUMBA set or numba missing); "
              "both columns time the numpy fallback")
    print(f"{'kernel':<16}{'numpy [us]':>12}{'numba [us]':>12}{'speedup':>9}{'max |diff|':>12}")
    for name, call_args in _cases().items():
        f_np = getattr(_kernels, f"{name}_numpy")
        f_nb = getattr(_kernels, f"{name}_numba")
        out_np, out_nb = f_np(*call_args), f_nb(*call_args)
        t_np = timeit.timeit(lambda: f_np(*call_args), number=args.number) / args.number
        t_nb = timeit.timeit(lambda: f_nb(*call_args), number=args.number) / args.number
        print(f"{name:<16}{1e6 * t_np:>12.1f}{1e6 * t_nb:>12.1f}{t_np / t_nb:>9.1f}"
              f"{_max_diff(out_np, out_nb):>12.2e}")


if __name__ == "__main__":
    main()
