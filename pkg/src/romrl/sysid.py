"""Linear system identification: finite-difference derivatives, operator
inference by ridge regression, and the eigensystem realization algorithm."""

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, RankDeficiencyError

DEFAULT_RIDGE = 1e-8


# ---------------------------------------------------------------------------
# Sixth-order finite differences
# ---------------------------------------------------------------------------

def fornberg_weights(offsets, order=1):
    """Exact finite-difference weights at 0 for the given integer offsets."""
    offsets = [Fraction(o) for o in offsets]
    n = len(offsets)
    c = [[Fraction(0)] * (order + 1) for _ in range(n)]
    c[0][0] = Fraction(1)
    c1 = Fraction(1)
    c4 = offsets[0]
    for i in range(1, n):
        mn = min(i, order)
        c2 = Fraction(1)
        c5 = c4
        c4 = offsets[i]
        for j in range(i):
            c3 = offsets[i] - offsets[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2
            for k in range(mn, 0, -1):
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3
            c[j][0] = c4 * c[j][0] / c3
        c1 = c2
    return [w[order] for w in c]


@lru_cache(maxsize=None)
def _sixth_order_stencils():
    central = np.array([float(w) for w in fornberg_weights(range(-3, 4))])
    left = [np.array([float(w) for w in fornberg_weights([j - i for j in range(7)])])
            for i in range(3)]
    return central, left


def estimate_derivatives(traj, dt=None, t=None):
    """Sixth-order finite-difference time derivative of a sampled trajectory.

    Parameters
    ----------
    traj : array_like, shape (n_t, ...)
        Samples along axis 0.
    dt : float, optional
        Uniform sample spacing. Alternatively pass ``t``.
    t : array_like, optional
        Sample times; must be uniform to 1e-9 relative.

    Returns
    -------
    numpy.ndarray
        Same shape as ``traj``. Interior points use the 7-point central
        stencil, the first and last three points one-sided 7-point stencils;
        all are exact for polynomials of degree six or less.
    """
    q = np.asarray(traj, dtype=float)
    if t is not None:
        t = np.asarray(t, dtype=float)
        steps = np.diff(t)
        if steps.size == 0 or np.ptp(steps) > 1e-9 * abs(steps.mean()):
            raise ConfigurationError("finite differences need a uniform time grid")
        dt = steps.mean()
    if dt is None or not dt > 0:
        raise ConfigurationError("a positive time step is required")
    n = q.shape[0]
    if n < 7:
        raise ConfigurationError("at least 7 samples are needed for the sixth-order stencil")
    central, left = _sixth_order_stencils()
    out = np.empty_like(q)
    m = n - 6
    # weights sum to zero, so differencing against one sample makes constants exact
    out[3:n - 3] = sum(central[j] * (q[j:j + m] - q[3:3 + m]) for j in range(7))
    head, tail = q[:7] - q[0], q[::-1][:7] - q[-1]
    for i in range(3):
        out[i] = np.tensordot(left[i], head, axes=(0, 0))
        # mirror: stencil for point n-1-i uses reversed offsets and flipped sign
        out[n - 1 - i] = -np.tensordot(left[i], tail, axes=(0, 0))
    return out / dt


# ---------------------------------------------------------------------------
# Operator inference
# ---------------------------------------------------------------------------

@dataclass
class LinearRom:
    """Continuous-time reduced operators ``dq/dt = A q + B a``."""

    A: np.ndarray
    B: np.ndarray
    ridge: float = DEFAULT_RIDGE
    provenance: tuple = ()

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float).reshape(-1)
        if self.A.shape != (self.B.size, self.B.size):
            raise ConfigurationError("A must be r x r and B of length r")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise ConfigurationError("operators must be finite")

    @property
    def r(self):
        return self.B.size


def opinf_fit(Q, dQ, U, ridge=DEFAULT_RIDGE, provenance=()):
    """Fit ``[A B] = dQ Z^T (Z Z^T + ridge I)^-1`` with ``Z = [Q; U]``.

    The normal equations are never formed; the ridge problem is solved as an
    augmented least-squares system.

    Parameters
    ----------
    Q, dQ : array_like, shape (r, N)
        Reduced states and their time derivatives.
    U : array_like, shape (N,) or (1, N)
        Scalar action samples.
    ridge : float
        Tikhonov weight, non-negative.

    Raises
    ------
    RankDeficiencyError
        ``ridge == 0`` and ``Z`` is numerically rank deficient.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    dQ = np.atleast_2d(np.asarray(dQ, dtype=float))
    U = np.asarray(U, dtype=float).reshape(1, -1)
    r, N = Q.shape
    if dQ.shape != (r, N) or U.shape[1] != N:
        raise ConfigurationError("Q, dQ and U must share the sample count")
    if ridge < 0:
        raise ConfigurationError("ridge parameter must be non-negative")
    Z = np.vstack([Q, U])
    if ridge == 0:
        _, R, piv = sla.qr(Z.T, mode="economic", pivoting=True)
        d = np.abs(np.diag(R))
        tol = max(Z.shape) * np.finfo(float).eps * (d[0] if d.size else 0.0)
        bad = piv[d <= tol] if d.size and d[0] > 0 else piv
        if N < r + 1 or bad.size:
            names = [f"q{i}" if i < r else "u" for i in sorted(bad.tolist())]
            raise RankDeficiencyError(f"data matrix is rank deficient in rows {names}", names)
        lhs, rhs = Z.T, dQ.T
    else:
        lhs = np.vstack([Z.T, np.sqrt(ridge) * np.eye(r + 1)])
        rhs = np.vstack([dQ.T, np.zeros((r + 1, r))])
    sol = sla.lstsq(lhs, rhs, lapack_driver="gelsd")[0]
    AB = sol.T
    return LinearRom(AB[:, :r], AB[:, r], ridge, tuple(provenance))


# ---------------------------------------------------------------------------
# Eigensystem realization
# ---------------------------------------------------------------------------

@dataclass
class DiscreteLti:
    """Discrete realization ``x+ = A x + B u``, ``y = C x + D u``."""

    dt: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = None
    singular_values: np.ndarray = None
    degenerate: bool = False
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("step size must be positive")
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        if self.D is None:
            self.D = np.zeros((self.C.shape[0], self.B.shape[1]))
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.C.shape[1] != n:
            raise ConfigurationError("inconsistent realization dimensions")

    @property
    def order(self):
        return self.A.shape[0]

    def markov(self, n):
        """Markov parameters ``Y(0)=D, Y(k)=C A^(k-1) B`` for ``k < n``."""
        out = np.empty((n, self.C.shape[0], self.B.shape[1]))
        out[0] = self.D
        X = self.B
        for k in range(1, n):
            out[k] = self.C @ X
            X = self.A @ X
        return out

    def poles(self):
        return np.linalg.eigvals(self.A)


def era_fit(markov, order, block_count=None, shift=1, dt=1.0, rank_tol=1e-12):
    """Eigensystem realization from Markov parameters.

    Parameters
    ----------
    markov : array_like, shape (K, ny, nu) or (K,)
        ``Y(0), Y(1), ...`` with ``Y(k) = C A^(k-1) B`` for ``k >= 1``.
    order : int
        Requested model order ``r``.
    block_count : int, optional
        Number of block rows/columns of the Hankel matrices; the largest
        value the data supports by default.
    shift : int
        Block shift ``p``: ``H1[i, j] = Y(1 + (i+j) p)``, ``H2[i, j] = Y(2 + (i+j) p)``.

    Returns
    -------
    DiscreteLti
        With ``A = S^-1/2 U* H2 V S^-1/2``, ``B`` the first ``nu`` columns of
        ``S^1/2 V*`` and ``C`` the first ``ny`` rows of ``U S^1/2``.
    """
    Y = np.asarray(markov, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None, None]
    K, ny, nu = Y.shape
    max_blocks = (K - 3) // (2 * shift) + 1 if K >= 3 else 0
    N = max_blocks if block_count is None else int(block_count)
    if N < 1 or 2 + 2 * (N - 1) * shift > K - 1:
        raise ConfigurationError("not enough Markov samples to fill the Hankel matrices")
    H1 = np.empty((N * ny, N * nu))
    H2 = np.empty_like(H1)
    for i in range(N):
        for j in range(N):
            H1[i * ny:(i + 1) * ny, j * nu:(j + 1) * nu] = Y[1 + (i + j) * shift]
            H2[i * ny:(i + 1) * ny, j * nu:(j + 1) * nu] = Y[2 + (i + j) * shift]
    D = Y[0]
    if not np.any(H1):
        return DiscreteLti(dt, np.zeros((1, 1)), np.zeros((1, nu)), np.zeros((ny, 1)), D,
                           np.zeros(0), degenerate=True)
    U, s, Vh = np.linalg.svd(H1, full_matrices=False)
    rank = int(np.sum(s > rank_tol * s[0]))
    r = int(order)
    truncated = False
    if r > rank:
        warnings.warn(f"ERA order {r} exceeds numerical rank {rank}; truncating", stacklevel=2)
        r, truncated = rank, True
    Ur, sr, Vr = U[:, :r], s[:r], Vh[:r].T
    isq = 1.0 / np.sqrt(sr)
    A = (isq[:, None] * (Ur.T @ H2 @ Vr)) * isq[None, :]
    ctrb = np.sqrt(sr)[:, None] * Vr.T
    obsv = Ur * np.sqrt(sr)[None, :]
    return DiscreteLti(dt, A, ctrb[:, :nu], obsv[:ny, :], D, s, truncated=truncated)
