"""Reduced coordinates: snapshot POD, two-stage POD, sparse measurements."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

RANK_TOL = 1e-12


@dataclass
class ReducedBasis:
    """Affine basis ``q ~ mean + modes @ q_r`` with orthonormal ``modes``.

    Attributes
    ----------
    mean : (n,) array
    modes : (n, r) array
        ``[V_a, V_c]``; ``V_c`` is empty for a single-stage basis.
    singular_values : (r,) array
    energy : (r,) array
        Per-mode energy fraction within its own stage.
    r_a, r_c : int
    truncated : bool
        Fewer modes than requested because the data rank was lower.
    degenerate : bool
        The control-induced stage carried (almost) no energy.
    """

    mean: np.ndarray
    modes: np.ndarray
    singular_values: np.ndarray
    energy: np.ndarray
    r_a: int
    r_c: int = 0
    truncated: bool = False
    degenerate: bool = False
    provenance: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def r(self):
        return self.modes.shape[1]

    @property
    def n(self):
        return self.modes.shape[0]

    @property
    def V_a(self):
        return self.modes[:, :self.r_a]

    @property
    def V_c(self):
        return self.modes[:, self.r_a:]


def _as_matrix(snapshots):
    """Snapshot rows (count, n) -> columns matrix (n, count)."""
    X = np.asarray(getattr(snapshots, "snapshots", snapshots), dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigurationError("snapshot set must be a nonempty (count, n) array")
    return X.T


def _svd_modes(Q, r):
    U, s, _ = np.linalg.svd(Q, full_matrices=False)
    total = np.sum(s * s)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    keep = min(r, rank)
    energy = (s * s / total) if total > 0 else np.zeros_like(s)
    return U[:, :keep], s[:keep], energy[:keep], keep < r, s


def pod(snapshots, r, mean=None):
    """Single-stage POD of mean-subtracted snapshots.

    Parameters
    ----------
    snapshots : array_like, shape (count, n) or object with ``.snapshots``
    r : int
        Requested number of modes; truncated to the numerical rank (flagged).
    mean : array_like, optional
        Base state; the arithmetic snapshot mean by default.
    """
    if r < 1:
        raise ConfigurationError("r must be at least 1")
    Q = _as_matrix(snapshots)
    if Q.shape[1] < r:
        raise ConfigurationError(f"need at least r={r} snapshots, got {Q.shape[1]}")
    qbar = Q.mean(axis=1) if mean is None else np.asarray(mean, dtype=float)
    V, s, e, trunc, _ = _svd_modes(Q - qbar[:, None], r)
    return ReducedBasis(qbar, V, s, e, V.shape[1], 0, trunc)


def two_stage_pod(uncontrolled, controlled, r_a, r_c, mean="uncontrolled"):
    """Uncontrolled modes first, then modes of the control-induced residual.

    Parameters
    ----------
    uncontrolled, controlled : snapshot sets, shape (count, n)
    r_a, r_c : int
    mean : {"uncontrolled", "all"} or array
        Base state: uncontrolled time mean, mean over both sets, or explicit.
    """
    if r_a < 1 or r_c < 1:
        raise ConfigurationError("r_a and r_c must be at least 1")
    Qa = _as_matrix(uncontrolled)
    Qc = _as_matrix(controlled)
    if Qa.shape[0] != Qc.shape[0]:
        raise ConfigurationError("snapshot sets have different state lengths")
    if isinstance(mean, str):
        if mean == "uncontrolled":
            qbar = Qa.mean(axis=1)
        elif mean == "all":
            qbar = np.hstack([Qa, Qc]).mean(axis=1)
        else:
            raise ConfigurationError(f"unknown mean convention {mean!r}")
    else:
        qbar = np.asarray(mean, dtype=float)
    Va, sa, ea, ta, _ = _svd_modes(Qa - qbar[:, None], r_a)
    Qc0 = Qc - qbar[:, None]
    res = Qc0 - Va @ (Va.T @ Qc0)
    # a second projection sweep keeps cross-stage orthogonality at round-off level
    res -= Va @ (Va.T @ res)
    Uc, sc_all, _ = np.linalg.svd(res, full_matrices=False)
    lead = sa[0] if sa.size else 1.0
    rank_c = int(np.sum(sc_all > RANK_TOL * lead))
    degenerate = sc_all.size == 0 or sc_all[0] < 1e-8 * lead
    keep = min(r_c, rank_c) if not degenerate else 0
    Vc = Uc[:, :keep]
    Vc -= Va @ (Va.T @ Vc)
    if keep:
        Vc, _ = np.linalg.qr(Vc)
    total_c = np.sum(sc_all ** 2)
    ec = (sc_all[:keep] ** 2 / total_c) if total_c > 0 else np.zeros(keep)
    modes = np.hstack([Va, Vc])
    return ReducedBasis(qbar, modes, np.concatenate([sa, sc_all[:keep]]),
                        np.concatenate([ea, ec]), Va.shape[1], keep,
                        truncated=ta or keep < r_c, degenerate=bool(degenerate),
                        meta={"control_singular_values": sc_all[:r_c].tolist()})


def project(q, basis):
    """``q_r = V^T (q - mean)``; ``q`` may be (n,) or (count, n)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != basis.n:
        raise ConfigurationError("state length does not match the basis")
    return (q - basis.mean) @ basis.modes


def reconstruct(q_r, basis):
    q_r = np.asarray(q_r, dtype=float)
    if q_r.shape[-1] != basis.r:
        raise ConfigurationError("reduced length does not match the basis")
    return basis.mean + q_r @ basis.modes.T


def captured_energy(basis, *snapshot_sets):
    """Fraction of mean-subtracted snapshot energy inside ``span(modes)``."""
    Q = np.hstack([_as_matrix(s) for s in snapshot_sets]) - basis.mean[:, None]
    total = np.sum(Q * Q)
    if total == 0:
        return 1.0
    P = basis.modes.T @ Q
    return float(np.sum(P * P) / total)


@dataclass
class SparseMeasurement:
    """Measurement operator ``q_r = C q - offset`` as an index/weight table.

    ``indices[i]`` and ``weights[i]`` give the full-state entries combined by
    sensor ``i`` (a single index with weight 1 for pure selection).
    """

    n: int
    indices: list
    weights: list
    labels: tuple = ()
    offset: np.ndarray = None

    def __post_init__(self):
        self.indices = [np.atleast_1d(np.asarray(i, dtype=np.int64)) for i in self.indices]
        self.weights = [np.atleast_1d(np.asarray(w, dtype=float)) for w in self.weights]
        for i, w in zip(self.indices, self.weights):
            if i.shape != w.shape:
                raise ConfigurationError("index and weight rows must match")
            if i.size and (i.min() < 0 or i.max() >= self.n):
                raise ConfigurationError("sensor index out of bounds")
        if not self.labels:
            self.labels = tuple(f"s{i:02d}" for i in range(len(self.indices)))
        if self.offset is None:
            self.offset = np.zeros(len(self.indices))

    @classmethod
    def selection(cls, indices, n, labels=(), offset=None):
        return cls(n, [[i] for i in indices], [[1.0] for _ in indices], tuple(labels), offset)

    @property
    def m(self):
        return len(self.indices)

    def matrix(self):
        C = np.zeros((self.m, self.n))
        for row, (i, w) in enumerate(zip(self.indices, self.weights)):
            np.add.at(C[row], i, w)
        return C

    def with_offset(self, offset):
        return SparseMeasurement(self.n, self.indices, self.weights, self.labels,
                                 np.asarray(offset, dtype=float))

    def index_of(self, label):
        return self.labels.index(label)


def sparse_measure(q, C):
    """Apply a :class:`SparseMeasurement` to ``q`` of shape (n,) or (count, n)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != C.n:
        raise ConfigurationError("state length does not match the measurement operator")
    out = np.stack([(q[..., i] * w).sum(axis=-1) for i, w in zip(C.indices, C.weights)],
                   axis=-1)
    return out - C.offset
