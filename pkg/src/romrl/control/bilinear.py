"""Step-size resampling of discrete controllers through the bilinear map."""

import numpy as np
from numpy.polynomial import polynomial as P

from ..errors import ConfigurationError
from .controllers import DiscreteTf


class FrequencyWarpingError(ConfigurationError):
    """The transfer function has a pole at ``z = -1`` (Tustin singularity)."""


def _substitute(coefs, rho, n):
    """``sum_i c_i x^i`` with ``x = ((1-rho) + (1+rho) y) / ((1+rho) + (1-rho) y)``,
    multiplied through by the denominator to the power ``n``."""
    num = np.array([1.0 - rho, 1.0 + rho])
    den = np.array([1.0 + rho, 1.0 - rho])
    out = np.zeros(n + 1)
    for i, c in enumerate(coefs):
        if c == 0.0:
            continue
        term = P.polymul(P.polypow(num, i), P.polypow(den, n - i))
        out[: term.size] += c * term
    return out


def bilinear_resample(tf, dt_new):
    """Map a discrete controller at ``tf.dt`` to step ``dt_new``.

    Equivalent to the inverse Tustin transform to continuous time followed
    by the Tustin transform at ``dt_new``; done in one step as the Moebius map
    ``z^-1 -> (1 - rho + (1 + rho) y) / (1 + rho + (1 - rho) y)`` with
    ``rho = dt / dt_new`` and ``y`` the new ``z^-1``. DC gain is preserved and
    the unit disk maps onto itself.

    Raises
    ------
    FrequencyWarpingError
        If the denominator vanishes at ``z = -1``.
    """
    if not (tf.dt > 0 and dt_new > 0):
        raise ConfigurationError("step sizes must be positive")
    b = tf.b
    a = np.concatenate([[1.0], tf.a])
    n = max(b.size, a.size) - 1
    scale = np.abs(a).sum()
    alt = np.sum(a * (-1.0) ** np.arange(a.size))
    if abs(alt) <= 1e-12 * scale:
        raise FrequencyWarpingError("controller has a pole at z = -1; bilinear map undefined")
    rho = tf.dt / dt_new
    if rho == 1.0:
        return DiscreteTf(b.copy(), tf.a.copy(), dt_new)
    nb = _substitute(b, rho, n)
    na = _substitute(a, rho, n)
    lead = na[0]
    nb, na = nb / lead, na / lead
    # drop trailing coefficients that are zero by construction (lower order)
    order = n
    while order > 0 and abs(na[order]) <= 1e-14 and abs(nb[order]) <= 1e-14:
        order -= 1
    return DiscreteTf(nb[: order + 1], na[1: order + 1], dt_new)
