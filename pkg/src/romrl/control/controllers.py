"""Controller parameterizations.

Every controller exposes ``reset() -> state`` and ``act(inputs, state) ->
(action, state)`` for plant deployment, plus a flat parameter vector
(``params`` / ``with_params``) for gradient-based optimization. Stateless
controllers also provide batched ``forward``/``vjp``; the discrete transfer
function is stateful and differentiated by the rollout engines directly.
"""

import numpy as np

from ..errors import ConfigurationError
from ..romcore.mlp import MLP


class Proportional:
    """``a = K . y`` for a gain vector ``K`` (one entry per feedback input)."""

    kind = "proportional"
    stateful = False

    def __init__(self, gain):
        self.gain = np.atleast_1d(np.asarray(gain, dtype=float)).copy()

    @property
    def n_inputs(self):
        return self.gain.size

    @property
    def params(self):
        return self.gain.copy()

    def with_params(self, p):
        return Proportional(p)

    def reset(self):
        return None

    def act(self, inputs, state=None):
        return float(self.gain @ np.asarray(inputs, dtype=float)), state

    def forward(self, params, Y):
        return Y @ params, Y

    def vjp(self, params, cache, abar):
        return cache.T @ abar, np.outer(abar, params)

    def to_dict(self):
        return {"kind": self.kind, "gain": self.gain.tolist()}


class DiscreteTf:
    """SISO difference equation ``a_k = sum_i b_i y_(k-i) - sum_i a_i a_(k-i)``.

    Coefficients follow the ``z^-i`` convention: numerator ``b_0..b_n`` and
    denominator ``1 + a_1 z^-1 + ... + a_n z^-n``. Registers start at zero.
    """

    kind = "discrete_tf"
    stateful = True
    n_inputs = 1

    def __init__(self, b, a=(), dt=1.0):
        self.b = np.atleast_1d(np.asarray(b, dtype=float)).copy()
        self.a = np.atleast_1d(np.asarray(a, dtype=float)).copy() if len(a) else np.zeros(0)
        if not dt > 0:
            raise ConfigurationError("controller step must be positive")
        self.dt = float(dt)

    @property
    def order(self):
        return max(self.b.size - 1, self.a.size)

    @property
    def params(self):
        return np.concatenate([self.b, self.a])

    def with_params(self, p):
        p = np.asarray(p, dtype=float)
        return DiscreteTf(p[:self.b.size], p[self.b.size:], self.dt)

    def reset(self):
        return np.zeros(self.b.size), np.zeros(self.a.size)

    def act(self, inputs, state):
        y_hist, a_hist = state
        y = float(np.ravel(inputs)[0])
        y_hist = np.concatenate([[y], y_hist[:-1]])
        action = float(self.b @ y_hist - self.a @ a_hist)
        if a_hist.size:
            a_hist = np.concatenate([[action], a_hist[:-1]])
        return action, (y_hist, a_hist)

    def response(self, y):
        """Apply the filter to a whole input sequence from zero registers."""
        state = self.reset()
        out = np.empty(len(y))
        for k, v in enumerate(y):
            out[k], state = self.act([v], state)
        return out

    def freq_response(self, w):
        """``K(e^{i w dt})`` at angular frequencies ``w``."""
        z = np.exp(-1j * np.asarray(w, dtype=float) * self.dt)
        num = np.polyval(self.b[::-1], z)
        den = 1.0 + z * np.polyval(self.a[::-1], z) if self.a.size else 1.0
        return num / den

    def dc_gain(self):
        return self.b.sum() / (1.0 + self.a.sum())

    def to_dict(self):
        return {"kind": self.kind, "b": self.b.tolist(), "a": self.a.tolist(), "dt": self.dt}


class NeuralPolicy:
    """Bounded network policy ``a = scale * tanh(net(s * y) - net(0))``.

    Subtracting the network's value at the origin makes zero feedback give
    exactly zero action while keeping the output inside ``[-scale, scale]``.

    Parameters
    ----------
    params : array_like or None
        Flat parameter vector; drawn from ``seed`` when ``None``.
    n_inputs : int
    hidden : tuple of int
        Hidden widths (tanh activations).
    scale : float
        Output bound.
    input_scale : array_like, optional
        Fixed per-input multipliers ``s`` applied before the network.
    """

    kind = "neural"
    stateful = False

    def __init__(self, params=None, n_inputs=2, hidden=(128, 128), scale=1.0,
                 input_scale=None, seed=0, init_scale=0.1):
        self.n_inputs = int(n_inputs)
        self.hidden = tuple(int(h) for h in hidden)
        self.scale = float(scale)
        self.input_scale = (np.ones(self.n_inputs) if input_scale is None
                            else np.asarray(input_scale, dtype=float).copy())
        self.net = MLP((self.n_inputs, *self.hidden, 1), activation="tanh")
        if params is None:
            params = self.net.init(np.random.default_rng(seed), last_scale=init_scale)
        self._params = np.asarray(params, dtype=float).copy()
        if self._params.size != self.net.n_params:
            raise ConfigurationError("policy parameter count does not match architecture")
        self.seed = seed

    @property
    def params(self):
        return self._params.copy()

    def with_params(self, p):
        return NeuralPolicy(p, self.n_inputs, self.hidden, self.scale, self.input_scale, self.seed)

    def reset(self):
        return None

    def act(self, inputs, state=None):
        a, _ = self.forward(self._params, np.asarray(inputs, dtype=float)[None, :])
        return float(a[0]), state

    def forward(self, params, Y):
        X = np.vstack([np.asarray(Y, dtype=float) * self.input_scale,
                       np.zeros((1, self.n_inputs))])
        z, cache = self.net.forward(params, X)
        t = np.tanh(z[:-1, 0] - z[-1, 0])
        return self.scale * t, (cache, t)

    def vjp(self, params, cache, abar):
        net_cache, t = cache
        g = abar * self.scale * (1.0 - t * t)
        gz = np.append(g, -g.sum())[:, None]
        gp, gx = self.net.vjp(params, net_cache, gz)
        return gp, gx[:-1] * self.input_scale

    def evaluate(self, Y, params=None):
        return self.forward(self._params if params is None else params, np.atleast_2d(Y))[0]

    def to_dict(self):
        return {"kind": self.kind, "n_inputs": self.n_inputs, "hidden": list(self.hidden),
                "scale": self.scale, "input_scale": self.input_scale.tolist(),
                "seed": self.seed}


class ZeroController(Proportional):
    """Always returns zero; arity configurable."""

    def __init__(self, n_inputs=1):
        super().__init__(np.zeros(n_inputs))


def controller_eval(controller, inputs, registers=None):
    """Evaluate one control step; returns ``(action, registers')``."""
    if registers is None:
        registers = controller.reset()
    if np.size(inputs) != controller.n_inputs:
        raise ConfigurationError(
            f"controller expects {controller.n_inputs} inputs, got {np.size(inputs)}")
    return controller.act(inputs, registers)


def controller_to_blocks(controller):
    """Split a controller into a metadata dict and named parameter blocks."""
    meta = controller.to_dict()
    blocks = {}
    if controller.kind == "neural":
        blocks["theta"] = controller.params
    return meta, blocks


def controller_from_blocks(meta, blocks=None):
    kind = meta["kind"]
    if kind == "proportional":
        return Proportional(meta["gain"])
    if kind == "discrete_tf":
        return DiscreteTf(meta["b"], meta["a"], meta["dt"])
    if kind == "neural":
        params = None if blocks is None else np.ravel(blocks["theta"])
        return NeuralPolicy(params, meta["n_inputs"], tuple(meta["hidden"]), meta["scale"],
                            meta.get("input_scale"), meta.get("seed", 0))
    raise ConfigurationError(f"unknown controller kind {kind!r}")
