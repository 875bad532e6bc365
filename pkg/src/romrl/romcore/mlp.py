"""Small fully connected networks on flat parameter vectors.

Parameters live in one contiguous float64 vector so optimizers, checkpoints
and finite-difference checks can treat them uniformly. Layers are ordered
input to output; each stores ``W`` as ``(fan_out, fan_in)`` followed by ``b``.
"""

import numpy as np


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, z, h):
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    return 1.0 - h * h


class MLP:
    """Fully connected network ``sizes[0] -> ... -> sizes[-1]``, linear output.

    Parameters
    ----------
    sizes : sequence of int
        Layer widths including input and output.
    activation : {"relu", "tanh"}
        Hidden-layer nonlinearity.
    """

    def __init__(self, sizes, activation="relu"):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError("MLP needs at least an input and an output width")
        self.activation = activation
        _act(activation, np.zeros(1))
        self._slices = []
        off = 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = slice(off, off + fan_in * fan_out)
            off += fan_in * fan_out
            b = slice(off, off + fan_out)
            off += fan_out
            self._slices.append((w, b, fan_out, fan_in))
        self.n_params = off

    def init(self, rng, zero_last=False, last_scale=1.0):
        """Uniform fan-in initialization (``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``)."""
        p = np.empty(self.n_params)
        for i, (w, b, fo, fi) in enumerate(self._slices):
            bound = 1.0 / np.sqrt(fi)
            p[w] = rng.uniform(-bound, bound, fo * fi)
            p[b] = rng.uniform(-bound, bound, fo)
            if i == len(self._slices) - 1:
                if zero_last:
                    p[w] = 0.0
                    p[b] = 0.0
                else:
                    p[w] *= last_scale
                    p[b] *= last_scale
        return p

    def layers(self, params):
        return [(params[w].reshape(fo, fi), params[b]) for w, b, fo, fi in self._slices]

    def forward(self, params, x):
        """Evaluate on a batch ``x`` of shape ``(batch, sizes[0])``.

        Returns the output and a cache for :meth:`vjp`.
        """
        h = np.asarray(x, dtype=float)
        acts = [h]
        pre = []
        layers = self.layers(params)
        for i, (W, b) in enumerate(layers):
            z = h @ W.T + b
            if i < len(layers) - 1:
                pre.append(z)
                h = _act(self.activation, z)
                acts.append(h)
            else:
                h = z
        return h, (acts, pre)

    def vjp(self, params, cache, gout):
        """Pull back ``gout`` (batch, sizes[-1]) to parameters and inputs."""
        acts, pre = cache
        layers = self.layers(params)
        grad = np.zeros(self.n_params)
        g = gout
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            w, b, fo, fi = self._slices[i]
            grad[w] = (g.T @ acts[i]).ravel()
            grad[b] = g.sum(axis=0)
            g = g @ W
            if i > 0:
                g = g * _act_grad(self.activation, pre[i - 1], acts[i])
        return grad, g

    def __call__(self, params, x):
        return self.forward(params, x)[0]
