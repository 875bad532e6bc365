"""Finite-difference oracle for the reverse-mode ROM gradients.

Each randomized instance draws a small linear ROM with a residual network,
a controller (neural, transfer-function or proportional), a reference
trajectory and a batch of initial states, then compares the tape gradient
of :func:`rom_loss` with central differences along random unit directions.
"""

from dataclasses import dataclass

import numpy as np

from ..control.controllers import DiscreteTf, NeuralPolicy, Proportional
from ..sysid import LinearRom
from .loss import rom_loss
from .rom import NodeRom, ResidualNet
from .simulate import backward, simulate_closed_loop, simulate_open_loop

KINDS = ("neural", "tf", "proportional")


@dataclass
class GradCheckResult:
    instance: int
    mode: str
    controller: str
    errors: dict

    @property
    def max_error(self):
        return max(self.errors.values())


def _instance(rng, i, hidden):
    r = int(rng.integers(2, 5))
    A = 0.3 * rng.normal(size=(r, r)) - np.eye(r)
    B = rng.normal(size=r)
    res = ResidualNet(r, hidden=hidden, k=float(rng.uniform(0.2, 1.0)), seed=i)
    # a zero last layer would make every omega-gradient except the last layer vanish
    res = res.with_params(res.net.init(rng, last_scale=1.0))
    rom = NodeRom(LinearRom(A, B), 0.05, res)
    mode = "closed" if i % 2 else "open"
    kind = KINDS[(i // 2) % 3]
    if kind == "neural":
        ctrl = NeuralPolicy(n_inputs=2, hidden=(6, 6), seed=i, init_scale=1.0)
    elif kind == "tf":
        ctrl = DiscreteTf(rng.normal(scale=0.3, size=3), rng.uniform(-0.4, 0.4, size=2), 0.05)
    else:
        ctrl = Proportional(rng.normal(scale=0.5, size=2))
    return rom, mode, kind, ctrl


def _relative(fd, ad):
    return abs(fd - ad) / max(abs(fd), abs(ad), 1e-12)


def check_instance(i, seed=0, n_steps=40, batch=2, h=1e-6, hidden=(8, 8)):
    """Compare tape and finite-difference directional derivatives for instance ``i``."""
    rng = np.random.default_rng([seed, i])
    rom, mode, kind, ctrl = _instance(rng, i, hidden)
    r = rom.r
    q0 = rng.normal(size=(batch, r))
    t_ref = rom.dt * np.arange(n_steps + 1)
    ref = rng.normal(scale=0.5, size=(n_steps + 1, batch, r))
    R = rng.normal(size=(ctrl.n_inputs, r))
    r0 = rng.normal(scale=0.1, size=ctrl.n_inputs)
    t_act = np.linspace(0.0, rom.dt * n_steps, 25)
    a_act = rng.normal(size=(batch, t_act.size))

    def loss(params=None, theta=None, q=q0):
        if mode == "open":
            traj, tape = simulate_open_loop(rom, q, t_act, a_act, n_steps, params=params)
        else:
            traj, tape = simulate_closed_loop(rom, q, ctrl, (R, r0), n_steps, k_on=3,
                                              params=params, theta=theta)
        val, g = rom_loss(traj.t, traj.states, t_ref, ref, return_grad=True)
        return val, g, tape

    _, g, tape = loss()
    grads = backward(tape, g)
    probes = [("omega", rom.residual.params, "params"), ("q0", q0, "q")]
    if mode == "closed":
        probes.append(("theta", ctrl.params, "theta"))
    errors = {}
    for name, base, key in probes:
        d = rng.normal(size=np.shape(base))
        d /= np.linalg.norm(d)
        fp = loss(**{key: base + h * d})[0]
        fm = loss(**{key: base - h * d})[0]
        errors[name] = _relative((fp - fm) / (2 * h), float(np.sum(grads[name] * d)))
    return GradCheckResult(i, mode, kind, errors)


def gradient_suite(n_instances=50, seed=0, **kw):
    """Run :func:`check_instance` on ``n_instances`` randomized instances."""
    return [check_instance(i, seed, **kw) for i in range(n_instances)]
