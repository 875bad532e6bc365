"""Run configuration: a single versioned JSON document with strict keys.

Top-level keys::

    version     schema version (must be 1)
    workflow    "scalar" | "wake" | "bank"
    seed        master seed (feeds the trainer, the bank and episode noise)
    output      output directory
    backend     "auto" | "numba" | "numpy"
    plant       plant parameters (WakePlantConfig / ConvectivePlantConfig fields)
    problem     workflow settings (ScalarLqrProblem / WakeSetup / BankSetup fields)
    trainer     outer-loop schedule (TrainConfig fields, except seed)
    controller  initial or evaluated controller: {"kind": ..., ...}
    episode     schedule of ``romrl episode`` (EpisodeSchedule fields, except seed)
    fit         basis and ROM settings of ``romrl fit``
    pressure    pressure-map network settings
    placement   sensor-placement benchmark settings
    step_check  ROM step-size verification settings

Unknown keys anywhere raise :class:`ConfigurationError`, and the hash of the
normalized document (defaults filled in, output location excluded) is stamped
on every artifact.
"""

import dataclasses
import json
from dataclasses import dataclass, field

from . import io
from .control.controllers import DiscreteTf, NeuralPolicy, Proportional, ZeroController
from .control.sensors import PlacementBenchmark
from .errors import ConfigurationError
from .plants.convective import ConvectivePlantConfig
from .plants.episode import EpisodeSchedule
from .plants.wake import WakePlantConfig
from .trainer.bank import BankSetup
from .trainer.problems import ScalarLqrProblem, WakeSetup
from .trainer.schedule import TrainConfig

SCHEMA_VERSION = 1
WORKFLOWS = ("scalar", "wake", "bank")
TOP_LEVEL = ("version", "workflow", "seed", "output", "backend", "plant", "problem", "trainer",
             "controller", "episode", "fit", "pressure", "placement", "step_check")

DEFAULT_CONTROLLER = {
    "scalar": {"kind": "proportional", "gain": [-2.0]},
    "wake": {"kind": "proportional", "gain": [0.5, 0.0]},
    "bank": {"kind": "zero", "n_inputs": 1},
}
DEFAULT_EPISODE = {
    "scalar": {"duration": 5.0},
    "wake": {"duration": 60.0, "t_on": 10.0, "stride": 2},
    "bank": {"duration": 300.0, "t_on": 150.0, "noise": "white", "stride": 5},
}
CONTROLLER_KEYS = {
    "zero": ("n_inputs",),
    "proportional": ("gain",),
    "discrete_tf": ("b", "a", "dt"),
    "neural": ("n_inputs", "hidden", "scale", "input_scale", "seed"),
}


@dataclass(frozen=True)
class FitSettings:
    """Basis and ROM settings of ``romrl fit``.

    The first episode passed to the command is the uncontrolled reference;
    the rest are control-induced data. The residual is trained in open loop.
    """

    basis: str = "pod"
    r_a: int = 4
    r_c: int = 3
    mean: str = "uncontrolled"
    ridge: float = 1e-8
    rom_dt: float = 0.1
    t_start: float = 0.0
    residual: bool = True
    k: float = 0.05
    hidden: tuple = (32, 32, 32)
    epochs: int = 100
    lr: float = 1e-3
    segment_steps: int = 50

    def __post_init__(self):
        if self.basis not in ("pod", "sparse"):
            raise ConfigurationError(f"fit.basis must be 'pod' or 'sparse', got {self.basis!r}")
        if self.mean not in ("uncontrolled", "all"):
            raise ConfigurationError("fit.mean must be 'uncontrolled' or 'all'")


@dataclass(frozen=True)
class PressureSettings:
    hidden: tuple = (64, 64)
    epochs: int = 200
    batch: int = 64
    lr: float = 1e-3
    holdout: float = 0.2


@dataclass(frozen=True)
class StepCheckSettings:
    horizon: float = 10.0
    rtol: float = 1e-3


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def build_section(cls, data, section, exclude=()):
    """Instantiate dataclass ``cls`` from ``data`` rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"section {section!r} must be a mapping")
    allowed = [f.name for f in dataclasses.fields(cls) if f.name not in exclude]
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")
    kw = {k: _tuplify(v) for k, v in data.items()}
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigurationError(f"invalid {section!r} section: {exc}") from None


def _plain(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def make_controller(spec):
    """Controller from a ``{"kind": ...}`` mapping."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in CONTROLLER_KEYS:
        raise ConfigurationError(f"controller.kind must be one of {sorted(CONTROLLER_KEYS)}")
    unknown = sorted(set(spec) - set(CONTROLLER_KEYS[kind]))
    if unknown:
        raise ConfigurationError(f"unknown key(s) in 'controller': {', '.join(unknown)}")
    if kind == "zero":
        return ZeroController(int(spec.get("n_inputs", 1)))
    if kind == "proportional":
        return Proportional(spec["gain"])
    if kind == "discrete_tf":
        return DiscreteTf(spec["b"], spec.get("a", []), spec["dt"])
    return NeuralPolicy(None, spec.get("n_inputs", 2), tuple(spec.get("hidden", (32, 32))),
                        spec.get("scale", 1.0), spec.get("input_scale"), spec.get("seed", 0))


@dataclass
class RunConfig:
    """Validated run configuration; ``document`` is the normalized JSON form."""

    workflow: str
    seed: int
    output: str
    backend: str
    plant: object
    problem: object
    trainer: TrainConfig
    controller: dict
    episode: EpisodeSchedule
    fit: FitSettings
    pressure: PressureSettings
    placement: PlacementBenchmark
    step_check: StepCheckSettings
    document: dict = field(default_factory=dict)

    @property
    def hash(self):
        # the output location does not influence any artifact content
        return io.config_hash({k: v for k, v in self.document.items() if k != "output"})

    @property
    def backend_arg(self):
        return None if self.backend == "auto" else self.backend

    def plant_dict(self):
        return {} if self.plant is None else self.plant.to_dict()

    def make_controller(self):
        return make_controller(self.controller)

    def with_output(self, output):
        doc = dict(self.document, output=output)
        return parse_config(doc)


def parse_config(doc):
    """Validate a config mapping and return a :class:`RunConfig`."""
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    unknown = sorted(set(doc) - set(TOP_LEVEL))
    if unknown:
        raise ConfigurationError(f"unknown top-level key(s): {', '.join(unknown)}")
    if doc.get("version") != SCHEMA_VERSION:
        raise ConfigurationError(f"config version must be {SCHEMA_VERSION}, "
                                 f"got {doc.get('version')!r}")
    wf = doc.get("workflow")
    if wf not in WORKFLOWS:
        raise ConfigurationError(f"workflow must be one of {WORKFLOWS}, got {wf!r}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigurationError("seed must be a non-negative integer")
    backend = doc.get("backend", "auto")
    if backend not in ("auto", "numba", "numpy"):
        raise ConfigurationError("backend must be 'auto', 'numba' or 'numpy'")
    output = doc.get("output", f"runs/{wf}")
    if not isinstance(output, str) or not output:
        raise ConfigurationError("output must be a non-empty path")

    plant_doc = doc.get("plant") or {}
    if wf == "wake":
        plant = build_section(WakePlantConfig, plant_doc, "plant")
    elif wf == "bank":
        if not isinstance(plant_doc, dict):
            raise ConfigurationError("section 'plant' must be a mapping")
        unknown = sorted(set(plant_doc) - {f.name for f in
                                           dataclasses.fields(ConvectivePlantConfig)})
        if unknown:
            raise ConfigurationError(f"unknown key(s) in 'plant': {', '.join(unknown)}")
        try:
            plant = ConvectivePlantConfig.from_dict(plant_doc)
        except TypeError as exc:
            raise ConfigurationError(f"invalid 'plant' section: {exc}") from None
    else:
        if plant_doc:
            raise ConfigurationError("the scalar workflow has no plant parameters; "
                                     "use the 'problem' section")
        plant = None

    prob_doc = dict(doc.get("problem") or {})
    if wf == "wake":
        problem = build_section(WakeSetup, prob_doc, "problem", exclude=("plant",))
        problem = dataclasses.replace(problem, plant=plant.to_dict())
    elif wf == "bank":
        problem = build_section(BankSetup, prob_doc, "problem", exclude=("plant", "seed"))
        problem = dataclasses.replace(problem, plant=plant.to_dict(), seed=seed)
    else:
        problem = build_section(ScalarLqrProblem, prob_doc, "problem")

    trainer = build_section(TrainConfig, doc.get("trainer"), "trainer", exclude=("seed",))
    trainer = dataclasses.replace(trainer, seed=seed)
    controller = dict(doc.get("controller") or DEFAULT_CONTROLLER[wf])
    make_controller(controller)
    ep_doc = dict(DEFAULT_EPISODE[wf], **(doc.get("episode") or {}))
    episode = build_section(EpisodeSchedule, ep_doc, "episode", exclude=("seed",))
    episode = dataclasses.replace(episode, seed=seed)
    fit = build_section(FitSettings, doc.get("fit"), "fit")
    pressure = build_section(PressureSettings, doc.get("pressure"), "pressure")
    placement = build_section(PlacementBenchmark, doc.get("placement"), "placement")
    step_check = build_section(StepCheckSettings, doc.get("step_check"), "step_check")

    problem_doc = _plain(problem)
    if wf in ("wake", "bank"):
        problem_doc.pop("plant")
    if wf == "bank":
        problem_doc.pop("seed")
    trainer_doc = _plain(trainer)
    trainer_doc.pop("seed")
    episode_doc = _plain(episode)
    episode_doc.pop("seed")
    document = {
        "version": SCHEMA_VERSION, "workflow": wf, "seed": seed, "output": output,
        "backend": backend, "plant": {} if plant is None else _plain(plant.to_dict()),
        "problem": problem_doc, "trainer": trainer_doc, "controller": _plain(controller),
        "episode": episode_doc, "fit": _plain(fit), "pressure": _plain(pressure),
        "placement": _plain(placement), "step_check": _plain(step_check),
    }
    return RunConfig(wf, seed, output, backend, plant, problem, trainer, controller, episode,
                     fit, pressure, placement, step_check, document)


def load_config(path):
    """Read and validate a JSON config file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc)
