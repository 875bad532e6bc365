import json

import pytest

from romrl.config import load_config, parse_config
from romrl.errors import ConfigurationError

BASE = {"version": 1, "workflow": "scalar", "output": "runs/a"}


@pytest.mark.parametrize("name", ["scalar_lqr", "wake_ss", "wake_pod", "bank"])
def test_shipped_configs_parse(name):
    import romrl
    from pathlib import Path
    cfg = load_config(Path(romrl.__file__).parent / "configs" / f"{name}.json")
    # the normalized document is a fixed point of parsing
    assert parse_config(cfg.document).document == cfg.document


@pytest.mark.parametrize("doc", [
    dict(BASE, colour="red"),
    dict(BASE, trainer={"iterationz": 3}),
    dict(BASE, problem={"rho": 1.0, "extra": 2}),
    dict(BASE, controller={"kind": "proportional", "gain": [1.0], "bias": 0.0}),
    dict(BASE, version=2),
    {k: v for k, v in BASE.items() if k != "version"},
    dict(BASE, workflow="turbulence"),
    dict(BASE, seed=-1),
    dict(BASE, backend="gpu"),
    dict(BASE, plant={"n": 10}),
])
def test_invalid_documents_rejected(doc):
    with pytest.raises(ConfigurationError):
        parse_config(doc)


def test_hash_excludes_output():
    a = parse_config(BASE)
    b = parse_config(dict(BASE, output="elsewhere"))
    c = parse_config(dict(BASE, seed=1))
    assert a.hash == b.hash != c.hash
    assert a.with_output("x").hash == a.hash


def test_defaults_make_hash_explicit():
    a = parse_config(BASE)
    b = parse_config(dict(BASE, trainer={"iterations": a.trainer.iterations}))
    assert a.hash == b.hash


def test_seed_reaches_trainer_and_episode():
    cfg = parse_config(dict(BASE, seed=5))
    assert cfg.trainer.seed == 5 and cfg.episode.seed == 5


def test_invalid_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(p)
    p.write_text(json.dumps(BASE))
    assert load_config(p).workflow == "scalar"
