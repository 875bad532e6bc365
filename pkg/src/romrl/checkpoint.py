"""Checkpoints for bases, ROMs and controllers.

Each checkpoint is a pair ``<stem>.bin`` (concatenated ROMSNAP1 blocks) and
``<stem>.json`` (kind, block layout, scalar settings, content hash). The
checkpoint id is the SHA-256 of the binary file, so identical parameters
always give identical ids.
"""

import os

import numpy as np

from . import io
from .control.controllers import controller_from_blocks, controller_to_blocks
from .errors import ConfigurationError, DataIntegrityError
from .reduction import ReducedBasis, SparseMeasurement
from .romcore.rom import NodeRom, ResidualNet
from .sysid import LinearRom


def _write(stem, kind, blocks, meta, config_hash=""):
    layout = io.write_blocks(stem + ".bin", blocks)
    digest = io.file_sha256(stem + ".bin")
    doc = {"kind": kind, "layout": layout, "config_hash": config_hash,
           "sha256": digest, **meta}
    io.write_metadata(stem + ".json", doc)
    return digest


def _read(stem, kind):
    doc = io.read_metadata(stem + ".json")
    if doc.get("kind") != kind:
        raise ConfigurationError(f"{stem}.json holds a {doc.get('kind')!r}, expected {kind!r}")
    if io.file_sha256(stem + ".bin") != doc["sha256"]:
        raise DataIntegrityError(f"{stem}.bin: content hash does not match metadata")
    return doc, io.read_blocks(stem + ".bin", doc["layout"])


def rom_blocks(rom):
    blocks = {"A": rom.A, "B": rom.B}
    meta = {"dt": rom.dt, "ridge": rom.linear.ridge, "linear_only": rom.linear_only,
            "provenance": list(rom.linear.provenance), "residual": None}
    if rom.residual is not None:
        blocks["omega"] = rom.residual.params
        meta["residual"] = rom.residual.to_dict()
    return meta, blocks


def rom_id(rom):
    """Content id of a ROM's parameters (matches the checkpoint file hash)."""
    meta, blocks = rom_blocks(rom)
    return io.array_sha256(np.concatenate([np.ravel(b) for b in blocks.values()]))


def save_rom(rom, stem, config_hash=""):
    meta, blocks = rom_blocks(rom)
    return _write(stem, "rom", blocks, meta, config_hash)


def load_rom(stem):
    doc, blocks = _read(stem, "rom")
    lin = LinearRom(blocks["A"], np.ravel(blocks["B"]), doc["ridge"], tuple(doc["provenance"]))
    res = None
    if doc["residual"] is not None:
        r = doc["residual"]
        res = ResidualNet(r["r"], tuple(r["hidden"]), r["k"], np.ravel(blocks["omega"]),
                          r["seed"])
    return NodeRom(lin, doc["dt"], res, doc["linear_only"])


def save_basis(basis, stem, config_hash=""):
    if isinstance(basis, SparseMeasurement):
        blocks = {"indices": np.array([i[0] for i in basis.indices], dtype=float),
                  "offset": basis.offset}
        if any(i.size != 1 for i in basis.indices):
            raise ConfigurationError("only pure-selection sparse bases can be checkpointed")
        return _write(stem, "sparse_basis", blocks,
                      {"n": basis.n, "labels": list(basis.labels)}, config_hash)
    blocks = {"mean": basis.mean, "modes": basis.modes,
              "singular_values": basis.singular_values, "energy": basis.energy}
    meta = {"r_a": basis.r_a, "r_c": basis.r_c, "truncated": basis.truncated,
            "degenerate": basis.degenerate, "provenance": list(basis.provenance),
            "meta": basis.meta}
    return _write(stem, "pod_basis", blocks, meta, config_hash)


def load_basis(stem):
    doc = io.read_metadata(stem + ".json")
    if doc.get("kind") == "sparse_basis":
        doc, b = _read(stem, "sparse_basis")
        idx = np.ravel(b["indices"]).astype(np.int64)
        return SparseMeasurement.selection(idx, doc["n"], tuple(doc["labels"]),
                                           np.ravel(b["offset"]))
    doc, b = _read(stem, "pod_basis")
    return ReducedBasis(np.ravel(b["mean"]), np.atleast_2d(b["modes"]),
                        np.ravel(b["singular_values"]), np.ravel(b["energy"]), doc["r_a"],
                        doc["r_c"], doc["truncated"], doc["degenerate"],
                        tuple(doc["provenance"]), doc["meta"])


def controller_id(controller):
    meta, blocks = controller_to_blocks(controller)
    payload = io.canonical_json(meta).encode()
    arr = np.concatenate([np.ravel(b) for b in blocks.values()]) if blocks else np.zeros(0)
    return io.array_sha256(np.concatenate([np.frombuffer(payload, dtype=np.uint8)
                                           .astype(float), arr]))


def save_controller(controller, stem, config_hash=""):
    meta, blocks = controller_to_blocks(controller)
    if not blocks:
        blocks = {"params": controller.params}
    return _write(stem, "controller", blocks, {"controller": meta}, config_hash)


def load_controller(stem):
    doc, blocks = _read(stem, "controller")
    return controller_from_blocks(doc["controller"], blocks)


def exists(stem):
    return os.path.exists(stem + ".json") and os.path.exists(stem + ".bin")


def save_pressure_map(g, stem, config_hash=""):
    blocks = {"x_mean": g.x_mean, "x_std": g.x_std, "p_mean": g.p_mean, "p_std": g.p_std,
              "L": g.L, "params": g.params}
    return _write(stem, "pressure_map", blocks, {"sizes": list(g.net.sizes)}, config_hash)


def load_pressure_map(stem):
    from .control.pressure import PressureMap
    from .romcore.mlp import MLP
    doc, b = _read(stem, "pressure_map")
    net = MLP(tuple(doc["sizes"]), activation="relu")
    return PressureMap(np.ravel(b["x_mean"]), np.ravel(b["x_std"]), np.ravel(b["p_mean"]),
                       np.ravel(b["p_std"]), np.atleast_2d(b["L"]), net, np.ravel(b["params"]))
