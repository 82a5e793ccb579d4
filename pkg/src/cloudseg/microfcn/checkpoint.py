"""Binary checkpoints and CSV training histories.

Checkpoint layout::

    b"MFCN" | version (1 byte) | header length (uint32 LE) | header JSON
    | parameter tensors as float64 LE, in declaration order

The JSON header holds the model config, seed, epoch and the name and shape of
every tensor. Keys are sorted so identical models serialize to identical bytes.
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .model import Head, MicroFCN, ModelConfig, build_model

MAGIC = b"MFCN"
VERSION = 1


def _config_dict(cfg: ModelConfig) -> dict:
    d = asdict(cfg)
    d["head"] = Head(cfg.head).value
    return d


def to_bytes(model: MicroFCN, epoch: int = 0, extra: dict | None = None) -> bytes:
    named = model.named_parameters()
    header = {
        "config": _config_dict(model.cfg),
        "seed": int(model.seed),
        "epoch": int(epoch),
        "tensors": [{"name": n, "shape": list(p.shape)} for n, p in named],
    }
    if extra:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for _, p in named)
    return MAGIC + bytes([VERSION]) + struct.pack("<I", len(blob)) + blob + body


def from_bytes(data: bytes) -> tuple[MicroFCN, dict]:
    if data[:4] != MAGIC:
        raise ValueError("not a model checkpoint")
    version = data[4]
    if version > VERSION:
        raise ValueError(f"checkpoint version {version} is newer than supported {VERSION}")
    (n,) = struct.unpack("<I", data[5:9])
    header = json.loads(data[9:9 + n])
    model = build_model(ModelConfig(**header["config"]), header["seed"])
    offset = 9 + n
    named = model.named_parameters()
    if [t["name"] for t in header["tensors"]] != [name for name, _ in named]:
        raise ValueError("checkpoint tensors do not match the model layout")
    for spec, (_, p) in zip(header["tensors"], named):
        if tuple(spec["shape"]) != p.shape:
            raise ValueError(f"shape mismatch for {spec['name']}")
        size = p.size * 8
        p[...] = np.frombuffer(data[offset:offset + size], dtype="<f8").reshape(p.shape)
        offset += size
    if offset != len(data):
        raise ValueError("trailing bytes in checkpoint")
    return model, header


def save(path, model: MicroFCN, epoch: int = 0, extra: dict | None = None) -> None:
    Path(path).write_bytes(to_bytes(model, epoch, extra))


def load(path) -> tuple[MicroFCN, dict]:
    return from_bytes(Path(path).read_bytes())


HISTORY_FIELDS = ("epoch", "train_loss", "val_loss", "lr")


def write_history(path, history) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(HISTORY_FIELDS)
        for r in history:
            w.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.lr)])


def read_history(path) -> list[dict]:
    with open(path, newline="") as f:
        return [{"epoch": int(row["epoch"]), **{k: float(row[k]) for k in HISTORY_FIELDS[1:]}}
                for row in csv.DictReader(f)]
