"""Checkpoint files: a JSON manifest plus one little-endian float32 blob.

Layout: 8-byte magic, uint32 little-endian manifest length, UTF-8 manifest
JSON, then the raw tensor bytes. The manifest maps each tensor name to its
shape, dtype, and byte offset into the blob, and carries a free-form ``meta``
dict (label counts, architecture version). Round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .params import ParamSet
from .tensor import Tensor

_MAGIC = b"MCCKPT01"


def save_checkpoint(params: ParamSet, path, meta: dict | None = None) -> None:
    tensors = {}
    blobs = []
    offset = 0
    for name, t in params.items():
        raw = np.ascontiguousarray(t.data, dtype="<f4").tobytes()
        tensors[name] = {
            "shape": list(t.data.shape),
            "dtype": "float32",
            "offset": offset,
            "trainable": t.requires_grad,
        }
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps({"meta": meta or {}, "tensors": tensors}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple[ParamSet, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        (mlen,) = struct.unpack("<I", fh.read(4))
        manifest = json.loads(fh.read(mlen).decode("utf-8"))
        blob = fh.read()
    params = ParamSet()
    for name, entry in manifest["tensors"].items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start).reshape(shape)
        params.add(name, Tensor(arr.astype(np.float32), requires_grad=entry["trainable"]))
    return params, manifest["meta"]
