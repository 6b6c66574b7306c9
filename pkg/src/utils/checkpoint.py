"""
Binary checkpoint files.

    "MOHSACK1"  u32 version  u32 entry count
    entry:      u32 name length, UTF-8 name, u32 rank, u32 dims..., u8 dtype code, raw payload
    echo:       u32 length, UTF-8 JSON {"model": {...}, "train": {...} | null, "epoch": n}

Integers and payloads are little-endian. Dtype code 0 is f32, 1 is f64.
"""

import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Dict, Optional

import numpy as np

from config.settings import DataError

MAGIC = b"MOHSACK1"
VERSION = 1
DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
CODE_FOR_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class CheckpointError(DataError):
    """Checkpoint file is malformed or does not fit the model."""
    pass


@dataclass
class Checkpoint:
    tensors: Dict[str, np.ndarray]
    model: Dict[str, Any]
    train: Optional[Dict[str, Any]] = None
    epoch: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)


def _u32(value: int) -> bytes:
    return struct.pack("<I", value)


def save_checkpoint(path, ckpt: Checkpoint) -> Path:
    """Write atomically through a temporary sibling file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [MAGIC, _u32(VERSION), _u32(len(ckpt.tensors))]
    for name, array in ckpt.tensors.items():
        array = np.asarray(array)
        if array.dtype not in CODE_FOR_DTYPE:
            raise CheckpointError(f"{name}: cannot store element type {array.dtype}")
        code = CODE_FOR_DTYPE[array.dtype]
        encoded = name.encode("utf-8")
        chunks += [_u32(len(encoded)), encoded, _u32(array.ndim)]
        chunks += [_u32(d) for d in array.shape]
        chunks += [struct.pack("<B", code), array.astype(DTYPE_CODES[code], copy=False).tobytes(order="C")]

    echo = {"model": ckpt.model, "train": ckpt.train, "epoch": ckpt.epoch}
    echo.update(ckpt.extra)
    encoded = json.dumps(echo, sort_keys=True).encode("utf-8")
    chunks += [_u32(len(encoded)), encoded]

    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(b"".join(chunks))
    tmp.replace(path)
    return path


class _Reader:
    def __init__(self, fh: BinaryIO, path: Path):
        self.fh = fh
        self.path = path
        self.size = os.fstat(fh.fileno()).st_size

    def take(self, n: int, what: str) -> bytes:
        if n > self.size - self.fh.tell():
            raise CheckpointError(f"{self.path}: truncated while reading {what} ({n} bytes declared)")
        data = self.fh.read(n)
        if len(data) != n:
            raise CheckpointError(f"{self.path}: truncated while reading {what}")
        return data

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    with open(path, "rb") as fh:
        r = _Reader(fh, path)
        if r.take(len(MAGIC), "magic") != MAGIC:
            raise CheckpointError(f"{path}: not a MOHSA checkpoint (bad magic)")
        version = r.u32("version")
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")

        tensors = {}
        for index in range(r.u32("entry count")):
            try:
                name = r.take(r.u32("name length"), "name").decode("utf-8")
            except UnicodeDecodeError:
                raise CheckpointError(f"{path}: entry {index} has a non UTF-8 name")
            shape = tuple(r.u32(f"{name} dims") for _ in range(r.u32(f"{name} rank")))
            code = r.take(1, f"{name} dtype")[0]
            if code not in DTYPE_CODES:
                raise CheckpointError(f"{path}: {name} has unknown dtype code {code}")
            dtype = DTYPE_CODES[code]
            count = math.prod(shape)
            payload = r.take(count * dtype.itemsize, f"{name} payload")
            tensors[name] = np.frombuffer(payload, dtype=dtype).astype(dtype.newbyteorder("="), copy=True).reshape(shape)

        try:
            echo = json.loads(r.take(r.u32("config length"), "config").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: config echo is not valid JSON: {e}")
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after config echo")

    if not isinstance(echo, dict) or "model" not in echo:
        raise CheckpointError(f"{path}: config echo lacks a model section")
    extra = {k: v for k, v in echo.items() if k not in ("model", "train", "epoch")}
    return Checkpoint(tensors=tensors, model=echo["model"], train=echo.get("train"),
                      epoch=int(echo.get("epoch", 0)), extra=extra)
