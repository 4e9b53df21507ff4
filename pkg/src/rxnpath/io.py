"""Binary containers: model checkpoints and embedding matrices.

Checkpoint layout (little-endian):
    magic "RXNCKPT\\0" | uint32 version | uint64 header bytes | JSON header | float32 tensors
The header holds the config, vocabulary and a tensor index of (name, shape, offset).

Embedding layout:
    magic "RXNEMB\\0\\0" | uint32 version | uint64 rows | uint64 dim | row-major float32
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from .errors import ContractError

CKPT_MAGIC = b"RXNCKPT\0"
EMB_MAGIC = b"RXNEMB\0\0"
VERSION = 1

PathLike = Union[str, Path]


def save_tensors(path: PathLike, tensors: Dict[str, np.ndarray], header: dict) -> None:
    index = []
    offset = 0
    blobs = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    head = json.dumps({**header, "tensors": index}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(head)))
        fh.write(head)
        for b in blobs:
            fh.write(b)


def load_tensors(path: PathLike) -> Tuple[Dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CKPT_MAGIC:
        raise ContractError(f"{path} is not a checkpoint file")
    version, hlen = struct.unpack_from("<IQ", data, 8)
    if version != VERSION:
        raise ContractError(f"unsupported checkpoint version {version}")
    start = 8 + struct.calcsize("<IQ")
    header = json.loads(data[start : start + hlen])
    base = start + hlen
    tensors = {}
    for entry in header.pop("tensors"):
        n = int(np.prod(entry["shape"])) if entry["shape"] else 1
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=base + entry["offset"])
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return tensors, header


def write_embeddings(path: PathLike, mat: np.ndarray) -> None:
    mat = np.ascontiguousarray(mat, dtype="<f4")
    if mat.ndim != 2:
        raise ContractError("embedding matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<IQQ", VERSION, mat.shape[0], mat.shape[1]))
        fh.write(mat.tobytes())


def read_embeddings(path: PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != EMB_MAGIC:
        raise ContractError(f"{path} is not an embedding file")
    version, rows, dim = struct.unpack_from("<IQQ", data, 8)
    if version != VERSION:
        raise ContractError(f"unsupported embedding version {version}")
    off = 8 + struct.calcsize("<IQQ")
    return np.frombuffer(data, dtype="<f4", count=rows * dim, offset=off).reshape(rows, dim).copy()


def file_sha256(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
