"""SEB1 writer/reader: magic SEB1, u32 LE version (=1), u32 LE dim,
u64 LE row count, then per row u32 LE key length, UTF-8 key, dim x f32 LE."""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"SEB1"
VERSION = 1


class Seb1Error(ValueError):
    pass


def write_seb1(path: str, keys: list[str], vectors: np.ndarray) -> None:
    if len(keys) != vectors.shape[0]:
        raise Seb1Error(f"{len(keys)} keys but {vectors.shape[0]} vectors")
    if not np.all(np.isfinite(vectors)):
        raise Seb1Error("non-finite vector components")
    dim = vectors.shape[1]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", VERSION, dim, len(keys)))
        for key, vec in zip(keys, vectors):
            encoded = key.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(vec.astype("<f4").tobytes())


def read_seb1(path: str) -> tuple[dict[str, np.ndarray], int]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20 or data[:4] != MAGIC:
        raise Seb1Error(f"{path}: not a SEB1 file")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != VERSION:
        raise Seb1Error(f"{path}: unsupported version {version}")
    rows: dict[str, np.ndarray] = {}
    offset = 20
    for _ in range(count):
        (key_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        key = data[offset: offset + key_len].decode("utf-8")
        offset += key_len
        rows[key] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += 4 * dim
    return rows, dim
