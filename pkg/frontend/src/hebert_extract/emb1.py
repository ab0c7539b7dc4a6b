"""EMB1 wire format: the file interface the backend pipeline consumes.

Layout (little-endian): magic "EMB1", version u16, dim u32, rows u32,
reserved u16, rows*dim f32 data, rows u16 labels.
"""

import struct

import numpy as np

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sHIIH")


class Emb1Error(ValueError):
    pass


def write_emb1(path, data, labels):
    data = np.ascontiguousarray(data, dtype=np.float32)
    labels = np.ascontiguousarray(labels, dtype=np.uint16)
    if data.ndim != 2:
        raise Emb1Error("data must be (rows, dim)")
    if labels.shape != (data.shape[0],):
        raise Emb1Error("labels length must match rows")
    if not np.all(np.isfinite(data)):
        raise Emb1Error("non-finite embedding values")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, data.shape[1], data.shape[0], 0))
        fh.write(data.astype("<f4").tobytes())
        fh.write(labels.astype("<u2").tobytes())
    return path


def read_emb1(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size:
        raise Emb1Error("truncated header")
    magic, version, dim, rows, _ = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise Emb1Error(f"magic mismatch {magic!r}")
    if version != VERSION:
        raise Emb1Error(f"unsupported version {version}")
    need = _HEADER.size + rows * dim * 4 + rows * 2
    if len(buf) != need:
        raise Emb1Error(f"size {len(buf)} != expected {need}")
    data = np.frombuffer(buf, dtype="<f4", count=rows * dim, offset=_HEADER.size)
    labels = np.frombuffer(buf, dtype="<u2", count=rows, offset=_HEADER.size + rows * dim * 4)
    return data.reshape(rows, dim).copy(), labels.copy()
