"""Binary serialization and ciphertext-size accounting.

Ciphertext layout (magic CKT1): version u16, params-hash 32 bytes, level u8,
scale f64, slot_count u32, then c0 and c1 limbs as little-endian u64 arrays.
Key files use magic CKK1, plaintexts CKP1, with the same header fields.
"""

import struct

import numpy as np

from .. import ring as rg
from ..errors import SerializationError
from .encoding import Plaintext
from .keys import KeySet, SwitchKey
from .ops import Ciphertext

MAGIC_CT = b"CKT1"
MAGIC_KEY = b"CKK1"
MAGIC_PT = b"CKP1"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sH32sBdI")
HEADER_BYTES = _HEADER.size  # 51


def _pack_header(magic, params, level, scale, slot_count):
    return _HEADER.pack(
        magic, FORMAT_VERSION, params.params_hash(), level, scale, slot_count
    )


def _unpack_header(buf, magic, params):
    if len(buf) < HEADER_BYTES:
        raise SerializationError("truncated header")
    got_magic, version, phash, level, scale, slot_count = _HEADER.unpack_from(buf)
    if got_magic != magic:
        raise SerializationError(f"magic mismatch: {got_magic!r} != {magic!r}")
    if version != FORMAT_VERSION:
        raise SerializationError(f"unsupported format version {version}")
    if phash != params.params_hash():
        raise SerializationError("params-hash mismatch: refusing to deserialize")
    return level, scale, slot_count


def _poly_bytes(poly):
    p = rg.to_eval(poly)
    return np.ascontiguousarray(p.limbs, dtype="<u8").tobytes()


def _poly_from_bytes(params, buf, offset, level):
    n = params.ring_degree
    k = level + 1
    nbytes = k * n * 8
    if len(buf) < offset + nbytes:
        raise SerializationError("truncated limb data")
    limbs = np.frombuffer(buf, dtype="<u8", count=k * n, offset=offset).reshape(k, n)
    return rg.RnsPoly(params.ring, limbs.astype(np.uint64), rg.EVAL, level), offset + nbytes


def serialize_ciphertext(ct):
    head = _pack_header(MAGIC_CT, ct.params, ct.level, ct.scale, ct.slot_count)
    return head + _poly_bytes(ct.c0) + _poly_bytes(ct.c1)


def deserialize_ciphertext(buf, params):
    level, scale, slot_count = _unpack_header(buf, MAGIC_CT, params)
    c0, off = _poly_from_bytes(params, buf, HEADER_BYTES, level)
    c1, off = _poly_from_bytes(params, buf, off, level)
    if off != len(buf):
        raise SerializationError("trailing bytes after ciphertext")
    return Ciphertext(c0, c1, scale, slot_count, params)


def serialize_plaintext(pt):
    params = pt._params
    head = _pack_header(MAGIC_PT, params, pt.level, pt.scale, params.slot_count)
    return head + _poly_bytes(pt.poly)


def deserialize_plaintext(buf, params):
    level, scale, _ = _unpack_header(buf, MAGIC_PT, params)
    poly, off = _poly_from_bytes(params, buf, HEADER_BYTES, level)
    if off != len(buf):
        raise SerializationError("trailing bytes after plaintext")
    pt = Plaintext(poly, scale)
    pt._params = params
    return pt


# -- key material -----------------------------------------------------------


def _pack_raw(arr):
    rows, cols = arr.shape
    return struct.pack("<II", rows, cols) + np.ascontiguousarray(
        arr, dtype="<u8"
    ).tobytes()


def _unpack_raw(buf, offset):
    rows, cols = struct.unpack_from("<II", buf, offset)
    offset += 8
    count = rows * cols
    if len(buf) < offset + count * 8:
        raise SerializationError("truncated key data")
    arr = (
        np.frombuffer(buf, dtype="<u8", count=count, offset=offset)
        .reshape(rows, cols)
        .astype(np.uint64)
    )
    return arr, offset + count * 8


def _pack_switch_key(sk):
    out = [struct.pack("<I", len(sk.digits_b))]
    for b, a in zip(sk.digits_b, sk.digits_a):
        out.append(_pack_raw(b))
        out.append(_pack_raw(a))
    return b"".join(out)


def _unpack_switch_key(buf, offset):
    (ndig,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    bs, als = [], []
    for _ in range(ndig):
        b, offset = _unpack_raw(buf, offset)
        a, offset = _unpack_raw(buf, offset)
        bs.append(b)
        als.append(a)
    return SwitchKey(bs, als), offset


def serialize_keyset(keyset, include_secret=False):
    """Key bundle; role 'secret' (full) or 'eval' (public material only)."""
    params = keyset.params
    head = _pack_header(
        MAGIC_KEY, params, params.max_level, params.default_scale, params.slot_count
    )
    role = b"S" if include_secret and keyset.has_secret else b"E"
    parts = [head, role]
    if role == b"S":
        parts.append(_pack_raw(keyset.secret_ext))
    parts.append(_pack_raw(keyset.public_key[0].limbs))
    parts.append(_pack_raw(keyset.public_key[1].limbs))
    parts.append(_pack_switch_key(keyset.relin_key))
    steps = sorted(keyset.rotation_keys)
    parts.append(struct.pack("<I", len(steps)))
    for s in steps:
        parts.append(struct.pack("<i", s))
        parts.append(_pack_switch_key(keyset.rotation_keys[s]))
    parts.append(struct.pack("<B", 1 if keyset.conj_key is not None else 0))
    if keyset.conj_key is not None:
        parts.append(_pack_switch_key(keyset.conj_key))
    return b"".join(parts)


def deserialize_keyset(buf, params):
    level, _, _ = _unpack_header(buf, MAGIC_KEY, params)
    if level != params.max_level:
        raise SerializationError("key level does not match params")
    offset = HEADER_BYTES
    role = buf[offset : offset + 1]
    offset += 1
    secret_ext = None
    secret_key = None
    if role == b"S":
        secret_ext, offset = _unpack_raw(buf, offset)
        n_chain = len(params.ring.moduli_chain)
        secret_key = rg.RnsPoly(
            params.ring, secret_ext[:n_chain].copy(), rg.EVAL, params.max_level
        )
    elif role != b"E":
        raise SerializationError(f"unknown key role {role!r}")
    pk_b, offset = _unpack_raw(buf, offset)
    pk_a, offset = _unpack_raw(buf, offset)
    relin, offset = _unpack_switch_key(buf, offset)
    (nsteps,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    rot = {}
    steps = []
    for _ in range(nsteps):
        (s,) = struct.unpack_from("<i", buf, offset)
        offset += 4
        key, offset = _unpack_switch_key(buf, offset)
        rot[s] = key
        steps.append(s)
    (has_conj,) = struct.unpack_from("<B", buf, offset)
    offset += 1
    conj = None
    if has_conj:
        conj, offset = _unpack_switch_key(buf, offset)
    if offset != len(buf):
        raise SerializationError("trailing bytes after key set")
    lvl = params.max_level
    return KeySet(
        params=params,
        secret_key=secret_key,
        secret_ext=secret_ext,
        public_key=(
            rg.RnsPoly(params.ring, pk_b, rg.EVAL, lvl),
            rg.RnsPoly(params.ring, pk_a, rg.EVAL, lvl),
        ),
        relin_key=relin,
        rotation_keys=rot,
        conj_key=conj,
        rotation_steps=tuple(steps),
    )


def ciphertext_bytes(params, level):
    """Serialized size of one ciphertext at a level, without allocating it."""
    return HEADER_BYTES + 2 * (level + 1) * params.ring_degree * 8


def size_report(params, level, count=1):
    """Total serialized bytes for `count` ciphertexts at `level`."""
    return count * ciphertext_bytes(params, level)
