"""CKKS approximate homomorphic encryption over RNS/NTT rings."""

from .encoding import Plaintext, decode, decode_real, encode
from .keys import KeySet, default_rotation_steps, keygen, ks_apply
from .ops import (
    Ciphertext,
    add,
    add_plain,
    bsgs_depth,
    conjugate,
    decrypt,
    decrypt_vector,
    encode_const,
    encrypt,
    encrypt_vector,
    eval_poly_bsgs,
    mod_down,
    mult,
    mult_plain,
    negate,
    rescale,
    rotate,
    square,
    sub,
    sub_plain,
)
from .params import CkksParams, PRESET_NAMES, get_preset
from .serial import (
    deserialize_ciphertext,
    deserialize_keyset,
    deserialize_plaintext,
    serialize_ciphertext,
    serialize_keyset,
    serialize_plaintext,
    size_report,
)

__all__ = [
    "CkksParams",
    "Ciphertext",
    "KeySet",
    "PRESET_NAMES",
    "Plaintext",
    "add",
    "add_plain",
    "bsgs_depth",
    "conjugate",
    "decode",
    "decode_real",
    "decrypt",
    "decrypt_vector",
    "default_rotation_steps",
    "deserialize_ciphertext",
    "deserialize_keyset",
    "deserialize_plaintext",
    "encode",
    "encode_const",
    "encrypt",
    "encrypt_vector",
    "eval_poly_bsgs",
    "get_preset",
    "keygen",
    "ks_apply",
    "mod_down",
    "mult",
    "mult_plain",
    "negate",
    "rescale",
    "rotate",
    "serialize_ciphertext",
    "serialize_keyset",
    "serialize_plaintext",
    "size_report",
    "square",
    "sub",
    "sub_plain",
]
