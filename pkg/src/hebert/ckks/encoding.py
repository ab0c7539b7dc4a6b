"""Canonical-embedding encoding of complex/real vectors into ring elements.

Slot j corresponds to evaluation at zeta^(5^j mod 2N) (zeta a primitive
2N-th root of unity); that ordering makes the Galois map X -> X^(5^r) act as
a cyclic rotation by r on the slot vector.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import CryptoError
from .. import ring as rg


@lru_cache(maxsize=16)
def _embedding_tables(n):
    """Twist factors and slot->spectrum index maps for ring degree n."""
    j = np.arange(n)
    zeta_pow = np.exp(1j * np.pi * j / n)  # zeta^j, zeta = e^(i*pi/N)
    slots = n // 2
    m = np.empty(slots, dtype=np.int64)
    g = 1
    for i in range(slots):
        m[i] = g
        g = (g * 5) % (2 * n)
    slot_idx = (m - 1) // 2  # evaluation ζ^m sits at spectrum index (m-1)/2
    conj_idx = n - 1 - slot_idx
    return zeta_pow, slot_idx, conj_idx


def slot_galois_exponent(n, steps):
    """Automorphism exponent realizing a cyclic left-rotation by `steps`."""
    return pow(5, steps % (n // 2), 2 * n)


CONJ_GALOIS = -1  # X -> X^(2N-1) conjugates every slot


@dataclass
class Plaintext:
    """Encoded message: ring element plus the scale it was encoded at."""

    poly: rg.RnsPoly
    scale: float

    @property
    def level(self):
        return self.poly.level

    @property
    def params(self):
        return self._params

    def copy(self):
        pt = Plaintext(self.poly.copy(), self.scale)
        pt._params = self._params
        return pt


def _coeffs_from_values(params, values, scale):
    n = params.ring_degree
    slots = params.slot_count
    v = np.asarray(values, dtype=np.complex128).ravel()
    if v.size > slots:
        raise CryptoError(f"{v.size} values exceed {slots} slots")
    if not np.all(np.isfinite(v.view(np.float64))):
        raise CryptoError("non-finite value in encode input")
    full = np.zeros(slots, dtype=np.complex128)
    full[: v.size] = v
    zeta_pow, slot_idx, conj_idx = _embedding_tables(n)
    spec = np.zeros(n, dtype=np.complex128)
    spec[slot_idx] = full * scale
    spec[conj_idx] = np.conj(full * scale)
    twisted = np.fft.fft(spec) / n
    coeffs = np.real(twisted * np.conj(zeta_pow))
    return np.rint(coeffs)


def encode(params, values, level, scale=None):
    """Encode a vector (len ≤ slot_count, zero-padded) at a level and scale."""
    scale = float(scale if scale is not None else params.default_scale)
    if scale <= 0:
        raise CryptoError("scale must be positive")
    if scale >= params.ring.modulus_product(level):
        raise CryptoError(
            f"scale 2^{np.log2(scale):.1f} too large for level {level} modulus"
        )
    coeffs = _coeffs_from_values(params, values, scale)
    peak = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if peak >= float(1 << 62):
        raise CryptoError("encoded coefficients overflow the word size")
    poly = rg.poly_from_signed(params.ring, coeffs.astype(np.int64), level, form=rg.EVAL)
    pt = Plaintext(poly, scale)
    pt._params = params
    return pt


def _signed_coeff_floats(params, poly):
    """Centered coefficients as floats via a two-limb Garner lift.

    Exact for messages far below q0*q1 (the decode contract); avoids big-int
    CRT in the common path.
    """
    p = rg.to_coeff(poly)
    chain = params.ring.moduli_chain
    if p.level == 0:
        q0 = chain[0]
        x0 = p.limbs[0]
        return np.where(x0 > q0 // 2, x0.astype(np.float64) - float(q0), x0.astype(np.float64))
    if p.level > 1:
        p = rg.RnsPoly(p.params, p.limbs[:2].copy(), p.form, 1)
    q0, q1 = chain[0], chain[1]
    x0, x1 = p.limbs[0], p.limbs[1]
    q0_inv = pow(q0, -1, q1)
    x0_mod_q1 = x0 % np.uint64(q1)
    diff = rg.sub_mod(x1, x0_mod_q1, np.uint64(q1))
    tabs = params.ring.prime_tables(q1)
    t = rg.mont_mul(
        diff,
        np.uint64(q0_inv * tabs.r % q1),
        np.uint64(q1),
        np.uint64(tabs.qinv_neg),
    )
    t_c = np.where(t > q1 // 2, t.astype(np.float64) - float(q1), t.astype(np.float64))
    x0_f = x0.astype(np.float64)
    return x0_f + float(q0) * t_c


def decode(pt, length=None):
    """Decode a plaintext back to its complex slot vector."""
    params = pt._params
    n = params.ring_degree
    coeffs = _signed_coeff_floats(params, pt.poly)
    zeta_pow, slot_idx, _ = _embedding_tables(n)
    evals = n * np.fft.ifft(coeffs * zeta_pow)
    slots = evals[slot_idx] / pt.scale
    return slots if length is None else slots[:length]


def decode_real(pt, length=None):
    return np.real(decode(pt, length))
