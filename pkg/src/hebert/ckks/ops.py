"""Homomorphic operations: encrypt/decrypt, add, mult, rotate, rescale,
mod-down, and baby-step/giant-step Chebyshev polynomial evaluation."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .. import ring as rg
from ..errors import (
    CryptoError,
    LevelMismatchError,
    OutOfLevelsError,
    ScaleMismatchError,
)
from . import keys as keysmod
from .encoding import Plaintext, decode, decode_real, encode

log = logging.getLogger(__name__)

SCALE_MATCH_RTOL = 2.0 ** -10


@dataclass
class Ciphertext:
    """Pair of ring elements with level/scale/slot bookkeeping.

    `insecure_provenance` is sticky: it marks anything that passed through
    the decrypt-reencrypt debug refresher.
    """

    c0: rg.RnsPoly
    c1: rg.RnsPoly
    scale: float
    slot_count: int
    params: object
    insecure_provenance: bool = False

    @property
    def level(self):
        return self.c0.level

    def copy(self):
        return Ciphertext(
            self.c0.copy(),
            self.c1.copy(),
            self.scale,
            self.slot_count,
            self.params,
            self.insecure_provenance,
        )


def encode_const(params, value, level, scale):
    """Constant plaintext without the FFT round (exact constant fill)."""
    n = params.ring_degree
    coeffs = np.zeros(n, dtype=np.int64)
    scaled = float(value) * scale
    if abs(scaled) >= float(1 << 62):
        raise CryptoError("constant too large for the coefficient word")
    coeffs[0] = int(np.rint(scaled))
    poly = rg.poly_from_signed(params.ring, coeffs, level, form=rg.EVAL)
    pt = Plaintext(poly, scale)
    pt._params = params
    return pt


def encrypt(pt, keyset, target_level=None, rng_seed=None, min_circuit_level=None):
    """Encrypt a plaintext at target_level (defaults to the plaintext level).

    Uses the public key; serialized size is proportional to target_level+1.
    """
    params = pt._params
    level = pt.level if target_level is None else int(target_level)
    if level > params.max_level:
        raise CryptoError(f"target level {level} exceeds max {params.max_level}")
    if min_circuit_level is not None and level < min_circuit_level:
        log.warning(
            "encrypting at level %d below the declared circuit need %d; "
            "a refresh will be required before use",
            level,
            min_circuit_level,
        )
    if pt.level < level:
        raise CryptoError("plaintext level below requested ciphertext level")
    rng = np.random.default_rng(None if rng_seed is None else np.random.PCG64(rng_seed))
    k = level + 1
    tabs = params.ring.chain_tables(level)
    b_full, a_full = keyset.public_key
    b = b_full.limbs[:k]
    a = a_full.limbs[:k]
    v = rg.sample_poly(params.ring, "ternary", level, rng)
    v_eval = rg.to_eval(v).limbs
    e0 = rg.to_eval(
        rg.sample_poly(params.ring, "discrete_gaussian", level, rng, sigma=params.error_sigma)
    ).limbs
    e1 = rg.to_eval(
        rg.sample_poly(params.ring, "discrete_gaussian", level, rng, sigma=params.error_sigma)
    ).limbs
    from .. import _kernels

    c0 = _kernels.addmod_rows(
        _kernels.addmod_rows(
            _kernels.elementwise_mulmod(v_eval, b, tabs.q1, tabs.qinv1, tabs.r21),
            e0,
            tabs.q1,
        ),
        pt.poly.limbs[:k],
        tabs.q1,
    )
    c1 = _kernels.addmod_rows(
        _kernels.elementwise_mulmod(v_eval, a, tabs.q1, tabs.qinv1, tabs.r21),
        e1,
        tabs.q1,
    )
    return Ciphertext(
        rg.RnsPoly(params.ring, c0, rg.EVAL, level),
        rg.RnsPoly(params.ring, c1, rg.EVAL, level),
        pt.scale,
        params.slot_count,
        params,
    )


def decrypt(ct, keyset):
    """Decrypt to a plaintext (decode separately)."""
    params = ct.params
    s = keyset.secret_at_level(ct.level)
    m = rg.poly_add(ct.c0, rg.poly_mul(ct.c1, s))
    pt = Plaintext(m, ct.scale)
    pt._params = params
    return pt


def decrypt_vector(ct, keyset, length=None):
    return decode_real(decrypt(ct, keyset), length)


def encrypt_vector(params, values, keyset, level=None, scale=None, rng_seed=None):
    level = params.max_level if level is None else level
    return encrypt(encode(params, values, level, scale), keyset, level, rng_seed)


def mod_down(ct, target_level):
    """Drop limbs to target_level; message and scale are preserved."""
    if target_level > ct.level:
        raise LevelMismatchError(
            f"mod_down target {target_level} above current level {ct.level}"
        )
    if target_level == ct.level:
        return ct
    k = target_level + 1
    return Ciphertext(
        rg.RnsPoly(ct.params.ring, ct.c0.limbs[:k].copy(), ct.c0.form, target_level),
        rg.RnsPoly(ct.params.ring, ct.c1.limbs[:k].copy(), ct.c1.form, target_level),
        ct.scale,
        ct.slot_count,
        ct.params,
        ct.insecure_provenance,
    )


def _poly_rescale(poly, params):
    """Divide by the top limb's prime with centered rounding; level -1."""
    level = poly.level
    chain = params.ring.moduli_chain
    q_l = chain[level]
    top = poly.limbs[level : level + 1].copy()
    rg._ntt_inverse_raw(top, params.ring.stacked((q_l,)))
    centered = top[0].astype(np.int64)
    centered = np.where(centered > q_l // 2, centered - q_l, centered)
    rest = rg.limbs_from_signed(centered, chain[:level])
    tabs = params.ring.chain_tables(level - 1)
    rg._ntt_forward_raw(rest, tabs)
    from .. import _kernels

    diff = _kernels.submod_rows(poly.limbs[:level], rest, tabs.q1)
    cache = params.ring._cache.setdefault("rescale_inv", {})
    if level not in cache:
        cache[level] = np.array(
            [
                pow(q_l, -1, q) * params.ring.prime_tables(q).r % q
                for q in chain[:level]
            ],
            dtype=np.uint64,
        )
    out = _kernels.rowwise_mont(diff, cache[level], tabs.q1, tabs.qinv1)
    return rg.RnsPoly(params.ring, out, rg.EVAL, level - 1)


def rescale(ct):
    """Divide the message scale by the dropped prime; consumes one level."""
    if ct.level == 0:
        raise OutOfLevelsError("rescale at level 0")
    q_l = ct.params.ring.moduli_chain[ct.level]
    return Ciphertext(
        _poly_rescale(rg.to_eval(ct.c0), ct.params),
        _poly_rescale(rg.to_eval(ct.c1), ct.params),
        ct.scale / q_l,
        ct.slot_count,
        ct.params,
        ct.insecure_provenance,
    )


SCALE_EXACT_RTOL = 1e-9


def _align(ct1, ct2):
    """Equalize levels and (where a spare level allows) scales exactly.

    Mismatched scales arise because rescaling divides by near-but-not-equal
    primes. When the higher-level operand must drop limbs anyway, one of
    those drops is spent multiplying by an exactly-encoded 1.0 whose scale
    cancels the drift; only same-level mismatches fall back to the 2^-10
    tolerance.
    """
    s1, s2 = ct1.scale, ct2.scale
    if ct1.level == ct2.level and abs(s1 - s2) <= SCALE_EXACT_RTOL * max(s1, s2):
        return ct1, ct2
    hi, lo = (ct1, ct2) if ct1.level >= ct2.level else (ct2, ct1)
    if hi.level > lo.level and abs(hi.scale - lo.scale) > SCALE_EXACT_RTOL * lo.scale:
        hi = mod_down(hi, lo.level + 1)
        q = hi.params.ring.moduli_chain[hi.level]
        pt = encode_const(hi.params, 1.0, hi.level, lo.scale * q / hi.scale)
        hi = mult_plain(hi, pt)
        hi.scale = lo.scale  # exact by construction up to f64 rounding
    else:
        hi = mod_down(hi, lo.level)
    return (hi, lo) if ct1.level >= ct2.level else (lo, hi)


def _check_scales(s1, s2):
    if abs(s1 - s2) > SCALE_MATCH_RTOL * max(s1, s2):
        raise ScaleMismatchError(f"scales differ beyond 2^-10: {s1} vs {s2}")


def add(ct1, ct2):
    """Slot-wise sum; the higher-level operand is mod-downed automatically."""
    ct1, ct2 = _align(ct1, ct2)
    _check_scales(ct1.scale, ct2.scale)
    return Ciphertext(
        rg.poly_add(ct1.c0, ct2.c0),
        rg.poly_add(ct1.c1, ct2.c1),
        ct1.scale,
        ct1.slot_count,
        ct1.params,
        ct1.insecure_provenance or ct2.insecure_provenance,
    )


def sub(ct1, ct2):
    ct1, ct2 = _align(ct1, ct2)
    _check_scales(ct1.scale, ct2.scale)
    return Ciphertext(
        rg.poly_sub(ct1.c0, ct2.c0),
        rg.poly_sub(ct1.c1, ct2.c1),
        ct1.scale,
        ct1.slot_count,
        ct1.params,
        ct1.insecure_provenance or ct2.insecure_provenance,
    )


def negate(ct):
    return Ciphertext(
        rg.poly_neg(ct.c0),
        rg.poly_neg(ct.c1),
        ct.scale,
        ct.slot_count,
        ct.params,
        ct.insecure_provenance,
    )


def _as_plaintext(ct, values_or_pt, scale=None):
    if isinstance(values_or_pt, Plaintext):
        return values_or_pt
    if np.isscalar(values_or_pt):
        return encode_const(
            ct.params, values_or_pt, ct.level, scale if scale else ct.params.default_scale
        )
    return encode(
        ct.params, values_or_pt, ct.level, scale if scale else ct.params.default_scale
    )


def add_plain(ct, values_or_pt):
    """ct + plaintext; the plaintext is encoded at the ciphertext's scale."""
    if isinstance(values_or_pt, Plaintext):
        pt = values_or_pt
        _check_scales(ct.scale, pt.scale)
    elif np.isscalar(values_or_pt):
        pt = encode_const(ct.params, values_or_pt, ct.level, ct.scale)
    else:
        pt = encode(ct.params, values_or_pt, ct.level, ct.scale)
    k = ct.level + 1
    if pt.level < ct.level:
        raise LevelMismatchError("plaintext level below ciphertext level")
    ppoly = rg.RnsPoly(ct.params.ring, pt.poly.limbs[:k], rg.EVAL, ct.level)
    return Ciphertext(
        rg.poly_add(ct.c0, ppoly),
        ct.c1.copy(),
        ct.scale,
        ct.slot_count,
        ct.params,
        ct.insecure_provenance,
    )


def sub_plain(ct, values_or_pt):
    neg = values_or_pt
    if isinstance(values_or_pt, Plaintext):
        p = values_or_pt
        npoly = rg.poly_neg(p.poly)
        neg = Plaintext(npoly, p.scale)
        neg._params = p._params
    elif np.isscalar(values_or_pt):
        neg = -values_or_pt
    else:
        neg = -np.asarray(values_or_pt)
    return add_plain(ct, neg)


def mult_plain(ct, values_or_pt, rescale_after=True):
    """Slot-wise product with a plaintext, rescaled back to ~default scale."""
    if ct.level == 0:
        raise OutOfLevelsError("mult_plain at level 0")
    pt = _as_plaintext(ct, values_or_pt)
    if pt.level < ct.level:
        raise LevelMismatchError("plaintext level below ciphertext level")
    k = ct.level + 1
    ppoly = rg.RnsPoly(ct.params.ring, pt.poly.limbs[:k], rg.EVAL, ct.level)
    out = Ciphertext(
        rg.poly_mul(ct.c0, ppoly),
        rg.poly_mul(ct.c1, ppoly),
        ct.scale * pt.scale,
        ct.slot_count,
        ct.params,
        ct.insecure_provenance,
    )
    return rescale(out) if rescale_after else out


def mult(ct1, ct2, relin_key_or_keyset, rescale_after=True):
    """Slot-wise ciphertext product with relinearization and rescale."""
    keyset = relin_key_or_keyset
    relin = keyset.relin_key if isinstance(keyset, keysmod.KeySet) else keyset
    if not isinstance(keyset, keysmod.KeySet):
        raise CryptoError("mult needs the KeySet (for the KS precompute cache)")
    ct1, ct2 = _align(ct1, ct2)
    if ct1.level == 0:
        raise OutOfLevelsError("mult at level 0")
    d0 = rg.poly_mul(ct1.c0, ct2.c0)
    d1 = rg.poly_add(rg.poly_mul(ct1.c0, ct2.c1), rg.poly_mul(ct1.c1, ct2.c0))
    d2 = rg.poly_mul(ct1.c1, ct2.c1)
    kb, ka = keysmod.ks_apply(keyset, relin, d2)
    out = Ciphertext(
        rg.poly_add(d0, kb),
        rg.poly_add(d1, ka),
        ct1.scale * ct2.scale,
        ct1.slot_count,
        ct1.params,
        ct1.insecure_provenance or ct2.insecure_provenance,
    )
    return rescale(out) if rescale_after else out


def square(ct, keyset, rescale_after=True):
    return mult(ct, ct, keyset, rescale_after)


def _rotate_once(ct, step, keyset):
    params = ct.params
    g = keysmod.galois_exponent_for_step(params, step)
    key = keysmod.rotation_key_for(keyset, step)
    c0r = rg.poly_automorphism_eval(rg.to_eval(ct.c0), g)
    c1r = rg.poly_automorphism_eval(rg.to_eval(ct.c1), g)
    kb, ka = keysmod.ks_apply(keyset, key, c1r)
    return Ciphertext(
        rg.poly_add(c0r, kb),
        ka,
        ct.scale,
        ct.slot_count,
        params,
        ct.insecure_provenance,
    )


def rotate(ct, step, keyset):
    """Cyclic left shift of the slot vector by `step` (negative = right)."""
    step = int(step) % ct.slot_count
    if step == 0:
        return ct.copy()
    for part in keysmod.decompose_rotation(keyset, step, ct.slot_count):
        ct = _rotate_once(ct, part, keyset)
    return ct


def conjugate(ct, keyset):
    if keyset.conj_key is None:
        raise CryptoError("key set has no conjugation key")
    n = ct.params.ring_degree
    g = 2 * n - 1
    c0r = rg.poly_automorphism_eval(rg.to_eval(ct.c0), g)
    c1r = rg.poly_automorphism_eval(rg.to_eval(ct.c1), g)
    kb, ka = keysmod.ks_apply(keyset, keyset.conj_key, c1r)
    return Ciphertext(
        rg.poly_add(c0r, kb),
        ka,
        ct.scale,
        ct.slot_count,
        ct.params,
        ct.insecure_provenance,
    )


# ---------------------------------------------------------------------------
# Chebyshev-basis polynomial evaluation (baby-step / giant-step)
# ---------------------------------------------------------------------------


def bsgs_depth(degree, prescaled=False):
    """Levels consumed: ceil(log2(degree+1)) plus one for the domain affine."""
    return math.ceil(math.log2(degree + 1)) + (0 if prescaled else 1)


_COEFF_SKIP_REL = 1e-13


def eval_poly_bsgs(ct, poly, keyset, input_prescaled=False):
    """Apply a Chebyshev-basis polynomial slot-wise to a ciphertext.

    Divide-and-conquer over the Chebyshev basis: p = q + T_g * r with the
    cross-term correction q_k -= c_{2g-k}, power-of-two giants T_g from a
    squaring chain. Consumes exactly ceil(log2(degree+1)) levels past the
    domain affine (the affine is skipped with input_prescaled=True, when the
    caller already mapped slots into [-1,1]).

    Inputs outside poly.domain produce unspecified values (no guarantee).
    """
    degree = poly.degree
    need = bsgs_depth(degree, input_prescaled)
    if ct.level < need:
        raise OutOfLevelsError(
            f"polynomial evaluation needs {need} levels, have {ct.level}"
        )
    coeffs = np.asarray(poly.cheb_coeffs, dtype=np.float64)

    if input_prescaled:
        y = ct
    else:
        a, b = poly.domain
        y = mult_plain(ct, 2.0 / (b - a))
        shift = -(a + b) / (b - a)
        if abs(shift) > 0:
            y = add_plain(y, shift)
    if degree == 0:
        return add_plain(mult_plain(y, 0.0), float(coeffs[0]))

    skip = _COEFF_SKIP_REL * float(np.max(np.abs(coeffs)))

    # squaring chain of giants T_1, T_2, T_4, ...
    giants = {1: y}
    g = 1
    while 2 * g <= degree:
        sq = square(giants[g], keyset)
        giants[2 * g] = add_plain(add(sq, sq), -1.0)
        g *= 2

    def eval_range(c):
        """Evaluate sum c_j T_j; returns a Ciphertext or a float constant."""
        d = len(c) - 1
        while d > 0 and abs(c[d]) <= skip:
            d -= 1
        if d == 0:
            return float(c[0])
        if d == 1:
            return add_plain(mult_plain(giants[1], float(c[1])), float(c[0]))
        g = 1 << (math.ceil(math.log2(d + 1)) - 1)
        r = np.zeros(d - g + 1)
        r[0] = c[g]
        r[1:] = 2.0 * c[g + 1 : d + 1]
        q = c[:g].copy()
        for j in range(1, d - g + 1):
            q[g - j] -= c[g + j]
        r_val = eval_range(r)
        q_val = eval_range(q)
        if isinstance(r_val, float):
            if abs(r_val) <= skip:
                term = None
            else:
                term = mult_plain(giants[g], r_val)
        else:
            term = mult(giants[g], r_val, keyset)
        if term is None:
            return q_val
        if isinstance(q_val, float):
            return add_plain(term, q_val) if q_val else term
        return add(term, q_val)

    result = eval_range(coeffs.copy())
    if isinstance(result, float):  # degenerate near-constant polynomial
        result = add_plain(mult_plain(y, 0.0), result)
    return result
