"""Bootstrapping: refresh a level-0 ciphertext to a high level.

Pipeline: ModRaise (reinterpret the level-0 residues at the full chain, which
decrypts to m + q0*I), CoeffToSlot (homomorphic linear map putting scaled
coefficients into slots), EvalMod (minimax sine approximant of the centered
mod-q0 reduction), SlotToCoeff (inverse map), optional output mask.

Messages must carry the periodic/sparse slot structure the context declares:
n_slots <= N/4 uses one evaluation stream, n_slots == N/2 uses two. The
sparse secret bound K limits |I|; contexts default to K=14 for the shipped
hamming-weight-64 secret.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import minimax
from . import ring as rg
from .ckks import ops
from .ckks.encoding import decode_real, encode
from .errors import CryptoError, InsecureDebugError, OutOfLevelsError

log = logging.getLogger(__name__)


def _powers_of_five(count, modulus):
    out = np.empty(count, dtype=np.int64)
    g = 1
    for i in range(count):
        out[i] = g
        g = (5 * g) % modulus
    return out


@dataclass
class BootstrapContext:
    """Precomputed transforms and the modular-reduction approximant.

    output_level is measured at build time and must cover one full training
    iteration (the trainer asserts this against its per-iteration depth).
    input_periodic declares whether messages arrive already replicated with
    period n_slots (weight vectors) or zero-padded (fresh encodes).
    """

    params: object
    n_slots: int
    evalmod_poly: minimax.MinimaxPoly
    range_k: int
    msg_bound: float
    input_periodic: bool = False
    consumed_levels: int = None
    output_level: int = None
    _diag_cache: dict = field(default_factory=dict, repr=False)

    @property
    def is_full(self):
        return self.n_slots == self.params.slot_count

    def required_rotation_steps(self):
        """Exact steps used; passing these to keygen avoids decomposition."""
        steps = set()
        slots = self.params.slot_count
        n = self.n_slots
        d = n
        while d < slots:  # input replication / output spreading
            steps.add(-d)
            d *= 2
        n_diag_cts = n if not self.is_full else slots
        bs = 1 << (max(1, n_diag_cts).bit_length() // 2)
        for b in range(1, bs):
            steps.add(b)
        for g in range(bs, n_diag_cts, bs):
            steps.add(g)
        n_diag_stc = min(2 * n, slots)
        bs2 = 1 << (n_diag_stc.bit_length() // 2)
        for b in range(1, bs2):
            steps.add(b)
        for g in range(bs2, n_diag_stc, bs2):
            steps.add(g)
        steps.discard(0)
        return sorted(steps)


def build_context(
    params, n_slots, range_k=None, evalmod_degree=119, msg_bound=8.0,
    input_periodic=False,
):
    """Build a bootstrap context for ciphertexts carrying n_slots values."""
    slots = params.slot_count
    if n_slots > slots or (n_slots & (n_slots - 1)):
        raise CryptoError("n_slots must be a power of two <= slot_count")
    if slots // 2 >= n_slots > slots // 4:
        raise CryptoError("n_slots between N/4 and N/2 is not supported")
    if range_k is None:
        h = params.secret_hamming_weight
        if h is None:
            raise CryptoError(
                "bootstrapping needs a sparse secret (set secret_hamming_weight); "
                "a dense ternary secret would need an impractically wide sine range"
            )
        # |I| <= ~6 sigma of sqrt((h+1)/12)
        range_k = int(math.ceil(6.0 * math.sqrt((h + 1) / 12.0)))
    domain = float(range_k) + 0.5
    poly = minimax.remez_fit("sine2pi", (-domain, domain), evalmod_degree)
    ctx = BootstrapContext(
        params=params,
        n_slots=n_slots,
        evalmod_poly=poly,
        range_k=range_k,
        msg_bound=msg_bound,
        input_periodic=input_periodic,
    )
    depth = 1 + minimax_depth(poly) + 1 + 1  # CtS + EvalMod + StC + mask
    ctx.consumed_levels = depth
    ctx.output_level = params.max_level - depth
    if ctx.output_level <= 0:
        raise OutOfLevelsError(
            f"chain too short for bootstrapping: consumes {depth} of "
            f"{params.max_level} levels"
        )
    return ctx


def minimax_depth(poly):
    return math.ceil(math.log2(poly.degree + 1))


# ---------------------------------------------------------------------------
# diagonal generators (closed form; nothing big is stored)
# ---------------------------------------------------------------------------


def _cts_fold(ctx, scale_in):
    """CoeffToSlot scaling: undoes the input scale, q0, the sine's domain
    map, the 1/(2n) transform normalization, and the trace multiplicity R.

    The fold must use the ciphertext's exact scale (not the nominal one):
    any relative deviation eps shifts the sine argument by eps*I whole
    periods, which the reduction amplifies catastrophically.
    """
    params = ctx.params
    q0 = params.ring.moduli_chain[0]
    n = ctx.n_slots
    trace_r = params.ring_degree // (2 * n)  # partial sums multiply by this
    return scale_in / (q0 * (ctx.range_k + 0.5)) / (2 * n) / trace_r


def _cts_diag_sparse(ctx, d, scale_in):
    """Diagonal d of the CoeffToSlot map (A part); conj part is its conjugate."""
    n = ctx.n_slots
    slots = ctx.params.slot_count
    g = _powers_of_five(n, 4 * n)
    j = np.arange(2 * n, dtype=np.int64)
    e = (-j * g[(j + d) % n]) % (4 * n)
    vals = np.zeros(slots, dtype=np.complex128)
    vals[: 2 * n] = np.exp(1j * np.pi * e / (2 * n)) * _cts_fold(ctx, scale_in)
    return vals


def _stc_diag_sparse(ctx, d, scale_in):
    """Diagonal d of the SlotToCoeff map (input replicated mod 2n)."""
    params = ctx.params
    n = ctx.n_slots
    slots = params.slot_count
    fold = params.ring.moduli_chain[0] / scale_in
    g = _powers_of_five(n, 4 * n)
    j = np.arange(slots, dtype=np.int64)
    e = (g[j % n] * ((j + d) % (2 * n))) % (4 * n)
    return np.exp(1j * np.pi * e / (2 * n)) * fold


def _cts_diag_full(ctx, d, half, scale_in):
    """Full-slot CoeffToSlot diagonal for output half 0 or 1 (A part)."""
    params = ctx.params
    slots = params.slot_count
    two_n = params.ring_degree
    g = _powers_of_five(slots, two_n * 2)
    j = np.arange(slots, dtype=np.int64)
    row = j + half * slots
    e = (-row * g[(j + d) % slots]) % (2 * two_n)
    return np.exp(1j * np.pi * e / two_n) * _cts_fold(ctx, scale_in)


def _stc_diag_full(ctx, d, half, scale_in):
    """Full-slot SlotToCoeff diagonal applied to input half 0 or 1."""
    params = ctx.params
    slots = params.slot_count
    two_n = params.ring_degree
    fold = params.ring.moduli_chain[0] / scale_in
    g = _powers_of_five(slots, two_n * 2)
    j = np.arange(slots, dtype=np.int64)
    col = ((j + d) % slots) + half * slots
    e = (g[j] * col) % (2 * two_n)
    return np.exp(1j * np.pi * e / two_n) * fold


def _apply_diag_transform(ct, ct_conj, diag_fn, n_diags, keyset, enc_scale=None):
    """sum_d diag(a_d) rot_d(ct) + diag(conj a_d) rot_d(ct_conj), BSGS order.

    All plaintext products stay unrescaled; a single rescale lands at the
    end, so the whole transform costs one level. enc_scale sets the matrix
    plaintext scale (CoeffToSlot uses the dedicated top prime to keep its
    encoding noise below the sine's slope amplification).
    """
    scale = enc_scale if enc_scale is not None else ct.params.default_scale
    bs = 1 << (n_diags.bit_length() // 2)
    acc = None
    baby_cache = {}
    baby_conj_cache = {}

    def baby(ct_src, cache, b):
        if b not in cache:
            cache[b] = ops.rotate(ct_src, b, keyset)
        return cache[b]

    def enc(vals):
        return encode(ct.params, vals, ct.level, scale)

    for g0 in range(0, n_diags, bs):
        inner = None
        for b in range(bs):
            d = g0 + b
            if d >= n_diags:
                break
            vals = diag_fn(d)
            if not np.any(vals):
                continue
            rolled = np.roll(vals, g0)  # pre-rotate the diagonal by the giant
            term = ops.mult_plain(baby(ct, baby_cache, b), enc(rolled), rescale_after=False)
            if ct_conj is not None:
                term2 = ops.mult_plain(
                    baby(ct_conj, baby_conj_cache, b),
                    enc(np.roll(np.conj(vals), g0)),
                    rescale_after=False,
                )
                term = ops.add(term, term2)
            inner = term if inner is None else ops.add(inner, term)
        if inner is None:
            continue
        part = ops.rotate(inner, g0, keyset) if g0 else inner
        acc = part if acc is None else ops.add(acc, part)
    if acc is None:
        raise CryptoError("empty diagonal transform")
    return ops.rescale(acc)


def _replicate(ct, period, keyset):
    """Spread a vector supported on [0, period) into a periodic slot vector."""
    d = period
    out = ct
    while d < ct.slot_count:
        out = ops.add(out, ops.rotate(out, -d, keyset))
        d *= 2
    return out


def _mod_raise(ct):
    """Reinterpret level-0 residues at the full chain (adds q0 * I)."""
    params = ct.params
    chain = params.ring.moduli_chain
    q0 = chain[0]
    out_polys = []
    for poly in (ct.c0, ct.c1):
        coeff = rg.to_coeff(poly)
        vals = coeff.limbs[0].astype(np.int64)
        vals = np.where(vals > q0 // 2, vals - q0, vals)  # centered lift
        raised = rg.poly_from_signed(params.ring, vals, params.max_level, form=rg.EVAL)
        out_polys.append(raised)
    return ops.Ciphertext(
        out_polys[0], out_polys[1], ct.scale, ct.slot_count, params,
        ct.insecure_provenance,
    )


def bootstrap(ct, ctx, keyset):
    """Refresh a ciphertext to ctx.output_level with the message preserved.

    The message must respect ctx.n_slots (values beyond the declared slots
    are zeroed by the output mask) and |message| <= ctx.msg_bound.
    """
    params = ct.params
    if params is not ctx.params:
        raise CryptoError("context/ciphertext params mismatch")
    if abs(ct.scale - params.default_scale) > 0.05 * params.default_scale:
        raise CryptoError("bootstrap expects a scale near the default")
    if ct.level != 0:
        ct = ops.mod_down(ct, 0)
    n = ctx.n_slots
    slots = params.slot_count
    s_in = ct.scale  # folds must use the exact scale, see _cts_fold
    cts_scale = float(params.ring.moduli_chain[params.max_level])

    # bring the message to period-n form (cheap: level-0 rotations), so the
    # underlying plaintext polynomial lives in the X^(N/2n) subring
    if not ctx.is_full and not ctx.input_periodic:
        ct = _replicate(ct, n, keyset)
    raised = _mod_raise(ct)
    if not ctx.is_full:
        # trace over the subring's Galois subgroup: kills the non-subring
        # part of the raised overflow polynomial I, scales the rest by R
        raised = _replicate(raised, n, keyset)

    conj = ops.conjugate(raised, keyset)
    if not ctx.is_full:
        w = _apply_diag_transform(
            raised, conj, lambda d: _cts_diag_sparse(ctx, d, s_in), n, keyset,
            enc_scale=cts_scale,
        )
        w = ops.eval_poly_bsgs(w, ctx.evalmod_poly, keyset, input_prescaled=True)
        w = _replicate(w, 2 * n, keyset)
        out = _apply_diag_transform(
            w, None, lambda d: _stc_diag_sparse(ctx, d, s_in),
            min(2 * n, slots), keyset,
        )
    else:
        w0 = _apply_diag_transform(
            raised, conj, lambda d: _cts_diag_full(ctx, d, 0, s_in), slots,
            keyset, enc_scale=cts_scale,
        )
        w1 = _apply_diag_transform(
            raised, conj, lambda d: _cts_diag_full(ctx, d, 1, s_in), slots,
            keyset, enc_scale=cts_scale,
        )
        w0 = ops.eval_poly_bsgs(w0, ctx.evalmod_poly, keyset, input_prescaled=True)
        w1 = ops.eval_poly_bsgs(w1, ctx.evalmod_poly, keyset, input_prescaled=True)
        p0 = _apply_diag_transform(
            w0, None, lambda d: _stc_diag_full(ctx, d, 0, s_in), slots, keyset
        )
        p1 = _apply_diag_transform(
            w1, None, lambda d: _stc_diag_full(ctx, d, 1, s_in), slots, keyset
        )
        out = ops.add(p0, p1)

    # the mask multiply also pins the output scale to exactly the default
    if not ctx.is_full and not ctx.input_periodic:
        mask = np.zeros(slots)
        mask[:n] = 1.0  # restore the zero padding beyond the declared slots
    else:
        mask = np.ones(slots)
    q_mask = params.ring.moduli_chain[out.level]
    mask_scale = params.default_scale * q_mask / out.scale
    out = ops.mult_plain(out, encode(params, mask, out.level, mask_scale))
    out.scale = params.default_scale
    if out.level <= ct.level:
        raise OutOfLevelsError("bootstrap failed to gain levels")
    return out


def debug_refresh(ct, keyset, enabled=False):
    """Decrypt-reencrypt at top level. Test-only; requires the explicit flag.

    The output is tagged insecure_provenance and the tag is sticky through
    every downstream operation.
    """
    if enabled is not True:
        raise InsecureDebugError(
            "debug_refresh called without the insecure-debug flag"
        )
    if not keyset.has_secret:
        raise InsecureDebugError("debug_refresh needs the secret key")
    params = ct.params
    values = decode_real(ops.decrypt(ct, keyset))
    pt = encode(params, values, params.max_level, params.default_scale)
    out = ops.encrypt(pt, keyset)
    out.insecure_provenance = True
    return out


class BootstrapRefresher:
    """Refresh strategy backed by true bootstrapping."""

    insecure = False

    def __init__(self, ctx, keyset):
        self.ctx = ctx
        self.keyset = keyset
        self.output_level = ctx.output_level

    def refresh(self, ct):
        return bootstrap(ct, self.ctx, self.keyset)


class DebugRefresher:
    """Decrypt-reencrypt refresh; taints outputs with insecure provenance."""

    insecure = True

    def __init__(self, keyset, enabled=False):
        if enabled is not True:
            raise InsecureDebugError(
                "DebugRefresher requires the explicit insecure-debug flag"
            )
        self.keyset = keyset
        self.output_level = keyset.params.max_level

    def refresh(self, ct):
        return debug_refresh(ct, self.keyset, enabled=True)
