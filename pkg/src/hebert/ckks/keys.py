"""Key generation and hybrid (special-modulus, digit-decomposed) key switching.

Switch keys are gadget encryptions at the extended basis Q_L*P, one digit per
group of chain limbs. At level l the same key material serves by slicing to
the active limbs; the CRT idempotent of a digit is the indicator of its limbs,
so no level-specific keys are needed.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from .. import ring as rg
from ..errors import CryptoError, MissingRotationKeyError
from .encoding import CONJ_GALOIS, slot_galois_exponent


class BaseConverter:
    """Fast (approximate, overflow-tolerant) RNS base conversion constants."""

    def __init__(self, ring_params, src_primes, dst_primes):
        self.src = tuple(src_primes)
        self.dst = tuple(dst_primes)
        q_src = 1
        for q in self.src:
            q_src *= q
        inv_punc = []
        for q in self.src:
            punc = q_src // q
            t = ring_params.prime_tables(q)
            inv_punc.append(pow(punc, -1, q) * t.r % q)  # Montgomery form
        self.inv_punc = np.array(inv_punc, dtype=np.uint64)
        mat = np.empty((len(self.src), len(self.dst)), dtype=np.uint64)
        for i, q in enumerate(self.src):
            punc = q_src // q
            for j, p in enumerate(self.dst):
                mat[i, j] = punc % p * ring_params.prime_tables(p).r % p
        self.punc_mat = mat
        self.src_tables = ring_params.stacked(self.src)
        self.dst_tables = ring_params.stacked(self.dst)

    def convert(self, limbs):
        """Coefficient-form residues (len(src), N) -> (len(dst), N)."""
        t = self.src_tables
        hat = _kernels.rowwise_mont(limbs, self.inv_punc, t.q1, t.qinv1)
        return _kernels.base_convert(
            hat, self.punc_mat, self.dst_tables.q1, self.dst_tables.qinv1
        )


@dataclass
class SwitchKey:
    """Digit-decomposed key switching key at the full extended basis."""

    digits_b: list
    digits_a: list


@dataclass
class KeySet:
    """Secret/public/evaluation keys plus the key-switch precompute cache.

    `secret_key` is None on a public-only key set (server side).
    """

    params: object
    secret_key: rg.RnsPoly
    secret_ext: np.ndarray
    public_key: tuple
    relin_key: SwitchKey
    rotation_keys: dict
    conj_key: SwitchKey
    rotation_steps: tuple
    _cache: dict = field(default_factory=dict, repr=False)

    def public_only(self):
        """Evaluation-key view with the secret material stripped."""
        return KeySet(
            params=self.params,
            secret_key=None,
            secret_ext=None,
            public_key=self.public_key,
            relin_key=self.relin_key,
            rotation_keys=self.rotation_keys,
            conj_key=self.conj_key,
            rotation_steps=self.rotation_steps,
            _cache=self._cache,
        )

    @property
    def has_secret(self):
        return self.secret_key is not None

    def secret_at_level(self, level):
        if not self.has_secret:
            raise CryptoError("operation requires the secret key")
        return rg.RnsPoly(
            self.params.ring, self.secret_ext[: level + 1].copy(), rg.EVAL, level
        )


def _ext_primes(params):
    return tuple(params.ring.moduli_chain) + tuple(params.ring.special_moduli)


def _sample_uniform_ext(params, rng):
    primes = _ext_primes(params)
    n = params.ring_degree
    out = np.empty((len(primes), n), dtype=np.uint64)
    for i, q in enumerate(primes):
        out[i] = rng.integers(0, q, size=n, dtype=np.uint64)
    return out


def _gaussian_ext_eval(params, rng):
    n = params.ring_degree
    coeffs = np.rint(rng.normal(0.0, params.error_sigma, size=n)).astype(np.int64)
    limbs = rg.limbs_from_signed(coeffs, _ext_primes(params))
    tabs = params.ring.stacked(_ext_primes(params))
    return rg._ntt_forward_raw(limbs, tabs)


def _make_switch_key(params, s_from_ext, s_ext, rng):
    """Gadget-encrypt P * s_from per digit under s, at basis chain+specials."""
    chain = params.ring.moduli_chain
    specials = params.ring.special_moduli
    ext = _ext_primes(params)
    tabs = params.ring.stacked(ext)
    p_prod = 1
    for p in specials:
        p_prod *= p
    groups = params.digit_groups(params.max_level)
    digits_b, digits_a = [], []
    for group in groups:
        # uniform residues are uniform in either form; treat as eval directly
        a_eval = _sample_uniform_ext(params, rng)
        e_eval = _gaussian_ext_eval(params, rng)
        b = _kernels.elementwise_mulmod(a_eval, s_ext, tabs.q1, tabs.qinv1, tabs.r21)
        b = rg.sub_mod(e_eval, b, tabs.q)
        # message part: (P mod q_j) * s_from on the digit's own chain limbs
        for j in group:
            q = chain[j]
            t = params.ring.prime_tables(q)
            factor = np.uint64(p_prod % q * t.r % q)
            term = rg.mont_mul(
                s_from_ext[j], factor, np.uint64(q), np.uint64(t.qinv_neg)
            )
            b[j] = rg.add_mod(b[j], term, np.uint64(q))
        digits_b.append(b)
        digits_a.append(a_eval)
    return SwitchKey(digits_b, digits_a)


def _automorph_ext(params, coeffs_signed, g):
    """Signed coefficients -> sigma_g applied -> eval limbs at full ext basis."""
    n = params.ring_degree
    j = np.arange(n, dtype=np.int64)
    e = (j * (g % (2 * n))) % (2 * n)
    tgt = e % n
    sign = np.where(e >= n, -1, 1)
    out = np.zeros(n, dtype=np.int64)
    out[tgt] = coeffs_signed * sign
    limbs = rg.limbs_from_signed(out, _ext_primes(params))
    tabs = params.ring.stacked(_ext_primes(params))
    return rg._ntt_forward_raw(limbs, tabs)


def default_rotation_steps(params):
    """Powers of two up to slot_count/2, both signs."""
    steps = []
    p = 1
    while p <= params.slot_count // 2:
        steps.extend([p, -p])
        p *= 2
    return tuple(steps)


def keygen(params, rotation_steps=None, rng_seed=0, include_conjugation=True):
    """Generate a full key set; deterministic under rng_seed."""
    rng = np.random.default_rng(np.random.PCG64(rng_seed))
    n = params.ring_degree
    if rotation_steps is None:
        rotation_steps = default_rotation_steps(params)
    rotation_steps = tuple(dict.fromkeys(int(s) for s in rotation_steps))

    if params.secret_hamming_weight is None:
        s_coeffs = rng.integers(-1, 2, size=n).astype(np.int64)
    else:
        s_coeffs = np.zeros(n, dtype=np.int64)
        pos = rng.choice(n, size=params.secret_hamming_weight, replace=False)
        s_coeffs[pos] = rng.choice(np.array([-1, 1]), size=params.secret_hamming_weight)

    ext = _ext_primes(params)
    tabs = params.ring.stacked(ext)
    s_ext = rg._ntt_forward_raw(rg.limbs_from_signed(s_coeffs, ext), tabs)
    n_chain = len(params.ring.moduli_chain)
    secret_key = rg.RnsPoly(
        params.ring, s_ext[:n_chain].copy(), rg.EVAL, params.max_level
    )

    # public key at the chain basis
    chain_tabs = params.ring.chain_tables(params.max_level)
    a_pk = np.empty((n_chain, n), dtype=np.uint64)
    for i, q in enumerate(params.ring.moduli_chain):
        a_pk[i] = rng.integers(0, q, size=n, dtype=np.uint64)
    e_coeffs = np.rint(rng.normal(0.0, params.error_sigma, size=n)).astype(np.int64)
    e_eval = rg._ntt_forward_raw(
        rg.limbs_from_signed(e_coeffs, params.ring.moduli_chain), chain_tabs
    )
    b_pk = rg.sub_mod(
        e_eval,
        _kernels.elementwise_mulmod(
            a_pk, s_ext[:n_chain], chain_tabs.q1, chain_tabs.qinv1, chain_tabs.r21
        ),
        chain_tabs.q,
    )
    public_key = (
        rg.RnsPoly(params.ring, b_pk, rg.EVAL, params.max_level),
        rg.RnsPoly(params.ring, a_pk, rg.EVAL, params.max_level),
    )

    # s^2 for relinearization
    s_sq_ext = _kernels.elementwise_mulmod(s_ext, s_ext, tabs.q1, tabs.qinv1, tabs.r21)
    relin = _make_switch_key(params, s_sq_ext, s_ext, rng)

    rot_keys = {}
    for step in rotation_steps:
        g = slot_galois_exponent(n, step)
        # key switches sigma_g(s) back to s, so it encrypts sigma_g(s)
        rot_keys[step] = _make_switch_key(
            params, _automorph_ext(params, s_coeffs, g), s_ext, rng
        )
    conj = None
    if include_conjugation:
        conj = _make_switch_key(
            params, _automorph_ext(params, s_coeffs, 2 * n - 1), s_ext, rng
        )

    return KeySet(
        params=params,
        secret_key=secret_key,
        secret_ext=s_ext,
        public_key=public_key,
        relin_key=relin,
        rotation_keys=rot_keys,
        conj_key=conj,
        rotation_steps=rotation_steps,
    )


# ---------------------------------------------------------------------------
# key-switch application
# ---------------------------------------------------------------------------


def _converter(params, cache, src, dst):
    key = (src, dst)
    if key not in cache:
        cache[key] = BaseConverter(params.ring, src, dst)
    return cache[key]


def _p_inv_consts(params, cache, level):
    key = ("pinv", level)
    if key not in cache:
        p_prod = 1
        for p in params.ring.special_moduli:
            p_prod *= p
        vals = []
        for q in params.ring.moduli_chain[: level + 1]:
            t = params.ring.prime_tables(q)
            vals.append(pow(p_prod, -1, q) * t.r % q)  # Montgomery form
        cache[key] = np.array(vals, dtype=np.uint64)
    return cache[key]


def ks_apply(keyset, switch_key, d_poly):
    """Key-switch the component d (which multiplies some s') to the key s.

    Returns (b, a) RnsPolys at d's level such that b + a*s ≈ d*s' (mod Q_l).
    """
    params = keyset.params
    cache = keyset._cache
    level = d_poly.level
    chain = params.ring.moduli_chain
    specials = params.ring.special_moduli
    n = params.ring_degree
    k_sp = len(specials)

    d_eval = rg.to_eval(d_poly) if d_poly.form == rg.COEFF else d_poly
    d_coeff = rg.to_coeff(d_poly) if d_poly.form == rg.EVAL else d_poly

    active = list(range(level + 1))
    ext_primes = tuple(chain[: level + 1]) + tuple(specials)
    ext_tabs = params.ring.stacked(ext_primes)
    n_ext = level + 1 + k_sp
    # rows of the full-basis key that are active at this level
    key_rows = active + [len(chain) + i for i in range(k_sp)]

    acc_b = np.zeros((n_ext, n), dtype=np.uint64)
    acc_a = np.zeros((n_ext, n), dtype=np.uint64)
    groups = params.digit_groups(level)
    for gi, group in enumerate(groups):
        src = tuple(chain[j] for j in group)
        dst_rows = [r for r in range(n_ext) if (r < level + 1 and r not in group) or r >= level + 1]
        dst = tuple(ext_primes[r] for r in dst_rows)
        digit_ext = np.empty((n_ext, n), dtype=np.uint64)
        digit_ext[group] = d_eval.limbs[group]  # own limbs reused in eval form
        if dst:
            conv = _converter(params, cache, src, dst)
            converted = conv.convert(d_coeff.limbs[group])
            rg._ntt_forward_raw(converted, params.ring.stacked(dst))
            digit_ext[dst_rows] = converted
        rows = np.asarray(key_rows, dtype=np.int64)
        _kernels.fma_gather_inplace(
            acc_b, digit_ext, switch_key.digits_b[gi], rows,
            ext_tabs.q1, ext_tabs.qinv1, ext_tabs.r21,
        )
        _kernels.fma_gather_inplace(
            acc_a, digit_ext, switch_key.digits_a[gi], rows,
            ext_tabs.q1, ext_tabs.qinv1, ext_tabs.r21,
        )

    chain_tabs = params.ring.chain_tables(level)
    sp_tabs = params.ring.stacked(tuple(specials))
    conv_down = _converter(params, cache, tuple(specials), tuple(chain[: level + 1]))
    p_inv = _p_inv_consts(params, cache, level)

    out = []
    for acc in (acc_b, acc_a):
        sp_part = acc[level + 1 :].copy()
        rg._ntt_inverse_raw(sp_part, sp_tabs)
        corr = conv_down.convert(sp_part)
        rg._ntt_forward_raw(corr, chain_tabs)
        diff = _kernels.submod_rows(acc[: level + 1], corr, chain_tabs.q1)
        scaled = _kernels.rowwise_mont(diff, p_inv, chain_tabs.q1, chain_tabs.qinv1)
        out.append(rg.RnsPoly(params.ring, scaled, rg.EVAL, level))
    return out[0], out[1]


def rotation_key_for(keyset, step):
    if step in keyset.rotation_keys:
        return keyset.rotation_keys[step]
    raise MissingRotationKeyError(f"no rotation key for step {step}")


def decompose_rotation(keyset, step, slot_count):
    """Split a step into keyed sub-steps (greedy over available keys)."""
    step = step % slot_count
    if step == 0:
        return []
    if step in keyset.rotation_keys:
        return [step]
    if step - slot_count in keyset.rotation_keys:
        return [step - slot_count]
    remaining = min(step, step - slot_count, key=abs)
    parts = []
    available = sorted(
        (s for s in keyset.rotation_keys if s != 0), key=abs, reverse=True
    )
    if not available:
        raise MissingRotationKeyError("no rotation keys available")
    while remaining != 0:
        best = None
        for s in available:
            if abs(remaining - s) < abs(remaining) and (
                best is None or abs(remaining - s) < abs(remaining - best)
            ):
                best = s
        if best is None:
            raise MissingRotationKeyError(
                f"step {step} cannot be decomposed into available keys"
            )
        parts.append(best)
        remaining -= best
    return parts


def galois_exponent_for_step(params, step):
    return slot_galois_exponent(params.ring_degree, step)


CONJUGATION = CONJ_GALOIS
