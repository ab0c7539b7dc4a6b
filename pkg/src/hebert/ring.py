"""Arithmetic on Z_q[X]/(X^N+1) in RNS/NTT (double-CRT) representation.

Limbs are kept as independent uint64 residue vectors, one per prime of the
modulus chain; nothing in the arithmetic path reconstructs big integers.
Modular multiplication uses Montgomery reduction (R = 2^64) built from
32-bit partial products, which is exact for any modulus below 2^62.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import CryptoError, FormMismatchError, LevelMismatchError

_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

COEFF = "coeff"
EVAL = "eval"


def _mulhi64(a, b):
    """High 64 bits of the 128-bit product of uint64 arrays."""
    a_lo = a & _MASK32
    a_hi = a >> _SHIFT32
    b_lo = b & _MASK32
    b_hi = b >> _SHIFT32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    mid = (ll >> _SHIFT32) + (lh & _MASK32) + (hl & _MASK32)
    return a_hi * b_hi + (lh >> _SHIFT32) + (hl >> _SHIFT32) + (mid >> _SHIFT32)


def mont_mul(a, b, q, qinv_neg):
    """REDC: a*b*R^-1 mod q for a,b < q < 2^62. Shapes broadcast."""
    t_lo = a * b
    t_hi = _mulhi64(a, b)
    m = t_lo * qinv_neg
    r = t_hi + _mulhi64(m, q) + (t_lo != 0).astype(np.uint64)
    return r - q * (r >= q)


def add_mod(a, b, q):
    s = a + b
    return s - q * (s >= q)


def sub_mod(a, b, q):
    s = a + (q - b)
    return s - q * (s >= q)


def neg_mod(a, q):
    return np.where(a == 0, a, q - a)


def _bit_reverse_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def find_primitive_2n_root(q, two_n):
    """Smallest-effort primitive 2N-th root of unity mod q (q ≡ 1 mod 2N)."""
    if (q - 1) % two_n != 0:
        raise CryptoError(f"modulus {q} is not NTT-friendly for 2N={two_n}")
    exp = (q - 1) // two_n
    for base in range(2, 10000):
        cand = pow(base, exp, q)
        if pow(cand, two_n // 2, q) == q - 1:
            return cand
    raise CryptoError(f"no primitive root found mod {q}")


class PrimeTables:
    """Per-prime Montgomery constants and bit-reversed twiddle tables."""

    def __init__(self, q, ring_degree):
        self.q = q
        self.n = ring_degree
        self.qinv_neg = (-pow(q, -1, 1 << 64)) % (1 << 64)
        r = (1 << 64) % q
        self.r = r
        self.r2 = (r * r) % q
        psi = find_primitive_2n_root(q, 2 * ring_degree)
        ipsi = pow(psi, -1, q)
        rev = _bit_reverse_indices(ring_degree)
        pows = np.empty(ring_degree, dtype=np.uint64)
        ipows = np.empty(ring_degree, dtype=np.uint64)
        x = ix = 1
        buf = [0] * ring_degree
        ibuf = [0] * ring_degree
        for i in range(ring_degree):
            buf[i] = (x * r) % q
            ibuf[i] = (ix * r) % q
            x = (x * psi) % q
            ix = (ix * ipsi) % q
        pows[:] = buf
        ipows[:] = ibuf
        self.psi_rev = pows[rev].copy()
        self.ipsi_rev = ipows[rev].copy()
        self.ninv_mont = (pow(ring_degree, -1, q) * r) % q


class StackedTables:
    """Tables for a fixed ordered tuple of primes, stacked for vector ops.

    `q1`-style members are 1-D (for the JIT kernels); `q`-style members are
    column vectors broadcasting against (k, N) limb matrices.
    """

    def __init__(self, prime_tables):
        self.q1 = np.array([t.q for t in prime_tables], dtype=np.uint64)
        self.qinv1 = np.array([t.qinv_neg for t in prime_tables], dtype=np.uint64)
        self.r21 = np.array([t.r2 for t in prime_tables], dtype=np.uint64)
        self.ninv1 = np.array([t.ninv_mont for t in prime_tables], dtype=np.uint64)
        self.q = self.q1[:, None]
        self.qinv_neg = self.qinv1[:, None]
        self.r2 = self.r21[:, None]
        self.psi_rev = np.stack([t.psi_rev for t in prime_tables])
        self.ipsi_rev = np.stack([t.ipsi_rev for t in prime_tables])
        self.n = prime_tables[0].n if prime_tables else 0


@dataclass(frozen=True)
class RingParams:
    """Ring degree, modulus chain, and special moduli for key switching.

    moduli_chain[i] is the prime dropped when rescaling from level i; all
    primes are distinct, ≡ 1 (mod 2N) and below 2^62.
    """

    name: str
    ring_degree: int
    moduli_chain: tuple
    special_moduli: tuple = ()
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        n = self.ring_degree
        if n < 16 or n & (n - 1):
            raise CryptoError(f"ring degree {n} must be a power of two >= 16")
        seen = set()
        for q in tuple(self.moduli_chain) + tuple(self.special_moduli):
            if q >= 1 << 62:
                raise CryptoError(f"modulus {q} >= 2^62")
            if q % (2 * n) != 1:
                raise CryptoError(f"modulus {q} != 1 mod 2N")
            if not _is_prime(q):
                raise CryptoError(f"modulus {q} is not prime")
            if q in seen:
                raise CryptoError(f"duplicate modulus {q}")
            seen.add(q)

    @property
    def max_level(self):
        return len(self.moduli_chain) - 1

    def prime_tables(self, q):
        tabs = self._cache.setdefault("prime", {})
        if q not in tabs:
            tabs[q] = PrimeTables(q, self.ring_degree)
        return tabs[q]

    def stacked(self, primes):
        """Stacked tables for an ordered prime tuple (cached)."""
        primes = tuple(primes)
        tabs = self._cache.setdefault("stacked", {})
        if primes not in tabs:
            tabs[primes] = StackedTables([self.prime_tables(q) for q in primes])
        return tabs[primes]

    def chain_tables(self, level):
        return self.stacked(self.moduli_chain[: level + 1])

    def modulus_product(self, level):
        prod = 1
        for q in self.moduli_chain[: level + 1]:
            prod *= q
        return prod

    # -- versioned text config (diffable preset format) --

    def to_config_text(self):
        lines = [
            "hebert-ring-config v1",
            f"name {self.name}",
            f"N {self.ring_degree}",
            "moduli " + " ".join(hex(q) for q in self.moduli_chain),
            "special " + " ".join(hex(q) for q in self.special_moduli),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config_text(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "hebert-ring-config v1":
            raise CryptoError("unrecognized ring config header")
        fields = {}
        for ln in lines[1:]:
            key, _, rest = ln.partition(" ")
            fields[key] = rest.strip()
        return cls(
            name=fields["name"],
            ring_degree=int(fields["N"]),
            moduli_chain=tuple(int(x, 16) for x in fields["moduli"].split()),
            special_moduli=tuple(int(x, 16) for x in fields.get("special", "").split()),
        )


def _is_prime(n):
    """Deterministic Miller-Rabin, valid for n < 3.3e24."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def generate_ntt_primes(bits, count, ring_degree, below=None):
    """Search downward from 2^bits for `count` primes ≡ 1 mod 2N."""
    step = 2 * ring_degree
    cand = (((1 << bits) - 2) // step) * step + 1
    if below is not None:
        cand = min(cand, ((below - 2) // step) * step + 1)
    out = []
    while len(out) < count:
        if cand.bit_length() != bits:
            raise CryptoError(f"ran out of {bits}-bit NTT primes")
        if _is_prime(cand):
            out.append(cand)
        cand -= step
    return out


@dataclass
class RnsPoly:
    """A ring element: (level+1) residue limbs of shape (level+1, N).

    `form` is COEFF (power basis) or EVAL (per-limb negacyclic NTT values).
    """

    params: RingParams
    limbs: np.ndarray
    form: str
    level: int

    def __post_init__(self):
        if self.limbs.shape != (self.level + 1, self.params.ring_degree):
            raise CryptoError(
                f"limb shape {self.limbs.shape} inconsistent with level {self.level}"
            )

    def copy(self):
        return RnsPoly(self.params, self.limbs.copy(), self.form, self.level)

    def _tables(self):
        return self.params.chain_tables(self.level)


def zero_poly(params, level, form=EVAL):
    n = params.ring_degree
    return RnsPoly(params, np.zeros((level + 1, n), dtype=np.uint64), form, level)


def _ntt_forward_raw(a, tables):
    """In-place forward negacyclic NTT on (k, N) limbs (natural -> bitrev)."""
    k = a.shape[0]
    return _kernels.ntt_forward_inplace(
        a, tables.psi_rev[:k], tables.q1[:k], tables.qinv1[:k]
    )


def _ntt_inverse_raw(a, tables):
    """In-place inverse NTT on (k, N) limbs (bitrev -> natural)."""
    k = a.shape[0]
    return _kernels.ntt_inverse_inplace(
        a, tables.ipsi_rev[:k], tables.ninv1[:k], tables.q1[:k], tables.qinv1[:k]
    )


def ntt_transform(p, direction):
    """Forward (coeff->eval) or inverse (eval->coeff) NTT; returns a new poly."""
    if direction == "forward":
        if p.form != COEFF:
            raise FormMismatchError("forward NTT requires coefficient form")
        out = p.limbs.copy()
        _ntt_forward_raw(out, p._tables())
        return RnsPoly(p.params, out, EVAL, p.level)
    if direction == "inverse":
        if p.form != EVAL:
            raise FormMismatchError("inverse NTT requires evaluation form")
        out = p.limbs.copy()
        _ntt_inverse_raw(out, p._tables())
        return RnsPoly(p.params, out, COEFF, p.level)
    raise CryptoError(f"unknown NTT direction {direction!r}")


def to_eval(p):
    return ntt_transform(p, "forward") if p.form == COEFF else p


def to_coeff(p):
    return ntt_transform(p, "inverse") if p.form == EVAL else p


def _check_pair(a, b):
    if a.params is not b.params and a.params != b.params:
        raise CryptoError("ring params mismatch")
    if a.level != b.level:
        raise LevelMismatchError(f"level mismatch {a.level} != {b.level}")
    if a.form != b.form:
        raise FormMismatchError(f"form mismatch {a.form} != {b.form}")


def poly_add(a, b):
    _check_pair(a, b)
    q1 = a._tables().q1[: a.level + 1]
    return RnsPoly(a.params, _kernels.addmod_rows(a.limbs, b.limbs, q1), a.form, a.level)


def poly_sub(a, b):
    _check_pair(a, b)
    q1 = a._tables().q1[: a.level + 1]
    return RnsPoly(a.params, _kernels.submod_rows(a.limbs, b.limbs, q1), a.form, a.level)


def poly_neg(a):
    q = a._tables().q[: a.level + 1]
    return RnsPoly(a.params, neg_mod(a.limbs, q), a.form, a.level)


def poly_mul(a, b):
    """Slot-wise product per limb; equals negacyclic convolution of coeffs."""
    _check_pair(a, b)
    if a.form != EVAL:
        raise FormMismatchError("poly_mul requires evaluation form")
    t = a._tables()
    k = a.level + 1
    out = _kernels.elementwise_mulmod(
        a.limbs, b.limbs, t.q1[:k], t.qinv1[:k], t.r21[:k]
    )
    return RnsPoly(a.params, out, EVAL, a.level)


def poly_scalar_mul(a, scalars):
    """Multiply by per-limb uint64 scalars (natural form), e.g. CRT constants."""
    t = a._tables()
    k = a.level + 1
    s = np.asarray(scalars, dtype=np.uint64).reshape(k, 1)
    s_mont = mont_mul(s, t.r2[:k], t.q[:k], t.qinv_neg[:k]).ravel()
    return RnsPoly(
        a.params,
        _kernels.rowwise_mont(a.limbs, s_mont, t.q1[:k], t.qinv1[:k]),
        a.form,
        a.level,
    )


def limbs_from_signed(coeffs, primes):
    """Reduce signed int64 coefficients into residue limbs, one per prime."""
    c = np.asarray(coeffs, dtype=np.int64)
    out = np.empty((len(primes), c.shape[-1]), dtype=np.uint64)
    for i, q in enumerate(primes):
        out[i] = np.mod(c, np.int64(q)).astype(np.uint64)
    return out


def poly_from_signed(params, coeffs, level, form=COEFF):
    limbs = limbs_from_signed(coeffs, params.moduli_chain[: level + 1])
    p = RnsPoly(params, limbs, COEFF, level)
    return to_eval(p) if form == EVAL else p


def crt_reconstruct_signed(p):
    """Exact CRT lift of a coefficient-form poly to centered Python ints."""
    p = to_coeff(p)
    primes = p.params.moduli_chain[: p.level + 1]
    modulus = 1
    for q in primes:
        modulus *= q
    n = p.params.ring_degree
    acc = [0] * n
    for i, q in enumerate(primes):
        m_i = modulus // q
        u_i = pow(m_i, -1, q)
        row = p.limbs[i].tolist()
        mu = m_i * u_i
        for j in range(n):
            acc[j] += row[j] * mu
    half = modulus // 2
    return [((v % modulus) - modulus if (v % modulus) > half else v % modulus) for v in acc]


@lru_cache(maxsize=64)
def _automorphism_index(n, g):
    """Target index and sign arrays for X -> X^g on Z[X]/(X^N+1)."""
    j = np.arange(n, dtype=np.int64)
    e = (j * g) % (2 * n)
    tgt = e % n
    flip = e >= n
    return tgt, flip


def poly_automorphism(p, g):
    """Apply X -> X^g (g odd). Coefficient form in, coefficient form out."""
    if p.form != COEFF:
        raise FormMismatchError("automorphism requires coefficient form")
    n = p.params.ring_degree
    if g % 2 == 0:
        raise CryptoError("automorphism exponent must be odd")
    tgt, flip = _automorphism_index(n, g % (2 * n))
    q = p._tables().q[: p.level + 1]
    out = np.empty_like(p.limbs)
    out[:, tgt] = np.where(flip[None, :], neg_mod(p.limbs, q), p.limbs)
    return RnsPoly(p.params, out, COEFF, p.level)


def _eval_exponent_map(params):
    """exponent e[i] such that eval slot i of the NTT holds p(psi^e[i]).

    Independent of the limb prime; computed once per ring by transforming X.
    """
    cache = params._cache
    if "eval_exp" not in cache:
        n = params.ring_degree
        q = params.moduli_chain[0]
        tabs = params.prime_tables(q)
        x_poly = np.zeros((1, n), dtype=np.uint64)
        x_poly[0, 1] = 1
        _kernels.ntt_forward_inplace(
            x_poly,
            tabs.psi_rev[None, :],
            np.array([q], dtype=np.uint64),
            np.array([tabs.qinv_neg], dtype=np.uint64),
        )
        psi = find_primitive_2n_root(q, 2 * n)
        pow_to_exp = {}
        x = 1
        for e in range(2 * n):
            pow_to_exp[x] = e
            x = x * psi % q
        exps = np.array([pow_to_exp[int(v)] for v in x_poly[0]], dtype=np.int64)
        pos = np.full(2 * n, -1, dtype=np.int64)
        pos[exps] = np.arange(n)
        cache["eval_exp"] = (exps, pos)
    return cache["eval_exp"]


def poly_automorphism_eval(p, g):
    """X -> X^g directly on evaluation form (a pure slot permutation)."""
    if p.form != EVAL:
        raise FormMismatchError("eval automorphism requires evaluation form")
    n = p.params.ring_degree
    cache = p.params._cache.setdefault("eval_perm", {})
    g = g % (2 * n)
    if g not in cache:
        exps, pos = _eval_exponent_map(p.params)
        cache[g] = pos[(exps * g) % (2 * n)]
    perm = cache[g]
    return RnsPoly(p.params, p.limbs[:, perm].copy(), EVAL, p.level)


def sample_poly(params, kind, level, rng, sigma=3.2, hamming_weight=None):
    """Sample a fresh ring element.

    kind: 'ternary' (uniform on {-1,0,1}, optionally with fixed hamming
    weight), 'discrete_gaussian' (rounded normal, std sigma), or 'uniform'
    (independent per-limb uniform residues).
    """
    n = params.ring_degree
    primes = params.moduli_chain[: level + 1]
    if kind == "uniform":
        limbs = np.empty((level + 1, n), dtype=np.uint64)
        for i, q in enumerate(primes):
            limbs[i] = rng.integers(0, q, size=n, dtype=np.uint64)
        return RnsPoly(params, limbs, COEFF, level)
    if kind == "ternary":
        if hamming_weight is None:
            coeffs = rng.integers(-1, 2, size=n).astype(np.int64)
        else:
            coeffs = np.zeros(n, dtype=np.int64)
            pos = rng.choice(n, size=hamming_weight, replace=False)
            coeffs[pos] = rng.choice(np.array([-1, 1]), size=hamming_weight)
    elif kind == "discrete_gaussian":
        if sigma <= 0:
            raise CryptoError("gaussian sigma must be positive")
        coeffs = np.rint(rng.normal(0.0, sigma, size=n)).astype(np.int64)
    else:
        raise CryptoError(f"unknown sample kind {kind!r}")
    return poly_from_signed(params, coeffs, level, form=COEFF)
