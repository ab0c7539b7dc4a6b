"""Hot modular-arithmetic kernels: numba JIT when available, numpy otherwise.

All kernels operate on uint64 limb matrices of shape (k, N) with per-limb
moduli below 2^62. Montgomery reduction (R = 2^64) is built from 32-bit
partial products so the arithmetic is exact without native 128-bit support.
"""

import os

import numpy as np

_U32MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)

USE_NUMBA = os.environ.get("HEBERT_NO_NUMBA", "") == ""
if USE_NUMBA:
    try:
        from numba import njit, prange
    except Exception:  # pragma: no cover - numba is normally present
        USE_NUMBA = False

# ---------------------------------------------------------------------------
# numpy reference path (always present; the slow but obviously-correct route)
# ---------------------------------------------------------------------------


def _np_mulhi(a, b):
    a_lo = a & _U32MASK
    a_hi = a >> _S32
    b_lo = b & _U32MASK
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    mid = (ll >> _S32) + (lh & _U32MASK) + (hl & _U32MASK)
    return a_hi * b_hi + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)


def _np_mont(a, b, q, qinv):
    t_lo = a * b
    m = t_lo * qinv
    r = _np_mulhi(a, b) + _np_mulhi(m, q) + (t_lo != 0).astype(np.uint64)
    return r - q * (r >= q)


def _np_ntt_forward(a, psi_rev, q_vec, qinv_vec):
    k, n = a.shape
    q = q_vec[:, None, None]
    qi = qinv_vec[:, None, None]
    t = n
    m = 1
    while m < n:
        t >>= 1
        view = a.reshape(k, m, 2 * t)
        s = psi_rev[:, m : 2 * m, None]
        u = view[:, :, :t].copy()
        v = _np_mont(view[:, :, t:], s, q, qi)
        sm = u + v
        view[:, :, :t] = sm - q * (sm >= q)
        df = u + (q - v)
        view[:, :, t:] = df - q * (df >= q)
        m <<= 1
    return a


def _np_ntt_inverse(a, ipsi_rev, ninv_vec, q_vec, qinv_vec):
    k, n = a.shape
    q = q_vec[:, None, None]
    qi = qinv_vec[:, None, None]
    t = 1
    m = n
    while m > 1:
        h = m >> 1
        view = a.reshape(k, h, 2 * t)
        s = ipsi_rev[:, h : 2 * h, None]
        u = view[:, :, :t].copy()
        v = view[:, :, t:].copy()
        sm = u + v
        view[:, :, :t] = sm - q * (sm >= q)
        df = u + (q - v)
        df -= q * (df >= q)
        view[:, :, t:] = _np_mont(df, s, q, qi)
        t <<= 1
        m = h
    a[:] = _np_mont(a, ninv_vec[:, None], q_vec[:, None], qinv_vec[:, None])
    return a


def _np_elementwise_mont(a, b, q_vec, qinv_vec):
    return _np_mont(a, b, q_vec[:, None], qinv_vec[:, None])


def _np_base_convert(hat, punc_to, q_to, qinv_to):
    """acc[j] = sum_i hat[i] * punc_to[i, j] mod q_to[j].

    hat: (l, N) digits already multiplied by inverse punctured products;
    punc_to: (l, kt) cross-basis constants in Montgomery form.
    """
    l, n = hat.shape
    kt = q_to.shape[0]
    out = np.zeros((kt, n), dtype=np.uint64)
    for j in range(kt):
        q = q_to[j]
        qi = qinv_to[j]
        acc = np.zeros(n, dtype=np.uint64)
        for i in range(l):
            term = _np_mont(hat[i], punc_to[i, j], q, qi)
            s = acc + term
            acc = s - q * (s >= q)
        out[j] = acc
    return out


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if USE_NUMBA:

    @njit(cache=True, inline="always")
    def _mulhi(a, b):
        a_lo = a & _U32MASK
        a_hi = a >> _S32
        b_lo = b & _U32MASK
        b_hi = b >> _S32
        ll = a_lo * b_lo
        lh = a_lo * b_hi
        hl = a_hi * b_lo
        mid = (ll >> _S32) + (lh & _U32MASK) + (hl & _U32MASK)
        return a_hi * b_hi + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)

    @njit(cache=True, inline="always")
    def _mont(a, b, q, qinv):
        t_lo = a * b
        m = t_lo * qinv
        carry = _ONE if t_lo != _ZERO else _ZERO
        r = _mulhi(a, b) + _mulhi(m, q) + carry
        if r >= q:
            r -= q
        return r

    @njit(cache=True, parallel=True)
    def _nb_ntt_forward(a, psi_rev, q_vec, qinv_vec):
        k, n = a.shape
        for li in prange(k):
            q = q_vec[li]
            qinv = qinv_vec[li]
            limb = a[li]
            psi = psi_rev[li]
            t = n
            m = 1
            while m < n:
                t >>= 1
                for i in range(m):
                    s = psi[m + i]
                    j1 = 2 * i * t
                    for j in range(j1, j1 + t):
                        u = limb[j]
                        v = _mont(limb[j + t], s, q, qinv)
                        sm = u + v
                        if sm >= q:
                            sm -= q
                        df = u + (q - v)
                        if df >= q:
                            df -= q
                        limb[j] = sm
                        limb[j + t] = df
                m <<= 1
        return a

    @njit(cache=True, parallel=True)
    def _nb_ntt_inverse(a, ipsi_rev, ninv_vec, q_vec, qinv_vec):
        k, n = a.shape
        for li in prange(k):
            q = q_vec[li]
            qinv = qinv_vec[li]
            limb = a[li]
            ipsi = ipsi_rev[li]
            t = 1
            m = n
            while m > 1:
                h = m >> 1
                for i in range(h):
                    s = ipsi[h + i]
                    j1 = 2 * i * t
                    for j in range(j1, j1 + t):
                        u = limb[j]
                        v = limb[j + t]
                        sm = u + v
                        if sm >= q:
                            sm -= q
                        df = u + (q - v)
                        if df >= q:
                            df -= q
                        limb[j] = sm
                        limb[j + t] = _mont(df, s, q, qinv)
                t <<= 1
                m = h
            ninv = ninv_vec[li]
            for j in range(n):
                limb[j] = _mont(limb[j], ninv, q, qinv)
        return a

    @njit(cache=True, parallel=True)
    def _nb_elementwise_mont(a, b, q_vec, qinv_vec):
        k, n = a.shape
        out = np.empty((k, n), dtype=np.uint64)
        for li in prange(k):
            q = q_vec[li]
            qinv = qinv_vec[li]
            for j in range(n):
                out[li, j] = _mont(a[li, j], b[li, j], q, qinv)
        return out

    @njit(cache=True, parallel=True)
    def _nb_rowwise_mont(a, c_vec, q_vec, qinv_vec):
        k, n = a.shape
        out = np.empty((k, n), dtype=np.uint64)
        for li in prange(k):
            q = q_vec[li]
            qinv = qinv_vec[li]
            c = c_vec[li]
            for j in range(n):
                out[li, j] = _mont(a[li, j], c, q, qinv)
        return out

    @njit(cache=True, parallel=True)
    def _nb_addmod(a, b, q_vec):
        k, n = a.shape
        out = np.empty((k, n), dtype=np.uint64)
        for li in prange(k):
            q = q_vec[li]
            for j in range(n):
                s = a[li, j] + b[li, j]
                if s >= q:
                    s -= q
                out[li, j] = s
        return out

    @njit(cache=True, parallel=True)
    def _nb_submod(a, b, q_vec):
        k, n = a.shape
        out = np.empty((k, n), dtype=np.uint64)
        for li in prange(k):
            q = q_vec[li]
            for j in range(n):
                s = a[li, j] + (q - b[li, j])
                if s >= q:
                    s -= q
                out[li, j] = s
        return out

    @njit(cache=True, parallel=True)
    def _nb_fma_inplace(acc, a, b, q_vec, qinv_vec, r2_vec):
        """acc += a*b (natural domain) mod q, in place."""
        k, n = a.shape
        for li in prange(k):
            q = q_vec[li]
            qinv = qinv_vec[li]
            r2 = r2_vec[li]
            for j in range(n):
                v = _mont(_mont(a[li, j], b[li, j], q, qinv), r2, q, qinv)
                s = acc[li, j] + v
                if s >= q:
                    s -= q
                acc[li, j] = s
        return acc

    @njit(cache=True, parallel=True)
    def _nb_fma_gather_inplace(acc, a, key, rows, q_vec, qinv_vec, r2_vec):
        """acc[i] += a[i] * key[rows[i]] mod q_vec[i], in place."""
        k, n = a.shape
        for li in prange(k):
            q = q_vec[li]
            qinv = qinv_vec[li]
            r2 = r2_vec[li]
            krow = key[rows[li]]
            for j in range(n):
                v = _mont(_mont(a[li, j], krow[j], q, qinv), r2, q, qinv)
                s = acc[li, j] + v
                if s >= q:
                    s -= q
                acc[li, j] = s
        return acc

    @njit(cache=True, parallel=True)
    def _nb_elementwise_mulmod(a, b, q_vec, qinv_vec, r2_vec):
        k, n = a.shape
        out = np.empty((k, n), dtype=np.uint64)
        for li in prange(k):
            q = q_vec[li]
            qinv = qinv_vec[li]
            r2 = r2_vec[li]
            for j in range(n):
                out[li, j] = _mont(_mont(a[li, j], b[li, j], q, qinv), r2, q, qinv)
        return out

    @njit(cache=True, parallel=True)
    def _nb_base_convert(hat, punc_to, q_to, qinv_to):
        l, n = hat.shape
        kt = q_to.shape[0]
        out = np.zeros((kt, n), dtype=np.uint64)
        for j in prange(kt):
            q = q_to[j]
            qinv = qinv_to[j]
            row = out[j]
            for i in range(l):
                c = punc_to[i, j]
                src = hat[i]
                for x in range(n):
                    s = row[x] + _mont(src[x], c, q, qinv)
                    if s >= q:
                        s -= q
                    row[x] = s
        return out

    ntt_forward_inplace = _nb_ntt_forward
    ntt_inverse_inplace = _nb_ntt_inverse
    elementwise_mont = _nb_elementwise_mont
    elementwise_mulmod = _nb_elementwise_mulmod
    base_convert = _nb_base_convert
    rowwise_mont = _nb_rowwise_mont
    addmod_rows = _nb_addmod
    submod_rows = _nb_submod
    fma_inplace = _nb_fma_inplace
    fma_gather_inplace = _nb_fma_gather_inplace
else:  # pragma: no cover - exercised via HEBERT_NO_NUMBA
    def _np_elementwise_mulmod(a, b, q_vec, qinv_vec, r2_vec):
        ab = _np_mont(a, b, q_vec[:, None], qinv_vec[:, None])
        return _np_mont(ab, r2_vec[:, None], q_vec[:, None], qinv_vec[:, None])

    def _np_rowwise_mont(a, c_vec, q_vec, qinv_vec):
        return _np_mont(a, c_vec[:, None], q_vec[:, None], qinv_vec[:, None])

    def _np_addmod(a, b, q_vec):
        s = a + b
        return s - q_vec[:, None] * (s >= q_vec[:, None])

    def _np_submod(a, b, q_vec):
        s = a + (q_vec[:, None] - b)
        return s - q_vec[:, None] * (s >= q_vec[:, None])

    def _np_fma_inplace(acc, a, b, q_vec, qinv_vec, r2_vec):
        acc[:] = _np_addmod(acc, _np_elementwise_mulmod(a, b, q_vec, qinv_vec, r2_vec), q_vec)
        return acc

    def _np_fma_gather_inplace(acc, a, key, rows, q_vec, qinv_vec, r2_vec):
        return _np_fma_inplace(acc, a, key[rows], q_vec, qinv_vec, r2_vec)

    ntt_forward_inplace = _np_ntt_forward
    ntt_inverse_inplace = _np_ntt_inverse
    elementwise_mont = _np_elementwise_mont
    elementwise_mulmod = _np_elementwise_mulmod
    base_convert = _np_base_convert
    rowwise_mont = _np_rowwise_mont
    addmod_rows = _np_addmod
    submod_rows = _np_submod
    fma_inplace = _np_fma_inplace
    fma_gather_inplace = _np_fma_gather_inplace
