import numpy as np
import pytest

from hebert import _kernels, ring
from hebert.errors import CryptoError, FormMismatchError, LevelMismatchError


def small_params(n=16, bits=None, count=1):
    if bits is None:
        return ring.RingParams(f"t{n}", n, (97,) if n == 16 else tuple(ring.generate_ntt_primes(30, count, n)))
    return ring.RingParams(f"t{n}", n, tuple(ring.generate_ntt_primes(bits, count, n)))


def negacyclic_oracle(x, y, q, n):
    """Schoolbook negacyclic convolution over Python ints."""
    out = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            v = x[i] * y[j]
            if k >= n:
                out[k - n] -= v
            else:
                out[k] += v
    return [v % q for v in out]


class TestNtt:
    def test_roundtrip_exact_small(self):
        p = small_params()
        rng = np.random.default_rng(0)
        a = ring.sample_poly(p, "uniform", 0, rng)
        back = ring.ntt_transform(ring.ntt_transform(a, "forward"), "inverse")
        assert np.array_equal(a.limbs, back.limbs)

    def test_roundtrip_exact_desk_scale(self):
        primes = tuple(ring.generate_ntt_primes(60, 1, 8192) + ring.generate_ntt_primes(40, 2, 8192))
        p = ring.RingParams("rt", 8192, primes)
        rng = np.random.default_rng(1)
        a = ring.sample_poly(p, "uniform", 2, rng)
        back = ring.ntt_transform(ring.ntt_transform(a, "forward"), "inverse")
        assert np.array_equal(a.limbs, back.limbs)

    def test_zero_poly_stays_zero(self):
        p = small_params()
        z = ring.zero_poly(p, 0, form=ring.COEFF)
        f = ring.ntt_transform(z, "forward")
        assert f.form == ring.EVAL
        assert not f.limbs.any()

    def test_constant_fills_every_slot(self):
        p = small_params()
        c = ring.poly_from_signed(p, [5] + [0] * 15, 0)
        ev = ring.to_eval(c)
        assert set(ev.limbs[0].tolist()) == {5}

    def test_form_mismatch_errors(self):
        p = small_params()
        rng = np.random.default_rng(0)
        a = ring.sample_poly(p, "uniform", 0, rng)  # coeff form
        with pytest.raises(FormMismatchError):
            ring.ntt_transform(a, "inverse")
        ev = ring.to_eval(a)
        with pytest.raises(FormMismatchError):
            ring.ntt_transform(ev, "forward")


class TestPolyMul:
    @pytest.mark.parametrize("n", [16, 64])
    def test_matches_schoolbook_oracle(self, n):
        p = ring.RingParams(f"o{n}", n, tuple(ring.generate_ntt_primes(40, 3, n)))
        rng = np.random.default_rng(2)
        x = ring.sample_poly(p, "uniform", 2, rng)
        y = ring.sample_poly(p, "uniform", 2, rng)
        prod = ring.to_coeff(ring.poly_mul(ring.to_eval(x), ring.to_eval(y)))
        for i, q in enumerate(p.moduli_chain):
            want = negacyclic_oracle(x.limbs[i].tolist(), y.limbs[i].tolist(), q, n)
            assert prod.limbs[i].tolist() == want

    def test_multiplicative_identity(self):
        p = small_params()
        rng = np.random.default_rng(3)
        a = ring.to_eval(ring.sample_poly(p, "uniform", 0, rng))
        one = ring.to_eval(ring.poly_from_signed(p, [1] + [0] * 15, 0))
        assert np.array_equal(ring.poly_mul(a, one).limbs, a.limbs)

    def test_negacyclic_wraparound(self):
        # X^(N/2) * X^(N/2) = X^N = -1
        p = small_params()
        n = p.ring_degree
        half = ring.to_eval(
            ring.poly_from_signed(p, [0] * (n // 2) + [1] + [0] * (n // 2 - 1), 0)
        )
        prod = ring.to_coeff(ring.poly_mul(half, half))
        want = [97 - 1] + [0] * (n - 1)
        assert prod.limbs[0].tolist() == want

    def test_level_mismatch_rejected(self):
        p = ring.RingParams("lm", 16, tuple(ring.generate_ntt_primes(30, 2, 16)))
        rng = np.random.default_rng(4)
        a = ring.to_eval(ring.sample_poly(p, "uniform", 1, rng))
        b = ring.to_eval(ring.sample_poly(p, "uniform", 0, rng))
        with pytest.raises(LevelMismatchError):
            ring.poly_mul(a, b)

    def test_commutative_and_associative(self):
        p = small_params()
        rng = np.random.default_rng(5)
        xs = [ring.to_eval(ring.sample_poly(p, "uniform", 0, rng)) for _ in range(3)]
        a, b, c = xs
        assert np.array_equal(ring.poly_mul(a, b).limbs, ring.poly_mul(b, a).limbs)
        assert np.array_equal(
            ring.poly_mul(ring.poly_mul(a, b), c).limbs,
            ring.poly_mul(a, ring.poly_mul(b, c)).limbs,
        )
        assert np.array_equal(ring.poly_add(a, b).limbs, ring.poly_add(b, a).limbs)


class TestSampling:
    def test_ternary_zero_density(self):
        p = ring.RingParams("s13", 1 << 13, tuple(ring.generate_ntt_primes(40, 1, 1 << 13)))
        rng = np.random.default_rng(6)
        s = ring.sample_poly(p, "ternary", 0, rng)
        vals = s.limbs[0]
        q = p.moduli_chain[0]
        zeros = np.sum(vals == 0) / vals.size
        assert abs(zeros - 1 / 3) < 0.05 * (1 / 3)
        assert set(np.unique(vals)) <= {0, 1, q - 1}

    def test_gaussian_moments(self):
        p = ring.RingParams("g13", 1 << 13, tuple(ring.generate_ntt_primes(40, 1, 1 << 13)))
        rng = np.random.default_rng(7)
        s = ring.sample_poly(p, "discrete_gaussian", 0, rng, sigma=3.2)
        q = p.moduli_chain[0]
        vals = s.limbs[0].astype(np.int64)
        vals = np.where(vals > q // 2, vals - q, vals)
        assert abs(vals.std() - 3.2) < 0.1 * 3.2
        assert abs(vals.mean()) < 0.5

    def test_seed_determinism(self):
        p = small_params()
        a = ring.sample_poly(p, "ternary", 0, np.random.default_rng(np.random.PCG64(9)))
        b = ring.sample_poly(p, "ternary", 0, np.random.default_rng(np.random.PCG64(9)))
        assert np.array_equal(a.limbs, b.limbs)

    def test_hamming_weight(self):
        p = ring.RingParams("h13", 1 << 13, tuple(ring.generate_ntt_primes(40, 1, 1 << 13)))
        rng = np.random.default_rng(8)
        s = ring.sample_poly(p, "ternary", 0, rng, hamming_weight=64)
        assert int(np.sum(s.limbs[0] != 0)) == 64

    def test_gaussian_needs_positive_sigma(self):
        p = small_params()
        with pytest.raises(CryptoError):
            ring.sample_poly(p, "discrete_gaussian", 0, np.random.default_rng(0), sigma=0)


class TestAutomorphism:
    def test_monomial_power_map(self):
        p = small_params()
        x1 = ring.poly_from_signed(p, [0, 1] + [0] * 14, 0)
        a3 = ring.poly_automorphism(x1, 3)
        want = [0] * 16
        want[3] = 1
        assert a3.limbs[0].tolist() == want

    def test_eval_form_matches_coeff_form(self):
        p = ring.RingParams("ae", 64, tuple(ring.generate_ntt_primes(40, 2, 64)))
        rng = np.random.default_rng(10)
        a = ring.sample_poly(p, "uniform", 1, rng)
        for g in (3, 5, 127):
            via_coeff = ring.to_eval(ring.poly_automorphism(a, g))
            via_eval = ring.poly_automorphism_eval(ring.to_eval(a), g)
            assert np.array_equal(via_coeff.limbs, via_eval.limbs)


class TestKernelsAgainstNumpy:
    def test_kernels_match_reference(self):
        rng = np.random.default_rng(11)
        primes = ring.generate_ntt_primes(61, 2, 64)
        q = np.array(primes, dtype=np.uint64)
        qinv = np.array(
            [(-pow(int(p), -1, 1 << 64)) % (1 << 64) for p in primes], dtype=np.uint64
        )
        r2 = np.array([(1 << 128) % int(p) for p in primes], dtype=np.uint64)
        a = np.stack([rng.integers(0, p, 64, dtype=np.uint64) for p in primes])
        b = np.stack([rng.integers(0, p, 64, dtype=np.uint64) for p in primes])
        # include edge values
        a[:, 0] = 0
        b[:, 1] = 0
        a[:, 2] = q - 1
        b[:, 2] = q - 1
        got = _kernels.elementwise_mulmod(a, b, q, qinv, r2)
        want = (a.astype(object) * b.astype(object)) % q.astype(object)[:, None]
        assert got.astype(object).tolist() == want.tolist()
        assert np.array_equal(
            _kernels.addmod_rows(a, b, q),
            ((a.astype(object) + b) % q[:, None].astype(object)).astype(np.uint64),
        )
        assert np.array_equal(
            _kernels.submod_rows(a, b, q),
            ((a.astype(object) - b) % q[:, None].astype(object)).astype(np.uint64),
        )


class TestConcurrency:
    def test_parallel_ops_match_sequential(self):
        from concurrent.futures import ThreadPoolExecutor

        primes = tuple(ring.generate_ntt_primes(40, 3, 1024))
        p = ring.RingParams("cc", 1024, primes)
        rng = np.random.default_rng(13)
        polys = [ring.to_eval(ring.sample_poly(p, "uniform", 2, rng)) for _ in range(6)]
        pairs = [(polys[i], polys[(i + 1) % 6]) for i in range(6)]
        seq = [ring.poly_mul(a, b) for a, b in pairs]
        with ThreadPoolExecutor(max_workers=4) as pool:
            par = list(pool.map(lambda ab: ring.poly_mul(*ab), pairs))
        for s, q in zip(seq, par):
            assert np.array_equal(s.limbs, q.limbs)


class TestParams:
    def test_config_text_roundtrip(self):
        p = ring.RingParams("cfg", 32, tuple(ring.generate_ntt_primes(30, 2, 32)),
                            tuple(ring.generate_ntt_primes(31, 1, 32)))
        back = ring.RingParams.from_config_text(p.to_config_text())
        assert back == p

    def test_invariants_enforced(self):
        with pytest.raises(CryptoError):
            ring.RingParams("bad", 24, (97,))  # not a power of two
        with pytest.raises(CryptoError):
            ring.RingParams("bad", 16, (91,))  # not prime
        with pytest.raises(CryptoError):
            ring.RingParams("bad", 16, (17,))  # not 1 mod 2N
        with pytest.raises(CryptoError):
            ring.RingParams("bad", 16, (97, 97))  # duplicate

    def test_generated_primes_are_ntt_friendly(self):
        primes = ring.generate_ntt_primes(40, 4, 1 << 13)
        assert len(set(primes)) == 4
        for q in primes:
            assert q % (1 << 14) == 1
            assert q.bit_length() == 40
            assert q < 1 << 62
