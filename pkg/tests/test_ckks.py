import numpy as np
import pytest

from hebert import ckks
from hebert.ckks import encoding, ops
from hebert.errors import (
    CryptoError,
    MissingRotationKeyError,
    OutOfLevelsError,
    ScaleMismatchError,
)


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(12)


class TestPresets:
    def test_builtin_names(self):
        for name in ckks.PRESET_NAMES:
            params = ckks.get_preset(name)
            assert params.slot_count == params.ring_degree // 2
            assert params.max_level + 1 == len(params.ring.moduli_chain)

    def test_preset_dir_override(self, desk, tmp_path, monkeypatch):
        custom = desk.to_config_text().replace("security insecure-test-only",
                                               "security custom-flavor")
        (tmp_path / "desk.preset").write_text(custom)
        monkeypatch.setenv("HEBERT_PRESET_DIR", str(tmp_path))
        loaded = ckks.get_preset("desk")
        assert loaded.security_preset_name == "custom-flavor"
        assert loaded.ring.moduli_chain == desk.ring.moduli_chain

    def test_config_text_roundtrip(self, desk):
        back = ckks.CkksParams.from_config_text(desk.to_config_text())
        assert back == desk
        assert back.params_hash() == desk.params_hash()

    def test_unknown_preset(self):
        from hebert.errors import CryptoError

        with pytest.raises(CryptoError, match="unknown preset"):
            ckks.get_preset("made-up")


class TestEncodeDecode:
    def test_zeros(self, desk):
        pt = ckks.encode(desk, np.zeros(desk.slot_count), desk.max_level)
        assert np.max(np.abs(ckks.decode_real(pt))) < 1e-9

    def test_one_hot(self, desk):
        v = np.zeros(desk.slot_count)
        v[0] = 1.0
        pt = ckks.encode(desk, v, desk.max_level)
        assert np.max(np.abs(ckks.decode_real(pt) - v)) < 1e-4

    def test_768_dim_padding(self, desk, rng):
        v = rng.uniform(-1, 1, 768)
        pt = ckks.encode(desk, v, 3)
        out = ckks.decode_real(pt)
        assert np.max(np.abs(out[:768] - v)) < 1e-4
        assert np.max(np.abs(out[768:])) < 1e-4

    def test_scale_too_large_rejected(self, desk, rng):
        with pytest.raises(CryptoError):
            ckks.encode(desk, rng.uniform(-1, 1, 16), 0, scale=2.0**80)

    def test_error_scales_inversely_with_delta(self, desk, rng):
        errs = []
        for scale in (2.0**30, 2.0**31):
            tot = 0.0
            for seed in range(5):
                v = np.random.default_rng(seed).uniform(-1, 1, desk.slot_count)
                pt = ckks.encode(desk, v, 2, scale=scale)
                tot += float(np.mean(np.abs(ckks.decode_real(pt) - v)))
            errs.append(tot)
        ratio = errs[0] / errs[1]
        assert 0.5 < ratio / 2.0 < 2.0  # doubling the scale halves error, within 4x


class TestEncryptDecrypt:
    def test_roundtrip_fresh_keys(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys, rng_seed=1)
        assert np.max(np.abs(ckks.decrypt_vector(ct, desk_keys) - v)) < 1e-4

    def test_keygen_deterministic(self, desk):
        a = ckks.keygen(desk, rotation_steps=[1], rng_seed=5, include_conjugation=False)
        b = ckks.keygen(desk, rotation_steps=[1], rng_seed=5, include_conjugation=False)
        assert np.array_equal(a.secret_ext, b.secret_ext)
        assert np.array_equal(a.public_key[0].limbs, b.public_key[0].limbs)
        assert np.array_equal(a.relin_key.digits_b[0], b.relin_key.digits_b[0])

    def test_requested_rotation_keys_present(self, desk_keys):
        assert 1 in desk_keys.rotation_keys

    def test_encrypt_at_level_three(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, 768)
        ct = ckks.encrypt(ckks.encode(desk, v, 3), desk_keys)
        assert ct.level == 3
        assert np.max(np.abs(ckks.decrypt_vector(ct, desk_keys, 768) - v)) < 1e-4

    def test_encrypt_at_level_zero_decryptable(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, 64)
        ct = ckks.encrypt(ckks.encode(desk, v, 0), desk_keys)
        assert ct.level == 0
        assert np.max(np.abs(ckks.decrypt_vector(ct, desk_keys, 64) - v)) < 1e-4
        with pytest.raises(OutOfLevelsError):
            ckks.mult(ct, ct, desk_keys)

    def test_low_level_warning(self, desk, desk_keys, rng, caplog):
        import logging

        with caplog.at_level(logging.WARNING):
            ckks.encrypt(ckks.encode(desk, [0.5], 1), desk_keys, min_circuit_level=5)
        assert any("refresh" in r.message for r in caplog.records)


class TestArithmetic:
    def test_add_identity(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys)
        zero = ckks.encrypt_vector(desk, np.zeros(desk.slot_count), desk_keys)
        assert np.max(np.abs(ckks.decrypt_vector(ckks.add(ct, zero), desk_keys) - v)) < 1e-3

    def test_add_and_mult_against_plaintext(self, desk, desk_keys, rng):
        for _ in range(20):
            u = rng.uniform(-1, 1, desk.slot_count)
            v = rng.uniform(-1, 1, desk.slot_count)
            cu = ckks.encrypt_vector(desk, u, desk_keys)
            cv = ckks.encrypt_vector(desk, v, desk_keys)
            assert np.max(np.abs(ckks.decrypt_vector(ckks.add(cu, cv), desk_keys) - (u + v))) < 1e-3
            prod = ckks.mult(cu, cv, desk_keys)
            assert np.max(np.abs(ckks.decrypt_vector(prod, desk_keys) - u * v)) < 1e-2
            assert prod.level == cu.level - 1

    def test_add_after_mod_down(self, desk, desk_keys, rng):
        u = rng.uniform(-1, 1, desk.slot_count)
        v = rng.uniform(-1, 1, desk.slot_count)
        cu = ckks.mod_down(ckks.encrypt_vector(desk, u, desk_keys), 4)
        cv = ckks.encrypt_vector(desk, v, desk_keys)
        out = ckks.add(cu, cv)
        assert out.level == 4
        assert np.max(np.abs(ckks.decrypt_vector(out, desk_keys) - (u + v))) < 1e-3

    def test_mult_identity_level_rule(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys)
        out = ckks.mult_plain(ct, np.ones(desk.slot_count))
        assert out.level == ct.level - 1
        assert np.max(np.abs(ckks.decrypt_vector(out, desk_keys) - v)) < 1e-3

    def test_squaring_chain(self, desk, desk_keys):
        ct = ckks.encrypt_vector(desk, np.full(desk.slot_count, 0.9), desk_keys)
        for _ in range(desk.max_level - 1):
            ct = ckks.square(ct, desk_keys)
        want = 0.9 ** (2 ** (desk.max_level - 1))
        got = ckks.decrypt_vector(ct, desk_keys)
        assert np.max(np.abs(got - want)) < 1e-2

    def test_scale_mismatch_rejected(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, 16)
        a = ckks.encrypt(ckks.encode(desk, v, 2, scale=2.0**40), desk_keys)
        b = ckks.encrypt(ckks.encode(desk, v, 2, scale=2.0**41), desk_keys)
        with pytest.raises(ScaleMismatchError):
            ckks.add(a, b)

    def test_mult_at_level_zero_names_bootstrap(self, desk, desk_keys, rng):
        ct = ckks.mod_down(
            ckks.encrypt_vector(desk, rng.uniform(-1, 1, 8), desk_keys), 0
        )
        with pytest.raises(OutOfLevelsError, match="bootstrap"):
            ckks.mult(ct, ct, desk_keys)


class TestRotate:
    def test_step_zero_identity(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys)
        assert np.array_equal(ckks.rotate(ct, 0, desk_keys).c0.limbs, ct.c0.limbs)

    def test_inverse_rotations(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys)
        back = ckks.rotate(ckks.rotate(ct, 1, desk_keys), -1, desk_keys)
        assert np.max(np.abs(ckks.decrypt_vector(back, desk_keys) - v)) < 1e-3

    def test_step_five_decomposes(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys)
        got = ckks.decrypt_vector(ckks.rotate(ct, 5, desk_keys), desk_keys)
        assert np.max(np.abs(got - np.roll(v, -5))) < 1e-3

    def test_missing_key_error(self, desk, rng):
        limited = ckks.keygen(desk, rotation_steps=[], rng_seed=1, include_conjugation=False)
        v = rng.uniform(-1, 1, 16)
        ct = ckks.encrypt_vector(desk, v, limited)
        with pytest.raises(MissingRotationKeyError):
            ckks.rotate(ct, 3, limited)

    def test_conjugate_real_identity(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys)
        got = ckks.decrypt_vector(ckks.conjugate(ct, desk_keys), desk_keys)
        assert np.max(np.abs(got - v)) < 1e-3


class TestRescaleModDown:
    def test_mod_down_same_level_identity(self, desk, desk_keys, rng):
        ct = ckks.encrypt_vector(desk, rng.uniform(-1, 1, 16), desk_keys)
        assert ckks.mod_down(ct, ct.level) is ct

    def test_mod_down_preserves_message(self, desk, desk_keys, rng):
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys)
        before = ckks.decrypt_vector(ct, desk_keys)
        after = ckks.decrypt_vector(ckks.mod_down(ct, 2), desk_keys)
        assert np.max(np.abs(before - after)) < 1e-4

    def test_rescale_restores_scale(self, desk, desk_keys, rng):
        u = rng.uniform(-1, 1, desk.slot_count)
        v = rng.uniform(-1, 1, desk.slot_count)
        prod = ckks.mult(
            ckks.encrypt_vector(desk, u, desk_keys),
            ckks.encrypt_vector(desk, v, desk_keys),
            desk_keys,
        )
        assert abs(prod.scale - desk.default_scale) <= 2**-10 * desk.default_scale

    def test_rescale_at_level_zero_errors(self, desk, desk_keys, rng):
        ct = ckks.mod_down(ckks.encrypt_vector(desk, rng.uniform(-1, 1, 8), desk_keys), 0)
        with pytest.raises(OutOfLevelsError):
            ckks.rescale(ct)

    def test_level_accounting(self, desk, desk_keys, rng):
        u = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, u, desk_keys)
        lvl = ct.level
        ct2 = ckks.mult(ct, ct, desk_keys)
        assert ct2.level == lvl - 1
        ct3 = ckks.add(ct2, ct2)
        assert ct3.level == ct2.level


class TestPolyEval:
    def test_identity_poly(self, desk, desk_keys, rng):
        from hebert import minimax as mm

        lin = mm.remez_fit("linear", (-1, 1), 1)
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys)
        got = ckks.decrypt_vector(ckks.eval_poly_bsgs(ct, lin, desk_keys), desk_keys)
        assert np.max(np.abs(got - v)) < 1e-3

    def test_sigmoid_points(self, desk, desk_keys, sigmoid15):
        from hebert import minimax as mm

        pts = np.array([-12.0, -6.0, 0.0, 6.0, 12.0])
        ct = ckks.encrypt_vector(desk, pts, desk_keys)
        out = ckks.eval_poly_bsgs(ct, sigmoid15, desk_keys)
        got = ckks.decrypt_vector(out, desk_keys, 5)
        want = mm.eval_cheb(sigmoid15, pts)
        assert np.max(np.abs(got - want)) < 1e-2
        assert abs(got[2] - 0.5) < 1e-2
        assert ct.level - out.level == ckks.bsgs_depth(15)

    def test_out_of_domain_is_unguaranteed_but_returns(self, desk, desk_keys, sigmoid15):
        ct = ckks.encrypt_vector(desk, np.array([20.0]), desk_keys)
        out = ckks.eval_poly_bsgs(ct, sigmoid15, desk_keys)
        val = ckks.decrypt_vector(out, desk_keys, 1)
        assert np.isfinite(val).all()  # value itself may deviate arbitrarily

    def test_insufficient_level_errors(self, desk, desk_keys, sigmoid15, rng):
        ct = ckks.mod_down(
            ckks.encrypt_vector(desk, rng.uniform(-1, 1, 8), desk_keys), 2
        )
        with pytest.raises(OutOfLevelsError):
            ckks.eval_poly_bsgs(ct, sigmoid15, desk_keys)

    def test_prescaled_saves_affine_level(self, desk, desk_keys, sigmoid15, rng):
        v = rng.uniform(-1, 1, desk.slot_count)
        ct = ckks.encrypt_vector(desk, v, desk_keys)
        out = ckks.eval_poly_bsgs(ct, sigmoid15, desk_keys, input_prescaled=True)
        assert ct.level - out.level == ckks.bsgs_depth(15, prescaled=True)
