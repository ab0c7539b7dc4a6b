import math
import os

import numpy as np
import pytest

from hebert import minimax as mm
from hebert.errors import ApproximationError


class TestRemezFit:
    def test_sigmoid_deg15_reproduces_reported_error(self, sigmoid15):
        poly = mm.remez_fit("sigmoid", (-12, 12), 15)
        assert abs(poly.certified_max_error - 0.00614) <= 0.05 * 0.00614
        assert mm.equioscillation_check(poly, "sigmoid")
        assert poly.equioscillation_points.size >= 17
        # matches the checked-in artifact
        assert np.allclose(poly.cheb_coeffs, sigmoid15.cheb_coeffs, atol=1e-12)

    def test_linear_fits_itself(self):
        poly = mm.remez_fit("linear", (-3, 5), 1)
        assert poly.certified_max_error <= 1e-12

    def test_certified_equals_grid_scan(self):
        poly = mm.remez_fit("sigmoid", (-4, 4), 3)
        dense = mm.max_error_scan(poly, "sigmoid", 1_000_000)
        assert abs(poly.certified_max_error - dense) <= 1e-9 * dense

    def test_degree_must_be_positive(self):
        with pytest.raises(ApproximationError):
            mm.remez_fit("sigmoid", (-1, 1), 0)

    def test_parity_degenerate_odd_target(self):
        # odd target at odd degree needs the one-degree-up rescue
        poly = mm.remez_fit("sine2pi", (-5.5, 5.5), 47)
        assert poly.degree == 47
        assert mm.equioscillation_check(poly, "sine2pi")

    def test_deterministic(self):
        a = mm.remez_fit("sigmoid", (-6, 6), 7)
        b = mm.remez_fit("sigmoid", (-6, 6), 7)
        assert np.array_equal(a.cheb_coeffs, b.cheb_coeffs)


class TestEvalCheb:
    def test_sigmoid_values_within_bound(self, sigmoid15):
        assert abs(mm.eval_cheb(sigmoid15, 0.0) - 0.5) <= 0.0062
        true12 = 1 / (1 + math.exp(-12))
        assert abs(mm.eval_cheb(sigmoid15, 12.0) - true12) <= 0.0062

    def test_matches_monomial_basis(self):
        for degree in (5, 15, 31):
            poly = mm.remez_fit("sigmoid", (-8, 8), degree)
            mono = mm.to_monomial(poly)
            xs = np.linspace(-8, 8, 257)
            want = np.polynomial.polynomial.polyval(xs, mono)
            assert np.max(np.abs(mm.eval_cheb(poly, xs) - want)) <= 1e-10

    def test_constant_poly(self):
        poly = mm.MinimaxPoly(np.array([0.25]), (-1, 1), 0, 0.0, "const")
        xs = np.linspace(-1, 1, 11)
        assert np.all(mm.eval_cheb(poly, xs) == 0.25)

    def test_vector_equals_scalar_eval(self, sigmoid15):
        xs = np.linspace(-12, 12, 37)
        vec = mm.eval_cheb(sigmoid15, xs)
        assert all(vec[i] == mm.eval_cheb(sigmoid15, float(x)) for i, x in enumerate(xs))


class TestMaxErrorScan:
    def test_zero_for_self(self):
        poly = mm.remez_fit("linear", (-2, 2), 3)
        assert mm.max_error_scan(poly, "linear", 10000) <= 1e-12

    def test_sigmoid_bound(self, sigmoid15):
        assert mm.max_error_scan(sigmoid15, "sigmoid", 200_000) <= 0.00614 * 1.05

    def test_grid_refinement_stable(self, sigmoid15):
        coarse = mm.max_error_scan(sigmoid15, "sigmoid", 10_000)
        fine = mm.max_error_scan(sigmoid15, "sigmoid", 1_000_000)
        assert abs(coarse - fine) < 1e-6

    def test_rejects_coarse_grid(self, sigmoid15):
        with pytest.raises(ApproximationError):
            mm.max_error_scan(sigmoid15, "sigmoid", 100)


class TestOptimality:
    def test_perturbation_never_improves(self, sigmoid15):
        base = mm.max_error_scan(sigmoid15, "sigmoid", 100_000)
        for j in (0, 1, 5, 10, 15):
            for delta in (1e-4, -1e-4):
                coeffs = sigmoid15.cheb_coeffs.copy()
                coeffs[j] += delta
                poly = mm.MinimaxPoly(coeffs, sigmoid15.domain, 15, 0.0, "sigmoid")
                assert mm.max_error_scan(poly, "sigmoid", 100_000) >= base


class TestArtifact:
    def test_text_roundtrip(self, sigmoid15):
        text = mm.export_text(sigmoid15)
        back = mm.import_text(text)
        assert np.array_equal(back.cheb_coeffs, sigmoid15.cheb_coeffs)
        assert back.domain == sigmoid15.domain
        assert back.certified_max_error == sigmoid15.certified_max_error
        assert back.target_name == sigmoid15.target_name

    def test_checked_in_artifact_is_certified(self, sigmoid15):
        err = mm.max_error_scan(sigmoid15, "sigmoid", 200_000)
        assert abs(err - sigmoid15.certified_max_error) <= 1e-9
