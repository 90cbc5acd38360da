#!/usr/bin/env python3
"""
Unit tests for specfun.py
Tests scalar kernels, series control and both Meijer G backends.
"""

import math
import threading
import unittest
from pathlib import Path
from unittest.mock import patch

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from scipy import special

from specfun import (
    BackendMismatchError,
    ConvergenceTracker,
    DegenerateParametersError,
    DomainError,
    MeijerGParams,
    SeriesControl,
    SeriesResult,
    SeriesTruncationError,
    UnsupportedParameterError,
    adaptive_precision,
    digits_for_cancellation,
    exp_integral_ei,
    gauss_2f1,
    kummer_1f1,
    ln_gamma,
    lower_incomplete_gamma,
    meijer_g,
    meijer_g_contour,
    meijer_g_series,
    meijer_g_value,
    mp_context,
    pochhammer,
    separate_poles,
    upper_incomplete_gamma,
)

# G^{1,0}_{0,1}(z | -; 0) = exp(-z)
EXP_PARAMS = MeijerGParams(1, 0, 0, 1, (), (), (0.0,), ())

# Gamma-Gamma PDF kernel for strong turbulence: the alpha and beta residue
# families cancel by tens of orders at large arguments
STRONG_PDF_PARAMS = MeijerGParams(3, 0, 1, 3, (), (1.309,), (0.309, 34.7, 32.5), ())
STRONG_UPSILON = 0.309 * 34.7 * 32.5 / 1.309


def mp_meijer(params: MeijerGParams, z: float) -> float:
    """Independent extended-precision value from mpmath."""
    ctx = mp_context()
    with ctx.workdps(40):
        return float(ctx.meijerg([list(params.a_top), list(params.a_bottom)],
                                 [list(params.b_top), list(params.b_bottom)], z))


class TestScalarKernels(unittest.TestCase):
    """Tests for the scalar special functions."""

    def test_lower_incomplete_gamma(self):
        """Test gamma(2, 1) = 1 - 2/e."""
        self.assertAlmostEqual(lower_incomplete_gamma(2.0, 1.0), 1.0 - 2.0 / math.e, places=12)

    def test_lower_incomplete_gamma_at_zero(self):
        """Test that the lower incomplete gamma vanishes at x = 0."""
        self.assertEqual(lower_incomplete_gamma(3.0, 0.0), 0.0)

    def test_upper_incomplete_gamma_order_zero(self):
        """Test Gamma(0, 1) = E1(1)."""
        self.assertAlmostEqual(upper_incomplete_gamma(0.0, 1.0), 0.21938393439552, places=11)

    def test_incomplete_gammas_sum(self):
        """Test that lower and upper incomplete gammas add up to Gamma(a)."""
        a, x = 3.5, 2.25
        total = lower_incomplete_gamma(a, x) + upper_incomplete_gamma(a, x)
        self.assertAlmostEqual(total / math.gamma(a), 1.0, places=12)

    def test_lower_incomplete_gamma_rejects_bad_order(self):
        """Test that a non-positive order is a domain error."""
        with self.assertRaises(DomainError):
            lower_incomplete_gamma(0.0, 1.0)

    def test_pochhammer(self):
        """Test (3)_4 = 3 * 4 * 5 * 6."""
        self.assertAlmostEqual(pochhammer(3.0, 4), 360.0, places=9)

    def test_ln_gamma(self):
        """Test ln Gamma(5) = ln 24 and rejection of x <= 0."""
        self.assertAlmostEqual(ln_gamma(5.0), math.log(24.0), places=12)
        with self.assertRaises(DomainError):
            ln_gamma(0.0)

    def test_kummer_closed_form(self):
        """Test 1F1(2; 1; z) = e^z (1 + z)."""
        for z in (0.5, 2.0, 7.0):
            expected = math.exp(z) * (1.0 + z)
            self.assertAlmostEqual(kummer_1f1(2, 1, z) / expected, 1.0, places=10)

    def test_kummer_requires_integers(self):
        """Test that non-integer parameters are rejected."""
        with self.assertRaises((UnsupportedParameterError, DomainError)):
            kummer_1f1(1.5, 2, 1.0)

    def test_gauss_2f1(self):
        """Test 2F1(1, 1; 2; 1/2) = 2 ln 2 and the z = 1 closed form."""
        self.assertAlmostEqual(gauss_2f1(1.0, 1.0, 2.0, 0.5), 2.0 * math.log(2.0), places=12)
        self.assertAlmostEqual(gauss_2f1(1.0, 1.0, 3.0, 1.0), 2.0, places=12)

    def test_exp_integral_ei(self):
        """Test Ei(1) and the singular point."""
        self.assertAlmostEqual(exp_integral_ei(1.0), 1.89511781635594, places=11)
        with self.assertRaises(DomainError):
            exp_integral_ei(0.0)


class TestSeriesControl(unittest.TestCase):
    """Tests for the truncation policy and precision helpers."""

    def test_rejects_non_positive_tolerance(self):
        """Test that rel_tol must be positive."""
        with self.assertRaises(DomainError):
            SeriesControl(rel_tol=0.0)

    def test_tracker_stops_after_three_small_terms(self):
        """Test the three-consecutive-terms stopping rule."""
        tracker = ConvergenceTracker(SeriesControl(rel_tol=1e-6))
        self.assertFalse(tracker.update(1.0, 1.0))
        self.assertFalse(tracker.update(1e-8, 1.0))
        self.assertFalse(tracker.update(1e-9, 1.0))
        self.assertTrue(tracker.update(1e-10, 1.0))

    def test_tracker_resets_on_large_term(self):
        """Test that a large term restarts the count."""
        tracker = ConvergenceTracker(SeriesControl(rel_tol=1e-6))
        tracker.update(1e-8, 1.0)
        tracker.update(1e-9, 1.0)
        self.assertFalse(tracker.update(0.5, 1.0))
        self.assertFalse(tracker.update(1e-10, 1.0))

    def test_tracker_exhausted(self):
        """Test that the term ceiling is reported."""
        tracker = ConvergenceTracker(SeriesControl(max_terms=2))
        tracker.update(1.0, 1.0)
        self.assertFalse(tracker.exhausted)
        tracker.update(1.0, 2.0)
        self.assertTrue(tracker.exhausted)

    def test_digits_for_cancellation(self):
        """Test the digit budget for a given cancellation ratio."""
        self.assertEqual(digits_for_cancellation(1e6, 1e-10), 26)
        self.assertEqual(digits_for_cancellation(0.5, 1e-10), 20)

    def test_adaptive_precision_retries(self):
        """Test that a cancelling sum is recomputed with more digits."""
        def evaluate(ctx):
            big = ctx.mpf(10) ** 20
            return (big + 1) - big, big

        value, digits = adaptive_precision(evaluate, 1e-10)
        self.assertEqual(value, 1.0)
        self.assertEqual(digits, 40)

    def test_mp_context_is_per_thread(self):
        """Test that each thread gets its own mpmath context."""
        seen = []
        worker = threading.Thread(target=lambda: seen.append(mp_context()))
        worker.start()
        worker.join()
        self.assertIs(mp_context(), mp_context())
        self.assertIsNot(seen[0], mp_context())


class TestMeijerG(unittest.TestCase):
    """Tests for the Meijer G backends."""

    def test_exponential_identity(self):
        """Test G^{1,0}_{0,1}(z | 0) = exp(-z) through the cross-checked entry point."""
        for z in (0.1, 0.5, 2.0):
            self.assertAlmostEqual(meijer_g(EXP_PARAMS, z) / math.exp(-z), 1.0, places=9)

    def test_bessel_k_identity(self):
        """Test G^{2,0}_{0,2}(z | a, b) = 2 z^((a+b)/2) K_{a-b}(2 sqrt z)."""
        a, b = 0.3, 0.0
        params = MeijerGParams(2, 0, 0, 2, (), (), (a, b), ())
        for z in (0.2, 1.0, 4.0):
            expected = 2.0 * z ** ((a + b) / 2.0) * special.kv(a - b, 2.0 * math.sqrt(z))
            self.assertAlmostEqual(meijer_g_series(params, z).value / expected, 1.0, places=8)

    def test_contour_matches_series(self):
        """Test that the contour backend agrees with the residue series."""
        params = MeijerGParams(2, 0, 0, 2, (), (), (0.3, 0.0), ())
        series = meijer_g_series(params, 1.5).value
        contour, error = meijer_g_contour(params, 1.5)
        self.assertAlmostEqual(contour / series, 1.0, places=8)
        self.assertLess(error, 1e-8)

    def test_from_rows(self):
        """Test splitting full parameter rows."""
        params = MeijerGParams.from_rows(3, 1, [1.0, 2.0], [0.5, 1.5, 2.5, 0.0])
        self.assertEqual((params.p, params.q), (2, 4))
        self.assertEqual(params.a_top, (1.0,))
        self.assertEqual(params.a_bottom, (2.0,))
        self.assertEqual(params.b_top, (0.5, 1.5, 2.5))
        self.assertEqual(params.b_bottom, (0.0,))
        self.assertEqual(params.delta, 1.0)

    def test_mismatched_orders_rejected(self):
        """Test that parameter lists must match the declared orders."""
        with self.assertRaises(DomainError):
            MeijerGParams(1, 0, 0, 1, (), (), (0.0, 1.0), ())

    def test_non_positive_argument(self):
        """Test that z <= 0 is a domain error for both backends."""
        with self.assertRaises(DomainError):
            meijer_g_series(EXP_PARAMS, 0.0)
        with self.assertRaises(DomainError):
            meijer_g_contour(EXP_PARAMS, -1.0)

    def test_residue_backend_requires_p_below_q(self):
        """Test that p >= q is not supported by the residue series."""
        params = MeijerGParams(1, 1, 1, 1, (0.5,), (), (0.0,), ())
        with self.assertRaises(UnsupportedParameterError):
            meijer_g_series(params, 0.5)

    def test_truncation_raises(self):
        """Test that a series cut off by max_terms reports its partial sum."""
        with self.assertRaises(SeriesTruncationError) as ctx:
            meijer_g_series(EXP_PARAMS, 50.0, SeriesControl(max_terms=3))
        self.assertEqual(ctx.exception.terms, 3)

    def test_value_falls_back_to_contour(self):
        """Test that a truncated series is replaced by the contour integral."""
        result = meijer_g_value(EXP_PARAMS, 3.0, SeriesControl(max_terms=5))
        self.assertAlmostEqual(result.value, math.exp(-3.0), delta=1e-9)
        self.assertFalse(result.truncated)


class TestMeijerGCancellation(unittest.TestCase):
    """Tests for arguments where double-precision residue sums are meaningless."""

    def test_series_matches_mpmath(self):
        """Test the residue backend at 1, 3 and 10 times the mean argument."""
        for ratio in (1.0, 3.0, 10.0):
            z = STRONG_UPSILON * ratio
            expected = mp_meijer(STRONG_PDF_PARAMS, z)
            result = meijer_g_series(STRONG_PDF_PARAMS, z)
            self.assertTrue(math.isfinite(result.value))
            self.assertLess(abs(result.value / expected - 1.0), 1e-8, f"ratio={ratio}")

    def test_extended_precision_rechecks_its_digits(self):
        """Test that an underestimated cancellation is caught by the extended sum itself."""
        z = STRONG_UPSILON * 10.0
        optimistic = (SeriesResult(1.0, 10), 1e8)
        with patch("specfun._residue_float", return_value=optimistic):
            result = meijer_g_series(STRONG_PDF_PARAMS, z)
        self.assertGreater(result.digits, 30)
        self.assertLess(abs(result.value / mp_meijer(STRONG_PDF_PARAMS, z) - 1.0), 1e-8)

    def test_far_tail_uses_contour(self):
        """Test that a series out of terms at 100 times the mean argument is replaced."""
        z = STRONG_UPSILON * 100.0
        with self.assertRaises(SeriesTruncationError):
            meijer_g_series(STRONG_PDF_PARAMS, z)
        result = meijer_g_value(STRONG_PDF_PARAMS, z)
        self.assertLess(abs(result.value / mp_meijer(STRONG_PDF_PARAMS, z) - 1.0), 1e-8)

    def test_contour_matches_mpmath(self):
        """Test the contour backend where the residue terms cancel."""
        z = STRONG_UPSILON * 10.0
        expected = mp_meijer(STRONG_PDF_PARAMS, z)
        value, error = meijer_g_contour(STRONG_PDF_PARAMS, z)
        self.assertLess(abs(value / expected - 1.0), 1e-8)
        self.assertLess(error, 1e-8 * abs(expected))

    def test_digit_ceiling_falls_back_to_contour(self):
        """Test that a sum needing too many digits is handed to the contour."""
        z = STRONG_UPSILON * 10.0
        with patch("specfun.MAX_SERIES_DIGITS", 30):
            with self.assertRaises(SeriesTruncationError):
                meijer_g_series(STRONG_PDF_PARAMS, z)
            result = meijer_g_value(STRONG_PDF_PARAMS, z)
        self.assertLess(abs(result.value / mp_meijer(STRONG_PDF_PARAMS, z) - 1.0), 1e-8)

    def test_uncertain_contour_is_a_mismatch(self):
        """Test that a contour error estimate above the tolerance is not accepted."""
        with patch("specfun.meijer_g_contour", return_value=(math.exp(-0.5), 1e-3)):
            with self.assertRaises(BackendMismatchError):
                meijer_g(EXP_PARAMS, 0.5)


class TestSeparatePoles(unittest.TestCase):
    """Tests for pole collision handling."""

    def test_distinct_values_unchanged(self):
        """Test that well separated parameters pass through."""
        self.assertEqual(separate_poles((0.3, 1.1, 2.45)), (0.3, 1.1, 2.45))

    def test_integer_difference_is_shifted(self):
        """Test that the later member of a colliding pair is nudged."""
        with self.assertLogs("satsec.specfun", level="WARNING"):
            shifted = separate_poles((1.0, 2.0))
        self.assertEqual(shifted[0], 1.0)
        self.assertAlmostEqual(shifted[1], 2.0 + 1e-5, places=12)

    def test_budget_exhausted(self):
        """Test that persistent collisions raise."""
        with self.assertLogs("satsec.specfun", level="WARNING"):
            with self.assertRaises(DegenerateParametersError):
                separate_poles((0.0, 1.0), shift=1.0, budget=2)


if __name__ == "__main__":
    unittest.main()
