#!/usr/bin/env python3
"""
Unit tests for validation.py
Tests individual checks and the report behind ``satsec validate``.
"""

import unittest
from pathlib import Path
from unittest.mock import patch

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from specfun import DEFAULT_CONTROL, DegenerateParametersError
from validation import (
    CheckResult,
    ValidationReport,
    check_cdf_bounds,
    check_ip_reference,
    check_samplers,
    check_zf_identity,
    run_validation,
)

from tests.fixtures import CASE1_COUPLING, nzf_scenario, zf_scenario


class TestReport(unittest.TestCase):
    """Tests for CheckResult and ValidationReport."""

    def test_status(self):
        """Test PASS, FAIL and SKIP labels."""
        self.assertEqual(CheckResult("a", True).status, "PASS")
        self.assertEqual(CheckResult("a", False).status, "FAIL")
        self.assertEqual(CheckResult("a", True, skipped=True).status, "SKIP")

    def test_format(self):
        """Test the summary line and overall verdict."""
        report = ValidationReport([CheckResult("a", True, "ok"), CheckResult("b", False, "off by 2")])
        text = report.format()
        self.assertFalse(report.passed)
        self.assertIn("PASS a: ok", text)
        self.assertIn("FAIL b: off by 2", text)
        self.assertTrue(text.endswith("1/2 checks passed\n"))

    def test_skips_count_as_passed(self):
        """Test that skipped checks do not fail the report."""
        report = ValidationReport([CheckResult("a", True, skipped=True)])
        self.assertTrue(report.passed)


class TestChecks(unittest.TestCase):
    """Tests for individual checks on a small scenario."""

    def setUp(self):
        """Set up the reference case-1 scenario."""
        self.scenario = zf_scenario(CASE1_COUPLING)

    def test_zf_identity(self):
        """Test V A = I."""
        result = check_zf_identity(self.scenario, DEFAULT_CONTROL)
        self.assertTrue(result.passed)

    def test_cdf_bounds(self):
        """Test that every CDF stays in [0, 1] and never decreases."""
        self.assertTrue(check_cdf_bounds(self.scenario, DEFAULT_CONTROL).passed)

    def test_samplers(self):
        """Test the KS check on the samplers."""
        self.assertTrue(check_samplers(self.scenario, DEFAULT_CONTROL, seed=1).passed)

    def test_unsupported_regime_skipped(self):
        """Test that an NZF scenario outside the closed form is skipped, not failed."""
        result = check_ip_reference(nzf_scenario(0.05, 0.05), DEFAULT_CONTROL)
        self.assertTrue(result.skipped)
        self.assertTrue(result.passed)


class TestRunValidation(unittest.TestCase):
    """Tests for the check runner."""

    def test_raising_check_is_failure(self):
        """Test that a check raising a satsec error is reported as FAIL."""
        def broken(scenario, ctrl):
            raise DegenerateParametersError("poles collide")

        checks = (("zf_identity", check_zf_identity), ("broken", broken))
        with patch("validation.CHECKS", checks):
            report = run_validation(zf_scenario(CASE1_COUPLING), DEFAULT_CONTROL)
        self.assertEqual([c.status for c in report.checks], ["PASS", "FAIL"])
        self.assertIn("DegenerateParametersError", report.checks[1].detail)
        self.assertFalse(report.passed)


if __name__ == "__main__":
    unittest.main()
