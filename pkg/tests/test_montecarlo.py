#!/usr/bin/env python3
"""
Unit tests for montecarlo.py
Tests reproducibility, the event partition and agreement of the
simulated links with their analytic laws.
"""

import math
import unittest
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np

from channel import ShadowedRicianParams, TurbulenceParams, gg_cdf, sr_cdf
from montecarlo import (
    RngSpec,
    McEstimate,
    empirical_cdf,
    estimate_event_partition,
    estimate_ip,
    ks_distance,
    sample_gg_pe,
    sample_shadowed_rician,
)
from secrecy import intercept_probability, j_integral, k_integral
from specfun import DomainError

from tests.fixtures import (
    CASE1_COUPLING,
    CASE2_COUPLING,
    CASE3_COUPLING,
    nzf_scenario,
    zf_scenario,
)

# KS critical value coefficient at the 0.1% level
KS_COEFF = 1.95


class TestRngSpec(unittest.TestCase):
    """Tests for seeded, splittable streams."""

    def test_seed_range(self):
        """Test that seeds must be unsigned 64-bit integers."""
        with self.assertRaises(DomainError):
            RngSpec(-1)
        with self.assertRaises(DomainError):
            RngSpec(2 ** 64)

    def test_same_stream_same_draws(self):
        """Test that a stream is reproducible."""
        a = RngSpec(7, stream=(1, 2)).generator(0).random(5)
        b = RngSpec(7, stream=(1, 2)).generator(0).random(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_are_distinct(self):
        """Test that different substreams give different draws."""
        spec = RngSpec(7)
        self.assertFalse(np.array_equal(spec.generator(0).random(5), spec.generator(1).random(5)))


class TestSamplers(unittest.TestCase):
    """Tests for the physical samplers against the analytic CDFs."""

    def test_gamma_gamma_sampler(self):
        """Test KS distance of coherent-detection draws."""
        params = TurbulenceParams(alpha=2.5, beta=1.8, xi2=1.1, mu=10.0)
        n = 2000
        draws = sample_gg_pe(params, RngSpec(3).generator(0), n)
        stat = ks_distance(draws, lambda z: gg_cdf(z, params))
        self.assertLess(stat, KS_COEFF / math.sqrt(n))

    def test_gamma_gamma_sampler_direct_detection(self):
        """Test KS distance of IM/DD draws."""
        params = TurbulenceParams(alpha=2.5, beta=1.8, xi2=1.1, mu=10.0, detection_order=2)
        n = 1000
        draws = sample_gg_pe(params, RngSpec(4).generator(0), n)
        stat = ks_distance(draws, lambda z: gg_cdf(z, params))
        self.assertLess(stat, KS_COEFF / math.sqrt(n))

    def test_shadowed_rician_sampler(self):
        """Test KS distance and mean of shadowed-Rician draws."""
        params = ShadowedRicianParams(b=1.4, m_s=2, omega=3.0, gamma_bar=2.0)
        n = 20000
        draws = sample_shadowed_rician(params, RngSpec(5).generator(0), n)
        stat = ks_distance(draws, lambda z: float(sr_cdf(z, params)))
        self.assertLess(stat, KS_COEFF / math.sqrt(n))
        self.assertAlmostEqual(draws.mean() / params.mean(), 1.0, delta=0.05)

    def test_empirical_cdf(self):
        """Test the empirical CDF of uniform draws."""
        points = empirical_cdf(lambda g, size: g.random(size), 100000, [0.25, 0.5, 0.75], RngSpec(1))
        for z, value in points:
            self.assertAlmostEqual(value, z, delta=0.01)

    def test_empirical_cdf_unsorted_grid(self):
        """Test that the grid must be ascending."""
        with self.assertRaises(DomainError):
            empirical_cdf(lambda g, size: g.random(size), 100, [0.5, 0.25])


class TestEstimateIp(unittest.TestCase):
    """Tests for the intercept probability estimator."""

    def test_independent_of_jobs(self):
        """Test that the estimate depends only on seed and n."""
        scenario = zf_scenario(CASE1_COUPLING)
        serial = estimate_ip(scenario, 120000, RngSpec(11), jobs=1)
        parallel = estimate_ip(scenario, 120000, RngSpec(11), jobs=3)
        self.assertEqual(serial.value, parallel.value)
        self.assertEqual(serial.std_error, parallel.std_error)

    def test_standard_error(self):
        """Test the binomial standard error."""
        estimate = McEstimate.from_count(25, 100)
        self.assertEqual(estimate.value, 0.25)
        self.assertAlmostEqual(estimate.std_error, math.sqrt(0.25 * 0.75 / 100))

    def test_few_samples_warn(self):
        """Test that tiny runs log a warning."""
        with self.assertLogs("satsec.montecarlo", level="WARNING"):
            estimate_ip(zf_scenario(CASE1_COUPLING), 200, RngSpec(0))

    def test_matches_closed_form(self):
        """Test agreement within three standard errors in every case."""
        scenarios = {
            "zf_case1": zf_scenario(CASE1_COUPLING),
            "zf_case2": zf_scenario(CASE2_COUPLING),
            "zf_case3": zf_scenario(CASE3_COUPLING),
            "nzf": nzf_scenario(0.05, 0.2),
        }
        for name, scenario in scenarios.items():
            analytic = intercept_probability(scenario).ip
            estimate = estimate_ip(scenario, 100000, RngSpec(2024))
            gap = abs(estimate.value - analytic)
            self.assertLess(gap, 3.0 * estimate.std_error, name)


class TestEventPartition(unittest.TestCase):
    """Tests for the partition of the secure event."""

    def setUp(self):
        """Set up a case-3 scenario so that every ordering can occur."""
        self.scenario = zf_scenario(CASE3_COUPLING)
        self.partition = estimate_event_partition(self.scenario, 100000, RngSpec(9))

    def test_events_cover_secure_set(self):
        """Test that E1..E6 add up to the secure trials."""
        self.assertEqual(self.partition.total().value, self.partition.secure.value)
        self.assertEqual(len(self.partition.events), 6)

    def test_secure_set_complements_intercept(self):
        """Test that secure and intercepted trials share one stream."""
        intercepted = estimate_ip(self.scenario, 100000, RngSpec(9))
        self.assertAlmostEqual(self.partition.secure.value + intercepted.value, 1.0, places=12)

    def test_below_threshold_events(self):
        """Test E3 + E4 + E6 against K(gamma_th) J(gamma_th)."""
        th = self.scenario.gamma_th
        analytic = k_integral(th, self.scenario) * j_integral(th, self.scenario)
        estimate = self.partition.below_threshold()
        self.assertLess(abs(estimate.value - analytic), 3.0 * estimate.std_error)


if __name__ == "__main__":
    unittest.main()
