#!/usr/bin/env python3
"""
Unit tests for sweep_presets.py
Tests preset resolution, the sweep runner and CSV output.
"""

import csv
import io
import math
import unittest
import tempfile
import shutil
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from config_handler import ConfigError, ScenarioConfig, SweepConfig
from sweep_presets import (
    CSV_COLUMNS,
    PRESETS,
    SweepRow,
    SweepSpec,
    Variant,
    emit_csv,
    is_db_key,
    list_presets,
    point_config,
    point_scenario,
    render_csv,
    resolve_engines,
    run_sweep,
    sweep_from_config,
)

# Turbulence given explicitly so sweeps skip the profile integrals
BASE = ScenarioConfig(alpha=2.5, beta=1.8, xi2=1.1, alpha_eve=3.0, beta_eve=2.2, xi2_eve=0.9)


def parse(text: str) -> list:
    return list(csv.reader(io.StringIO(text)))


class TestEngines(unittest.TestCase):
    """Tests for engine name resolution."""

    def test_aliases(self):
        """Test CLI shorthands, order and de-duplication."""
        self.assertEqual(resolve_engines(["cf", "mc", "closed_form"]), ("closed_form", "monte_carlo"))
        self.assertEqual(resolve_engines(["asym", " quad"]), ("asymptotic", "quadrature_reference"))

    def test_unknown_engine(self):
        """Test that unknown names are configuration errors."""
        with self.assertRaises(ConfigError):
            resolve_engines(["cf", "fast"])

    def test_db_keys(self):
        """Test dB key detection."""
        self.assertTrue(is_db_key("psat_legit_db"))
        self.assertTrue(is_db_key("rx_gain_legit_dbi"))
        self.assertFalse(is_db_key("omega_legit"))


class TestPresets(unittest.TestCase):
    """Tests for the preset registry."""

    def test_all_figures_present(self):
        """Test that every named sweep is registered."""
        expected = {
            "fig3_K_sweep", "fig4_gain_sweep", "fig5_omega_s", "fig6_power_split",
            "fig7_8_zf_vs_nzf_cases", "fig9_asymptotic", "fig10_offset_sweep", "fig11_beamwidth_sweep",
        }
        self.assertEqual(set(PRESETS), expected)
        self.assertEqual({name for name, _, _ in list_presets()}, expected)

    def test_swept_keys_are_scenario_keys(self):
        """Test that every preset sweeps and overrides real scenario keys."""
        for spec in PRESETS.values():
            for _, _, variant, value in spec.points():
                point_config(ScenarioConfig(), spec, variant, value)

    def test_from_config_preset(self):
        """Test that a preset keeps its own engines by default."""
        spec = sweep_from_config(SweepConfig(preset="fig5_omega_s", mc_samples=5000))
        self.assertEqual(spec.engines, ("closed_form", "monte_carlo"))
        self.assertEqual(spec.mc_samples, 5000)

    def test_from_config_engines_override(self):
        """Test that explicit engines replace the preset's."""
        spec = sweep_from_config(SweepConfig(engines=["monte_carlo"]), preset="fig10_offset_sweep")
        self.assertEqual(spec.name, "fig10_offset_sweep")
        self.assertEqual(spec.engines, ("monte_carlo",))

    def test_from_config_custom(self):
        """Test a custom sweep from the [sweep] section."""
        spec = sweep_from_config(SweepConfig(swept_parameter="num_apertures", values=[1, 2]))
        self.assertEqual(spec.name, "custom")
        self.assertEqual(spec.values, (1, 2))

    def test_from_config_errors(self):
        """Test unknown presets and incomplete custom sweeps."""
        with self.assertRaises(ConfigError) as ctx:
            sweep_from_config(SweepConfig(), preset="fig12")
        self.assertEqual(ctx.exception.key, "preset")
        with self.assertRaises(ConfigError):
            sweep_from_config(SweepConfig())

    def test_empty_values_rejected(self):
        """Test that a sweep needs values."""
        with self.assertRaises(ConfigError):
            SweepSpec(name="empty", swept_parameter="num_apertures", values=())

    def test_linked_keys_follow(self):
        """Test that linked keys take the swept value."""
        spec = PRESETS["fig7_8_zf_vs_nzf_cases"]
        variant = spec.variants[1]
        cfg = point_config(ScenarioConfig(), spec, variant, 20.0)
        self.assertEqual(cfg.psat_legit_db, 20.0)
        self.assertEqual(cfg.psat_eve_db, 20.0)
        self.assertEqual(cfg.precoding, "nzf")
        self.assertEqual(cfg.offset_legit, 5e-4)
        self.assertEqual(cfg.ps_sigma_legit_db, 30.0)

    def test_power_split_variant(self):
        """Test that sweeping omega_legit keeps the split consistent."""
        spec = PRESETS["fig6_power_split"]
        cfg = point_config(ScenarioConfig(), spec, spec.variants[0], 0.1)
        self.assertAlmostEqual(cfg.omega_eve, 0.9)
        self.assertEqual(cfg.ps_sigma_eve_db, 30.0)

    def test_epsilon_variant(self):
        """Test that epsilon variants tie the RF SNR to mu1."""
        spec = PRESETS["fig9_asymptotic"]
        variant = spec.variants[0]
        scenario = point_scenario(point_config(BASE, spec, variant, 60.0), variant)
        self.assertAlmostEqual(scenario.rf_legit.gamma_bar / scenario.fso_legit.mu, 0.5)

    def test_points_order(self):
        """Test that variants are the outer loop."""
        spec = PRESETS["fig10_offset_sweep"]
        points = list(spec.points())
        self.assertEqual(len(points), 10)
        self.assertEqual((points[0][0], points[0][1]), (0, 0))
        self.assertEqual((points[5][0], points[5][1]), (1, 0))


class TestRunSweep(unittest.TestCase):
    """Tests for the sweep runner."""

    def setUp(self):
        """Set up a small Monte Carlo sweep."""
        self.spec = SweepSpec(
            name="small",
            swept_parameter="psat_legit_db",
            values=(20.0, 30.0, 40.0),
            engines=("monte_carlo",),
            mc_samples=5000,
        )

    def test_rows_in_order(self):
        """Test one row per (value, engine) in input order."""
        rows = run_sweep(self.spec, BASE, seed=1)
        self.assertEqual([row.value_db for row in rows], [20.0, 30.0, 40.0])
        self.assertAlmostEqual(rows[0].value, 100.0)
        self.assertTrue(all(0.0 <= row.ip <= 1.0 for row in rows))
        self.assertTrue(all(row.std_error is not None for row in rows))

    def test_independent_of_jobs(self):
        """Test byte-identical tables for any worker count."""
        serial = render_csv(run_sweep(self.spec, BASE, seed=5, jobs=1))
        parallel = render_csv(run_sweep(self.spec, BASE, seed=5, jobs=3))
        self.assertEqual(serial, parallel)

    def test_seed_changes_results(self):
        """Test that a different seed gives a different table."""
        first = render_csv(run_sweep(self.spec, BASE, seed=5))
        second = render_csv(run_sweep(self.spec, BASE, seed=6))
        self.assertNotEqual(first, second)

    def test_bad_point_does_not_stop_sweep(self):
        """Test that an invalid point is reported on its row only."""
        spec = SweepSpec(name="split", swept_parameter="omega_legit", values=(0.5, 1.5),
                         engines=("monte_carlo",), mc_samples=2000)
        rows = run_sweep(spec, BASE)
        self.assertFalse(rows[0].failed)
        self.assertTrue(rows[1].failed)
        self.assertIn("omega_legit", rows[1].error)
        self.assertTrue(math.isnan(rows[1].ip))

    def test_engine_error_recorded(self):
        """Test that an engine refusing a regime leaves the other engines running."""
        spec = SweepSpec(name="nzf", swept_parameter="psat_legit_db", values=(40.0,),
                         engines=("closed_form", "monte_carlo"), mc_samples=2000,
                         base_overrides={"precoding": "nzf", "gamma_th_db": -20.0})
        rows = run_sweep(spec, BASE)
        closed, simulated = rows
        self.assertTrue(closed.failed)
        self.assertIn("gamma_th", closed.error)
        self.assertFalse(simulated.failed)
        self.assertEqual(simulated.case_fired, "NZF")


class TestCsv(unittest.TestCase):
    """Tests for CSV rendering and writing."""

    def setUp(self):
        """Set up rows and a temporary directory."""
        self.temp_dir = Path(tempfile.mkdtemp())
        self.rows = [
            SweepRow("psat_legit_db", "zf_case1", 100.0, 20.0, "closed_form", ip=0.123456789012345,
                     case_fired="ZF_case1", series_terms_max=42, truncated=False, runtime_ms=12.5),
            SweepRow("psat_legit_db", "zf_case1", 100.0, 20.0, "monte_carlo", ip=0.1235,
                     std_error=0.0007, case_fired="ZF_case1", runtime_ms=80.0),
        ]

    def tearDown(self):
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_header_and_cells(self):
        """Test basic layout of the table."""
        table = parse(render_csv(self.rows))
        self.assertEqual(tuple(table[0]), CSV_COLUMNS)
        self.assertEqual(len(table), 3)
        first = dict(zip(CSV_COLUMNS, table[1]))
        self.assertEqual(first["truncated"], "false")
        self.assertEqual(first["std_error"], "")
        self.assertEqual(first["runtime_ms"], "")
        self.assertEqual(first["error"], "")
        self.assertEqual(float(first["ip"]), 0.123456789012345)

    def test_timings_column(self):
        """Test that runtime_ms is only filled on request."""
        table = parse(render_csv(self.rows, timings=True))
        self.assertEqual(table[2][CSV_COLUMNS.index("runtime_ms")], "80.0")

    def test_emit_to_file(self):
        """Test writing a table to disk."""
        path = self.temp_dir / "sweep.csv"
        emit_csv(self.rows, path)
        self.assertEqual(path.read_text(encoding="utf-8"), render_csv(self.rows))
        self.assertEqual([p.name for p in self.temp_dir.iterdir()], ["sweep.csv"])

    def test_emit_empty(self):
        """Test that an empty table is refused."""
        with self.assertRaises(ValueError):
            emit_csv([], self.temp_dir / "empty.csv")


if __name__ == "__main__":
    unittest.main()
