#!/usr/bin/env python3
"""
Unit tests for main.py and logger.py
Tests the command-line surface, exit codes and logging setup.
"""

import csv
import io
import logging
import os
import unittest
import warnings
import tempfile
import shutil
from contextlib import redirect_stdout
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

from main import EXIT_CONFIG_ERROR, EXIT_OK, main
from logger import get_logger, run_label, setup_logging, verbosity_level
from sweep_presets import CSV_COLUMNS

SCENARIO_INI = (
    "[scenario]\n"
    "alpha = 2.5\nbeta = 1.8\nxi2 = 1.1\n"
    "alpha_eve = 3.0\nbeta_eve = 2.2\nxi2_eve = 0.9\n"
    "[sweep]\n"
    "swept_parameter = psat_legit_db\n"
    "values = 20, 30\n"
    "seed = 17\n"
)


class LoggerIsolation(unittest.TestCase):
    """Detach satsec handlers for the duration of each test."""

    def setUp(self):
        self.temp_dir = Path(tempfile.mkdtemp())
        self.root = logging.getLogger("satsec")
        self.saved = (self.root.handlers[:], self.root.level)
        self.root.handlers.clear()
        self.py_warnings = logging.getLogger("py.warnings")
        self.saved_warnings = (self.py_warnings.handlers[:], self.py_warnings.propagate)

    def tearDown(self):
        for handler in self.root.handlers:
            handler.close()
        self.root.handlers[:] = self.saved[0]
        self.root.setLevel(self.saved[1])
        logging.captureWarnings(False)
        self.py_warnings.handlers[:] = self.saved_warnings[0]
        self.py_warnings.propagate = self.saved_warnings[1]
        shutil.rmtree(self.temp_dir, ignore_errors=True)


class TestLogger(LoggerIsolation):
    """Tests for logger.py."""

    def test_setup_once(self):
        """Test that repeated setup does not duplicate handlers."""
        setup_logging()
        count = len(self.root.handlers)
        setup_logging()
        self.assertEqual(len(self.root.handlers), count)

    def test_debug_level(self):
        """Test the debug switch."""
        logger = setup_logging(debug=True)
        self.assertEqual(logger.level, logging.DEBUG)

    def test_log_file(self):
        """Test that a log directory gets a dated file."""
        setup_logging(self.temp_dir)
        self.assertEqual(len(list((self.temp_dir / "logs").glob("satsec_*.log"))), 1)

    def test_old_logs_pruned(self):
        """Test that only the newest log files are kept."""
        logs = self.temp_dir / "logs"
        logs.mkdir()
        for day in range(1, 9):
            (logs / f"satsec_2000010{day}.log").write_text("")
        setup_logging(self.temp_dir)
        self.assertEqual(len(list(logs.glob("satsec_*.log"))), 5)

    def test_verbosity_levels(self):
        """Test the -v count mapping."""
        self.assertEqual(verbosity_level(0), logging.WARNING)
        self.assertEqual(verbosity_level(1), logging.INFO)
        self.assertEqual(verbosity_level(2), logging.DEBUG)
        self.assertEqual(verbosity_level(6), logging.DEBUG)
        self.assertEqual(verbosity_level(0, debug=True), logging.DEBUG)

    def test_console_follows_verbosity(self):
        """Test that the console handler takes the requested level."""
        logger = setup_logging(verbosity=1)
        self.assertEqual(logger.level, logging.INFO)
        self.assertEqual(logger.handlers[0].level, logging.INFO)

    def test_run_named_log_file(self):
        """Test that the run label appears in the log file name."""
        name = run_label("run", "fig3_K_sweep", 7)
        self.assertEqual(name, "run_fig3_K_sweep_seed7")
        setup_logging(self.temp_dir, run_name=name)
        files = list((self.temp_dir / "logs").glob("satsec_run_fig3_K_sweep_seed7_*.log"))
        self.assertEqual(len(files), 1)
        # File keeps debug records even with a quiet console
        self.assertEqual(self.root.level, logging.DEBUG)
        self.assertEqual(self.root.handlers[0].level, logging.WARNING)

    def test_run_label_sanitised(self):
        """Test that path separators and spaces never reach the file name."""
        self.assertEqual(run_label("run", "my sweep/v2"), "run_my-sweep-v2")
        self.assertEqual(run_label("validate", seed=0), "validate_seed0")

    def test_pruning_keeps_newest_runs(self):
        """Test that pruning goes by write time, not by name."""
        logs = self.temp_dir / "logs"
        logs.mkdir()
        for i in range(8):
            old = logs / f"satsec_run_zz{i}_20000101.log"
            old.write_text("")
            os.utime(old, (1_000_000 + i, 1_000_000 + i))
        setup_logging(self.temp_dir, run_name="run_aa")
        remaining = sorted(p.name for p in logs.glob("satsec_*.log"))
        self.assertEqual(len(remaining), 5)
        self.assertTrue(any(n.startswith("satsec_run_aa_") for n in remaining))
        self.assertNotIn("satsec_run_zz0_20000101.log", remaining)

    def test_warnings_captured(self):
        """Test that warnings.warn lands in the run log."""
        setup_logging(self.temp_dir, run_name="warn")
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.warn("contour error estimate above tolerance", RuntimeWarning)
        for handler in self.root.handlers:
            handler.flush()
        log_file = next((self.temp_dir / "logs").glob("satsec_warn_*.log"))
        text = log_file.read_text(encoding="utf-8")
        self.assertIn("py.warnings", text)
        self.assertIn("contour error estimate above tolerance", text)
    def test_get_logger(self):
        """Test child logger names."""
        self.assertEqual(get_logger("secrecy").name, "satsec.secrecy")
        self.assertEqual(get_logger().name, "satsec")


class TestCli(LoggerIsolation):
    """Tests for the satsec command line."""

    def write_config(self, text: str, name: str = "scenario.ini") -> Path:
        path = self.temp_dir / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_list_presets(self):
        """Test basic preset listing."""
        out = io.StringIO()
        with redirect_stdout(out):
            self.assertEqual(main(["list-presets"]), EXIT_OK)
        self.assertIn("fig3_K_sweep", out.getvalue())

    def test_missing_config(self):
        """Test that a missing file is a configuration error."""
        code = main(["run", "--config", str(self.temp_dir / "absent.ini")])
        self.assertEqual(code, EXIT_CONFIG_ERROR)

    def test_unknown_key(self):
        """Test that an unknown key is a configuration error."""
        path = self.write_config("[scenario]\nbeam_count = 4\n")
        self.assertEqual(main(["run", "--config", str(path)]), EXIT_CONFIG_ERROR)

    def test_unknown_engine(self):
        """Test that an unknown engine name is a configuration error."""
        path = self.write_config(SCENARIO_INI)
        self.assertEqual(main(["run", "--config", str(path), "--engines", "fast"]), EXIT_CONFIG_ERROR)

    def test_run_reproducible(self):
        """Test that two runs with one seed write identical tables."""
        path = self.write_config(SCENARIO_INI)
        outputs = []
        for name in ("first.csv", "second.csv"):
            out = self.temp_dir / name
            code = main(["run", "--config", str(path), "--engines", "mc", "--mc-samples", "2000",
                         "--out", str(out)])
            self.assertEqual(code, EXIT_OK)
            outputs.append(out.read_text(encoding="utf-8"))
        self.assertEqual(outputs[0], outputs[1])

        table = list(csv.reader(io.StringIO(outputs[0])))
        self.assertEqual(tuple(table[0]), CSV_COLUMNS)
        self.assertEqual(len(table), 3)

    def test_run_to_stdout(self):
        """Test the default '-' output."""
        path = self.write_config(SCENARIO_INI)
        out = io.StringIO()
        with redirect_stdout(out):
            code = main(["run", "--config", str(path), "--engines", "mc", "--mc-samples", "2000",
                         "--seed", "3"])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(out.getvalue().startswith(",".join(CSV_COLUMNS)))

    def test_dump_config(self):
        """Test that --dump-config writes a loadable file."""
        path = self.write_config(SCENARIO_INI)
        dump = self.temp_dir / "resolved.json"
        code = main(["run", "--config", str(path), "--engines", "mc", "--mc-samples", "1000",
                     "--out", str(self.temp_dir / "out.csv"), "--dump-config", str(dump)])
        self.assertEqual(code, EXIT_OK)
        from config_handler import load_config
        _, sweep = load_config(dump)
        self.assertEqual(sweep.engines, ["monte_carlo"])
        self.assertEqual(sweep.mc_samples, 1000)


    def test_verbose_flag(self):
        """Test that -vv turns on debug output and no flag keeps warnings only."""
        path = self.write_config(SCENARIO_INI)
        args = ["run", "--config", str(path), "--engines", "mc", "--mc-samples", "500",
                "--out", str(self.temp_dir / "out.csv")]
        self.assertEqual(main(args + ["-vv"]), EXIT_OK)
        self.assertEqual(self.root.handlers[0].level, logging.DEBUG)

        for handler in self.root.handlers:
            handler.close()
        self.root.handlers.clear()
        self.assertEqual(main(args), EXIT_OK)
        self.assertEqual(self.root.handlers[0].level, logging.WARNING)

    def test_run_log_file(self):
        """Test that --log-dir writes a log named after the run."""
        path = self.write_config(SCENARIO_INI)
        code = main(["run", "--config", str(path), "--engines", "mc", "--mc-samples", "500",
                     "--seed", "5", "--out", str(self.temp_dir / "out.csv"),
                     "--log-dir", str(self.temp_dir)])
        self.assertEqual(code, EXIT_OK)
        for handler in self.root.handlers:
            handler.flush()
        files = list((self.temp_dir / "logs").glob("satsec_run_seed5_*.log"))
        self.assertEqual(len(files), 1)
        self.assertIn("satsec 1.0.0: run", files[0].read_text(encoding="utf-8"))

    def test_dump_config_round_trip(self):
        """Test that a run from a dumped configuration reproduces the table."""
        path = self.write_config(SCENARIO_INI)
        dump = self.temp_dir / "resolved.ini"
        first = self.temp_dir / "first.csv"
        second = self.temp_dir / "second.csv"
        code = main(["run", "--config", str(path), "--engines", "mc", "--mc-samples", "1500",
                     "--seed", "11", "--out", str(first), "--dump-config", str(dump)])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(main(["run", "--config", str(dump), "--out", str(second)]), EXIT_OK)
        self.assertEqual(first.read_bytes(), second.read_bytes())

if __name__ == "__main__":
    unittest.main()
