"""
Basic tests for the MOHSA toolkit.
Tests configuration, file management and logging.
"""

import json
import os
import sys
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import numpy as np

# Add the repository root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))


class TestConfiguration(unittest.TestCase):
    """Test configuration management."""

    def test_settings_import(self):
        """Test that settings can be imported."""
        try:
            from config.settings import settings
            self.assertIsNotNone(settings)
        except Exception as e:
            self.fail(f"Failed to import settings: {e}")

    def test_model_presets_structure(self):
        """Test model preset structure."""
        from config.settings import settings

        presets = settings.model_presets
        self.assertIsInstance(presets, dict)
        for name, fields in presets.items():
            self.assertIsInstance(name, str)
            for key in ('image_size', 'patch_size', 'dim', 'depth', 'heads', 'num_classes'):
                self.assertIn(key, fields)
            self.assertEqual(fields['image_size'] % fields['patch_size'], 0)
            self.assertEqual(fields['dim'] % fields['heads'], 0)

    def test_preset_lookup(self):
        from config.settings import settings

        self.assertIn('vit-tiny', settings.get_available_presets())
        self.assertTrue(settings.is_preset_available('vit-toy'))
        self.assertFalse(settings.is_preset_available('vit-huge'))

    def test_invalid_environment_rejected(self):
        """Bad numeric environment values raise ConfigurationError."""
        from config.settings import ConfigurationError, Settings

        with mock.patch.dict(os.environ, {'MOHSA_MAX_WORKERS': '0'}):
            with self.assertRaises(ConfigurationError):
                Settings()
        with mock.patch.dict(os.environ, {'MOHSA_GRADCHECK_EPS': 'tiny'}):
            with self.assertRaises(ConfigurationError):
                Settings()

    def test_environment_overrides(self):
        from config.settings import Settings

        with mock.patch.dict(os.environ, {'MOHSA_MAX_WORKERS': '2', 'MOHSA_DEFAULT_SEED': '7'}):
            s = Settings()
        self.assertEqual(s.max_workers, 2)
        self.assertEqual(s.default_seed, 7)

    def test_exit_codes(self):
        from config.settings import ConfigurationError, DataError, MohsaError, NumericError

        self.assertEqual(MohsaError.exit_code, 1)
        self.assertEqual(ConfigurationError.exit_code, 2)
        self.assertEqual(DataError.exit_code, 3)
        self.assertEqual(NumericError.exit_code, 4)


class TestFileManager(unittest.TestCase):
    """Test file management functionality."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_file_manager_import(self):
        """Test that file manager can be imported."""
        try:
            from src.utils.file_manager import file_manager
            self.assertIsNotNone(file_manager)
        except Exception as e:
            self.fail(f"Failed to import file_manager: {e}")

    def test_directory_creation(self):
        """Test that required directories are created."""
        from src.utils.file_manager import FileManager

        fm = FileManager(self.root / "results")
        fm.create_directories()
        self.assertTrue(fm.results_dir.exists())
        self.assertTrue((fm.results_dir / "runs").exists())
        self.assertTrue((fm.results_dir / "plots").exists())
        self.assertTrue((fm.results_dir / "logs").exists())

    def test_prepare_run(self):
        from src.utils.file_manager import FileManager

        paths = FileManager(self.root).prepare_run(str(self.root / "run"))
        self.assertTrue(paths.checkpoints.is_dir())
        self.assertEqual(paths.metrics_csv.name, "metrics.csv")
        self.assertEqual(paths.best_checkpoint.name, "best.ckpt")

    def test_metrics_written_with_header(self):
        from src.utils.file_manager import FileManager, METRICS_HEADER, MetricsRecord, read_metrics_csv

        fm = FileManager(self.root)
        path = fm.write_metrics(self.root / "metrics.csv", [
            MetricsRecord(1, "train", 2.0, 0.25, 1e-3),
            MetricsRecord(1, "val", 1.5, 0.5, 1e-3),
        ])
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], METRICS_HEADER)
        self.assertEqual(lines[1], "1,train,2.000000,0.250000,1.000000e-03,0.000")
        records = read_metrics_csv(path)
        self.assertEqual([r.split for r in records], ["train", "val"])
        self.assertAlmostEqual(records[1].acc, 0.5)

    def test_load_json_errors(self):
        from config.settings import DataError
        from src.utils.file_manager import FileManager, FormatError

        fm = FileManager(self.root)
        with self.assertRaises(DataError):
            fm.load_json(self.root / "missing.json")
        bad = fm.save_text(self.root / "bad.json", "{not json")
        with self.assertRaises(FormatError):
            fm.load_json(bad)


class TestDataStructures(unittest.TestCase):
    """Test data structure handling."""

    def test_json_serialization(self):
        """Test JSON serialization utility."""
        from src.utils.file_manager import MetricsRecord, file_manager

        test_data = {"name": "test", "value": 123}
        result = file_manager._make_json_serializable(test_data)
        self.assertEqual(result, test_data)

        result = file_manager._make_json_serializable({"acc": np.float32(0.5), "n": np.int64(3)})
        self.assertEqual(json.loads(json.dumps(result)), {"acc": 0.5, "n": 3})

        result = file_manager._make_json_serializable(MetricsRecord(2, "val", 1.0, 0.75, 0.0))
        self.assertEqual(result["epoch"], 2)
        self.assertEqual(result["split"], "val")


class TestLogging(unittest.TestCase):
    """Test the run and performance loggers."""

    def test_run_log_is_json_lines(self):
        from src.utils.logger import RunLogger

        with tempfile.TemporaryDirectory() as tmp:
            logger = RunLogger(log_dir=Path(tmp), console=False)
            logger.log_action("trainer", "Run started", "seed 1")
            logger.log_metrics("trainer", {"epoch": 1, "acc": 0.5})
            logger.log_error("cli", "boom", "ConfigurationError")

            lines = logger.log_file.read_text(encoding="utf-8").splitlines()
            self.assertEqual(len(lines), 3)
            entries = [json.loads(line) for line in lines]
            self.assertEqual([e["type"] for e in entries], ["action", "metrics", "error"])
            self.assertEqual(entries[1]["acc"], 0.5)

            summary = logger.get_session_summary()
            self.assertEqual(summary["total_entries"], 3)
            self.assertEqual(summary["errors_count"], 1)
            self.assertEqual(summary["components_involved"], ["cli", "trainer"])

    def test_performance_logger(self):
        from src.utils.logger import PerformanceLogger

        perf = PerformanceLogger()
        perf.start_timer("op")
        self.assertGreaterEqual(perf.end_timer("op"), 0.0)
        self.assertEqual(perf.end_timer("never-started"), 0.0)
        self.assertEqual(perf.get_performance_summary()["op"]["count"], 1)


def run_tests():
    """Run all tests."""
    unittest.main(verbosity=2)


if __name__ == "__main__":
    run_tests()
