"""
Configuration management for the MOHSA toolkit.
Handles environment variables, the error hierarchy and model presets.
"""

import os
from typing import Dict, Any
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class MohsaError(Exception):
    """Base error; `exit_code` is what the CLI returns for it."""
    exit_code = 1


class ConfigurationError(MohsaError):
    """Configuration related errors."""
    exit_code = 2


class DataError(MohsaError):
    """Dataset, file format and checkpoint errors."""
    exit_code = 3


class NumericError(MohsaError):
    """Non-finite values and failed numerical checks."""
    exit_code = 4


class Settings:
    """Application configuration management."""

    def __init__(self):
        self._load_environment()
        self._validate_configuration()

    def _load_environment(self):
        """Load environment variables."""
        self.base_dir = Path(__file__).parent.parent
        self.results_dir = Path(os.getenv('MOHSA_RESULTS_DIR', str(self.base_dir / "results")))
        self.data_dir = Path(os.getenv('MOHSA_DATA_DIR', str(self.base_dir / "data")))

        self._raw_max_workers = os.getenv('MOHSA_MAX_WORKERS', '4')
        self._raw_default_seed = os.getenv('MOHSA_DEFAULT_SEED', '42')
        self._raw_gradcheck_eps = os.getenv('MOHSA_GRADCHECK_EPS', '1e-5')
        self.log_console = os.getenv('MOHSA_LOG_CONSOLE', '1').strip().lower() not in ('0', 'false', 'no')

    def _validate_configuration(self):
        """Validate and convert numeric settings."""
        problems = []

        try:
            self.max_workers = int(self._raw_max_workers)
            if self.max_workers < 1:
                problems.append('MOHSA_MAX_WORKERS must be >= 1')
        except ValueError:
            problems.append(f'MOHSA_MAX_WORKERS is not an integer: {self._raw_max_workers!r}')

        try:
            self.default_seed = int(self._raw_default_seed)
        except ValueError:
            problems.append(f'MOHSA_DEFAULT_SEED is not an integer: {self._raw_default_seed!r}')

        try:
            self.gradcheck_eps = float(self._raw_gradcheck_eps)
            if not self.gradcheck_eps > 0:
                problems.append('MOHSA_GRADCHECK_EPS must be > 0')
        except ValueError:
            problems.append(f'MOHSA_GRADCHECK_EPS is not a number: {self._raw_gradcheck_eps!r}')

        if problems:
            raise ConfigurationError(f"Invalid configuration: {'; '.join(problems)}")

    @property
    def model_presets(self) -> Dict[str, Dict[str, Any]]:
        """Named ModelConfig field sets."""
        return {
            "vit-tiny": {
                "image_size": 224,
                "patch_size": 16,
                "dim": 192,
                "depth": 12,
                "heads": 12,
                "mlp_ratio": 4,
                "num_classes": 1000,
            },
            "vit-small": {
                "image_size": 224,
                "patch_size": 16,
                "dim": 384,
                "depth": 12,
                "heads": 12,
                "mlp_ratio": 4,
                "num_classes": 1000,
            },
            # desk scale
            "vit-micro": {
                "image_size": 32,
                "patch_size": 4,
                "dim": 96,
                "depth": 6,
                "heads": 6,
                "mlp_ratio": 4,
                "num_classes": 10,
            },
            # small enough for scalar-loop replay and end-to-end gradcheck
            "vit-toy": {
                "image_size": 8,
                "patch_size": 4,
                "dim": 8,
                "depth": 2,
                "heads": 2,
                "mlp_ratio": 4,
                "num_classes": 3,
            },
        }

    def get_available_presets(self) -> list:
        """Get list of model preset names."""
        return list(self.model_presets.keys())

    def is_preset_available(self, name: str) -> bool:
        """Check if a model preset exists."""
        return name in self.model_presets


# Global settings instance
settings = Settings()
