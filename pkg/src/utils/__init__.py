"""
Utils module for the MOHSA toolkit.
Contains file management, checkpoint and logging utilities.
"""

from .file_manager import (
    file_manager,
    FileManager,
    FormatError,
    MetricsRecord,
    METRICS_HEADER,
    read_metrics_csv,
)
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .logger import run_logger, performance_logger

__all__ = [
    'file_manager', 'FileManager', 'FormatError', 'MetricsRecord', 'METRICS_HEADER', 'read_metrics_csv',
    'Checkpoint', 'CheckpointError', 'load_checkpoint', 'save_checkpoint',
    'run_logger', 'performance_logger',
]
