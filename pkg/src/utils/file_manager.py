"""
File management utilities for the MOHSA toolkit.
Results tree, per-run directories and the metrics CSV format.
"""

import csv
import io
import json
from pathlib import Path
from typing import Dict, Any, Iterable, List, NamedTuple, Optional

from config.settings import DataError, settings

METRICS_FIELDS = ("epoch", "split", "loss", "acc", "lr", "wall_seconds")
METRICS_HEADER = ",".join(METRICS_FIELDS)
SPLITS = ("train", "val")


class FormatError(DataError):
    """A data, metrics or config file is malformed."""
    pass


class MetricsRecord(NamedTuple):
    epoch: int
    split: str
    loss: float
    acc: float
    lr: float
    wall_seconds: float = 0.0

    def to_row(self) -> str:
        return f"{self.epoch},{self.split},{self.loss:.6f},{self.acc:.6f},{self.lr:.6e},{self.wall_seconds:.3f}"


class RunPaths(NamedTuple):
    root: Path
    metrics_csv: Path
    checkpoints: Path
    last_checkpoint: Path
    best_checkpoint: Path
    summary: Path
    performance: Path


class FileManager:
    """Manages the results tree and run directories."""

    def __init__(self, results_dir: Optional[Path] = None):
        """Initialize file manager; directories are created on first use."""
        self.results_dir = Path(results_dir or settings.results_dir)
        self.runs_dir = self.results_dir / "runs"
        self.plots_dir = self.results_dir / "plots"
        self.logs_dir = self.results_dir / "logs"

    def create_directories(self):
        """Create necessary directory structure."""
        for directory in [self.results_dir, self.runs_dir, self.plots_dir, self.logs_dir]:
            directory.mkdir(parents=True, exist_ok=True)

    def run_paths(self, output_dir: str) -> RunPaths:
        """Layout of one run directory; relative paths are taken from the working directory."""
        root = Path(output_dir)
        checkpoints = root / "checkpoints"
        return RunPaths(
            root=root,
            metrics_csv=root / "metrics.csv",
            checkpoints=checkpoints,
            last_checkpoint=checkpoints / "last.ckpt",
            best_checkpoint=checkpoints / "best.ckpt",
            summary=root / "summary.json",
            performance=root / "performance.json",
        )

    def prepare_run(self, output_dir: str) -> RunPaths:
        paths = self.run_paths(output_dir)
        paths.checkpoints.mkdir(parents=True, exist_ok=True)
        return paths

    def plot_path(self, name: str) -> Path:
        self.plots_dir.mkdir(parents=True, exist_ok=True)
        return self.plots_dir / name

    def save_text(self, path: Path, text: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        return path

    def save_json(self, path: Path, data: Dict[str, Any]) -> Path:
        """Save a JSON document, converting anything json cannot encode."""
        serializable = self._make_json_serializable(data)
        return self.save_text(path, json.dumps(serializable, ensure_ascii=False, indent=2) + "\n")

    def load_json(self, path: Path) -> Dict[str, Any]:
        path = Path(path)
        if not path.exists():
            raise DataError(f"File not found: {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}:{e.lineno}: invalid JSON: {e.msg}")
        except UnicodeDecodeError:
            raise FormatError(f"{path}:1: not UTF-8")

    def write_metrics(self, path: Path, records: Iterable[MetricsRecord]) -> Path:
        lines = [METRICS_HEADER] + [r.to_row() for r in records]
        return self.save_text(path, "\n".join(lines) + "\n")

    def _make_json_serializable(self, obj: Any) -> Any:
        """Convert object to JSON serializable format."""
        if hasattr(obj, "_asdict"):
            return self._make_json_serializable(obj._asdict())
        elif hasattr(obj, "model_dump"):
            return self._make_json_serializable(obj.model_dump())
        elif isinstance(obj, dict):
            return {str(key): self._make_json_serializable(value) for key, value in obj.items()}
        elif isinstance(obj, (list, tuple)):
            return [self._make_json_serializable(item) for item in obj]
        elif hasattr(obj, "item") and callable(obj.item):
            # numpy scalars
            return obj.item()
        else:
            try:
                json.dumps(obj)
                return obj
            except (TypeError, ValueError):
                return str(obj)


def _parse_record(row: Dict[str, str], where: str) -> MetricsRecord:
    try:
        record = MetricsRecord(
            epoch=int(row["epoch"]),
            split=row["split"].strip(),
            loss=float(row["loss"]),
            acc=float(row["acc"]),
            lr=float(row["lr"]),
            wall_seconds=float(row["wall_seconds"]),
        )
    except (TypeError, ValueError, AttributeError) as e:
        raise FormatError(f"{where}: cannot parse metrics row: {e}")
    if record.split not in SPLITS:
        raise FormatError(f"{where}: split must be one of {SPLITS}, got {record.split!r}")
    if not 0.0 <= record.acc <= 1.0:
        raise FormatError(f"{where}: accuracy {record.acc} outside [0, 1]")
    return record


def read_metrics_csv(path) -> List[MetricsRecord]:
    """Parse a metrics CSV; malformed content raises FormatError naming the line."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataError(f"Cannot read metrics file {path}: {e}")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        line = raw[:e.start].count(b"\n") + 1
        raise FormatError(f"{path}:{line}: not UTF-8")

    reader = csv.DictReader(io.StringIO(text, newline=''))
    if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != METRICS_FIELDS:
        raise FormatError(f"{path}:1: header must be '{METRICS_HEADER}', got {reader.fieldnames}")
    records = []
    for row in reader:
        where = f"{path}:{reader.line_num}"
        if None in row or any(v is None for v in row.values()):
            raise FormatError(f"{where}: expected {len(METRICS_FIELDS)} fields")
        records.append(_parse_record(row, where))
    if not records:
        raise FormatError(f"{path}:2: no metrics rows")
    return records


# Global file manager instance
file_manager = FileManager()
