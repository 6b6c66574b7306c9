"""
Training curves as standalone SVG, drawn with matplotlib.
One line per (run, split) of a metric against epoch, with axes and a legend.
Each line sits in an SVG group whose id is "<run>/<split>".
"""

import io
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from config.settings import ConfigurationError
from src.utils.file_manager import MetricsRecord, read_metrics_csv

FIGSIZE = (7.2, 4.2)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
METRICS = ("acc", "loss")

# fixed hash salt and no date stamp keep the SVG bytes identical across calls
SVG_RC = {
    "svg.hashsalt": "mohsa",
    "svg.fonttype": "none",
    "path.simplify": False,
}

Series = Tuple[str, str, List[Tuple[float, float]]]


def run_label(path: Union[str, Path]) -> str:
    """Parent directory name, or the file stem when the CSV sits in the working directory."""
    path = Path(path)
    parent = path.parent.name
    return parent if parent not in ("", ".") else path.stem


def series_id(run: str, split: str) -> str:
    return f"{run}/{split}"


def collect_series(runs: Sequence[Tuple[str, List[MetricsRecord]]], metric: str = "acc") -> List[Series]:
    """(run, split, [(epoch, value), ...]) in first-appearance order, points sorted by epoch."""
    if metric not in METRICS:
        raise ConfigurationError(f"metric must be one of {METRICS}, got {metric!r}")
    series: Dict[Tuple[str, str], List[Tuple[float, float]]] = {}
    for label, records in runs:
        for r in records:
            series.setdefault((label, r.split), []).append((float(r.epoch), float(getattr(r, metric))))
    return [(run, split, sorted(points)) for (run, split), points in series.items()]


def _unique_labels(paths: Sequence[Union[str, Path]]) -> List[str]:
    labels, seen = [], {}
    for p in paths:
        label = run_label(p)
        seen[label] = seen.get(label, 0) + 1
        labels.append(label if seen[label] == 1 else f"{label}#{seen[label]}")
    return labels


def render_series(series: Sequence[Series], title: str = "Accuracy", metric: str = "acc") -> str:
    if metric not in METRICS:
        raise ConfigurationError(f"metric must be one of {METRICS}, got {metric!r}")
    if not series:
        raise ConfigurationError("nothing to plot")

    runs: List[str] = []
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        try:
            for run, split, points in series:
                if run not in runs:
                    runs.append(run)
                color = PALETTE[runs.index(run) % len(PALETTE)]
                ax.plot([x for x, _ in points], [y for _, y in points],
                        color=color, linestyle="--" if split == "val" else "-", linewidth=2,
                        label=f"{run} {split}", gid=series_id(run, split))

            if metric == "acc":
                ax.set_ylim(0.0, 1.0)
            else:
                ax.set_ylim(bottom=min(0.0, min(y for _, _, pts in series for _, y in pts)))
            ax.set_xlabel("epoch")
            ax.set_ylabel(metric)
            ax.set_title(title)
            ax.grid(True, alpha=0.3)
            ax.legend(loc="center left", bbox_to_anchor=(1.02, 0.5), fontsize=8, frameon=False)
            fig.tight_layout()

            buf = io.BytesIO()
            fig.savefig(buf, format="svg", bbox_inches="tight", metadata={"Date": None})
        finally:
            plt.close(fig)
    return buf.getvalue().decode("utf-8")


def render_curves(metrics_csv: Union[str, Path, Sequence[Union[str, Path]]],
                  title: str = "Accuracy", metric: str = "acc") -> str:
    """SVG document from one or more metrics CSV files."""
    paths = [metrics_csv] if isinstance(metrics_csv, (str, Path)) else list(metrics_csv)
    if not paths:
        raise ConfigurationError("render_curves needs at least one metrics CSV")
    runs = [(label, read_metrics_csv(p)) for label, p in zip(_unique_labels(paths), paths)]
    return render_series(collect_series(runs, metric), title=title, metric=metric)
