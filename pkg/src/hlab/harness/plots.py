"""Plot emission: one SVG per tracked metric with the median line and the
interquartile band; the CSV summary is always present."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["emit_plots"]


def _read_summary(path: Path) -> tuple[list[str], np.ndarray]:
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, (np.array(rows) if rows else np.zeros((0, len(header))))


def emit_plots(run_dirs, out_dir: str | Path, labels=None) -> list[Path]:
    """Render every aggregated metric; multiple run directories share axes
    (one curve per run). Returns the written SVG paths."""
    if isinstance(run_dirs, (str, Path)):
        run_dirs = [run_dirs]
    run_dirs = [Path(d) for d in run_dirs]
    labels = labels or [d.name for d in run_dirs]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summaries = []
    for d in run_dirs:
        summary = d / "summary.csv"
        if not summary.exists():
            raise FileNotFoundError(f"{summary} missing; run aggregate first")
        summaries.append(_read_summary(summary))

    metric_names = []
    for header, _ in summaries:
        for name in header:
            if name.endswith("_median"):
                base = name[:-len("_median")]
                if base not in metric_names:
                    metric_names.append(base)

    written = []
    for base in metric_names:
        fig, ax = plt.subplots(figsize=(6, 4))
        drew = False
        for (header, data), label in zip(summaries, labels):
            if f"{base}_median" not in header or data.size == 0:
                continue
            x = data[:, header.index("episodes")]
            med = data[:, header.index(f"{base}_median")]
            lo = data[:, header.index(f"{base}_q25")]
            hi = data[:, header.index(f"{base}_q75")]
            ax.plot(x, med, label=label)
            ax.fill_between(x, lo, hi, alpha=0.25)
            drew = True
        if not drew:
            plt.close(fig)
            continue
        ax.set_xlabel("episodes")
        ax.set_ylabel(base)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{base}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written
