"""Multi-seed aggregation: per-step median and quartiles, with
interpolation onto a shared step grid when cadences differ."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

__all__ = ["read_metrics", "aggregate_seeds"]


def read_metrics(path: str | Path) -> dict[str, np.ndarray]:
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) if v != "" else np.nan for v in row]
                for row in reader]
    data = np.array(rows, dtype=np.float64) if rows else \
        np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def aggregate_seeds(run_dir: str | Path) -> Path:
    """Median + quartiles per metric per step over seed-*/metrics.csv;
    writes and returns summary.csv."""
    run_dir = Path(run_dir)
    seed_dirs = sorted(run_dir.glob("seed-*"))
    if not seed_dirs:
        raise FileNotFoundError(f"no seed-* directories under {run_dir}")
    per_seed = [read_metrics(d / "metrics.csv") for d in seed_dirs]
    metric_names = [name for name in per_seed[0]
                    if name not in ("update", "episodes")]
    grid = np.unique(np.concatenate([m["episodes"] for m in per_seed]))

    header = ["episodes"]
    table = [grid]
    for name in metric_names:
        stacked = []
        for m in per_seed:
            x = m["episodes"]
            y = m[name]
            mask = ~np.isnan(y)
            if mask.sum() == 0:
                stacked.append(np.full(grid.shape, np.nan))
                continue
            stacked.append(np.interp(grid, x[mask], y[mask]))
        stacked = np.stack(stacked)
        header += [f"{name}_median", f"{name}_q25", f"{name}_q75"]
        table += [np.median(stacked, axis=0),
                  np.percentile(stacked, 25, axis=0),
                  np.percentile(stacked, 75, axis=0)]

    out = run_dir / "summary.csv"
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in np.stack(table, axis=1):
            writer.writerow([f"{v:.12g}" for v in row])
    return out
