"""Static plots of report tables."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _read(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    return rows[0], rows[1:]


def plot_section(header, rows, ax) -> None:
    """Points coloured by ``k`` with the first basis vector drawn as a short segment."""
    if header[:2] != ["x0", "x1"] or "k" not in header:
        raise ValueError("section table needs columns x0, x1, k")
    ki = header.index("k")
    pts = np.array([[float(r[0]), float(r[1])] for r in rows])
    ks = np.array([int(r[ki]) for r in rows])
    ax.scatter(pts[:, 0], pts[:, 1], c=ks, cmap="viridis", s=8, vmin=0, vmax=2)
    if "basis" in header:
        bi = header.index("basis")
        scale = 0.04
        for p, r in zip(pts, rows):
            vals = [float(v) for v in r[bi].split()] if r[bi] else []
            for j in range(0, len(vals), 2):
                v = np.array(vals[j:j + 2]) * scale
                ax.plot([p[0] - v[0], p[0] + v[0]], [p[1] - v[1], p[1] + v[1]], color="k", lw=0.6)
    ax.set_aspect("equal")


def plot_curve(header, rows, ax) -> None:
    if len(header) < 2:
        raise ValueError("curve table needs two columns")
    data = np.array([[float(r[0]), float(r[1])] for r in rows])
    positive = data[:, 1] > 0
    ax.loglog(data[positive, 0], data[positive, 1], "o-")
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])


def plot_csv(path, kind: str, out=None) -> Path:
    header, rows = _read(path)
    plt.rcParams["svg.hashsalt"] = "fiberlab"
    fig, ax = plt.subplots(figsize=(5, 4), dpi=100)
    {"section": plot_section, "curve": plot_curve}[kind](header, rows, ax)
    target = Path(out) if out else Path(path).with_suffix(".png")
    fig.savefig(target, metadata={"Software": None})
    plt.close(fig)
    return target
