"""Standalone SVG figures from CLI report files.

Figures are byte-stable: the SVG id salt is fixed and no creation date is
written, so identical inputs give identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "fredkin-lab"
plt.rcParams["svg.fonttype"] = "path"


class ReportError(ValueError):
    """A report file does not have the expected layout."""


def read_csv(path: str | Path) -> tuple[dict, list[str], list[list[str]]]:
    """Return (metadata, header, rows) for a CSV written by the CLI."""
    meta: dict = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            try:
                meta = json.loads(line[1:].strip())
            except json.JSONDecodeError as exc:
                raise ReportError(f"{path}: bad metadata line") from exc
        elif line:
            body.append(line)
    if not body:
        raise ReportError(f"{path}: no CSV header")
    rows = list(csv.reader(body))
    header, data = rows[0], rows[1:]
    if any(len(r) != len(header) for r in data):
        raise ReportError(f"{path}: ragged rows")
    return meta, header, data


def read_json(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path}: invalid JSON") from exc


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _column(header, rows, name, cast=float):
    if name not in header:
        raise ReportError(f"missing column {name!r}")
    k = header.index(name)
    try:
        return np.array([cast(r[k]) for r in rows])
    except ValueError as exc:
        raise ReportError(f"column {name!r} is not numeric") from exc


def gap_plot(csv_path: str | Path, out: str | Path) -> Path:
    """Log-log gap against n, one series per (s, sector), with a fitted slope."""
    _, header, rows = read_csv(csv_path)
    n = _column(header, rows, "n")
    s = _column(header, rows, "s")
    g = _column(header, rows, "gap")
    sector = [r[header.index("sector")] for r in rows] if "sector" in header else [""] * len(rows)
    fig, ax = plt.subplots(figsize=(5, 4))
    for key in sorted(set(zip(s, sector))):
        mask = np.array([(a, b) == key for a, b in zip(s, sector)]) & (g > 0) & (n > 1)
        if not mask.any():
            continue
        x, y = n[mask], g[mask]
        ax.loglog(x, y, "o-", label=f"s={int(key[0])} {key[1]}".strip())
        if len(x) >= 2:
            slope, icept = np.polyfit(np.log(x), np.log(y), 1)
            ax.loglog(x, np.exp(icept) * x**slope, "--", color="gray")
            ax.annotate(f"slope {slope:.3f}", (x[-1], y[-1]), textcoords="offset points", xytext=(-60, 10))
    ax.set_xlabel("n")
    ax.set_ylabel("gap")
    ax.legend(fontsize=8)
    return _save(fig, Path(out))


def mixing_plot(csv_paths, out: str | Path) -> Path:
    """TV distance against t for each curve file."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for p in csv_paths:
        meta, header, rows = read_csv(p)
        t = _column(header, rows, "t")
        d = _column(header, rows, "tv_distance")
        label = Path(p).stem
        ax.semilogy(t, np.maximum(d, 1e-300), label=label)
    ax.axhline(0.25, color="gray", lw=0.8, ls=":")
    ax.set_xlabel("t")
    ax.set_ylabel("TV distance")
    ax.legend(fontsize=7)
    return _save(fig, Path(out))


def density_overlay(density_csv: str | Path, hist_json: str | Path | None, out: str | Path) -> Path:
    """Excursion-area density, optionally over a Monte Carlo histogram."""
    _, header, rows = read_csv(density_csv)
    x = _column(header, rows, "x")
    f = _column(header, rows, "f_A(x)")
    fig, ax = plt.subplots(figsize=(5, 4))
    if hist_json is not None:
        h = read_json(hist_json)
        try:
            grid, counts = np.asarray(h["grid"], float), np.asarray(h["counts"], float)
        except KeyError as exc:
            raise ReportError(f"{hist_json}: missing {exc}") from exc
        if len(grid) != len(counts) + 1:
            raise ReportError(f"{hist_json}: grid/counts length mismatch")
        ax.stairs(counts, grid, fill=True, alpha=0.35, label="Monte Carlo")
    ax.plot(x, f, color="black", label="f_A")
    ax.set_xlabel("scaled area")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    return _save(fig, Path(out))
