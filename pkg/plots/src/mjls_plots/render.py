"""Render convergence figures from an experiment runs directory.

Input contract (produced by the mjlspg experiment harness):

    <runs-dir>/<NsxDxK>/<method>/mean.csv

with CSV columns iteration, cost, normalized_gap, grad_norm, step_norm,
wall_time_s, diverged_count. One figure per size directory, one labeled
curve per method, y axis the normalized cost difference.

All inputs are parsed and validated before the first image is written, so
a malformed CSV never leaves a partial figure set behind.
"""

import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

EXPECTED_HEADER = [
    "iteration",
    "cost",
    "normalized_gap",
    "grad_norm",
    "step_norm",
    "wall_time_s",
    "diverged_count",
]

METHOD_ORDER = ["gd", "ngd", "mf-gd", "mf-ngd"]


class MalformedCsv(Exception):
    """A mean.csv that does not follow the harness schema."""


@dataclass(frozen=True)
class PlotSpec:
    runs_dir: str
    out_dir: str = "."
    log_scale: bool = True
    figsize: tuple = (8.0, 5.0)
    dpi: int = 120


def load_mean_curve(path):
    """Parse one mean.csv into (iterations, normalized gaps)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != EXPECTED_HEADER:
        raise MalformedCsv(f"{path}: header does not match the trace schema")
    iterations, gaps = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(EXPECTED_HEADER):
            raise MalformedCsv(f"{path}:{lineno}: expected "
                               f"{len(EXPECTED_HEADER)} columns")
        try:
            values = [float(cell) for cell in row]
        except ValueError as err:
            raise MalformedCsv(f"{path}:{lineno}: {err}") from None
        iterations.append(values[0])
        gaps.append(values[2])
    if not iterations:
        raise MalformedCsv(f"{path}: no data rows")
    return iterations, gaps


def discover_sizes(runs_dir):
    """Size directories holding at least one method with a mean.csv."""
    root = Path(runs_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"runs directory {runs_dir} does not exist")
    sizes = {}
    for size_dir in sorted(root.iterdir()):
        if not size_dir.is_dir():
            continue
        methods = {
            m.name: m / "mean.csv"
            for m in sorted(size_dir.iterdir())
            if (m / "mean.csv").is_file()
        }
        if methods:
            sizes[size_dir.name] = methods
    if not sizes:
        raise FileNotFoundError(f"no mean.csv files under {runs_dir}")
    return sizes


def collect_curves(spec):
    """Validate and load every curve, keyed by size label then method.

    Methods listed in METHOD_ORDER but absent from a size directory are
    reported on stderr and skipped; unknown extra directories are plotted
    after the known ones.
    """
    sizes = discover_sizes(spec.runs_dir)
    curves = {}
    for label, methods in sizes.items():
        ordered = [m for m in METHOD_ORDER if m in methods]
        ordered += [m for m in sorted(methods) if m not in METHOD_ORDER]
        for missing in (m for m in METHOD_ORDER if m not in methods):
            print(f"warning: {label}: no {missing} runs, curve omitted",
                  file=sys.stderr)
        curves[label] = {m: load_mean_curve(methods[m]) for m in ordered}
    return curves


def figure_name(size_label):
    """fig_<modes>.png from a NsxDxK directory name."""
    leading = size_label.split("x", 1)[0]
    return f"fig_{leading}.png"


def render(spec):
    """Write one figure per size; returns the written paths."""
    curves = collect_curves(spec)
    out_root = Path(spec.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    written = []
    for label, methods in curves.items():
        fig, ax = plt.subplots(figsize=spec.figsize)
        for method, (iterations, gaps) in methods.items():
            ax.plot(iterations, gaps, label=method)
        if spec.log_scale:
            ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel("normalized cost difference")
        ax.set_title(label)
        ax.legend()
        ax.grid(True, alpha=0.4)
        path = out_root / figure_name(label)
        fig.savefig(path, dpi=spec.dpi)
        plt.close(fig)
        written.append(path)
    return written
