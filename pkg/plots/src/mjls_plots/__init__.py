"""Figures from experiment CSV trees: normalized cost difference per iteration."""

__version__ = "0.1.0"

from .render import MalformedCsv, PlotSpec, collect_curves, render

__all__ = ["MalformedCsv", "PlotSpec", "collect_curves", "render"]
