"""Figure rendering for noma-forge sweep CSVs."""

__version__ = "0.1.0"

from .render import FigureSpec, aggregate_overhead, aggregate_rate, mean_and_stderr, render
