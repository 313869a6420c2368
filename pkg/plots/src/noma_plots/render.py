"""Render sweep CSVs into the two comparison figures.

Input is the harness CSV (header
corr,scheme,trial,seed,sum_rate_bps_hz,iterations,wall_ms,overhead_bits).
`rate_vs_corr` draws one line per scheme with mean +/- standard-error
bands over trials; `overhead_bars` draws one bar per coordination pattern.
The input file is never modified; output format follows the output path's
extension.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

REQUIRED_COLUMNS = ("corr", "scheme", "sum_rate_bps_hz", "overhead_bits")

KINDS = ("rate_vs_corr", "overhead_bars")


@dataclass
class FigureSpec:
    input_csv: str
    output_image: str
    kind: str
    schemes: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not Path(self.input_csv).exists():
            raise FileNotFoundError(self.input_csv)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"CSV is missing columns: {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"CSV has no data rows: {path}")
    return rows


def mean_and_stderr(values: list[float]) -> tuple[float, float]:
    """Sample mean and standard error (ddof=1; zero for a single value)."""
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def aggregate_rate(rows: list[dict], schemes=()) -> dict:
    """Per scheme: sorted corr grid with mean and standard error of the rate."""
    groups: dict[str, dict[float, list[float]]] = {}
    for row in rows:
        scheme = row["scheme"]
        if schemes and scheme not in schemes:
            continue
        corr = float(row["corr"])
        groups.setdefault(scheme, {}).setdefault(corr, []).append(
            float(row["sum_rate_bps_hz"])
        )
    out = {}
    for scheme, by_corr in sorted(groups.items()):
        corrs = sorted(by_corr)
        stats = [mean_and_stderr(by_corr[c]) for c in corrs]
        out[scheme] = (
            corrs,
            [m for m, _ in stats],
            [s for _, s in stats],
        )
    return out


def aggregate_overhead(rows: list[dict], schemes=()) -> dict:
    """Per coordination pattern: mean overhead bits."""
    groups: dict[str, list[float]] = {}
    for row in rows:
        scheme = row["scheme"]
        if schemes and scheme not in schemes:
            continue
        groups.setdefault(scheme, []).append(float(row["overhead_bits"]))
    if not groups:
        raise ValueError("no rows left after scheme filtering")
    return {scheme: mean_and_stderr(vals)[0] for scheme, vals in sorted(groups.items())}


def render(spec: FigureSpec) -> Path:
    """Draw the requested figure; returns the written image path."""
    rows = read_rows(spec.input_csv)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    try:
        if spec.kind == "rate_vs_corr":
            series = aggregate_rate(rows, spec.schemes)
            if not series:
                raise ValueError("no rows left after scheme filtering")
            for scheme, (corrs, means, errs) in series.items():
                ax.plot(corrs, means, marker="o", label=scheme)
                lo = [m - e for m, e in zip(means, errs)]
                hi = [m + e for m, e in zip(means, errs)]
                ax.fill_between(corrs, lo, hi, alpha=0.2)
            ax.set_xlabel("data channel correlation")
            ax.set_ylabel("system sum rate (bit/s/Hz)")
            ax.legend()
        else:
            heights = aggregate_overhead(rows, spec.schemes)
            labels = list(heights)
            ax.bar(labels, [heights[s] for s in labels])
            ax.set_ylabel("information overhead (bits)")
            ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        out = Path(spec.output_image)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out)
    finally:
        plt.close(fig)
    return out
