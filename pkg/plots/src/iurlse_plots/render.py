"""Render metric-vs-iteration figures from aggregated report CSVs.

This tool is a pure view: it plots exactly the means and standard errors the
report file carries (band = mean +/- 1.96 * se) and writes the plotted arrays
to a JSON sidecar next to the image so the figure contents can be asserted
without image parsing.  Input is the report CSV schema:
``schema_version,method,t,metric,mean,se,n`` with schema_version 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

SCHEMA_VERSION = 1
METRICS = ("f1", "precision", "recall")
BAND_MULTIPLIER = 1.96
REPORT_COLUMNS = ["schema_version", "method", "t", "metric", "mean", "se", "n"]


class RenderError(ValueError):
    pass


@dataclass
class FigureSpec:
    csv_path: Path
    metric: str
    out_path: Path
    title: str | None = None
    styles: dict = field(default_factory=dict)

    def __post_init__(self):
        self.csv_path = Path(self.csv_path)
        self.out_path = Path(self.out_path)
        if self.metric not in METRICS:
            raise RenderError(f"unknown metric {self.metric!r}; choose from {METRICS}")


def load_series(csv_path: Path, metric: str) -> dict:
    """Per-method series {method: {"t": [...], "mean": [...], "se": [...]}}."""
    try:
        fh = open(csv_path, newline="")
    except OSError as exc:
        raise RenderError(f"cannot read {csv_path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_COLUMNS:
            raise RenderError(
                f"{csv_path}: malformed report header {reader.fieldnames}; want {REPORT_COLUMNS}"
            )
        rows = []
        for row in reader:
            if row["schema_version"] != str(SCHEMA_VERSION):
                raise RenderError(f"{csv_path}: schema_version mismatch")
            if row["metric"] == metric:
                rows.append((row["method"], int(row["t"]), float(row["mean"]), float(row["se"])))
    if not rows:
        raise RenderError(f"{csv_path}: no rows for metric {metric!r}")
    series: dict = {}
    for method, t, mean, se in sorted(rows):
        slot = series.setdefault(method, {"t": [], "mean": [], "se": []})
        slot["t"].append(t)
        slot["mean"].append(mean)
        slot["se"].append(se)
    return series


def render(spec: FigureSpec) -> Path:
    """Write the figure and its JSON data sidecar; returns the sidecar path."""
    series = load_series(spec.csv_path, spec.metric)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for method, data in series.items():
        style = spec.styles.get(method, {})
        (line,) = ax.plot(data["t"], data["mean"], label=method, **style)
        lower = [m - BAND_MULTIPLIER * s for m, s in zip(data["mean"], data["se"])]
        upper = [m + BAND_MULTIPLIER * s for m, s in zip(data["mean"], data["se"])]
        ax.fill_between(data["t"], lower, upper, alpha=0.2, color=line.get_color())
    ax.set_xlabel("iteration")
    ax.set_ylabel(spec.metric)
    ax.set_ylim(-0.02, 1.02)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend()
    fig.tight_layout()
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out_path, dpi=120)
    plt.close(fig)

    sidecar = spec.out_path.with_suffix(spec.out_path.suffix + ".json")
    with open(sidecar, "w") as fh:
        json.dump(
            {
                "schema_version": SCHEMA_VERSION,
                "metric": spec.metric,
                "band_multiplier": BAND_MULTIPLIER,
                "source": str(spec.csv_path),
                "series": series,
            },
            fh,
            indent=1,
            sort_keys=True,
        )
    return sidecar


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="iurlse-plot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one metric from a report CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(csv_path=args.csv, metric=args.metric, out_path=args.out, title=args.title)
        render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
