"""Static SVG line charts: bias vs epoch, accuracy vs epoch, bias vs fraction."""
from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from biascope.errors import UserError  # noqa: E402
from biascope.training.metrics import read_metrics  # noqa: E402


def series_from_metrics(path, metric: str | None = None) -> dict[str, list[tuple[float, float]]]:
    """Group metrics.csv rows into ``{"phase/metric": [(epoch, value), ...]}``."""
    series = defaultdict(list)
    for r in read_metrics(path):
        series[f"{r['phase']}/{r['metric']}"].append((float(r["epoch"]), float(r["value"])))
    if metric:
        series = {k: v for k, v in series.items() if metric in k.split("/", 1)[1]}
    return {k: sorted(v) for k, v in sorted(series.items())}


def series_from_report(path) -> dict[str, list[tuple[float, float]]]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if "fractions" not in obj:
        raise UserError(f"{path}: not a sweep report")
    pts = [(f, b) for f, b in zip(obj["fractions"], obj["converged_bias"]) if b is not None]
    return {"converged bias": pts} if pts else {}


def render_svg(series: dict, out_path, xlabel: str, ylabel: str, title: str = "") -> Path:
    if not series or not any(series.values()):
        raise UserError("nothing to plot")
    plt.rcParams["svg.hashsalt"] = "biascope"
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, pts in series.items():
        xs, ys = zip(*pts)
        ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return out_path


def plot_file(input_path, out_path, metric: str | None = None) -> Path:
    input_path = Path(input_path)
    if not input_path.exists():
        raise UserError(f"{input_path} does not exist")
    if input_path.suffix == ".json":
        return render_svg(series_from_report(input_path), out_path, "dataset fraction", "shape bias")
    series = series_from_metrics(input_path, metric)
    if metric is None and any("bias" in k for k in series):
        series = {k: v for k, v in series.items() if "bias" in k}
    ylabel = "shape bias" if all("bias" in k for k in series) else "value"
    return render_svg(series, out_path, "epoch", ylabel)
