"""Information-plane, compression-factor, MI/accuracy and benchmark figures as SVG."""

from __future__ import annotations

import math
from typing import Sequence

from .analysis import RunSummary, pooled_by_lambda
from .estimator import BenchmarkRow
from .experiment import RunRecord
from .svg import PALETTE, Figure, gradient_color, nice_ticks, padded_range

# Outline colour distinguishes layers in the information plane; fill encodes the epoch.
_MARKER_STROKES = ["#000000", "#d62728", "#1f77b4", "#2ca02c"]


def plot_ip(record: RunRecord, layer_offsets: Sequence[int], output_path) -> Figure:
    """I(X;T) vs I(T;Y) per recorded epoch, one curve per layer, colour = epoch."""
    trajs = []
    for off in layer_offsets:
        if off not in record.layer_offsets:
            raise KeyError(f"run {record.run_id} has no layer {off}")
        trajs.append(record.trajectory(off))
    class_count = record.header.get("class_count", 2)
    ref = math.log2(class_count)
    xs = [v for t in trajs for v in t.mi_xt]
    ys = [v for t in trajs for v in t.mi_ty]
    fig = Figure(680, 460)
    ax = fig.axes(padded_range(xs), padded_range(ys, include=(0.0, ref)),
                  "I(X;T) [bits]", "I(T;Y) [bits]", title=record.run_id,
                  margins=(70, 40, 130, 50))
    fig.line(ax.left, ax.py(ref), ax.left + ax.width, ax.py(ref), "#888", 1.0, dash="4 3")
    fig.text(ax.left + ax.width - 4, ax.py(ref) - 4, f"log2({class_count})", 10, "end", color="#666")
    first = min(t.epochs[0] for t in trajs)
    last = max(t.epochs[-1] for t in trajs)
    span = max(last - first, 1)
    legend = []
    for i, t in enumerate(trajs):
        stroke = _MARKER_STROKES[i % len(_MARKER_STROKES)]
        fig.polyline([(ax.px(x), ax.py(y)) for x, y in zip(t.mi_xt, t.mi_ty)], stroke, 0.6)
        for e, x, y in zip(t.epochs, t.mi_xt, t.mi_ty):
            fig.circle(ax.px(x), ax.py(y), 3.0, gradient_color((e - first) / span), stroke=stroke)
        legend.append((f"layer {t.layer_offset}", stroke))
    fig.legend(ax.left + ax.width + 14, ax.top + 10, legend)
    bar_x, bar_y = ax.left + ax.width + 14, ax.top + 30 + 16 * len(legend)
    for k in range(20):
        fig.rect(bar_x, bar_y + k * 8, 12, 8, gradient_color(k / 19))
    fig.text(bar_x + 16, bar_y + 8, f"epoch {first}", 10, "start")
    fig.text(bar_x + 16, bar_y + 160, f"epoch {last}", 10, "start")
    fig.save(output_path)
    return fig


def _lambda_colors(lambdas: Sequence[float]) -> dict[float, str]:
    ordered = sorted(set(lambdas))
    if len(ordered) == 1:
        return {ordered[0]: gradient_color(0.0)}
    return {lam: gradient_color(i / (len(ordered) - 1)) for i, lam in enumerate(ordered)}


def plot_compression_scatter(summaries: Sequence[RunSummary], output_path) -> Figure:
    """Compression factor per run and layer, grouped by (dataset, group, layer)."""
    if not summaries:
        raise ValueError("no summaries to plot")
    cats = sorted({(s.dataset, s.group, off) for s in summaries for off in s.layers},
                  key=lambda c: (c[0], c[1], c[2]))
    colors = _lambda_colors([s.weight_decay for s in summaries])
    fig = Figure(max(480, 90 * len(cats) + 200), 460)
    ticks = [(i, f"{d}/{g}/{o}") for i, (d, g, o) in enumerate(cats)]
    ax = fig.axes((-0.5, len(cats) - 0.5), (0.0, 1.0), "dataset / group / layer",
                  "compression factor rho", margins=(70, 40, 120, 60), x_ticks=ticks,
                  y_ticks=[0.0, 0.25, 0.5, 0.75, 1.0])
    fig.line(ax.left, ax.py(0.25), ax.left + ax.width, ax.py(0.25), "#999", 1.0, dash="4 3")
    ordered_lams = sorted(colors)
    for s in summaries:
        for off, ls in sorted(s.layers.items()):
            i = cats.index((s.dataset, s.group, off))
            # deterministic horizontal spread by weight decay rank
            jitter = 0.0
            if len(ordered_lams) > 1:
                jitter = 0.6 * (ordered_lams.index(s.weight_decay) / (len(ordered_lams) - 1) - 0.5)
            fig.circle(ax.px(i + jitter), ax.py(ls.rho), 3.5, colors[s.weight_decay], stroke="#333")
    fig.legend(ax.left + ax.width + 14, ax.top + 10,
               [(f"lambda={lam:g}", colors[lam]) for lam in ordered_lams])
    fig.save(output_path)
    return fig


def plot_mi_accuracy(summaries: Sequence[RunSummary], layer_offset: int, output_path) -> Figure:
    """Window-mean I(X;T) and accuracy per weight decay with min-max range bars."""
    points = pooled_by_lambda(summaries, layer_offset)
    if not points:
        raise KeyError(f"no summary contains layer {layer_offset}")
    n = len(points)
    fig = Figure(max(480, 50 * n + 260), 460)
    mi_rng = padded_range([p["mi_min"] for p in points] + [p["mi_max"] for p in points])
    acc_rng = padded_range([p["acc_min"] for p in points] + [p["acc_max"] for p in points])
    ticks = [(i, f"{p['lambda']:g}") for i, p in enumerate(points)]
    ax = fig.axes((-0.5, n - 0.5), mi_rng, "weight decay lambda", "I(X;T) [bits]",
                  title=f"layer {layer_offset}", margins=(70, 40, 90, 50), x_ticks=ticks)
    # right-hand accuracy axis
    def scale(v: float) -> float:
        return ax.top + ax.height - (v - acc_rng[0]) / (acc_rng[1] - acc_rng[0]) * ax.height

    for v in nice_ticks(*acc_rng):
        if acc_rng[0] <= v <= acc_rng[1]:
            fig.text(ax.left + ax.width + 6, scale(v) + 4, f"{v:g}", 10, "start", color=PALETTE[1])
    fig.text(fig.width - 16, ax.top + ax.height / 2, "accuracy [%]", 12, rotate=90,
             color=PALETTE[1])
    series = [
        ("mi", PALETTE[0], ax.py, -0.08),
        ("acc", PALETTE[1], scale, 0.08),
    ]
    for key, color, to_y, dx in series:
        pts = []
        for i, p in enumerate(points):
            x = ax.px(i + dx)
            fig.line(x, to_y(p[f"{key}_min"]), x, to_y(p[f"{key}_max"]), color, 1.2)
            fig.line(x - 4, to_y(p[f"{key}_min"]), x + 4, to_y(p[f"{key}_min"]), color, 1.2)
            fig.line(x - 4, to_y(p[f"{key}_max"]), x + 4, to_y(p[f"{key}_max"]), color, 1.2)
            pts.append((x, to_y(p[f"{key}_mean"])))
        fig.polyline(pts, color, 1.0, dash="3 2")
        for x, y in pts:
            fig.circle(x, y, 3.5, color)
    fig.legend(ax.left + 10, ax.top + 12, [("I(X;T)", PALETTE[0]), ("accuracy", PALETTE[1])])
    fig.save(output_path)
    return fig


def plot_entropy_benchmark(rows: Sequence[BenchmarkRow], output_path) -> Figure:
    """Mean plug-in estimate vs dimension, with dotted true entropy and the log2 N ceiling."""
    if not rows:
        raise ValueError("no benchmark rows to plot")
    ps = sorted({r.p for r in rows})
    dims = [r.dim for r in rows]
    n = rows[0].n
    ceiling = math.log2(n)
    ys = [r.true_entropy for r in rows] + [r.mean_estimate for r in rows] + [ceiling]
    fig = Figure(680, 460)
    ax = fig.axes(padded_range(dims), padded_range(ys, include=(0.0,)), "dimension D",
                  "entropy [bits]", title=f"plug-in entropy, N={n}", margins=(70, 40, 120, 50))
    fig.line(ax.left, ax.py(ceiling), ax.left + ax.width, ax.py(ceiling), "#888", 1.0, dash="6 3")
    fig.text(ax.left + 4, ax.py(ceiling) - 4, "log2 N", 10, "start", color="#666")
    legend = []
    for i, p in enumerate(ps):
        color = PALETTE[i % len(PALETTE)]
        sel = sorted((r for r in rows if r.p == p), key=lambda r: r.dim)
        fig.polyline([(ax.px(r.dim), ax.py(r.true_entropy)) for r in sel], color, 1.2, dash="2 3")
        fig.polyline([(ax.px(r.dim), ax.py(r.mean_estimate)) for r in sel], color, 1.6)
        for r in sel:
            fig.circle(ax.px(r.dim), ax.py(r.mean_estimate), 2.5, color)
        legend.append((f"p={p:g}", color))
    fig.legend(ax.left + ax.width + 14, ax.top + 10, legend)
    fig.text(ax.left + ax.width + 14, ax.top + 20 + 16 * len(ps), "dotted: true H", 10, "start")
    fig.save(output_path)
    return fig
