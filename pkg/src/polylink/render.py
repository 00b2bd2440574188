"""Figure rendering: one realization as a mechanism diagram, or a traced
curve as a polyline.  Output format follows the file extension (svg, png,
pdf); vertex colors are deterministic functions of the vertex labels."""

from __future__ import annotations

import colorsys
import hashlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .core import AbstractLinkage, Realization


def _label_color(label):
    if not label:
        return (0.1, 0.1, 0.1)
    h = hashlib.md5(label.encode()).digest()
    hue = h[0] / 255.0
    return colorsys.hsv_to_rgb(hue, 0.75, 0.65)


def render_realization(
    linkage: AbstractLinkage,
    phi: Realization,
    path: str,
    inputs=(),
    outputs=(),
    title=None,
) -> None:
    fig, ax = plt.subplots(figsize=(7, 7))
    pos = phi.positions
    for e in linkage.edges:
        a, b = pos[e.u], pos[e.v]
        ax.plot([a.real, b.real], [a.imag, b.imag], color="#777777", lw=0.8, zorder=1)
    for c in linkage.collinear:
        a, b = pos[c.a], pos[c.c]
        ax.plot([a.real, b.real], [a.imag, b.imag], color="#bbaa55", lw=0.6,
                ls="--", zorder=1)
    labels = {v.index: v.label for v in linkage.vertices}
    xs = [pos[v.index].real for v in linkage.vertices]
    ys = [pos[v.index].imag for v in linkage.vertices]
    colors = [_label_color(labels[v.index]) for v in linkage.vertices]
    ax.scatter(xs, ys, s=14, c=colors, zorder=2)
    marked = {w for w, _ in linkage.marking}
    for v in linkage.vertices:
        z = pos[v.index]
        if v.index in inputs:
            ax.plot(z.real, z.imag, "s", ms=10, mfc="none", mec="tab:blue")
        if v.index in outputs:
            ax.plot(z.real, z.imag, "o", ms=11, mfc="none", mec="tab:red")
        if v.index in marked:
            ax.plot(z.real, z.imag, "x", ms=7, color="black")
    ax.set_aspect("equal")
    ax.margins(0.05)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_trace(points, path: str, title=None, closed=False) -> None:
    """Polyline of traced input positions (first coordinate pair)."""
    fig, ax = plt.subplots(figsize=(6, 6))
    if points and len(points[0]) >= 2:
        xs = [p[0].real for p in points]
        ys = [p[1].real for p in points]
    else:
        xs = [p[0].real for p in points]
        ys = [p[0].imag for p in points]
    if closed and points:
        xs = xs + [xs[0]]
        ys = ys + [ys[0]]
    ax.plot(xs, ys, "-", lw=1.0, color="tab:blue")
    ax.plot(xs[:1], ys[:1], "o", ms=6, color="tab:red")
    ax.set_aspect("equal")
    ax.margins(0.05)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
