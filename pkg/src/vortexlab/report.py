"""Deterministic JSON reports with provenance tags, and static SVG figures.

Every reported constant is a ``{"value": ..., "provenance": tag}`` pair.
Tags: ``input`` (user parameter), ``closed-form`` (explicit formula),
``computed`` (numerical linear algebra or quadrature, no time stepping),
``measured`` (read off a simulation).
"""

from __future__ import annotations

import json
import math
import platform
from typing import Iterable, Sequence

import numpy as np
import scipy

from . import __version__
from .export import fmt

__all__ = ["tagged", "versions", "to_json", "svg_document", "svg_polylines", "svg_scatter", "PROVENANCE_TAGS"]

PROVENANCE_TAGS = ("input", "closed-form", "computed", "measured")


def tagged(value, provenance: str) -> dict:
    if provenance not in PROVENANCE_TAGS:
        raise ValueError(f"unknown provenance tag {provenance!r}")
    return {"value": value, "provenance": provenance}


def versions() -> dict:
    return {"vortexlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no infinities; they are spelled as strings
        return fmt(x) if math.isfinite(x) else json.dumps(fmt(x))
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode({"re": obj.real, "im": obj.imag}, indent, level)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def to_json(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits and insertion-ordered keys."""
    return _encode(obj, indent, 0) + "\n"


# -- SVG ---------------------------------------------------------------------

_PALETTE = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98", "#b9770e", "#2e4053")


class _Frame:
    def __init__(self, xs, ys, width, height, margin):
        x0, x1 = float(np.min(xs)), float(np.max(xs))
        y0, y1 = float(np.min(ys)), float(np.max(ys))
        span = max(x1 - x0, y1 - y0, 1e-300)
        self.scale = min((width - 2 * margin) / max(x1 - x0, 1e-12 * span),
                         (height - 2 * margin) / max(y1 - y0, 1e-12 * span))
        self.cx, self.cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        self.w, self.h = width, height

    def __call__(self, x, y):
        # equal aspect, y axis pointing up
        return (self.w / 2 + (x - self.cx) * self.scale, self.h / 2 - (y - self.cy) * self.scale)


def _num(v: float) -> str:
    return f"{v:.3f}"


def svg_document(body: Sequence[str], width: int, height: int, title: str) -> str:
    head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f'<title>{title}</title>\n'
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n')
    return head + "".join(line + "\n" for line in body) + "</svg>\n"


def svg_polylines(curves: Iterable[tuple[str, np.ndarray]], title: str, width: int = 640, height: int = 480,
                  closed: bool = True, markers: Iterable[complex] = (), margin: int = 40) -> str:
    """Closed (or open) complex-valued polylines, one colour per curve, with a legend."""
    curves = [(label, np.asarray(z, dtype=complex)) for label, z in curves]
    allz = np.concatenate([z for _, z in curves] + [np.asarray(list(markers), dtype=complex)])
    frame = _Frame(allz.real, allz.imag, width, height, margin)
    body = []
    for k, (label, z) in enumerate(curves):
        pts = " ".join(f"{_num(p[0])},{_num(p[1])}" for p in (frame(v.real, v.imag) for v in z))
        tag = "polygon" if closed else "polyline"
        body.append(f'<{tag} points="{pts}" fill="none" stroke="{_PALETTE[k % len(_PALETTE)]}" stroke-width="1.5"/>')
        body.append(f'<text x="10" y="{20 + 16 * k}" font-family="sans-serif" font-size="12" '
                    f'fill="{_PALETTE[k % len(_PALETTE)]}">{label}</text>')
    for m in markers:
        x, y = frame(m.real, m.imag)
        body.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="3" fill="black"/>')
    return svg_document(body, width, height, title)


def _colour(t: float) -> str:
    # blue -> white -> red
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        s = t / 0.5
        r, g, b = int(40 + 215 * s), int(80 + 175 * s), 255
    else:
        s = (t - 0.5) / 0.5
        r, g, b = 255, int(255 - 175 * s), int(255 - 215 * s)
    return f"#{r:02x}{g:02x}{b:02x}"


def svg_scatter(points: np.ndarray, values: np.ndarray, title: str, outline: np.ndarray | None = None,
                width: int = 640, height: int = 480, margin: int = 40, radius: float = 2.5) -> str:
    """Points coloured by value (rank-normalised so outliers near corners do not wash it out)."""
    pts = np.asarray(points, dtype=complex)
    vals = np.asarray(values, dtype=float)
    ref = pts if outline is None else np.concatenate([pts, np.asarray(outline, dtype=complex)])
    frame = _Frame(ref.real, ref.imag, width, height, margin)
    order = np.argsort(np.argsort(vals, kind="stable"), kind="stable")
    t = order / max(len(vals) - 1, 1)
    body = []
    for p, tv in zip(pts, t):
        x, y = frame(p.real, p.imag)
        body.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="{radius}" fill="{_colour(tv)}"/>')
    if outline is not None:
        pl = " ".join(f"{_num(a)},{_num(b)}" for a, b in (frame(v.real, v.imag) for v in outline))
        body.append(f'<polygon points="{pl}" fill="none" stroke="black" stroke-width="1.2"/>')
    return svg_document(body, width, height, title)
