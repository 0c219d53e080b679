"""Russell circumplex placement of quadrant probabilities, and SVG plots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from xml.sax.saxutils import escape

PROB_TOL = 1e-6
CONTAIN_TOL = 1e-9


class Quadrant(IntEnum):
    Q1 = 1  # happy: +valence, +arousal
    Q2 = 2  # angry: -valence, +arousal
    Q3 = 3  # sad: -valence, -arousal
    Q4 = 4  # calm: +valence, -arousal

    @property
    def mood(self):
        return _MOODS[self]

    @property
    def signs(self):
        return _SIGNS[self]

    @classmethod
    def parse(cls, text):
        """Accept 'Q1'..'Q4', '1'..'4' or a mood word, case-insensitively."""
        key = str(text).strip().lower()
        for q in cls:
            if key in (q.name.lower(), str(q.value), q.mood):
                return q
        raise ValueError(f"unknown quadrant {text!r}")


_MOODS = {Quadrant.Q1: "happy", Quadrant.Q2: "angry", Quadrant.Q3: "sad", Quadrant.Q4: "calm"}
_SIGNS = {Quadrant.Q1: (1, 1), Quadrant.Q2: (-1, 1), Quadrant.Q3: (-1, -1), Quadrant.Q4: (1, -1)}


@dataclass(frozen=True)
class CircumplexPoint:
    x: float
    y: float
    r: float = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius must be positive")
        if self.x * self.x + self.y * self.y > self.r * self.r + CONTAIN_TOL:
            raise ValueError(f"point ({self.x}, {self.y}) lies outside the disc of radius {self.r}")


@dataclass(frozen=True)
class EmotionTarget:
    """Either a quadrant (aimed at its centroid) or an explicit (valence, arousal) point."""

    quadrant: Quadrant | None = None
    point: tuple | None = None

    def __post_init__(self):
        if (self.quadrant is None) == (self.point is None):
            raise ValueError("give exactly one of quadrant or point")

    def coordinates(self, r=1.0):
        if self.quadrant is not None:
            sx, sy = self.quadrant.signs
            return sx * r / 2.0, sy * r / 2.0
        v, a = self.point
        if v * v + a * a > r * r + CONTAIN_TOL:
            raise ValueError(f"target ({v}, {a}) outside the disc of radius {r}")
        return float(v), float(a)

    def describe(self):
        if self.quadrant is not None:
            return f"{self.quadrant.name} ({self.quadrant.mood})"
        return f"({self.point[0]:g}, {self.point[1]:g})"

    @classmethod
    def parse(cls, text):
        """'Q3', 'sad', ... for quadrants; 'v,a' for an explicit point."""
        if "," in str(text):
            parts = str(text).split(",")
            if len(parts) != 2:
                raise ValueError(f"bad target point {text!r}")
            try:
                v, a = (float(p) for p in parts)
            except ValueError:
                raise ValueError(f"bad target point {text!r}") from None
            if not (math.isfinite(v) and math.isfinite(a)):
                raise ValueError(f"bad target point {text!r}")
            return cls(point=(v, a))
        return cls(quadrant=Quadrant.parse(text))


def check_probs(probs, tol=PROB_TOL):
    p = tuple(float(v) for v in probs)
    if len(p) != 4:
        raise ValueError(f"expected 4 probabilities, got {len(p)}")
    if any(not math.isfinite(v) or v < -tol for v in p) or abs(sum(p) - 1.0) > tol:
        raise ValueError(f"not a probability vector: {p}")
    return p


class _Counter:
    normalizations = 0


NORMALIZATION_COUNTER = _Counter()


def map_to_plane(probs, r=1.0):
    """Place a 4-quadrant probability vector on the circumplex disc.

    x = (p1 - p3) * r, y = (p2 - p4) * r; a point farther than r from the
    origin is pulled back onto the circle along its ray.  Valid probability
    vectors never trigger that rescaling (|x| + |y| <= r), but the guard is
    kept and every activation is counted in ``NORMALIZATION_COUNTER``.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    p1, p2, p3, p4 = check_probs(probs)
    x = (p1 - p3) * r
    y = (p2 - p4) * r
    d = math.sqrt(x * x + y * y)
    if d > r:
        NORMALIZATION_COUNTER.normalizations += 1
        x = x / d * r
        y = y / d * r
    return CircumplexPoint(x, y, r)


def distance(point, target):
    """Euclidean distance from ``point`` to ``target`` on the same disc."""
    if isinstance(target, CircumplexPoint):
        if not math.isclose(target.r, point.r):
            raise ValueError("radius mismatch")
        tx, ty = target.x, target.y
    else:
        tx, ty = target.coordinates(point.r)
    return math.hypot(point.x - tx, point.y - ty)


# --- SVG -------------------------------------------------------------------

@dataclass(frozen=True)
class MarkerStyle:
    color: str = "#1f77b4"
    shape: str = "circle"  # circle | square | diamond | triangle
    size: float = 7.0


BEFORE_STYLE = MarkerStyle("#1f77b4", "circle")
AFTER_STYLE = MarkerStyle("#d62728", "diamond")
CANDIDATE_STYLE = MarkerStyle("#9e9e9e", "circle", 3.0)


@dataclass(frozen=True)
class PlotOptions:
    size: int = 480
    margin: int = 60
    background: str = "#ffffff"
    circle_color: str = "#333333"
    axis_color: str = "#888888"
    text_color: str = "#222222"
    target_style: MarkerStyle = field(default_factory=lambda: MarkerStyle("#2ca02c", "square", 8.0))
    font_family: str = "sans-serif"
    title: str = "Russell circumplex"


def _f(v):
    text = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def _marker(cx, cy, style, title):
    s = style.size
    common = f'fill="{escape(style.color)}" stroke="#000000" stroke-width="0.8"'
    if style.shape == "square":
        body = f'<rect x="{_f(cx - s)}" y="{_f(cy - s)}" width="{_f(2 * s)}" height="{_f(2 * s)}" {common}>'
        close = "</rect>"
    elif style.shape == "diamond":
        pts = f"{_f(cx)},{_f(cy - s)} {_f(cx + s)},{_f(cy)} {_f(cx)},{_f(cy + s)} {_f(cx - s)},{_f(cy)}"
        body, close = f'<polygon points="{pts}" {common}>', "</polygon>"
    elif style.shape == "triangle":
        pts = f"{_f(cx)},{_f(cy - s)} {_f(cx + s)},{_f(cy + s)} {_f(cx - s)},{_f(cy + s)}"
        body, close = f'<polygon points="{pts}" {common}>', "</polygon>"
    else:
        body = f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(s)}" {common}>'
        close = "</circle>"
    return f'{body}<title>{escape(title)}</title>{close}'


def plot_svg(points, target=None, options=PlotOptions()):
    """Render labelled points (and an optional target) on the circumplex.

    ``points`` is a sequence of ``(label, CircumplexPoint, MarkerStyle)``.
    Valence runs left to right, arousal bottom to top.  Output is a
    deterministic SVG 1.1 string.
    """
    points = list(points)
    radii = {p.r for _, p, _ in points}
    if len(radii) > 1:
        raise ValueError("all points must share one radius")
    r = radii.pop() if radii else 1.0
    half = options.size / 2.0
    c = options.margin + half
    total = options.size + 2 * options.margin
    scale = half / r

    def to_px(x, y):
        return c + x * scale, c - y * scale

    font = f'font-family="{escape(options.font_family)}" fill="{escape(options.text_color)}"'
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{total}" height="{total}" '
        f'viewBox="0 0 {total} {total}">',
        f'<title>{escape(options.title)}</title>',
        f'<rect x="0" y="0" width="{total}" height="{total}" fill="{escape(options.background)}"/>',
        f'<circle id="boundary" cx="{_f(c)}" cy="{_f(c)}" r="{_f(half)}" fill="none" '
        f'stroke="{escape(options.circle_color)}" stroke-width="2"/>',
        f'<line id="valence-axis" x1="{_f(c - half)}" y1="{_f(c)}" x2="{_f(c + half)}" y2="{_f(c)}" '
        f'stroke="{escape(options.axis_color)}" stroke-width="1"/>',
        f'<line id="arousal-axis" x1="{_f(c)}" y1="{_f(c + half)}" x2="{_f(c)}" y2="{_f(c - half)}" '
        f'stroke="{escape(options.axis_color)}" stroke-width="1"/>',
        f'<text x="{_f(c + half + 6)}" y="{_f(c + 4)}" font-size="12" {font}>valence +</text>',
        f'<text x="{_f(c - half - 6)}" y="{_f(c + 4)}" font-size="12" text-anchor="end" {font}>valence -</text>',
        f'<text x="{_f(c)}" y="{_f(c - half - 10)}" font-size="12" text-anchor="middle" {font}>arousal +</text>',
        f'<text x="{_f(c)}" y="{_f(c + half + 20)}" font-size="12" text-anchor="middle" {font}>arousal -</text>',
    ]
    for q in Quadrant:
        sx, sy = q.signs
        qx, qy = to_px(sx * 0.72 * r, sy * 0.72 * r)
        out.append(f'<text class="quadrant" x="{_f(qx)}" y="{_f(qy)}" font-size="14" '
                   f'text-anchor="middle" {font}>{q.name} {q.mood}</text>')
    if target is not None:
        tx, ty = target.coordinates(r)
        px, py = to_px(tx, ty)
        out.append(f'<g class="target">{_marker(px, py, options.target_style, "target " + target.describe())}</g>')
    for i, (label, p, style) in enumerate(points):
        px, py = to_px(p.x, p.y)
        out.append(f'<g class="point" id="point-{i}">'
                   f'{_marker(px, py, style, f"{label}: ({p.x:.4f}, {p.y:.4f})")}'
                   f'<text x="{_f(px + style.size + 3)}" y="{_f(py - style.size - 2)}" font-size="11" '
                   f'{font}>{escape(label)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
