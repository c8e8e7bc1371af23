import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import expit

from ink import Point, Stroke

INK = 0
PAPER = 255


class WidthMode(str, Enum):
    CONSTANT = "constant"
    VARIABLE = "variable"


@dataclass(frozen=True)
class WidthModel:
    """Stroke width w(theta) = m * d(theta), d(theta) = 1 / (1 + exp(alpha*theta + beta)),
    theta in degrees. Constant mode evaluates d at theta_const for every segment."""
    mode: WidthMode = WidthMode.CONSTANT
    sigmoid_alpha: float = -0.1
    sigmoid_beta: float = 1.13
    m_min: int = 2
    m_max: int = 5
    theta_const: float = 90.0

    def __post_init__(self):
        object.__setattr__(self, "mode", WidthMode(self.mode))
        if self.m_min <= 0 or self.m_max <= 0:
            raise ValueError(f"m_min and m_max must be positive, got {self.m_min}, {self.m_max}")
        if self.m_min > self.m_max:
            raise ValueError(f"m_min {self.m_min} exceeds m_max {self.m_max}")


def new_canvas(width: int, height: int) -> np.ndarray:
    """A blank GrayImage: uint8 array of shape (height, width), all paper."""
    if width <= 0 or height <= 0:
        raise ValueError(f"canvas dimensions must be positive, got {width}x{height}")
    return np.full((height, width), PAPER, dtype=np.uint8)


def segment_angle(p0: Point, p1: Point) -> float:
    """arctan(dy/dx) in degrees, image coordinates (y grows downward)."""
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    if dx == 0 and dy == 0:
        raise ValueError(f"zero-length segment at ({p0[0]}, {p0[1]})")
    if dx == 0:
        return math.copysign(90.0, dy)
    return math.degrees(math.atan(dy / dx))


def width_factor(theta: float, model: WidthModel) -> float:
    return float(expit(-(model.sigmoid_alpha * theta + model.sigmoid_beta)))


def stroke_width(theta: float, m: float, model: WidthModel) -> float:
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    if model.mode is WidthMode.CONSTANT:
        return m * width_factor(model.theta_const, model)
    return m * width_factor(theta, model)


def stamp_radius(w: float) -> float:
    return max(1, int(math.floor(w + 0.5))) / 2.0


def draw_segment(image: np.ndarray, p0: Point, p1: Point, w: float) -> np.ndarray:
    """Set to ink every pixel whose centre lies within max(1, round(w))/2 of
    the segment p0-p1 (a capsule). Pixel (x, y) has its centre at (x, y)."""
    if w < 0:
        raise ValueError(f"stroke width must be non-negative, got {w}")
    height, width = image.shape
    radius = stamp_radius(w)
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])

    left = max(int(math.floor(min(x0, x1) - radius)), 0)
    right = min(int(math.ceil(max(x0, x1) + radius)), width - 1)
    top = max(int(math.floor(min(y0, y1) - radius)), 0)
    bottom = min(int(math.ceil(max(y0, y1) + radius)), height - 1)
    if left > right or top > bottom:
        return image

    ys, xs = np.mgrid[top:bottom + 1, left:right + 1].astype(np.float64)
    dx, dy = x1 - x0, y1 - y0
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        t = 0.0
    else:
        t = np.clip(((xs - x0) * dx + (ys - y0) * dy) / length_sq, 0.0, 1.0)
    dist_sq = (xs - (x0 + t * dx)) ** 2 + (ys - (y0 + t * dy)) ** 2
    mask = dist_sq <= radius * radius + 1e-9
    image[top:bottom + 1, left:right + 1][mask] = INK
    return image


def _pixel(v: float) -> int:
    return int(math.floor(v + 0.5))


def render_binary(strokes: Sequence[Stroke], canvas_width: int, canvas_height: int, m: float,
                  model: WidthModel) -> np.ndarray:
    """Rasterize pen strokes in black on a white canvas. Pixels are 0 or 255 only."""
    image = new_canvas(canvas_width, canvas_height)
    for s_idx, stroke in enumerate(strokes):
        for p_idx, point in enumerate(stroke.points):
            px, py = _pixel(point.x), _pixel(point.y)
            if not (0 <= px < canvas_width and 0 <= py < canvas_height):
                raise ValueError(f"stroke {s_idx} point {p_idx} ({point.x}, {point.y}) "
                                 f"is outside the {canvas_width}x{canvas_height} canvas")

    dot_width = m * width_factor(model.theta_const, model)
    for stroke in strokes:
        points = stroke.points
        if len(points) == 1:
            draw_segment(image, points[0], points[0], dot_width)
            continue
        w = dot_width
        for p0, p1 in zip(points[:-1], points[1:]):
            if p0 != p1:
                w = stroke_width(segment_angle(p0, p1), m, model)
            # repeated points keep the previous segment's width
            draw_segment(image, p0, p1, w)
    return image
