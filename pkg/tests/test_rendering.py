import math

import numpy as np
import pytest

from ink import Point, Stroke
from rendering import (INK, PAPER, WidthMode, WidthModel, draw_segment, new_canvas, render_binary, segment_angle,
                       stamp_radius, stroke_width, width_factor)

CONSTANT = WidthModel(mode=WidthMode.CONSTANT)
VARIABLE = WidthModel(mode=WidthMode.VARIABLE)


def _stroke(*points):
    return Stroke(tuple(Point(float(x), float(y)) for x, y in points))


def _ink(image):
    return set(zip(*np.nonzero(image == INK)))


def test_segment_angle():
    assert segment_angle(Point(0, 0), Point(1, 1)) == pytest.approx(45.0)
    assert segment_angle(Point(0, 0), Point(0, 5)) == 90.0
    assert segment_angle(Point(0, 0), Point(0, -5)) == -90.0
    assert segment_angle(Point(0, 0), Point(2, -2)) == pytest.approx(-45.0)
    with pytest.raises(ValueError):
        segment_angle(Point(1, 1), Point(1, 1))


def test_width_factor_constants():
    assert width_factor(11.3, VARIABLE) == pytest.approx(0.5, abs=1e-9)
    assert width_factor(90.0, VARIABLE) == pytest.approx(1.0 / (1.0 + math.exp(-7.87)), rel=1e-12)
    assert width_factor(90.0, VARIABLE) == pytest.approx(0.999618, abs=1e-6)
    assert width_factor(-90.0, VARIABLE) == pytest.approx(1.0 / (1.0 + math.exp(10.13)), rel=1e-9)
    assert width_factor(-90.0, VARIABLE) == pytest.approx(3.99e-5, rel=0.01)


def test_width_factor_monotone():
    values = [width_factor(theta, VARIABLE) for theta in np.arange(-90.0, 90.25, 0.5)]
    assert all(0.0 < v < 1.0 for v in values)
    assert all(b > a for a, b in zip(values, values[1:]))


def test_stroke_width_examples():
    assert stroke_width(11.3, 4, VARIABLE) == pytest.approx(2.0, abs=1e-9)
    for theta in (-90.0, 0.0, 37.0):
        assert stroke_width(theta, 3, CONSTANT) == pytest.approx(2.99885, abs=1e-5)
    down = stroke_width(90.0, 5, VARIABLE)
    up = stroke_width(-90.0, 5, VARIABLE)
    assert down == pytest.approx(4.998, abs=1e-3)
    assert up == pytest.approx(0.0002, abs=1e-4)
    with pytest.raises(ValueError):
        stroke_width(0.0, 0, VARIABLE)


def test_stamp_radius():
    assert stamp_radius(0.0002) == 0.5
    assert stamp_radius(1.0) == 0.5
    assert stamp_radius(2.5) == 1.5
    assert stamp_radius(4.998) == 2.5


def test_width_model_validation():
    with pytest.raises(ValueError):
        WidthModel(m_min=5, m_max=2)
    with pytest.raises(ValueError):
        WidthModel(m_min=0)
    assert WidthModel(mode="variable").mode is WidthMode.VARIABLE


def test_new_canvas():
    canvas = new_canvas(3, 2)
    assert canvas.shape == (2, 3) and canvas.dtype == np.uint8
    assert (canvas == PAPER).all()
    with pytest.raises(ValueError):
        new_canvas(0, 5)


def test_draw_vertical_segment():
    image = draw_segment(new_canvas(3, 3), Point(1, 0), Point(1, 2), 1.0)
    assert (image[:, 1] == INK).all()
    assert (image[:, [0, 2]] == PAPER).all()


def test_draw_wide_horizontal_band():
    image = draw_segment(new_canvas(30, 21), Point(2, 10), Point(20, 10), 3.0)
    for x in range(4, 19):
        assert np.flatnonzero(image[:, x] == INK).tolist() == [9, 10, 11]


def test_draw_segment_twice_is_idempotent():
    once = draw_segment(new_canvas(20, 20), Point(1.3, 2.7), Point(15.2, 11.9), 2.0)
    twice = draw_segment(once.copy(), Point(1.3, 2.7), Point(15.2, 11.9), 2.0)
    np.testing.assert_array_equal(once, twice)


def test_render_unit_line():
    image = render_binary([_stroke((0, 0), (2, 0))], 3, 1, 1, CONSTANT)
    assert image.tolist() == [[0, 0, 0]]


def test_render_no_strokes():
    assert (render_binary([], 2, 2, 3, CONSTANT) == PAPER).all()


def test_render_rejects_points_outside_canvas():
    with pytest.raises(ValueError, match="stroke 0 point 1"):
        render_binary([_stroke((0, 0), (5, 0))], 3, 3, 2, CONSTANT)


def test_render_dot_uses_constant_width(dot_sample):
    image = render_binary(dot_sample.strokes, 8, 8, 3, VARIABLE)
    assert _ink(image) == {(y, x) for y in (3, 4, 5) for x in (2, 3, 4)}


def _segment_dist_sq(px, py, p0, p1):
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    length_sq = dx * dx + dy * dy
    t = 0.0 if length_sq == 0 else min(1.0, max(0.0, ((px - p0[0]) * dx + (py - p0[1]) * dy) / length_sq))
    cx, cy = p0[0] + t * dx, p0[1] + t * dy
    return (px - cx) ** 2 + (py - cy) ** 2


def _random_polylines(rng, width, height):
    strokes = []
    for _ in range(int(rng.integers(1, 4))):
        n = int(rng.integers(1, 6))
        strokes.append(_stroke(*zip(rng.uniform(0, width - 1, n), rng.uniform(0, height - 1, n))))
    return strokes


def test_unit_width_matches_distance_oracle():
    rng = np.random.default_rng(0)
    width, height = 24, 16
    for _ in range(100):
        strokes = _random_polylines(rng, width, height)
        image = render_binary(strokes, width, height, 1, CONSTANT)
        segments = []
        for stroke in strokes:
            pts = stroke.points
            segments.extend(zip(pts, pts[1:]) if len(pts) > 1 else [(pts[0], pts[0])])
        expected = {(y, x) for y in range(height) for x in range(width)
                    if any(_segment_dist_sq(x, y, p0, p1) <= 0.25 + 1e-9 for p0, p1 in segments)}
        assert _ink(image) == expected


def test_wider_stamps_cover_narrower_ones():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p0, p1 = (Point(*rng.uniform(5, 35, 2)) for _ in range(2))
        previous = set()
        for w in (1, 2, 3, 4, 5):
            covered = _ink(draw_segment(new_canvas(40, 40), p0, p1, float(w)))
            assert previous <= covered
            previous = covered


@pytest.mark.parametrize("m,thickness", [(1, 1), (3, 3), (5, 5)])
def test_constant_mode_thickness(m, thickness):
    horizontal = render_binary([_stroke((5, 20), (60, 20))], 70, 41, m, CONSTANT)
    vertical = render_binary([_stroke((20, 5), (20, 60))], 41, 70, m, CONSTANT)
    for idx in range(15, 50):
        assert np.count_nonzero(horizontal[:, idx] == INK) == thickness
        assert np.count_nonzero(vertical[idx, :] == INK) == thickness


def test_upstrokes_are_thinner_than_downstrokes():
    down = render_binary([_stroke((20, 5), (20, 60))], 41, 70, 5, VARIABLE)
    up = render_binary([_stroke((20, 60), (20, 5))], 41, 70, 5, VARIABLE)
    assert np.count_nonzero(down[30, :] == INK) == 5
    assert np.count_nonzero(up[30, :] == INK) == 1
    # constant mode ignores direction
    np.testing.assert_array_equal(render_binary([_stroke((20, 5), (20, 60))], 41, 70, 5, CONSTANT),
                                  render_binary([_stroke((20, 60), (20, 5))], 41, 70, 5, CONSTANT))


def test_render_is_deterministic_and_binary():
    rng = np.random.default_rng(2)
    strokes = _random_polylines(rng, 50, 30)
    first = render_binary(strokes, 50, 30, 4, VARIABLE)
    second = render_binary(strokes, 50, 30, 4, VARIABLE)
    np.testing.assert_array_equal(first, second)
    assert set(np.unique(first)) <= {INK, PAPER}
