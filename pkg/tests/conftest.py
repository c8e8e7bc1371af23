import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from color_model import BetaParams, ColorModel  # noqa: E402
from ink import InkSample, Level, Point, Stroke  # noqa: E402


def random_sample(rng, sample_id, max_strokes=4, max_points=12, width=60.0, height=30.0,
                  transcript="chào", level=Level.WORD):
    strokes = []
    for _ in range(int(rng.integers(1, max_strokes + 1))):
        n = int(rng.integers(1, max_points + 1))
        xs = rng.uniform(0.0, width, size=n)
        ys = rng.uniform(0.0, height, size=n)
        strokes.append(Stroke(tuple(Point(float(x), float(y)) for x, y in zip(xs, ys))))
    return InkSample(id=sample_id, strokes=tuple(strokes), transcript=transcript, level=level)


def random_corpus(n, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    return [random_sample(rng, f"s{idx:04d}", **kwargs) for idx in range(n)]


@pytest.fixture
def color_model():
    return ColorModel(stroke_dists=(BetaParams(2.0, 5.0),), bg_dists=(BetaParams(8.0, 2.0),), subsets=("iam",))


@pytest.fixture
def two_pair_model():
    # well separated pairs so the chosen index is visible in the pixels
    return ColorModel(stroke_dists=(BetaParams(10.0, 90.0), BetaParams(50.0, 50.0)),
                      bg_dists=(BetaParams(90.0, 10.0), BetaParams(70.0, 30.0)),
                      subsets=("dark", "light"))


@pytest.fixture
def dot_sample():
    return InkSample(id="dot", strokes=(Stroke((Point(3.0, 4.0),)),), transcript="i")
