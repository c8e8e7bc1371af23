import hashlib
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Samples are kept inside the open beta support.
CLAMP_LOW = 1.0 / 510.0
CLAMP_HIGH = 1.0 - 1.0 / 510.0
DEFAULT_CAP = 1_000_000


class DegenerateSampleError(ValueError):
    pass


class InfeasibleMomentsError(ValueError):
    pass


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"beta shape parameter {name} must be positive and finite, got {value}")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self) -> float:
        total = self.alpha + self.beta
        return self.alpha * self.beta / (total * total * (total + 1.0))


@dataclass(frozen=True)
class ColorModel:
    """Index-aligned stroke and background distributions, one pair per subset."""
    stroke_dists: Tuple[BetaParams, ...]
    bg_dists: Tuple[BetaParams, ...]
    subsets: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stroke_dists", tuple(self.stroke_dists))
        object.__setattr__(self, "bg_dists", tuple(self.bg_dists))
        object.__setattr__(self, "subsets", tuple(self.subsets))
        if not self.stroke_dists:
            raise ValueError("a color model needs at least one distribution pair")
        if len(self.stroke_dists) != len(self.bg_dists):
            raise ValueError(f"stroke/background length mismatch: {len(self.stroke_dists)} vs {len(self.bg_dists)}")
        if self.subsets and len(self.subsets) != len(self.stroke_dists):
            raise ValueError(f"{len(self.subsets)} subset names for {len(self.stroke_dists)} distribution pairs")

    @property
    def size(self) -> int:
        return len(self.stroke_dists)


@dataclass(frozen=True)
class ColorSampleSet:
    stroke_samples: np.ndarray
    bg_samples: np.ndarray
    source_key: str

    def __post_init__(self):
        for name in ("stroke_samples", "bg_samples"):
            values = np.asarray(getattr(self, name), dtype=np.float64)
            if values.size and (values.min() < 0.0 or values.max() > 1.0):
                raise ValueError(f"{self.source_key}: {name} must lie in [0, 1]")
            object.__setattr__(self, name, values)


def otsu_threshold(histogram: Sequence[int]) -> int:
    """Level t maximising the between-class variance of {<= t} vs {> t}.

    Scores are compared exactly (rationals), the smallest maximiser wins."""
    hist = np.asarray(histogram, dtype=np.int64)
    if hist.shape != (256,) or (hist < 0).any():
        raise ValueError("histogram must hold 256 non-negative counts")
    total = int(hist.sum())
    if total < 2 or np.count_nonzero(hist) < 2:
        raise ValueError("flat image: all pixels fall in one histogram bin")

    weighted_total = int(np.dot(hist, np.arange(256, dtype=np.int64)))
    counts = np.cumsum(hist).tolist()
    sums = np.cumsum(hist * np.arange(256, dtype=np.int64)).tolist()

    best_level, best_score = 0, Fraction(-1)
    for level in range(256):
        n0 = counts[level]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        # (n0 n1 / N^2)(mu0 - mu1)^2 up to the constant 1/N^2
        diff = sums[level] * total - weighted_total * n0
        score = Fraction(diff * diff, n0 * n1)
        if score > best_score:
            best_level, best_score = level, score
    return best_level


def _key_seed(source_key: str, seed: int) -> int:
    digest = hashlib.blake2b(f"{seed}:{source_key}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _subsample(values: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if values.size <= cap:
        return values
    keep = np.sort(rng.choice(values.size, size=cap, replace=False))
    return values[keep]


def extract_color_samples(image: np.ndarray, source_key: str, cap: int = DEFAULT_CAP, seed: int = 0) -> ColorSampleSet:
    """Split a grayscale reference image into stroke (<= Otsu level) and
    background (> level) intensities scaled to [0, 1]."""
    if cap < 1:
        raise ValueError(f"cap must be positive, got {cap}")
    pixels = np.asarray(image, dtype=np.uint8).ravel()
    level = otsu_threshold(np.bincount(pixels, minlength=256))
    stroke = pixels[pixels <= level]
    bg = pixels[pixels > level]
    for name, values in (("stroke", stroke), ("background", bg)):
        if values.size < 2:
            raise ValueError(f"{source_key}: only {values.size} {name} pixel(s) at Otsu level {level}")

    rng = np.random.default_rng(_key_seed(source_key, seed))
    stroke = _subsample(stroke, cap, rng)
    bg = _subsample(bg, cap, rng)
    logger.debug("%s: otsu level %d, %d stroke / %d background samples", source_key, level, stroke.size, bg.size)
    return ColorSampleSet(stroke_samples=stroke / 255.0, bg_samples=bg / 255.0, source_key=source_key)


def merge_sample_sets(sets: Sequence[ColorSampleSet], source_key: str, cap: int = DEFAULT_CAP,
                      seed: int = 0) -> ColorSampleSet:
    """Pool the per-image samples of one subset, capped per class."""
    if not sets:
        raise ValueError(f"{source_key}: no sample sets to merge")
    rng = np.random.default_rng(_key_seed(source_key, seed))
    stroke = _subsample(np.concatenate([s.stroke_samples for s in sets]), cap, rng)
    bg = _subsample(np.concatenate([s.bg_samples for s in sets]), cap, rng)
    return ColorSampleSet(stroke_samples=stroke, bg_samples=bg, source_key=source_key)


def clamp_samples(values) -> np.ndarray:
    return np.clip(np.asarray(values, dtype=np.float64), CLAMP_LOW, CLAMP_HIGH)


def fit_beta_moments(samples) -> BetaParams:
    """Method-of-moments beta fit:
    alpha = m (m(1-m)/v - 1), beta = (1-m)(m(1-m)/v - 1)."""
    values = np.asarray(samples, dtype=np.float64)
    if values.size < 2:
        raise DegenerateSampleError(f"need at least 2 samples, got {values.size}")
    mean = float(values.mean())
    var = float(values.var())
    if var == 0.0:
        raise DegenerateSampleError(f"zero variance (all samples equal {mean})")
    if not 0.0 < mean < 1.0:
        raise InfeasibleMomentsError(f"sample mean {mean} is outside (0, 1)")
    spread = mean * (1.0 - mean)
    if var >= spread:
        raise InfeasibleMomentsError(f"variance {var} >= mean*(1-mean) = {spread}")
    common = spread / var - 1.0
    return BetaParams(alpha=mean * common, beta=(1.0 - mean) * common)


def build_color_model(sample_sets: Sequence[ColorSampleSet]) -> ColorModel:
    if not sample_sets:
        raise ValueError("no sample sets to build a color model from")
    stroke_dists, bg_dists, keys = [], [], []
    for sample_set in sample_sets:
        try:
            stroke = fit_beta_moments(clamp_samples(sample_set.stroke_samples))
            bg = fit_beta_moments(clamp_samples(sample_set.bg_samples))
        except ValueError as e:
            raise type(e)(f"{sample_set.source_key}: {e}") from e
        logger.info("%s: stroke Beta(%.4f, %.4f), background Beta(%.4f, %.4f)",
                    sample_set.source_key, stroke.alpha, stroke.beta, bg.alpha, bg.beta)
        stroke_dists.append(stroke)
        bg_dists.append(bg)
        keys.append(sample_set.source_key)
    return ColorModel(stroke_dists=tuple(stroke_dists), bg_dists=tuple(bg_dists), subsets=tuple(keys))


_OPEN_LOW = np.nextafter(0.0, 1.0)
_OPEN_HIGH = np.nextafter(1.0, 0.0)


def sample_beta(params: BetaParams, rng: np.random.Generator, size: Optional[int] = None):
    """One variate (or `size` variates) of Beta(alpha, beta), strictly inside (0, 1)."""
    draws = np.clip(rng.beta(params.alpha, params.beta, size=size), _OPEN_LOW, _OPEN_HIGH)
    return float(draws) if size is None else draws


def choose_distribution_index(model: ColorModel, rng: np.random.Generator) -> int:
    return int(rng.integers(model.size))
