import numpy as np
import pytest
from scipy import stats

from color_model import (CLAMP_HIGH, CLAMP_LOW, BetaParams, ColorModel, ColorSampleSet, DegenerateSampleError,
                         InfeasibleMomentsError, build_color_model, choose_distribution_index, clamp_samples,
                         extract_color_samples, fit_beta_moments, merge_sample_sets, otsu_threshold, sample_beta)


def _scan_otsu(hist):
    """Exhaustive scan comparing between-class scores by integer cross-multiplication."""
    total = sum(hist)
    weighted = sum(i * c for i, c in enumerate(hist))
    best = None
    n0 = s0 = 0
    for level in range(256):
        n0 += hist[level]
        s0 += level * hist[level]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        diff = s0 * total - weighted * n0
        num, den = diff * diff, n0 * n1
        if best is None or num * best[2] > best[1] * den:
            best = (level, num, den)
    return best[0]


def test_otsu_two_spikes_picks_smallest_level():
    hist = [0] * 256
    hist[0] = hist[255] = 50
    assert otsu_threshold(hist) == 0


def test_otsu_flat_image():
    hist = [0] * 256
    hist[128] = 1000
    with pytest.raises(ValueError, match="flat"):
        otsu_threshold(hist)


def test_otsu_bimodal():
    rng = np.random.default_rng(0)
    pixels = np.concatenate([rng.normal(40, 5, 3000), rng.normal(200, 8, 7000)])
    hist = np.bincount(np.clip(np.rint(pixels), 0, 255).astype(int), minlength=256).tolist()
    level = otsu_threshold(hist)
    assert 40 <= level <= 200
    assert level == _scan_otsu(hist)


def test_otsu_matches_scan_on_random_histograms():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        hist = np.zeros(256, dtype=int)
        bins = rng.choice(256, size=int(rng.integers(2, 12)), replace=False)
        hist[bins] = rng.integers(1, 500, size=bins.size)
        assert otsu_threshold(hist) == _scan_otsu(hist.tolist())


def test_extract_too_few_pixels_per_class():
    with pytest.raises(ValueError):
        extract_color_samples(np.array([[0, 255]], dtype=np.uint8), "tiny")


def test_extract_four_pixels():
    samples = extract_color_samples(np.array([[10, 20, 240, 250]], dtype=np.uint8), "four")
    np.testing.assert_array_equal(samples.stroke_samples, [10 / 255, 20 / 255])
    np.testing.assert_array_equal(samples.bg_samples, [240 / 255, 250 / 255])
    assert samples.source_key == "four"


def test_extract_partitions_pixels():
    rng = np.random.default_rng(2)
    image = np.where(rng.random((40, 50)) < 0.2, rng.integers(0, 80, (40, 50)), rng.integers(170, 256, (40, 50)))
    image = image.astype(np.uint8)
    samples = extract_color_samples(image, "page")
    assert samples.stroke_samples.size + samples.bg_samples.size == image.size
    assert samples.stroke_samples.max() < samples.bg_samples.min()
    for values in (samples.stroke_samples, samples.bg_samples):
        assert values.min() >= 0.0 and values.max() <= 1.0


def test_extract_cap_is_deterministic_subset():
    rng = np.random.default_rng(3)
    image = rng.integers(0, 256, (30, 30)).astype(np.uint8)
    first = extract_color_samples(image, "cap", cap=25, seed=4)
    second = extract_color_samples(image, "cap", cap=25, seed=4)
    assert first.stroke_samples.size == 25 and first.bg_samples.size == 25
    np.testing.assert_array_equal(first.stroke_samples, second.stroke_samples)
    np.testing.assert_array_equal(first.bg_samples, second.bg_samples)
    assert set(np.rint(first.stroke_samples * 255).astype(int)) <= set(image.ravel().tolist())


def test_merge_sample_sets_pools_and_caps():
    a = ColorSampleSet(np.array([0.1, 0.2]), np.array([0.8, 0.9]), "a")
    b = ColorSampleSet(np.array([0.15, 0.25, 0.3]), np.array([0.7]), "b")
    merged = merge_sample_sets([a, b], "ab")
    np.testing.assert_array_equal(merged.stroke_samples, [0.1, 0.2, 0.15, 0.25, 0.3])
    np.testing.assert_array_equal(merged.bg_samples, [0.8, 0.9, 0.7])
    assert merge_sample_sets([a, b], "ab", cap=2).stroke_samples.size == 2
    with pytest.raises(ValueError):
        merge_sample_sets([], "none")


def test_clamp_samples():
    np.testing.assert_array_equal(clamp_samples([0.0, 0.5, 1.0]), [CLAMP_LOW, 0.5, CLAMP_HIGH])


def test_fit_closed_form():
    s = np.sqrt(0.05)
    params = fit_beta_moments([0.5 - s, 0.5 + s])
    assert params.alpha == pytest.approx(2.0)
    assert params.beta == pytest.approx(2.0)


def test_fit_uniform_samples():
    rng = np.random.default_rng(5)
    params = fit_beta_moments(rng.random(200_000))
    assert params.alpha == pytest.approx(1.0, rel=0.05)
    assert params.beta == pytest.approx(1.0, rel=0.05)


def test_fit_reproduces_moments():
    rng = np.random.default_rng(6)
    values = rng.beta(3.0, 7.0, size=5000)
    params = fit_beta_moments(values)
    assert params.mean == pytest.approx(values.mean(), rel=1e-9)
    assert params.variance == pytest.approx(values.var(), rel=1e-9)


@pytest.mark.parametrize("alpha,beta", [(1, 1), (2, 2), (2, 5), (8, 3)])
def test_fit_recovers_parameters(alpha, beta):
    rng = np.random.default_rng(alpha * 100 + beta)
    params = fit_beta_moments(rng.beta(alpha, beta, size=200_000))
    assert params.alpha == pytest.approx(alpha, rel=0.05)
    assert params.beta == pytest.approx(beta, rel=0.05)


def test_fit_errors():
    with pytest.raises(DegenerateSampleError):
        fit_beta_moments([0.5, 0.5, 0.5])
    with pytest.raises(DegenerateSampleError):
        fit_beta_moments([0.3])
    with pytest.raises(InfeasibleMomentsError):
        fit_beta_moments([0.0, 1.0])
    with pytest.raises(InfeasibleMomentsError):
        fit_beta_moments([1.0, 1.0, 1.0, 1.5])


def test_build_color_model_matches_independent_fits():
    rng = np.random.default_rng(7)
    sets = [ColorSampleSet(rng.beta(a, 6, 1000), rng.beta(6, a, 1000), f"set{a}") for a in (1, 2, 3)]
    model = build_color_model(sets)
    assert model.size == 3
    assert model.subsets == ("set1", "set2", "set3")
    for idx, sample_set in enumerate(sets):
        assert model.stroke_dists[idx] == fit_beta_moments(clamp_samples(sample_set.stroke_samples))
        assert model.bg_dists[idx] == fit_beta_moments(clamp_samples(sample_set.bg_samples))


def test_build_color_model_errors():
    with pytest.raises(ValueError):
        build_color_model([])
    flat = ColorSampleSet(np.full(10, 0.2), np.array([0.8, 0.9]), "flatset")
    with pytest.raises(DegenerateSampleError, match="flatset"):
        build_color_model([flat])


def test_color_model_validation():
    with pytest.raises(ValueError):
        ColorModel(stroke_dists=(BetaParams(1, 1),), bg_dists=())
    with pytest.raises(ValueError):
        BetaParams(0.0, 1.0)


@pytest.mark.parametrize("alpha,beta", [(1.0, 1.0), (2.0, 5.0)])
def test_sample_beta_mean(alpha, beta):
    rng = np.random.default_rng(8)
    draws = sample_beta(BetaParams(alpha, beta), rng, size=100_000)
    assert abs(draws.mean() - alpha / (alpha + beta)) < 0.01


def test_sample_beta_stays_inside_support():
    rng = np.random.default_rng(9)
    draws = sample_beta(BetaParams(0.02, 0.02), rng, size=50_000)
    assert (draws > 0.0).all() and (draws < 1.0).all()
    single = sample_beta(BetaParams(2.0, 2.0), rng)
    assert isinstance(single, float) and 0.0 < single < 1.0


def test_choose_distribution_index():
    single = ColorModel(stroke_dists=(BetaParams(1, 1),), bg_dists=(BetaParams(1, 1),))
    rng = np.random.default_rng(10)
    assert {choose_distribution_index(single, rng) for _ in range(100)} == {0}

    four = ColorModel(stroke_dists=(BetaParams(1, 1),) * 4, bg_dists=(BetaParams(1, 1),) * 4)
    rng = np.random.default_rng(11)
    draws = [choose_distribution_index(four, rng) for _ in range(100_000)]
    counts = np.bincount(draws, minlength=4)
    assert np.all(np.abs(counts / len(draws) - 0.25) < 0.01)
    assert stats.chisquare(counts).pvalue > 1e-4

    again = np.random.default_rng(11)
    assert [choose_distribution_index(four, again) for _ in range(1000)] == draws[:1000]
