import numpy as np
import pytest

from plasmode_mse.resampling import (
    ResamplePlan,
    ResamplingError,
    resample,
    resample_many,
    silverman_bandwidth,
    source_size_for,
)


def _source(rng, m, p=3):
    return np.column_stack([np.ones(m), rng.standard_normal((m, p))])


def test_source_sizes():
    assert ResamplePlan("mOutOfN", 100, 0.632).source_size == 159
    assert ResamplePlan("mOutOfN", 100, 0.1).source_size == 1000
    assert ResamplePlan("subsampling", 100, 0.01).source_size == 10000
    assert ResamplePlan("nOutOfN", 100).source_size == 100
    assert ResamplePlan("wild", 100).source_size == 100
    assert source_size_for(50, 0.632) == 80


def test_plan_validation():
    with pytest.raises(ValueError):
        ResamplePlan("jackknife", 100)
    with pytest.raises(ValueError):
        ResamplePlan("nOutOfN", 100, 0.5)
    with pytest.raises(ValueError):
        ResamplePlan("mOutOfN", 100, 0.0)
    with pytest.raises(ValueError):
        ResamplePlan("subsampling", 100, pinned_source=50)


def test_pinned_source_allows_smaller_resamples():
    plan = ResamplePlan("subsampling", 50, pinned_source=100)
    assert plan.source_size == 100


def test_none_returns_source(rng):
    src = _source(rng, 20)
    assert np.array_equal(resample(ResamplePlan("none", 20), src, rng), src)


def test_subsampling_full_is_permutation(rng):
    src = _source(rng, 30)
    out = resample(ResamplePlan("subsampling", 30, 1.0), src, rng)
    assert sorted(map(tuple, out)) == sorted(map(tuple, src))


def test_subsampling_has_no_duplicates(rng):
    src = _source(rng, 159)
    out = resample_many(ResamplePlan("subsampling", 100, 0.632), src, 20, rng)
    for d in out:
        assert len({tuple(r) for r in d}) == 100


def test_bootstrap_shapes_and_rows_from_source(rng):
    src = _source(rng, 1000)
    out = resample_many(ResamplePlan("mOutOfN", 100, 0.1), src, 5, rng)
    assert out.shape == (5, 100, 4)
    rows = {tuple(r) for r in src}
    assert all(tuple(r) in rows for r in out.reshape(-1, 4))
    assert np.all(out[..., 0] == 1)


def test_source_size_mismatch(rng):
    with pytest.raises(ResamplingError):
        resample(ResamplePlan("mOutOfN", 100, 0.632), _source(rng, 158), rng)


def test_silverman_examples(rng):
    x = rng.standard_normal((100, 1))
    assert silverman_bandwidth(x)[0, 0] == pytest.approx(
        (4 / 3) ** 0.4 * 100 ** -0.4 * x.var(ddof=1))
    # identity sample covariance, d = 2, m = 100
    z = rng.standard_normal((100, 2))
    z = (z - z.mean(0)) @ np.linalg.inv(np.linalg.cholesky(np.cov(z, rowvar=False))).T
    assert np.allclose(silverman_bandwidth(z), 100 ** (-1 / 3) * np.eye(2))
    assert 100 ** (-1 / 3) == pytest.approx(0.2154, abs=1e-4)
    big = silverman_bandwidth(rng.standard_normal((100_000, 2)))
    assert np.allclose(big, 100_000 ** (-1 / 3) * np.eye(2), atol=5e-4)


def test_smoothed_keeps_intercept_and_adds_noise(rng):
    src = _source(rng, 100, 2)
    out = resample_many(ResamplePlan("smoothed", 100), src, 3, rng)
    assert np.all(out[..., 0] == 1)
    rows = {tuple(r) for r in src}
    assert not any(tuple(r) in rows for r in out.reshape(-1, 3))


def test_smoothed_noise_vanishes_with_tiny_bandwidth():
    # coupled draws: same indices, noise scaled by the source spread
    r = np.random.default_rng(3)
    base = _source(r, 100, 2)
    shrunk = base.copy()
    shrunk[:, 1:] = base[:, 1:] * 1e-6
    out_base = resample(ResamplePlan("smoothed", 100), base, np.random.default_rng(9))
    out_small = resample(ResamplePlan("smoothed", 100), shrunk, np.random.default_rng(9))
    assert np.allclose(out_small[:, 1:] / 1e-6, out_base[:, 1:])
    assert np.abs(out_small[:, 1:].mean(0) - shrunk[:, 1:].mean(0)).max() < 1e-5


def test_wild_column_identity(rng):
    src = _source(rng, 80, 3)
    src[:, 2] *= 3.0
    out = resample(ResamplePlan("wild", 80), src, np.random.default_rng(4))
    a = np.random.default_rng(4).standard_normal(3)
    sd = src[:, 1:].std(0, ddof=1)
    assert np.allclose(out[:, 1:].mean(0), src[:, 1:].mean(0))
    assert np.allclose(out[:, 1:].std(0, ddof=1), np.abs(sd + a))
    assert np.all(out[:, 0] == 1)


def test_wild_rejects_constant_column(rng):
    src = _source(rng, 10, 2)
    src[:, 2] = 5.0
    with pytest.raises(ResamplingError):
        resample(ResamplePlan("wild", 10), src, rng)
