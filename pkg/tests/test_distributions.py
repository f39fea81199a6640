import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arpulab.core import ConfigError, IdAllocator
from arpulab.distributions import (
    FAMILIES,
    DistributionSpec,
    plant_hypothesis,
    sample,
    sample_coords,
)


def test_gaussian_moments(rng):
    X = sample_coords(DistributionSpec("gaussian_isotropic", 2), rng, 100_000)
    assert np.all(np.abs(X.mean(axis=0)) <= 0.02)
    assert np.all(np.abs(X.var(axis=0) - 1) <= 0.03)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_ball_volume_ratio(rng, d):
    X = sample_coords(DistributionSpec("uniform_ball", d), rng, 100_000)
    r = np.linalg.norm(X, axis=1)
    assert r.max() <= 1.0
    assert abs(np.mean(r <= 0.5) - 0.5**d) <= 0.01


def test_annulus_respects_margin(rng):
    spec = DistributionSpec("annulus_with_margin", 2, {"gamma": 0.1})
    h = plant_hypothesis(spec, rng)
    X = sample_coords(spec, rng, 100_000, h)
    assert h.margins(X).min() >= 0.1
    assert np.linalg.norm(X, axis=1).max() <= 1.0
    with pytest.raises(ConfigError):
        sample_coords(spec, rng, 10)


def test_plant_hypothesis_modes(rng):
    spec = DistributionSpec("uniform_ball", 2)
    h = plant_hypothesis(spec, rng)
    assert np.linalg.norm(h.normal) == pytest.approx(1.0)
    assert abs(h.b) <= 0.5
    assert plant_hypothesis(spec, rng, homogeneous=True).b == 0.0
    # both sides of the boundary carry mass
    X = sample_coords(spec, rng, 10_000)
    lab = h.labels(X)
    assert (lab > 0).any() and (lab < 0).any()


def test_cube_and_special_families(rng):
    X = sample_coords(DistributionSpec("uniform_cube", 3, {"half_width": 2.0}), rng, 5000)
    assert np.abs(X).max() <= 2.0
    C = sample_coords(DistributionSpec("circle_S1", 2), rng, 1000)
    np.testing.assert_allclose(np.linalg.norm(C, axis=1), 1.0)
    B = sample_coords(DistributionSpec("hypercube_balls", 2), rng, 1000)
    assert np.all(np.abs(np.abs(B) - 1.0) <= 0.25 + 1e-12)


def test_spec_validation():
    with pytest.raises(ConfigError):
        DistributionSpec("nope", 2)
    with pytest.raises(ConfigError):
        DistributionSpec("uniform_ball", 0)
    with pytest.raises(ConfigError):
        DistributionSpec("annulus_with_margin", 2)
    with pytest.raises(ConfigError):
        DistributionSpec("circle_S1", 3)


def test_anti_concentration_constants_hold(rng):
    """Pr[|<x, v> + b| <= a] <= c2 a, checked on a few random slabs."""
    for fam, params in [("uniform_ball", {}), ("uniform_cube", {}), ("gaussian_isotropic", {})]:
        spec = DistributionSpec(fam, 2, params)
        _, c2 = spec.acc_constants()
        X = sample_coords(spec, rng, 200_000)
        for _ in range(5):
            v = rng.normal(size=2)
            v /= np.linalg.norm(v)
            b = rng.uniform(-0.3, 0.3)
            for a in (0.02, 0.1):
                assert np.mean(np.abs(X @ v + b) <= a) <= c2 * a + 0.005


@given(st.sampled_from([f for f in FAMILIES if f != "annulus_with_margin"]), st.integers(0, 10**6))
def test_same_stream_same_points(family, seed):
    spec = DistributionSpec(family, 2)
    a = sample(spec, np.random.default_rng(seed), 50, IdAllocator())
    b = sample(spec, np.random.default_rng(seed), 50, IdAllocator())
    assert np.array_equal(a.X, b.X) and np.array_equal(a.ids, b.ids)
