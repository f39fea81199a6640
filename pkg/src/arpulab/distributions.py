"""Synthetic instance distributions and planted hypotheses.

Each family documents its concentration / anti-concentration constants
``(c1, c2)``: Pr[||x|| > d*alpha] <= c1/alpha and
Pr[|<x, v> + b| <= alpha] <= c2*alpha for unit v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.special import gammaln

from .core import ConfigError, Hypothesis, IdAllocator, Sample

FAMILIES = (
    "uniform_ball",
    "uniform_cube",
    "gaussian_isotropic",
    "annulus_with_margin",
    "hypercube_balls",
    "circle_S1",
)
MARGIN_FAMILIES = ("annulus_with_margin",)


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    d: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown distribution family {self.family!r}")
        if self.d < 1:
            raise ConfigError("dimension must be positive")
        if self.family == "circle_S1" and self.d != 2:
            raise ConfigError("circle_S1 lives in d = 2")
        if self.family == "annulus_with_margin" and self.param("gamma", 0.0) <= 0:
            raise ConfigError("annulus_with_margin needs gamma > 0")

    def param(self, name, default=None):
        return self.params.get(name, default)

    @property
    def needs_hypothesis(self) -> bool:
        return self.family in MARGIN_FAMILIES

    def acc_constants(self) -> tuple[float, float]:
        """(c1, c2) for the family (margin family: those of its base ball)."""
        d = self.d
        fam = self.family
        if fam in ("uniform_ball", "annulus_with_margin"):
            r = float(self.param("radius", 1.0))
            # peak density of a 1-D marginal of the uniform ball of radius r
            peak = math.exp(gammaln(d / 2 + 1) - gammaln((d + 1) / 2)) / (math.sqrt(math.pi) * r)
            if fam == "annulus_with_margin":
                g = float(self.param("gamma"))
                peak /= max(1e-12, 1 - _band_mass_ball(d, g / r))
            return r / d, 2 * peak
        if fam == "uniform_cube":
            a = float(self.param("half_width", 1.0))
            peak = 1 / (2 * a) if d == 1 else 1 / (math.sqrt(2) * a)
            return a / math.sqrt(d), 2 * peak
        if fam == "gaussian_isotropic":
            s = float(self.param("scale", 1.0))
            return s / math.sqrt(d), 2 / (math.sqrt(2 * math.pi) * s)
        return math.nan, math.nan


def _band_mass_ball(d: int, t: float) -> float:
    """Mass of {|x_1| < t} under the uniform unit ball (numerical)."""
    xs = np.linspace(-t, t, 2001)
    dens = np.power(np.clip(1 - xs**2, 0, None), (d - 1) / 2)
    full = np.linspace(-1, 1, 20001)
    fd = np.power(np.clip(1 - full**2, 0, None), (d - 1) / 2)
    return float(np.trapezoid(dens, xs) / np.trapezoid(fd, full))


def _ball(rng, count, d, radius=1.0):
    g = rng.standard_normal((count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / d)
    return g * r[:, None]


def _raw(spec: DistributionSpec, rng: np.random.Generator, count: int) -> NDArray[np.float64]:
    d, fam = spec.d, spec.family
    if fam in ("uniform_ball", "annulus_with_margin"):
        return _ball(rng, count, d, float(spec.param("radius", 1.0)))
    if fam == "uniform_cube":
        a = float(spec.param("half_width", 1.0))
        return rng.uniform(-a, a, (count, d))
    if fam == "gaussian_isotropic":
        return float(spec.param("scale", 1.0)) * rng.standard_normal((count, d))
    if fam == "hypercube_balls":
        r = float(spec.param("radius", 0.25))
        centers = rng.choice([-1.0, 1.0], size=(count, d))
        return centers + _ball(rng, count, d, r)
    th = rng.uniform(0, 2 * np.pi, count)
    return np.column_stack([np.cos(th), np.sin(th)])


def sample_coords(
    spec: DistributionSpec,
    rng: np.random.Generator,
    count: int,
    h: Optional[Hypothesis] = None,
) -> NDArray[np.float64]:
    """i.i.d. coordinates; margin families reject draws closer than gamma to h."""
    if not spec.needs_hypothesis:
        return _raw(spec, rng, count)
    if h is None:
        raise ConfigError(f"{spec.family} needs the planted hypothesis")
    gamma = float(spec.param("gamma"))
    out = []
    have = 0
    while have < count:
        X = _raw(spec, rng, max(64, 2 * (count - have)))
        X = X[h.margins(X) >= gamma]
        out.append(X)
        have += X.shape[0]
    return np.vstack(out)[:count]


def sample(
    spec: DistributionSpec,
    rng: np.random.Generator,
    count: int,
    ids: IdAllocator,
    h: Optional[Hypothesis] = None,
) -> Sample:
    """``count`` i.i.d. points with fresh ids."""
    return Sample(ids.take(count), sample_coords(spec, rng, count, h))


def plant_hypothesis(
    spec: DistributionSpec,
    rng: np.random.Generator,
    offset_band: Optional[float] = None,
    homogeneous: bool = False,
) -> Hypothesis:
    """Random unit normal with offset uniform in [-offset_band, offset_band].

    The default band keeps the boundary well inside the support (half the
    radius / half-width).  For margin families a margin of gamma is enforced
    by the sampler, so the offset is limited to leave mass on both sides.
    """
    d = spec.d
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    if homogeneous:
        return Hypothesis(tuple(float(v) for v in w), 0.0)
    if offset_band is None:
        scale = float(spec.param("radius", spec.param("half_width", spec.param("scale", 1.0))))
        if spec.family == "hypercube_balls":
            scale = 1.0
        offset_band = 0.5 * scale
        if spec.family == "annulus_with_margin":
            offset_band = max(0.0, min(offset_band, scale - 2 * float(spec.param("gamma"))))
    b = float(rng.uniform(-offset_band, offset_band)) if offset_band > 0 else 0.0
    return Hypothesis(tuple(float(v) for v in w), b)
