"""Planted one-dimensional samples for the cluster-detection checks.

Points live on a line with h(x) = x, so a point's coordinate is its value.
"""

import numpy as np

from arpulab.core import Hypothesis, Sample

LINE = Hypothesis((1.0,), 0.0)


def line_sample(values, start=0) -> Sample:
    v = np.asarray(values, dtype=float)
    return Sample(np.arange(start, start + v.size, dtype=np.int64), v[:, None])


def cluster_plus_spread(rng, size, width, spread, center=0.3):
    """``size`` values inside [center, center + width] plus ``spread`` values
    uniform on [-1, 1] outside it (shuffled together)."""
    inside = center + width * rng.random(size)
    outside = rng.uniform(-1, 1, 4 * spread)
    outside = outside[(outside < center - width) | (outside > center + 2 * width)][:spread]
    v = np.concatenate([inside, outside])
    rng.shuffle(v)
    return v


def well_separated(rng, n, gap):
    """n values with consecutive gaps strictly above ``gap``."""
    return np.cumsum(gap * (1.0 + 0.5 * rng.random(n))) - gap * n / 2
