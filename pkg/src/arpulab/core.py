"""Points, hypotheses and the seeded randomness contract shared by every module."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

SENTINEL_ID = -1
"""Reserved id of the anchor point whose comparisons are answered by labels."""

STREAMS = ("sampler", "oracle", "learner", "harness")


class ConfigError(ValueError):
    """Invalid configuration or mismatched dimensions."""


class DegeneratePointError(ValueError):
    """A point lies exactly on the decision boundary of the planted hypothesis."""


@dataclass(frozen=True)
class Point:
    id: int
    coords: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.coords)

    def array(self) -> NDArray[np.float64]:
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class Sample:
    """A batch of points stored column-wise: ``ids[i]`` owns row ``X[i]``."""

    ids: NDArray[np.int64]
    X: NDArray[np.float64]

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.ids.shape[0]:
            raise ConfigError("ids and coordinates disagree in length")

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])

    def point(self, i: int) -> Point:
        return Point(int(self.ids[i]), tuple(float(c) for c in self.X[i]))

    def points(self) -> list[Point]:
        return [self.point(i) for i in range(len(self))]

    def take(self, idx) -> "Sample":
        idx = np.asarray(idx, dtype=np.int64)
        return Sample(self.ids[idx], self.X[idx])

    @classmethod
    def from_points(cls, points: Sequence[Point]) -> "Sample":
        if not points:
            raise ConfigError("empty point list")
        ids = np.fromiter((p.id for p in points), dtype=np.int64, count=len(points))
        X = np.array([p.coords for p in points], dtype=float)
        return cls(ids, X)

    @classmethod
    def concat(cls, parts: Iterable["Sample"]) -> "Sample":
        parts = list(parts)
        return cls(np.concatenate([p.ids for p in parts]), np.vstack([p.X for p in parts]))


@dataclass(frozen=True)
class Hypothesis:
    """Affine function ``w.x + b``; its sign is the separator's label."""

    w: tuple[float, ...]
    b: float

    def __post_init__(self):
        if self.b == 0 and not any(self.w):
            raise ConfigError("hypothesis (w, b) is identically zero")

    @property
    def dim(self) -> int:
        return len(self.w)

    @property
    def normal(self) -> NDArray[np.float64]:
        return np.asarray(self.w, dtype=float)

    def values(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ConfigError(f"point dimension {X.shape[1]} != hypothesis dimension {self.dim}")
        return X @ self.normal + self.b

    def labels(self, X: NDArray[np.float64]) -> NDArray[np.int8]:
        return np.sign(self.values(X)).astype(np.int8)

    def margins(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.abs(self.values(X)) / np.linalg.norm(self.normal)

    def scaled(self, c: float) -> "Hypothesis":
        return Hypothesis(tuple(float(c) * v for v in self.w), float(c) * self.b)


def evaluate(h: Hypothesis, x: Point) -> float:
    """Return ``w.x + b``; the value every noise model is defined against."""
    if x.dim != h.dim:
        raise ConfigError(f"point dimension {x.dim} != hypothesis dimension {h.dim}")
    return float(sum(wi * xi for wi, xi in zip(h.w, x.coords)) + h.b)


def true_label(h: Hypothesis, x: Point) -> int:
    """Sign of ``evaluate``; 0 flags a point exactly on the boundary."""
    v = evaluate(h, x)
    return (v > 0) - (v < 0)


def _tag_key(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=4).digest(), "little")


@dataclass(frozen=True)
class RunSeed:
    """Master seed from which each consumer derives an independent Philox stream.

    Streams are addressed by a tag (``sampler``, ``oracle``, ``learner``,
    ``harness``) plus optional integer keys such as the trial index, so the
    same address always yields the same generator.
    """

    master_seed: int
    keys: tuple[int, ...] = field(default=())

    def child(self, *keys: int) -> "RunSeed":
        return RunSeed(self.master_seed, self.keys + tuple(int(k) for k in keys))

    def seed_sequence(self, tag: str, *keys: int) -> np.random.SeedSequence:
        spawn_key = (_tag_key(tag),) + self.keys + tuple(int(k) for k in keys)
        return np.random.SeedSequence(self.master_seed, spawn_key=spawn_key)

    def rng(self, tag: str, *keys: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence(tag, *keys)))

    def key64(self, tag: str, *keys: int) -> int:
        """A 64-bit key for counter-based hashing (used by the oracles)."""
        return int(self.seed_sequence(tag, *keys).generate_state(1, np.uint64)[0])


class IdAllocator:
    """Hands out fresh, never-reused point ids within one run."""

    def __init__(self, start: int = 0):
        self._next = int(start)

    def take(self, count: int) -> NDArray[np.int64]:
        ids = np.arange(self._next, self._next + count, dtype=np.int64)
        self._next += count
        return ids

    @property
    def issued(self) -> int:
        return self._next
