"""Noisy sorting: disagreement-minimizing orders, blocks, slotting and chains."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from . import _sorting
from .core import SENTINEL_ID, Point, Sample
from .oracles import OracleState

EXACT_DP_MAX = 18


@dataclass(frozen=True)
class ComparisonTable:
    """Measured order over a sample: ``T[i, j] == 1`` iff i measured less than j.

    The sentinel (id ``SENTINEL_ID``) may appear as a row; its comparisons
    are the labels of the other points.
    """

    sample: Sample
    T: NDArray[np.int8]

    def __len__(self) -> int:
        return self.T.shape[0]

    @property
    def ids(self) -> NDArray[np.int64]:
        return self.sample.ids

    @property
    def sentinel_index(self) -> Optional[int]:
        hit = np.flatnonzero(self.sample.ids == SENTINEL_ID)
        return int(hit[0]) if hit.size else None

    @classmethod
    def from_oracle(cls, oracle: OracleState, sample: Sample, sentinel: bool = False):
        if sentinel:
            anchor = Sample(np.array([SENTINEL_ID]), np.zeros((1, sample.dim)))
            sample = Sample.concat([sample, anchor])
        return cls(sample, oracle.less_table(sample))

    @classmethod
    def from_values(cls, values: Sequence[float]):
        """Noiseless table ordering items by the given values."""
        v = np.asarray(values, dtype=float)
        n = v.size
        T = (v[:, None] < v[None, :]).astype(np.int8)
        return cls(Sample(np.arange(n, dtype=np.int64), v.reshape(-1, 1)), T)

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=np.int8)
        n = T.shape[0]
        return cls(Sample(np.arange(n, dtype=np.int64), np.zeros((n, 1))), T)


@dataclass(frozen=True)
class NoisyOrder:
    """A permutation of table indices, smallest first."""

    perm: NDArray[np.int64]
    score: int
    method: str
    block_size: int = 1

    def __len__(self) -> int:
        return self.perm.shape[0]

    @property
    def positions(self) -> NDArray[np.int64]:
        pos = np.empty_like(self.perm)
        pos[self.perm] = np.arange(self.perm.size)
        return pos

    def with_blocks(self, block_size: int) -> "NoisyOrder":
        return NoisyOrder(self.perm, self.score, self.method, max(1, int(block_size)))

    @property
    def n_blocks(self) -> int:
        return max(1, len(self) // self.block_size)

    def block_starts(self) -> NDArray[np.int64]:
        """Start position of each block; the last block absorbs the remainder."""
        return np.arange(self.n_blocks, dtype=np.int64) * self.block_size

    def blocks(self) -> list[range]:
        starts = self.block_starts().tolist() + [len(self)]
        return [range(a, b) for a, b in zip(starts[:-1], starts[1:])]

    def block_of(self, position: int) -> int:
        return int(min(max(position, 0) // self.block_size, self.n_blocks - 1))


def disagreement_score(table: ComparisonTable, perm) -> int:
    """Number of pairs whose order in ``perm`` contradicts the table."""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(len(table))):
        raise ValueError("perm must be a bijection on the table indices")
    return int(_sorting.score(table.T, perm))


def mle_order(
    table: ComparisonTable,
    rng: Optional[np.random.Generator] = None,
    window: int = 8,
    radius: Optional[int] = None,
    exact_max: int = EXACT_DP_MAX,
) -> NoisyOrder:
    """A permutation minimizing disagreements with the measured table.

    Up to ``exact_max`` items the subset dynamic program returns a global
    minimizer.  Beyond that, two seeds (a table-driven merge sort over a
    seeded shuffle, and the order by number of measured wins) are each
    improved by swap / reinsertion / sliding-window descent; the better local
    optimum is returned (the first seed wins ties).
    """
    T = table.T
    n = T.shape[0]
    if n < 2:
        return NoisyOrder(np.arange(n, dtype=np.int64), 0, "exact_dp")
    if n <= exact_max:
        perm, val = _sorting.subset_dp(T, np.arange(n, dtype=np.int64))
        return NoisyOrder(perm, int(val), "exact_dp")
    rng = rng if rng is not None else np.random.default_rng(0)
    if radius is None:
        radius = int(4 * math.sqrt(n)) + 64
    scan = rng.permutation(n).astype(np.int64)
    shuffled = rng.permutation(n).astype(np.int64)
    wins = T.sum(axis=0, dtype=np.int64)
    seeds = [
        _sorting.merge_sort(T, shuffled),
        shuffled[np.argsort(wins[shuffled], kind="stable")],
    ]
    best = None
    for seed in seeds:
        order = seed.astype(np.int64).copy()
        _sorting.descend(T, order, scan, window, radius)
        s = int(_sorting.score(T, order))
        if best is None or s < best[1]:
            best = (order, s)
    return NoisyOrder(best[0], best[1], "local_search")


@dataclass(frozen=True)
class SlotResult:
    block: int
    position: int
    comparisons: int


def slot_point(
    order: NoisyOrder,
    table: ComparisonTable,
    oracle: OracleState,
    x: Point,
) -> SlotResult:
    """Insert x into a blocked order by binary search over block boundaries.

    Each step compares x with every member of one block and moves right when
    x measures greater than a strict majority.  The final position refines
    the boundary with the counts from the two blocks around it.
    """
    starts = order.block_starts()
    b = starts.size
    ends = np.append(starts[1:], len(order))
    xa = x.array()
    beaten: dict[int, int] = {}
    used = 0
    lo, hi = 0, b
    while lo < hi:
        mid = (lo + hi) // 2
        members = order.perm[starts[mid] : ends[mid]]
        less = oracle.compare_one_to_many(x.id, xa, table.ids[members], table.sample.X[members])
        used += members.size
        greater = int(members.size - np.count_nonzero(less))
        beaten[mid] = greater
        if 2 * greater > members.size:
            lo = mid + 1
        else:
            hi = mid
    pos = int(starts[lo]) if lo < b else len(order)
    pos += beaten.get(lo, 0)
    if lo - 1 in beaten:
        pos -= int(ends[lo - 1] - starts[lo - 1]) - beaten[lo - 1]
    pos = min(max(pos, 0), len(order))
    return SlotResult(order.block_of(pos), pos, used)


def select_separated_chain(
    order: NoisyOrder,
    slotted: Sequence[tuple[Point, int]],
    gap_blocks: int = 8,
    sentinel_block: Optional[int] = None,
) -> list[Point]:
    """Greedy left-to-right chain of slotted points at least ``gap_blocks``
    apart from each other and from the sentinel's block."""
    items = sorted(slotted, key=lambda pb: (int(pb[1]), pb[0].id))
    chain: list[Point] = []
    last = None
    for p, blk in items:
        blk = int(blk)
        if sentinel_block is not None and abs(blk - sentinel_block) < gap_blocks:
            continue
        if last is not None and blk - last < gap_blocks:
            continue
        chain.append(p)
        last = blk
    return chain


def max_displacement(order, true_order) -> int:
    """max_i |sigma(i) - i| between two orders over the same items."""
    perm = np.asarray(getattr(order, "perm", order), dtype=np.int64)
    true = np.asarray(true_order, dtype=np.int64)
    pos_true = np.empty_like(true)
    pos_true[true] = np.arange(true.size)
    return int(np.max(np.abs(pos_true[perm] - np.arange(perm.size)))) if perm.size else 0


@dataclass(frozen=True)
class FarClassification:
    """Pairs whose true comparison correctness is at least 1/2 + lam."""

    far: NDArray[np.bool_]
    lam: float

    @classmethod
    def from_oracle(cls, oracle: OracleState, table: ComparisonTable, lam: float):
        ids, X = table.ids, table.sample.X
        n = ids.size
        beta = np.ones((n, n))
        real = np.flatnonzero(ids != SENTINEL_ID)
        ia, ib = np.meshgrid(real, real, indexing="ij")
        ia, ib = ia.ravel(), ib.ravel()
        off = ia != ib
        beta[ia[off], ib[off]] = oracle.comparison_correctness(ids[ia[off]], X[ia[off]], ids[ib[off]], X[ib[off]])
        s = table.sentinel_index
        if s is not None:
            lb = oracle.label_correctness(ids[real], X[real])
            beta[s, real] = lb
            beta[real, s] = lb
        return cls(beta >= 0.5 + lam - 1e-12, lam)


def count_far_errors(order, classification: FarClassification, true_order) -> tuple[int, int]:
    """Pairs ordered against the truth, split into (far, close)."""
    perm = np.asarray(getattr(order, "perm", order), dtype=np.int64)
    true = np.asarray(true_order, dtype=np.int64)
    rank = np.empty_like(true)
    rank[true] = np.arange(true.size)
    r = rank[perm]
    wrong = r[:, None] > r[None, :]
    wrong = np.triu(wrong, 1)
    far = classification.far[np.ix_(perm, perm)]
    return int(np.count_nonzero(wrong & far)), int(np.count_nonzero(wrong & ~far))
