"""Persistent noisy label and comparison oracles against a planted hypothesis.

Three noise models are supported: noiseless, Massart (bounded flip rate) and
the generalized Tsybakov condition (advantage sandwiched between two monotone
envelopes of the distance to the boundary, or between the compared pair).

Every answer is derived from a counter-based uniform keyed on the query's
identity, so answers are stable under any interleaving of repeats.  The memo
tables record which queries have been asked, which is what the budget
counters count.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import NDArray

from . import _hashing
from .core import (
    SENTINEL_ID,
    ConfigError,
    DegeneratePointError,
    Hypothesis,
    Point,
    Sample,
)


class ParameterError(ValueError):
    """A numeric parameter lies outside the domain of a formula."""


class SelfComparisonError(ValueError):
    pass


class Order(enum.IntEnum):
    X1_LESS = -1
    X2_LESS = 1


# ---------------------------------------------------------------- envelopes


@dataclass(frozen=True)
class PowerFamily:
    """g(x) = m * x**(kappa - 1), capped at 1/2."""

    m: float
    kappa: float

    def __post_init__(self):
        if self.m < 0 or self.kappa < 1:
            raise ConfigError("power family needs m >= 0 and kappa >= 1")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kappa == 1:
            g = np.full_like(x, self.m)
        else:
            g = self.m * np.power(np.maximum(x, 0.0), self.kappa - 1)
        return np.minimum(g, 0.5)

    def inverse(self, y: float, eps0: float) -> float:
        """Smallest x in [0, eps0] with g(x) >= y."""
        top = float(self(eps0))
        if y > top + 1e-15:
            raise ParameterError(f"inverse of {self} at {y} exceeds g(eps0)={top}")
        if y <= float(self(0.0)):
            return 0.0
        return min(float((y / self.m) ** (1.0 / (self.kappa - 1))), eps0)

    def describe(self) -> dict:
        return {"family": "power", "m": self.m, "kappa": self.kappa}


@dataclass(frozen=True)
class TableFamily:
    """Piecewise-linear interpolation of a monotone table."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        xs, ys = np.asarray(self.xs), np.asarray(self.ys)
        if xs.shape != ys.shape or xs.size < 2:
            raise ConfigError("table needs matching xs/ys with at least two entries")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) < 0):
            raise ConfigError("table must have increasing xs and nondecreasing ys")
        if xs[0] != 0 or ys.min() < 0 or ys.max() > 0.5:
            raise ConfigError("table must start at x=0 with values in [0, 1/2]")

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys)

    def inverse(self, y: float, eps0: float) -> float:
        xs, ys = np.asarray(self.xs), np.asarray(self.ys)
        top = float(self(eps0))
        if y > top + 1e-15:
            raise ParameterError(f"inverse of table at {y} exceeds g(eps0)={top}")
        if y <= ys[0]:
            return 0.0
        i = int(np.searchsorted(ys, y, side="left"))
        x0, x1, y0, y1 = xs[i - 1], xs[i], ys[i - 1], ys[i]
        return min(float(x0 + (y - y0) / (y1 - y0) * (x1 - x0)), eps0)

    def describe(self) -> dict:
        return {"family": "table", "xs": list(self.xs), "ys": list(self.ys)}


Envelope = Union[PowerFamily, TableFamily]


# ------------------------------------------------------------------- models


@dataclass(frozen=True)
class Noiseless:
    uses_flip_draw = False

    def label_beta(self, values, flip_u=None):
        return np.ones_like(np.asarray(values, dtype=float))

    def comparison_beta(self, gaps, flip_u=None):
        return np.ones_like(np.asarray(gaps, dtype=float))

    def envelope_params(self):
        return (0.5, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0)

    def describe(self) -> dict:
        return {"model": "noiseless"}


NOISELESS = Noiseless()

MASSART_MODES = ("worst_case_flip", "uniform_flip")
GTNC_MODES = ("lower_envelope", "upper_envelope", "midpoint")


@dataclass(frozen=True)
class MassartModel:
    """Each answer flips with probability 1/2 - lam (worst case) or a
    per-point/per-pair rate drawn once from [0, 1/2 - lam]."""

    lam: float
    adversary_mode: str = "worst_case_flip"

    def __post_init__(self):
        if not 0 < self.lam <= 0.5:
            raise ConfigError("Massart lambda must lie in (0, 1/2]")
        if self.adversary_mode not in MASSART_MODES:
            raise ConfigError(f"Massart adversary_mode must be one of {MASSART_MODES}")

    @property
    def uses_flip_draw(self) -> bool:
        return self.adversary_mode == "uniform_flip"

    def _beta(self, shape, flip_u):
        if self.adversary_mode == "worst_case_flip":
            return np.full(shape, 0.5 + self.lam)
        return 1.0 - (0.5 - self.lam) * flip_u

    def label_beta(self, values, flip_u=None):
        return self._beta(np.shape(values), flip_u)

    def comparison_beta(self, gaps, flip_u=None):
        return self._beta(np.shape(gaps), flip_u)

    def envelope_params(self):
        if self.uses_flip_draw:
            return None
        return (self.lam, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0)

    def describe(self) -> dict:
        return {"model": "massart", "lambda": self.lam, "adversary_mode": self.adversary_mode}


@dataclass(frozen=True)
class GtncModel:
    """Advantage over 1/2 lies in [g_L(t), g_U(t)] with t the boundary distance
    (labels) or the value gap (comparisons); beyond eps0 the envelopes are
    frozen at their eps0 values."""

    g_lower: Envelope
    g_upper: Envelope
    eps0: float
    adversary_mode: str = "lower_envelope"

    uses_flip_draw = False

    def __post_init__(self):
        if self.eps0 <= 0:
            raise ConfigError("eps0 must be positive")
        if self.adversary_mode not in GTNC_MODES:
            raise ConfigError(f"GTNC adversary_mode must be one of {GTNC_MODES}")
        grid = np.linspace(0.0, self.eps0, 257)
        if np.any(self.g_lower(grid) > self.g_upper(grid) + 1e-12):
            raise ConfigError("g_L must not exceed g_U on [0, eps0]")

    @classmethod
    def tnc(cls, m: float, M: float, kappa: float, eps0: float, adversary_mode="lower_envelope"):
        return cls(PowerFamily(m, kappa), PowerFamily(M, kappa), eps0, adversary_mode)

    def g_L(self, x):
        return self.g_lower(np.minimum(np.abs(x), self.eps0))

    def g_U(self, x):
        return self.g_upper(np.minimum(np.abs(x), self.eps0))

    def g_L_inv(self, y: float) -> float:
        return self.g_lower.inverse(y, self.eps0)

    def g_U_inv(self, y: float) -> float:
        return self.g_upper.inverse(y, self.eps0)

    def advantage(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        if self.adversary_mode == "lower_envelope":
            return self.g_L(t)
        if self.adversary_mode == "upper_envelope":
            return self.g_U(t)
        return 0.5 * (self.g_L(t) + self.g_U(t))

    def label_beta(self, values, flip_u=None):
        return 0.5 + self.advantage(values)

    def comparison_beta(self, gaps, flip_u=None):
        return 0.5 + self.advantage(gaps)

    def envelope_params(self):
        lo, up = self.g_lower, self.g_upper
        if not (isinstance(lo, PowerFamily) and isinstance(up, PowerFamily)):
            return None
        w = {"lower_envelope": (1.0, 0.0), "upper_envelope": (0.0, 1.0), "midpoint": (0.5, 0.5)}
        return (lo.m, lo.kappa, up.m, up.kappa, self.eps0) + w[self.adversary_mode]

    def describe(self) -> dict:
        return {
            "model": "gtnc",
            "g_lower": self.g_lower.describe(),
            "g_upper": self.g_upper.describe(),
            "eps0": self.eps0,
            "adversary_mode": self.adversary_mode,
        }


NoiseModel = Union[Noiseless, MassartModel, GtncModel]


# ------------------------------------------------------------------- oracle


@dataclass
class OracleState:
    """Single-trial oracle: noise model, planted hypothesis and query memo."""

    model: NoiseModel
    h_star: Hypothesis
    key: int = 0
    label_memo: dict = field(default_factory=dict)
    compare_memo: dict = field(default_factory=dict)
    label_queries: int = 0
    comparison_queries: int = 0
    repeated_queries: int = 0

    def __post_init__(self):
        base = np.random.SeedSequence(int(self.key)).generate_state(4, np.uint64)
        self._k_label, self._k_cmp, self._k_lflip, self._k_cflip = (np.uint64(v) for v in base)
        # dense blocks of fully compared fresh points: id -> block number
        self._clique_of: dict[int, int] = {}
        self._n_cliques = 0
        # rows charged in bulk against a fixed column set: id -> group number
        self._group_of: dict[int, int] = {}
        self._group_cols: list[frozenset] = []
        self._touched: set[int] = set()

    # ground truth (simulation side only)

    def values(self, X) -> NDArray[np.float64]:
        return self.h_star.values(X)

    def label_correctness(self, ids, X) -> NDArray[np.float64]:
        ids = np.asarray(ids, dtype=np.int64)
        v = self.values(X)
        flip = _hashing.point_uniforms(self._k_lflip, ids) if self.model.uses_flip_draw else None
        return np.clip(self.model.label_beta(v, flip), 0.0, 1.0)

    def comparison_correctness(self, ids1, X1, ids2, X2) -> NDArray[np.float64]:
        ids1 = np.asarray(ids1, dtype=np.int64)
        ids2 = np.asarray(ids2, dtype=np.int64)
        gap = np.abs(self.values(X1) - self.values(X2))
        flip = (
            _hashing.pair_uniforms(self._k_cflip, ids1, ids2) if self.model.uses_flip_draw else None
        )
        return np.clip(self.model.comparison_beta(gap, flip), 0.0, 1.0)

    # labels

    def labels(self, ids, X) -> NDArray[np.int8]:
        """Measured labels for a batch; each distinct id is charged once."""
        ids = np.asarray(ids, dtype=np.int64)
        v = self.values(X)
        if np.any(v == 0):
            raise DegeneratePointError("point with exact-zero hypothesis value queried")
        beta = self.label_correctness(ids, X)
        u = _hashing.point_uniforms(self._k_label, ids)
        truth = np.where(v > 0, 1, -1).astype(np.int8)
        out = np.where(u < beta, truth, -truth).astype(np.int8)
        memo = self.label_memo
        for i, lab in zip(ids.tolist(), out.tolist()):
            if i in memo:
                self.repeated_queries += 1
            else:
                memo[i] = lab
                self.label_queries += 1
        return out

    # comparisons

    def _truth_less(self, ids1, v1, ids2, v2):
        return (v1 < v2) | ((v1 == v2) & (ids1 < ids2))

    def _answers(self, ids1, X1, ids2, X2) -> NDArray[np.bool_]:
        """True where ids1[i] measures less than ids2[i]."""
        v1, v2 = self.values(X1), self.values(X2)
        beta = self.comparison_correctness(ids1, X1, ids2, X2)
        u = _hashing.pair_uniforms(self._k_cmp, ids1, ids2)
        truth = self._truth_less(ids1, v1, ids2, v2)
        return np.where(u < beta, truth, ~truth)

    def _bulk_seen(self, a: int, b: int) -> bool:
        ca = self._clique_of.get(a)
        if ca is not None and ca == self._clique_of.get(b):
            return True
        for r, c in ((a, b), (b, a)):
            g = self._group_of.get(r)
            if g is not None and c in self._group_cols[g]:
                return True
        return False

    def _charge_pairs(self, ids1, ids2, answers):
        memo = self.compare_memo
        bulk = bool(self._clique_of or self._group_of)
        for a, b, less in zip(ids1.tolist(), ids2.tolist(), answers.tolist()):
            self._touched.add(a)
            self._touched.add(b)
            if bulk and self._bulk_seen(a, b):
                self.repeated_queries += 1
                continue
            key = (a, b) if a < b else (b, a)
            if key in memo:
                self.repeated_queries += 1
            else:
                memo[key] = less if a < b else not less
                self.comparison_queries += 1

    def compare_one_to_many(self, x_id: int, x: NDArray, ids, X) -> NDArray[np.bool_]:
        """Whether x measures less than each of the given points.

        Comparisons against the sentinel are routed through x's label.
        """
        ids = np.asarray(ids, dtype=np.int64)
        X = np.atleast_2d(X)
        out = np.empty(ids.shape[0], dtype=bool)
        sent = ids == SENTINEL_ID
        if x_id == SENTINEL_ID:
            if np.any(sent):
                raise SelfComparisonError("sentinel compared with itself")
            lab = self.labels(ids, X)
            return lab > 0
        if np.any(ids == x_id):
            raise SelfComparisonError(f"point {x_id} compared with itself")
        if np.any(sent):
            lab = self.labels([x_id], np.atleast_2d(x))[0]
            out[sent] = lab < 0
        real = ~sent
        if np.any(real):
            rid = ids[real]
            xid = np.full(rid.shape[0], x_id, dtype=np.int64)
            xs = np.broadcast_to(np.asarray(x, dtype=float), (rid.shape[0], X.shape[1]))
            ans = self._answers(xid, xs, rid, X[real])
            self._charge_pairs(xid, rid, ans)
            out[real] = ans
        return out

    def less_table(self, sample: Sample, chunk: int = 512) -> NDArray[np.int8]:
        """Full measured table ``T[i, j] = 1`` iff point i measures less than j.

        Points must be fresh (never compared before) unless they already form
        one dense block; the sentinel id is allowed and answered by labels.
        """
        ids, X = sample.ids, sample.X
        n = ids.shape[0]
        if len(set(ids.tolist())) != n:
            raise SelfComparisonError("duplicate ids in comparison table")
        sent = np.flatnonzero(ids == SENTINEL_ID)
        real = np.flatnonzero(ids != SENTINEL_ID)
        rid, rX = ids[real], X[real]
        v = self.values(rX)
        env = self.model.envelope_params()
        if env is not None:
            Tr = _hashing.fill_less_table(self._k_cmp, rid, v, np.asarray(env, dtype=float))
        else:
            Tr = self._generic_table(rid, v, chunk)
        if sent.size == 0:
            T = Tr
        else:
            T = np.zeros((n, n), dtype=np.int8)
            T[np.ix_(real, real)] = Tr
        T[real, real] = 0
        if sent.size:
            lab = self.labels(rid, rX)
            T[np.ix_(real, sent)] = (lab < 0)[:, None]
            T[np.ix_(sent, real)] = (lab > 0)[None, :]
        self._charge_dense(rid, rX)
        return T

    def _generic_table(self, rid, v, chunk):
        m = rid.shape[0]
        T = np.zeros((m, m), dtype=np.int8)
        for s in range(0, m, chunk):
            rows = slice(s, min(s + chunk, m))
            gap = np.abs(v[rows, None] - v[None, :])
            flip = None
            if self.model.uses_flip_draw:
                flip = _hashing.pair_uniform_grid(self._k_cflip, rid[rows], rid)
            beta = np.clip(self.model.comparison_beta(gap, flip), 0.0, 1.0)
            u = _hashing.pair_uniform_grid(self._k_cmp, rid[rows], rid)
            truth = (v[rows, None] < v[None, :]) | (
                (v[rows, None] == v[None, :]) & (rid[rows, None] < rid[None, :])
            )
            T[rows] = np.where(u < beta, truth, ~truth)
        return T

    def _charge_dense(self, rid: NDArray[np.int64], rX: NDArray[np.float64]):
        ids = rid.tolist()
        owners = {self._clique_of.get(i) for i in ids}
        n = len(ids)
        if owners == {None} and self._touched.isdisjoint(ids):
            self.comparison_queries += n * (n - 1) // 2
            block = self._n_cliques
            self._n_cliques += 1
            for i in ids:
                self._clique_of[i] = block
            self._touched.update(ids)
            return
        if len(owners) == 1 and None not in owners:
            self.repeated_queries += n * (n - 1) // 2
            return
        # mixed history: fall back to exact pairwise accounting
        a, b = np.triu_indices(n, 1)
        self._charge_pairs(rid[a], rid[b], self._answers(rid[a], rX[a], rid[b], rX[b]))

    def beaten_counts(self, rows: Sample, cols: Sample, col_counts=None, band=(0, 0)):
        """Per row x: the number of columns measuring less than x, and whether
        every column's count (``col_counts`` plus the comparison with x) stays
        inside the closed ``band``.  Rows and columns must be real points.
        """
        rid, cid = rows.ids, cols.ids
        if np.any(rid == SENTINEL_ID) or np.any(cid == SENTINEL_ID):
            raise SelfComparisonError("sentinel not allowed in bulk counts")
        if not set(rid.tolist()).isdisjoint(cid.tolist()):
            raise SelfComparisonError("rows and columns overlap")
        cc = np.zeros(cid.size, dtype=np.int64) if col_counts is None else np.asarray(col_counts, np.int64)
        lo, hi = float(band[0]), float(band[1])
        if col_counts is None:
            lo, hi = -np.inf, np.inf
        rv, cv = self.values(rows.X), self.values(cols.X)
        env = self.model.envelope_params()
        if env is not None:
            counts, ok = _hashing.beaten_counts(
                self._k_cmp, rid, rv, cid, cv, np.asarray(env, dtype=float), cc, lo, hi
            )
        else:
            counts = np.zeros(rid.size, dtype=np.int64)
            ok = np.ones(rid.size, dtype=bool)
            for s in range(0, rid.size, 256):
                sl = slice(s, min(s + 256, rid.size))
                gap = np.abs(rv[sl, None] - cv[None, :])
                flip = None
                if self.model.uses_flip_draw:
                    flip = _hashing.pair_uniform_grid(self._k_cflip, rid[sl], cid)
                beta = np.clip(self.model.comparison_beta(gap, flip), 0.0, 1.0)
                u = _hashing.pair_uniform_grid(self._k_cmp, rid[sl], cid)
                truth = (cv[None, :] < rv[sl, None]) | (
                    (cv[None, :] == rv[sl, None]) & (cid[None, :] < rid[sl, None])
                )
                col_less = np.where(u < beta, truth, ~truth)
                counts[sl] = col_less.sum(axis=1)
                after = cc[None, :] + (~col_less)
                ok[sl] = np.all((after >= lo) & (after <= hi), axis=1)
        self._charge_bipartite(rows, cols)
        return counts, ok

    def _charge_bipartite(self, rows: Sample, cols: Sample):
        rid = rows.ids.tolist()
        if self._touched.isdisjoint(rid) and len(set(rid)) == len(rid):
            self.comparison_queries += len(rid) * len(cols)
            g = len(self._group_cols)
            self._group_cols.append(frozenset(cols.ids.tolist()))
            for i in rid:
                self._group_of[i] = g
            self._touched.update(rid)
            return
        a = np.repeat(rows.ids, len(cols))
        b = np.tile(cols.ids, len(rows))
        Xa = np.repeat(rows.X, len(cols), axis=0)
        Xb = np.tile(cols.X, (len(rows), 1))
        self._charge_pairs(a, b, self._answers(a, Xa, b, Xb))

    def budget(self) -> tuple[int, int]:
        return self.label_queries, self.comparison_queries


def _point_row(x: Point) -> NDArray[np.float64]:
    return np.asarray([x.coords], dtype=float)


def query_label(state: OracleState, x: Point) -> int:
    """Measured label of x (+1 or -1), persistent across repeats."""
    return int(state.labels([x.id], _point_row(x))[0])


def query_comparison(state: OracleState, x1: Point, x2: Point) -> Order:
    """Which of x1, x2 measures less; symmetric and persistent."""
    if x1.id == x2.id:
        raise SelfComparisonError(f"point {x1.id} compared with itself")
    less = state.compare_one_to_many(x1.id, x1.array(), [x2.id], _point_row(x2))[0]
    return Order.X1_LESS if less else Order.X2_LESS


def query_budget(state: OracleState) -> tuple[int, int]:
    """(distinct label queries, distinct comparison queries) so far."""
    return state.budget()
