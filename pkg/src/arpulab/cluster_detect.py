"""Equitable subsets, cluster membership, majority labels and margin tests.

A set is eps-equitable when every member measures greater than between
(1/2 - eps)|S| and (1/2 + eps)|S| of the others: what a set of nearly equal
values looks like through a noisy comparison oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .core import Point, Sample
from .oracles import GtncModel, OracleState, ParameterError
from .ordering import ComparisonTable, NoisyOrder

FAR_ENOUGH = "far_enough"
TOO_CLOSE = "too_close"


class TieError(ValueError):
    """Exact tie in a majority vote."""


@dataclass(frozen=True)
class EquitabilityReport:
    ids: NDArray[np.int64]
    v: NDArray[np.int64]
    epsilon: float
    equitable: bool


def equitable_band(size: int, epsilon: float) -> tuple[float, float]:
    return (0.5 - epsilon) * size, (0.5 + epsilon) * size


def _is_equitable(v: NDArray, size: int, epsilon: float) -> bool:
    lo, hi = equitable_band(size, epsilon)
    return bool(np.all((v >= lo) & (v <= hi)))


def _indices(table: ComparisonTable, subset_ids) -> NDArray[np.int64]:
    where = {int(i): k for k, i in enumerate(table.ids.tolist())}
    try:
        return np.fromiter((where[int(i)] for i in subset_ids), dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"id {exc.args[0]} is not in the table") from None


def equitability(table: ComparisonTable, subset, epsilon: float) -> EquitabilityReport:
    """v(x) = number of subset members measuring less than x, and the verdict."""
    ids = np.asarray(list(subset), dtype=np.int64)
    idx = _indices(table, ids)
    v = table.T[np.ix_(idx, idx)].sum(axis=0, dtype=np.int64)
    return EquitabilityReport(ids, v, float(epsilon), _is_equitable(v, ids.size, epsilon))


def win_order(table: ComparisonTable) -> NDArray[np.int64]:
    """Indices sorted by measured wins (ties by index)."""
    wins = table.T.sum(axis=0, dtype=np.int64)
    return np.argsort(wins, kind="stable").astype(np.int64)


def find_equitable_subset(
    table: ComparisonTable,
    size: int,
    epsilon: float,
    search_budget: int = 0,
    rng: Optional[np.random.Generator] = None,
    order: Optional[NoisyOrder] = None,
) -> Optional[EquitabilityReport]:
    """First equitable subset of ``size`` found among all windows of a
    pre-order, then among ``search_budget`` uniformly random subsets.

    The pre-order is ``order`` when given, else the measured-wins order.
    The sentinel row, if any, is never included.
    """
    T = table.T
    keep = np.arange(len(table)) if table.sentinel_index is None else np.delete(
        np.arange(len(table)), table.sentinel_index
    )
    perm = win_order(table) if order is None else np.asarray(order.perm, dtype=np.int64)
    perm = perm[np.isin(perm, keep)]
    n = perm.size
    if size < 1 or size > n:
        return None
    lo, hi = equitable_band(size, epsilon)
    # sliding window: v[t] counts window members measuring less than perm[a + t]
    win = perm[:size]
    v = T[np.ix_(win, win)].sum(axis=0, dtype=np.int64)
    a = 0
    while True:
        if np.all((v >= lo) & (v <= hi)):
            ids = table.ids[perm[a : a + size]]
            return EquitabilityReport(ids, v.copy(), float(epsilon), True)
        if a + size >= n:
            break
        out_i, in_i = perm[a], perm[a + size]
        rest = perm[a + 1 : a + size]
        v = v[1:] - T[out_i, rest] + T[in_i, rest]
        v = np.append(v, T[rest, in_i].sum(dtype=np.int64))
        a += 1
    if search_budget > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        for _ in range(int(search_budget)):
            pick = np.sort(rng.choice(perm, size=size, replace=False))
            vv = T[np.ix_(pick, pick)].sum(axis=0, dtype=np.int64)
            if np.all((vv >= lo) & (vv <= hi)):
                return EquitabilityReport(table.ids[pick], vv, float(epsilon), True)
    return None


def point_joins_cluster(
    oracle: OracleState,
    table: ComparisonTable,
    report: EquitabilityReport,
    x: Point,
    lambda_1: float,
) -> bool:
    """Whether S_eq with x added is lambda_1-equitable (queries x against S_eq)."""
    idx = _indices(table, report.ids)
    X = table.sample.X[idx]
    x_less = oracle.compare_one_to_many(x.id, x.array(), report.ids, X)
    size = report.ids.size + 1
    lo, hi = equitable_band(size, lambda_1)
    v_x = int(np.count_nonzero(~x_less))
    v_all = np.append(report.v + x_less, v_x)
    return bool(np.all((v_all >= lo) & (v_all <= hi)))


def cluster_joiners(
    oracle: OracleState,
    table: ComparisonTable,
    report: EquitabilityReport,
    candidates: Sample,
    lambda_1: float,
) -> NDArray[np.bool_]:
    """Vectorized ``point_joins_cluster`` over many candidates."""
    idx = _indices(table, report.ids)
    cols = Sample(report.ids, table.sample.X[idx])
    size = report.ids.size + 1
    lo, hi = equitable_band(size, lambda_1)
    counts, ok = oracle.beaten_counts(candidates, cols, report.v, (lo, hi))
    return ok & (counts >= lo) & (counts <= hi)


def majority_label(labels: Sequence[int]) -> int:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("majority of an empty vote")
    pos = int(np.count_nonzero(labels > 0))
    neg = labels.size - pos
    if pos == neg:
        raise TieError(f"tie: {pos} against {neg}")
    return 1 if pos > neg else -1


def labeling_size(model: GtncModel, gamma: float, delta: float, mult: float = 1.0) -> int:
    """Cluster size at which the majority label is wrong with probability <= delta."""
    g = float(model.g_L(gamma))
    if g <= 0:
        raise ParameterError("labeling size: g_L(gamma) must be positive")
    return int(math.ceil(mult * 2 * math.log(1 / delta) / g**2))


def margin_test_size(model: GtncModel, gamma: float, delta: float, mult: float = 1.0) -> int:
    g = float(model.g_U(2 * gamma))
    if g <= 0:
        raise ParameterError("margin test: g_U(2 gamma) must be positive")
    return int(math.ceil(mult * 16 * math.log(4 / delta) / g**2))


def margin_test(
    cluster_labels: Sequence[int],
    gamma: float,
    model: GtncModel,
    delta: float = 0.05,
    size_mult: float = 1.0,
) -> str:
    """FAR_ENOUGH iff the majority side holds at least (1/2 + 2 g_U(2 gamma))|C|
    of the measured labels."""
    labels = np.asarray(cluster_labels)
    need = margin_test_size(model, gamma, delta, size_mult)
    if labels.size < need:
        raise ParameterError(f"margin test needs at least {need} labels, got {labels.size}")
    pos = int(np.count_nonzero(labels > 0))
    top = max(pos, labels.size - pos)
    thresh = (0.5 + 2 * float(model.g_U(2 * gamma))) * labels.size
    return FAR_ENOUGH if top >= thresh else TOO_CLOSE


# --------------------------------------------------------------- constants


@dataclass(frozen=True)
class GtncDerivedConstants:
    eps_T: float
    gamma_prime: float
    lambda_1: float
    lam: float
    c: float
    m: float
    m2: float
    c1: float
    c2: float
    n: int
    block_gap: float
    iterations: int = 0
    multipliers: dict = field(default_factory=dict)

    @property
    def subset_size(self) -> int:
        return int(math.ceil(2 * self.c + self.m))


def _inv(f, y, name):
    try:
        return f(y)
    except ParameterError as exc:
        raise ParameterError(f"{name}: {exc}") from None


def derive_constants(
    model: GtncModel,
    gamma: float,
    d: int,
    k: int,
    delta_r: float,
    n_mult: float = 1.0,
    max_iter: int = 50,
) -> GtncDerivedConstants:
    """Sizes and thresholds for the GTNC learner with every hidden constant 1.

    ``n`` solves n = n_mult * (k^4 log(n / delta_r) / lam^6 + log^{4/3} d)
    by fixed-point iteration, where lam = g_L(g_U^-1(eps_T / 2)).
    """
    if not 0 < delta_r < 1 or gamma <= 0 or d < 1 or k < 1:
        raise ParameterError("need 0 < delta_r < 1, gamma > 0, d >= 1, k >= 1")
    gp = min(gamma / (2 * d), model.eps0 / 2)
    inner = _inv(model.g_U_inv, float(model.g_L(gp)) / 4, "eps_T: g_U^-1(g_L(gamma')/4)")
    eps_T = float(model.g_L(inner / 2)) / 4
    if eps_T <= 0:
        raise ParameterError("eps_T evaluated to zero")
    band = _inv(model.g_L_inv, 4 * eps_T, "lambda_1: g_L^-1(4 eps_T)")
    lambda_1 = 2 * float(model.g_U(2 * band))
    lam = float(model.g_L(_inv(model.g_U_inv, eps_T / 2, "lam: g_U^-1(eps_T/2)")))
    if lam <= 0:
        raise ParameterError("lam = g_L(g_U^-1(eps_T/2)) evaluated to zero")
    logd = math.log(d) ** (4 / 3) if d > 1 else 0.0
    base = k**4 / lam**6

    n = max(2.0, n_mult * (base * math.log(2 / delta_r) + logd))
    it = 0
    for it in range(1, max_iter + 1):
        nxt = max(2.0, n_mult * (base * math.log(n / delta_r) + logd))
        done = math.ceil(nxt) == math.ceil(n)
        n = nxt
        if done:
            break
    n_int = int(math.ceil(n))
    c = (48 * math.log(n_int) + math.log(1 / delta_r)) / eps_T**2
    c1 = math.sqrt(math.log(n_int / delta_r)) / lam
    c2 = 5 / lam
    m = math.sqrt(c1) * n_int**0.75
    return GtncDerivedConstants(
        eps_T=eps_T,
        gamma_prime=gp,
        lambda_1=lambda_1,
        lam=lam,
        c=c,
        m=m,
        m2=m,
        c1=c1,
        c2=c2,
        n=n_int,
        block_gap=c2 * m,
        iterations=it,
        multipliers={"n": n_mult},
    )


def aid_gamma(model: GtncModel, epsilon: float, c2: float) -> tuple[float, float]:
    """Synthetic margin for the no-margin variant: returns (gamma, eps').

    eps' = min(eps / (4 c2), eps0 / 2) and gamma = g_U^-1(g_L(eps') / 4) / 2.
    """
    eps_p = min(epsilon / (4 * c2), model.eps0 / 2)
    g = _inv(model.g_U_inv, float(model.g_L(eps_p)) / 4, "gamma: g_U^-1(g_L(eps')/4)") / 2
    return g, eps_p


def aid_band(model: GtncModel, gamma: float) -> float:
    """Width 2 g_L^-1(4 g_U(2 gamma)) of the band that may hold mislabels."""
    return 2 * _inv(model.g_L_inv, 4 * float(model.g_U(2 * gamma)), "band: g_L^-1(4 g_U(2 gamma))")
