import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _planted import LINE, cluster_plus_spread, line_sample, well_separated
from arpulab.cluster_detect import (
    FAR_ENOUGH,
    TOO_CLOSE,
    TieError,
    aid_band,
    aid_gamma,
    cluster_joiners,
    derive_constants,
    equitability,
    equitable_band,
    find_equitable_subset,
    labeling_size,
    majority_label,
    margin_test,
    margin_test_size,
    point_joins_cluster,
)
from arpulab.core import Point, RunSeed
from arpulab.oracles import NOISELESS, GtncModel, OracleState, ParameterError
from arpulab.ordering import ComparisonTable

TNC = GtncModel.tnc(0.4, 0.4, 2.0, 1.0)


def coin_table(r, n):
    T = np.zeros((n, n), dtype=np.int8)
    iu = np.triu_indices(n, 1)
    T[iu] = r.random(iu[0].size) < 0.5
    T[iu[1], iu[0]] = 1 - T[iu]
    return ComparisonTable.from_matrix(T)


def test_equitability_examples(rng):
    t = ComparisonTable.from_values([0.1, 0.2])
    rep = equitability(t, [0, 1], 0.1)
    assert sorted(rep.v.tolist()) == [0, 1] and not rep.equitable
    assert equitable_band(2, 0.1) == pytest.approx((0.8, 1.2))
    sep = ComparisonTable.from_values(rng.uniform(-1, 1, 100))
    rep = equitability(sep, range(100), 0.2)
    assert rep.v.max() == 99 and not rep.equitable


def test_coin_flip_tables_are_equitable(rng):
    hits = sum(equitability(coin_table(rng, 100), range(100), 0.2).equitable for _ in range(200))
    assert hits >= 190


@given(st.integers(0, 10**6), st.integers(2, 40), st.integers(1, 30))
def test_sliding_window_counts_match_direct(seed, n, size):
    # whatever subset is returned must be equitable when recomputed from scratch
    r = np.random.default_rng(seed)
    t = coin_table(r, n)
    rep = find_equitable_subset(t, min(size, n), 0.25, search_budget=5, rng=r)
    if rep is not None:
        again = equitability(t, rep.ids, 0.25)
        assert again.equitable
        assert sorted(again.v.tolist()) == sorted(rep.v.tolist())


def test_no_window_no_budget_gives_none():
    t = ComparisonTable.from_values(np.arange(30.0))
    assert find_equitable_subset(t, 10, 0.1, search_budget=0) is None


def _planted_table(seed, eps_T, size, spread):
    rs = RunSeed(seed)
    width = TNC.g_U_inv(eps_T / 2)
    v = cluster_plus_spread(rs.rng("sampler"), size, width, spread)
    o = OracleState(TNC, LINE, rs.key64("oracle"))
    return o, ComparisonTable.from_oracle(o, line_sample(v)), v, width


def test_planted_cluster_is_found():
    found = 0
    for t in range(60):
        _, table, _, _ = _planted_table(3000 + t, 0.1, 500, 500)
        found += find_equitable_subset(table, 500, 0.1) is not None
    assert found >= 54


def test_well_separated_gives_none():
    eps_T = 0.1
    gap = TNC.g_L_inv(4 * eps_T)
    none = 0
    for t in range(60):
        rs = RunSeed(4000 + t)
        v = well_separated(rs.rng("sampler"), 200, gap)
        o = OracleState(TNC, LINE, rs.key64("oracle"))
        table = ComparisonTable.from_oracle(o, line_sample(v))
        none += find_equitable_subset(table, 100, eps_T, search_budget=20, rng=rs.rng("learner")) is None
    assert none >= 57


def test_point_joins_cluster_both_directions():
    eps_T = 0.01
    band = TNC.g_L_inv(4 * eps_T)
    lambda_1 = 2 * float(TNC.g_U(2 * band))
    far = TNC.g_L_inv(min(2 * lambda_1, 0.4)) + 2 * band
    inside_ok = outside_ok = 0
    for t in range(40):
        rs = RunSeed(5000 + t)
        r = rs.rng("sampler")
        width = TNC.g_U_inv(eps_T / 2)
        v = 0.3 + width * r.random(300)
        o = OracleState(TNC, LINE, rs.key64("oracle"))
        table = ComparisonTable.from_oracle(o, line_sample(v))
        rep = equitability(table, table.ids, eps_T)
        deep = Point(10_000, (0.3 + width / 2,))
        away = Point(10_001, (0.3 + width + far + 0.01,))
        inside_ok += point_joins_cluster(o, table, rep, deep, lambda_1)
        outside_ok += not point_joins_cluster(o, table, rep, away, lambda_1)
    assert inside_ok >= 38 and outside_ok >= 38


def test_bulk_joiners_equal_pointwise(rng):
    v = 0.3 + 0.05 * rng.random(120)
    o1 = OracleState(TNC, LINE, key=77)
    o2 = OracleState(TNC, LINE, key=77)
    t1 = ComparisonTable.from_oracle(o1, line_sample(v))
    t2 = ComparisonTable.from_oracle(o2, line_sample(v))
    rep = equitability(t1, t1.ids, 0.2)
    cand = line_sample(rng.uniform(0.0, 0.7, 80), start=1000)
    bulk = cluster_joiners(o1, t1, rep, cand, 0.15)
    single = [point_joins_cluster(o2, t2, rep, p, 0.15) for p in cand.points()]
    assert bulk.tolist() == single
    assert o1.budget() == o2.budget()


def test_majority_label():
    assert majority_label([1, 1, 1]) == 1
    assert majority_label([-1, 1, -1]) == -1
    with pytest.raises(TieError):
        majority_label([1, -1])


def test_majority_wrong_rate_at_labeling_size():
    gamma, delta = 0.1, 0.05
    size = labeling_size(TNC, gamma, delta)
    assert size == math.ceil(2 * math.log(1 / delta) / float(TNC.g_L(gamma)) ** 2)
    wrong = 0
    for t in range(200):
        o = OracleState(TNC, LINE, key=RunSeed(6000 + t).key64("oracle"))
        s = line_sample(np.full(size, gamma))
        wrong += majority_label(o.labels(s.ids, s.X)) != 1
    assert wrong / 200 <= delta


def _margin_trials(values_fn, seed0, trials=100):
    gamma = 0.1
    size = margin_test_size(TNC, gamma, 0.05)
    out = []
    for t in range(trials):
        rs = RunSeed(seed0 + t)
        o = OracleState(TNC, LINE, rs.key64("oracle"))
        s = line_sample(values_fn(rs.rng("sampler"), size))
        out.append(margin_test(o.labels(s.ids, s.X), gamma, TNC))
    return out


def test_margin_test_directions():
    far = TNC.g_L_inv(4 * float(TNC.g_U(0.2)))
    res = _margin_trials(lambda r, n: far + 0.05 + 0.01 * r.random(n), 7000)
    assert res.count(FAR_ENOUGH) >= 95
    res = _margin_trials(lambda r, n: r.uniform(-0.1, 0.1, n), 8000)
    assert res.count(TOO_CLOSE) >= 95


def test_margin_test_noiseless_extreme_and_size_guard():
    size = margin_test_size(TNC, 0.1, 0.05)
    assert margin_test(np.ones(size, dtype=int), 0.1, TNC) == FAR_ENOUGH
    with pytest.raises(ParameterError):
        margin_test([1, 1, 1], 0.1, TNC)


def test_derived_constants_closed_form():
    # g_L = g_U = 0.4 x: eps_T = 0.4 gamma' / 32, lambda_1 = 16 eps_T, lam = eps_T / 2
    dc = derive_constants(TNC, 0.1, 2, 5, 0.05)
    gp = 0.1 / 4
    assert dc.gamma_prime == pytest.approx(gp)
    assert dc.eps_T == pytest.approx(0.4 * gp / 32)
    assert dc.lambda_1 == pytest.approx(16 * dc.eps_T)
    assert dc.lam == pytest.approx(dc.eps_T / 2)
    assert dc.c2 == pytest.approx(5 / dc.lam)
    assert dc.iterations <= 50
    # n solves its own fixed point to within one unit
    rhs = 5**4 * math.log(dc.n / 0.05) / dc.lam**6 + math.log(2) ** (4 / 3)
    assert abs(rhs - dc.n) <= max(1.0, 1e-9 * dc.n)


def test_derived_gamma_prime_min_branch():
    dc = derive_constants(TNC, 10.0, 2, 5, 0.05)
    assert dc.gamma_prime == pytest.approx(TNC.eps0 / 2)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("gamma", [0.05, 0.1, 0.2])
def test_fixed_point_converges(d, gamma):
    assert derive_constants(TNC, gamma, d, 5, 0.05).iterations <= 50


def test_aid_constants():
    g, eps_p = aid_gamma(TNC, 0.05, math.sqrt(2))
    assert eps_p == pytest.approx(0.05 / (4 * math.sqrt(2)))
    assert g == pytest.approx(TNC.g_U_inv(float(TNC.g_L(eps_p)) / 4) / 2)
    assert aid_band(TNC, g) == pytest.approx(2 * 4 * 0.4 * 2 * g / 0.4)


def test_noiseless_labels_never_wrong_majority():
    o = OracleState(NOISELESS, LINE, key=1)
    s = line_sample(np.full(11, 0.01))
    assert majority_label(o.labels(s.ids, s.X)) == 1
