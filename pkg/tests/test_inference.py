import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _grid import cube_surface, grid_signs
from arpulab.core import ConfigError, Hypothesis, Point, Sample
from arpulab.inference import (
    BulkClassifier,
    Constraint,
    ConstraintSet,
    Verdict,
    check_inference_dimension,
    cluster_infer,
    cluster_region_vertices,
    feasibility,
    feasible,
    infer_label,
    noiseless_constraints,
)


def P(i, *c):
    return Point(i, tuple(float(v) for v in c))


def test_feasible_examples():
    assert feasible(ConstraintSet(2))
    x = P(0, 0.3, 0.1)
    assert not feasible(ConstraintSet(2, [Constraint.label(x, 1), Constraint.label(x, -1)]))
    cs = ConstraintSet(
        1,
        [
            Constraint.label(P(0, 1), 1),
            Constraint.label(P(1, -1), -1),
            Constraint.comparison(P(2, 2), P(0, 1)),
        ],
    )
    res = feasibility(cs)
    assert res.feasible
    w, b = res.x
    assert w * 1 + b > 0 and -w + b < 0 and 2 * w + b >= w + b
    # the analytic witness w = 1, b = 0 satisfies every row
    A, r = cs.rows()
    assert np.all(A @ np.array([1.0, 0.0]) >= r)


def test_infer_label_examples():
    x = P(0, 0.5, 0.5)
    cs = ConstraintSet(2, [Constraint.label(x, -1)])
    assert infer_label(cs, x) == Verdict.FORCED_NEGATIVE
    assert infer_label(ConstraintSet(2), P(1, 0.2, -0.7)) == Verdict.UNDETERMINED
    bad = ConstraintSet(2, [Constraint.label(x, 1), Constraint.label(x, -1)])
    assert infer_label(bad, P(2, 0.0, 0.1)) == Verdict.INCONSISTENT
    assert Verdict.INCONSISTENT.label == 0


def test_dimension_is_checked():
    with pytest.raises(ConfigError):
        ConstraintSet(2, [Constraint.label(P(0, 1.0), 1)])


def test_circle_configuration_against_fine_grid():
    # five points on a circle, alternating labels, all comparisons exact
    ang = 2 * np.pi * np.arange(5) / 5 + 0.3
    pts = [P(i, np.cos(a), np.sin(a)) for i, a in enumerate(ang)]
    h = Hypothesis((0.8, -0.6), 0.05)
    vals = h.values(np.array([p.coords for p in pts]))
    Z = cube_surface(3, 409)  # about 1e6 normalized candidates
    for i in range(5):
        rest = [j for j in range(5) if j != i]
        cs = noiseless_constraints(pts, vals, rest, 2)
        verdict = infer_label(cs, pts[i])
        pos, neg = grid_signs(Z, cs, pts[i].coords)
        if verdict == Verdict.FORCED_POSITIVE:
            assert not neg
        elif verdict == Verdict.FORCED_NEGATIVE:
            assert not pos
        else:
            assert pos and neg


def test_cluster_infer_one_dimensional_examples():
    cluster = [P(0, 0.0), P(1, 0.1)]
    assert cluster_infer(None, cluster, 1, P(9, 0.05), 1) == Verdict.FORCED_POSITIVE
    # y = 0.15 = -0.5 * 0 + 1.5 * 0.1, sum |a| = 2 <= d + 1
    assert cluster_infer(None, cluster, -1, P(9, 0.15), 1) == Verdict.FORCED_NEGATIVE
    # y = 0.3 needs a = (-2, 3), sum |a| = 5
    assert cluster_infer(None, cluster, 1, P(9, 0.3), 1) == Verdict.UNDETERMINED
    # the region's extreme points are exactly -0.05 and 0.15
    v = cluster_region_vertices(np.array([[0.0], [0.1]]), 1)
    np.testing.assert_allclose(sorted(v[:, 0]), [-0.05, 0.15])


def test_cluster_infer_inside_hull(rng):
    X = rng.uniform(-1, 1, (12, 2))
    pts = [P(i, *x) for i, x in enumerate(X)]
    y = P(99, *X[:3].mean(axis=0))
    assert cluster_infer(None, pts, 1, y, 2) == Verdict.FORCED_POSITIVE


def test_inference_dimension_small_cases(rng):
    h = Hypothesis((1.0, 0.0), 0.0)
    assert check_inference_dimension([P(0, 0.5, 0.5)], h) == (False, None)
    X = rng.uniform(-1, 1, (5, 2))
    holds, witness = check_inference_dimension([P(i, *x) for i, x in enumerate(X)], h)
    assert holds and witness is not None


def test_four_points_can_defeat_inference():
    # found by random search over rounded coordinates, checked against the grid oracle
    pts = [P(0, 0.12, -0.48), P(1, -0.52, 0.78), P(2, -0.55, -0.75), P(3, -0.42, 0.17)]
    h = Hypothesis((-0.57, -1.03), 0.06)
    holds, _ = check_inference_dimension(pts, h)
    assert not holds
    Z = cube_surface(3, 161)
    vals = h.values(np.array([p.coords for p in pts]))
    for i in range(4):
        cs = noiseless_constraints(pts, vals, [j for j in range(4) if j != i], 2)
        assert grid_signs(Z, cs, pts[i].coords) == (True, True)


@given(st.integers(0, 100_000))
def test_bulk_classifier_matches_lp(seed):
    r = np.random.default_rng(seed)
    d = int(r.integers(1, 3)) + 1
    w = r.normal(size=d)
    h = Hypothesis(tuple(w / np.linalg.norm(w)), float(r.uniform(-0.3, 0.3)))
    X = r.uniform(-1, 1, (7, d))
    pts = [Point(i, tuple(x)) for i, x in enumerate(X)]
    cs = noiseless_constraints(pts, h.values(X), range(7), d)
    queries = r.uniform(-1.5, 1.5, (25, d))
    labels, incons = BulkClassifier.build(cs.frozen()).classify(queries)
    assert not incons.any()
    for q, lab in zip(queries, labels):
        assert infer_label(cs, Point(-5, tuple(q))).label == lab
    truth = np.sign(h.values(queries))
    assert np.all((labels == 0) | (labels == truth))


@given(st.integers(0, 100_000))
def test_noiseless_verdicts_never_wrong(seed):
    # soundness: with truthful constraints a forced verdict is always correct
    r = np.random.default_rng(seed)
    h = Hypothesis(tuple(r.normal(size=2)), float(r.normal() * 0.3))
    X = r.uniform(-1, 1, (6, 2))
    pts = [Point(i, tuple(x)) for i, x in enumerate(X)]
    cs = noiseless_constraints(pts, h.values(X), range(6), 2)
    y = r.uniform(-1, 1, 2)
    v = infer_label(cs, Point(77, tuple(y)))
    assert v.label in (0, int(np.sign(h.values(y[None])[0])))


def test_cluster_constraint_classifies_region():
    members = [P(i, 0.5 + 0.01 * i, 0.2 - 0.01 * i) for i in range(6)]
    cs = ConstraintSet(2, [Constraint.cluster(members, 0.05, 1)])
    clf = BulkClassifier.build(cs.frozen())
    inside = np.array(members[0].coords)[None]
    far = np.array([[-0.9, -0.9]])
    assert clf.classify(inside)[0][0] == 1
    assert clf.classify(far)[0][0] == 0


def test_cluster_audit_covers_expanded_region():
    # members all positive, but the expanded region crosses the boundary
    members = [P(0, 0.05), P(1, 0.3)]
    h = Hypothesis((1.0,), 0.0)
    assert not Constraint.cluster(members, 0.1, 1).holds_for(h)
    tight = [P(0, 0.5), P(1, 0.52)]
    assert Constraint.cluster(tight, 0.1, 1).holds_for(h)
