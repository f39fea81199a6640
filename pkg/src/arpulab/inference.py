"""LP label inference over accumulated label, comparison and cluster constraints.

A hypothesis is a vector z = (w, b) in the box ||z||_inf <= 1.  Trusted answers
cut the box down to a polytope P:

* label(x, s):          s * (w.x + b) >= slack
* comparison(g, l):     w.(g - l) >= 0
* cluster(C, width, s): every member carries label s; in addition a point y is
  forced to s when y = sum a_i c_i with sum a_i = 1 and sum |a_i| <= d + 1.

A point's label is forced when only one sign is attainable over P.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .core import ConfigError, Hypothesis, Point
from .simplex import LPResult, solve_lp

DEFAULT_SLACK = 1e-6
TAU = 1e-7


class Verdict(enum.Enum):
    FORCED_POSITIVE = "forced_positive"
    FORCED_NEGATIVE = "forced_negative"
    UNDETERMINED = "undetermined"
    INCONSISTENT = "inconsistent"

    @property
    def label(self) -> int:
        """+1 / -1 for forced verdicts, 0 (abstain) otherwise."""
        return {Verdict.FORCED_POSITIVE: 1, Verdict.FORCED_NEGATIVE: -1}.get(self, 0)

    @classmethod
    def forced(cls, sign: int) -> "Verdict":
        return cls.FORCED_POSITIVE if sign > 0 else cls.FORCED_NEGATIVE


@dataclass(frozen=True)
class Constraint:
    kind: str  # "label", "comparison" or "cluster"
    points: tuple[Point, ...]
    sign: int = 0
    width: float = 0.0
    provenance: str = ""

    @classmethod
    def label(cls, x: Point, sign: int, provenance: str = "") -> "Constraint":
        if sign not in (1, -1):
            raise ValueError("label sign must be +1 or -1")
        return cls("label", (x,), int(sign), provenance=provenance)

    @classmethod
    def comparison(cls, greater: Point, lesser: Point, provenance: str = "") -> "Constraint":
        return cls("comparison", (greater, lesser), provenance=provenance)

    @classmethod
    def cluster(cls, points: Sequence[Point], width: float, label: int, provenance: str = ""):
        if not points:
            raise ValueError("empty cluster")
        if label not in (1, -1):
            raise ValueError("cluster label must be +1 or -1")
        return cls("cluster", tuple(points), int(label), float(width), provenance)

    def rows(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Linear rows ``a.z >= r`` contributed to the (w, b) polytope."""
        if self.kind == "label":
            x = self.points[0].array()
            return (self.sign * np.append(x, 1.0))[None, :], np.array([np.nan])
        if self.kind == "comparison":
            g, l = self.points
            return np.append(g.array() - l.array(), 0.0)[None, :], np.array([0.0])
        X = np.array([p.coords for p in self.points], dtype=float)
        A = self.sign * np.hstack([X, np.ones((X.shape[0], 1))])
        return A, np.full(X.shape[0], np.nan)

    def holds_for(self, h: Hypothesis) -> bool:
        """Whether the constraint agrees with a hypothesis (ground-truth audit)."""
        if self.kind == "comparison":
            g, l = self.points
            return bool(h.values(g.array()[None])[0] >= h.values(l.array()[None])[0])
        X = np.array([p.coords for p in self.points], dtype=float)
        if self.kind == "cluster":
            # the label is asserted on the whole d-expanded region, not just members
            X = cluster_region_vertices(X, X.shape[1])
        return bool(np.all(self.sign * h.values(X) > 0))


class ConstraintSet:
    """Accumulated trusted constraints; frozen copies are shared read-only."""

    def __init__(self, d: int, constraints: Iterable[Constraint] = (), slack: float = DEFAULT_SLACK):
        self.d = int(d)
        self.slack = float(slack)
        self._items: list[Constraint] = []
        self._frozen = False
        self.extend(constraints)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return tuple(self._items)

    @property
    def clusters(self) -> list[Constraint]:
        return [c for c in self._items if c.kind == "cluster"]

    def add(self, c: Constraint) -> None:
        if self._frozen:
            raise RuntimeError("constraint set is frozen")
        for p in c.points:
            if p.dim != self.d:
                raise ConfigError(f"constraint point of dimension {p.dim} in a d={self.d} set")
        self._items.append(c)

    def extend(self, cs: Iterable[Constraint]) -> None:
        for c in cs:
            self.add(c)

    def frozen(self) -> "ConstraintSet":
        out = ConstraintSet(self.d, self._items, self.slack)
        out._frozen = True
        return out

    def rows(self, extra: Sequence[Constraint] = ()) -> tuple[NDArray, NDArray]:
        parts = [c.rows() for c in itertools.chain(self._items, extra)]
        if not parts:
            return np.zeros((0, self.d + 1)), np.zeros(0)
        A = np.vstack([p[0] for p in parts])
        r = np.concatenate([p[1] for p in parts])
        r = np.where(np.isnan(r), self.slack, r)
        return A, r


def _box_lp(A: NDArray, r: NDArray, dim: int) -> LPResult:
    """Feasibility of {z in [-1,1]^dim : A z >= r}, solved in u = z + 1 >= 0."""
    A_ub = np.vstack([-A, np.eye(dim)]) if A.size else np.eye(dim)
    b_ub = np.concatenate([-(r + A.sum(axis=1)), np.full(dim, 2.0)]) if A.size else np.full(dim, 2.0)
    res = solve_lp(None, A_ub, b_ub, n_vars=dim, tol=TAU)
    if res.x is not None:
        res = LPResult(res.status, res.x - 1.0, res.value, res.ill_conditioned, res.iterations)
    return res


def feasibility(cs: ConstraintSet, extra: Sequence[Constraint] = ()) -> LPResult:
    """LP solve with witness (w, b) and an ill-conditioning flag."""
    A, r = cs.rows(extra)
    return _box_lp(A, r, cs.d + 1)


def feasible(cs: ConstraintSet, extra: Sequence[Constraint] = ()) -> bool:
    """Whether some (w, b) in the box satisfies every constraint with slack."""
    return feasibility(cs, extra).feasible


def infer_label(cs: ConstraintSet, x: Point) -> Verdict:
    """Which signs of x remain attainable under the constraints."""
    pos = feasible(cs, [Constraint.label(x, 1)])
    neg = feasible(cs, [Constraint.label(x, -1)])
    if pos and neg:
        return Verdict.UNDETERMINED
    if pos:
        return Verdict.FORCED_POSITIVE
    if neg:
        return Verdict.FORCED_NEGATIVE
    return Verdict.INCONSISTENT


def cluster_infer(
    cs: Optional[ConstraintSet], cluster: Sequence[Point], label: int, y: Point, d: int
) -> Verdict:
    """Force ``label`` on y when y is an affine combination of the cluster with
    sum |a_i| <= d + 1; otherwise undetermined.

    Variables are split as a = a_plus - a_minus with both parts nonnegative.
    """
    if not cluster:
        raise ValueError("empty cluster")
    X = np.array([p.coords for p in cluster], dtype=float)
    n = X.shape[0]
    yv = y.array()
    A_eq = np.vstack([np.hstack([np.ones(n), -np.ones(n)]), np.hstack([X.T, -X.T])])
    b_eq = np.concatenate([[1.0], yv])
    A_ub = np.ones((1, 2 * n))
    b_ub = np.array([d + 1.0])
    res = solve_lp(None, A_ub, b_ub, A_eq, b_eq, n_vars=2 * n, tol=TAU)
    return Verdict.forced(label) if res.feasible else Verdict.UNDETERMINED


def cluster_region_vertices(X: NDArray[np.float64], d: int) -> NDArray[np.float64]:
    """Extreme points of {sum a_i x_i : sum a_i = 1, sum |a_i| <= d + 1}.

    The coefficient set is a cross-polytope cut by a hyperplane; its vertices
    put (1 + D)/2 on one member and (1 - D)/2 on another, D = d + 1.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if n == 1:
        return X.copy()
    D = d + 1.0
    i, j = np.where(~np.eye(n, dtype=bool))
    return 0.5 * (1 + D) * X[i] + 0.5 * (1 - D) * X[j]


def check_inference_dimension(sample: Sequence[Point], h: Hypothesis, slack: float = DEFAULT_SLACK):
    """Whether some point's label is forced by noiseless answers on the rest.

    Returns ``(holds, witness)``; the witness is the first inferable point.
    """
    pts = list(sample)
    if len(pts) > 12:
        raise ValueError("exhaustive check limited to 12 points")
    if len(pts) < 2:
        return False, None
    d = h.dim
    vals = h.values(np.array([p.coords for p in pts]))
    for i, x in enumerate(pts):
        rest = [j for j in range(len(pts)) if j != i]
        verdict = infer_label(noiseless_constraints(pts, vals, rest, d, slack), x)
        if verdict.label != 0:
            if verdict.label != np.sign(vals[i]):
                raise AssertionError("noiseless constraints forced a wrong label")
            return True, x
    return False, None


def noiseless_constraints(pts, vals, idx, d, slack=DEFAULT_SLACK) -> ConstraintSet:
    """Labels of ``pts[idx]`` and all their pairwise comparisons, answered exactly."""
    cs = ConstraintSet(d, slack=slack)
    for j in idx:
        cs.add(Constraint.label(pts[j], 1 if vals[j] > 0 else -1, "noiseless"))
    for a, b in itertools.combinations(idx, 2):
        g, l = (a, b) if vals[a] > vals[b] else (b, a)
        cs.add(Constraint.comparison(pts[g], pts[l], "noiseless"))
    return cs


# ------------------------------------------------------------ bulk classifier


@dataclass
class _ClusterRegion:
    label: int
    equations: Optional[NDArray[np.float64]]  # hull facets, None if degenerate
    members: tuple[Point, ...]
    d: int

    def contains(self, X: NDArray[np.float64]) -> NDArray[np.bool_]:
        if self.equations is None:
            y = [Point(-2, tuple(r)) for r in X]
            return np.array(
                [cluster_infer(None, self.members, self.label, p, self.d).label != 0 for p in y]
            )
        E = self.equations
        return np.all(X @ E[:, :-1].T + E[:, -1] <= 1e-9, axis=1)


@dataclass
class BulkClassifier:
    """Vectorized verdicts equivalent to ``infer_label`` plus cluster inference.

    The polytope P is enumerated once (vertex form).  Over a bounded polytope
    the range of (w, b) -> w.x + b is spanned by its vertices, so a sign is
    attainable iff some vertex reaches it with the slack margin.  When P has
    no interior (or qhull fails) the class falls back to per-point LP solves.
    """

    cs: ConstraintSet
    vertices: Optional[NDArray[np.float64]] = None
    empty: bool = False
    degenerate: bool = False
    regions: list = field(default_factory=list)

    @classmethod
    def build(cls, cs: ConstraintSet) -> "BulkClassifier":
        out = cls(cs)
        A, r = cs.rows()
        dim = cs.d + 1
        center, radius = _chebyshev_center(A, r, dim)
        if center is None:
            out.empty = True
        elif radius < 1e-9:
            out.degenerate = True
        else:
            H = np.vstack([np.hstack([-A, r[:, None]]), np.hstack([np.eye(dim), -np.ones((dim, 1))]),
                           np.hstack([-np.eye(dim), -np.ones((dim, 1))])])
            try:
                out.vertices = HalfspaceIntersection(H, center).intersections
            except QhullError:
                out.degenerate = True
        for c in cs.clusters:
            X = np.array([p.coords for p in c.points], dtype=float)
            V = cluster_region_vertices(X, cs.d)
            eq = None
            try:
                eq = ConvexHull(V).equations
            except (QhullError, ValueError):
                eq = None
            out.regions.append(_ClusterRegion(c.sign, eq, c.points, cs.d))
        return out

    def polytope_verdicts(self, X: NDArray[np.float64]) -> NDArray[np.int8]:
        """+1/-1 forced, 0 undetermined, 2 inconsistent."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = X.shape[0]
        if self.empty:
            return np.full(n, 2, dtype=np.int8)
        if self.degenerate:
            out = np.empty(n, dtype=np.int8)
            for i in range(n):
                v = infer_label(self.cs, Point(-2, tuple(X[i])))
                out[i] = 2 if v is Verdict.INCONSISTENT else v.label
            return out
        s = self.cs.slack
        vals = np.hstack([X, np.ones((n, 1))]) @ self.vertices.T
        lo, hi = vals.min(axis=1), vals.max(axis=1)
        pos_ok = hi >= s
        neg_ok = lo <= -s
        out = np.zeros(n, dtype=np.int8)
        out[pos_ok & ~neg_ok] = 1
        out[neg_ok & ~pos_ok] = -1
        out[~pos_ok & ~neg_ok] = 2
        return out

    def classify(self, X: NDArray[np.float64]) -> tuple[NDArray[np.int8], NDArray[np.bool_]]:
        """Labels in {+1, -1, 0 (abstain)} and a flag for inconsistencies."""
        pv = self.polytope_verdicts(X)
        incons = pv == 2
        out = np.where(incons, 0, pv).astype(np.int8)
        for reg in self.regions:
            inside = reg.contains(X)
            clash = inside & (out == -reg.label) & ~incons
            incons |= clash
            out[clash] = 0
            take = inside & (out == 0) & ~incons
            out[take] = reg.label
        out[incons] = 0
        return out, incons


def _chebyshev_center(A, r, dim):
    """Deepest point of {z in box: A z >= r}: max t with A z - t|a| >= r."""
    norms = np.linalg.norm(A, axis=1) if A.size else np.zeros(0)
    box = np.vstack([np.eye(dim), -np.eye(dim)])
    G = np.vstack([A, -box]) if A.size else -box
    rhs = np.concatenate([r, -np.ones(2 * dim)]) if A.size else -np.ones(2 * dim)
    gn = np.concatenate([norms, np.ones(2 * dim)])
    # variables: u = z + 1 (dim), t >= 0;  -(G u) + gn t <= -(rhs + G 1)
    A_ub = np.hstack([-G, gn[:, None]])
    b_ub = -(rhs + G.sum(axis=1))
    c = np.zeros(dim + 1)
    c[-1] = -1.0
    res = solve_lp(c, np.vstack([A_ub, np.hstack([np.zeros(dim), [1.0]])[None]]),
                   np.append(b_ub, 1.0), n_vars=dim + 1)
    if not res.feasible or res.x is None:
        return None, 0.0
    return res.x[:dim] - 1.0, float(res.x[-1])
