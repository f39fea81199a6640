"""Reliable learner under generalized Tsybakov noise.

Each round draws a sample and looks for an equitable subset.  If one exists
the round grows a cluster around it from fresh points, labels the cluster by
majority vote (optionally gated by a margin test) and trusts the cluster
constraint.  Otherwise the sample is sorted and a separated chain is trusted,
as in the Massart learner.

The displayed sizes with constant 1 are astronomically large for realistic
noise levels, so every size can be overridden; ``GtncConfig.manifest`` keeps
both the derived and the effective values.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..cluster_detect import (
    FAR_ENOUGH,
    GtncDerivedConstants,
    TieError,
    aid_band,
    aid_gamma,
    cluster_joiners,
    derive_constants,
    find_equitable_subset,
    labeling_size,
    majority_label,
    margin_test,
    margin_test_size,
)
from ..core import ConfigError, Point, Sample
from ..inference import Constraint
from ..oracles import GtncModel, OracleState, ParameterError
from ..ordering import ComparisonTable
from .common import PartialClassifier, RestrictedSampler, RunReport, stop_cap
from .massart import WeakResult, aid_inference_dimension, boost, chain_step

MAX_PRACTICAL_N = 60_000


def cluster_id_size(d: int) -> int:
    """Cluster size from which some member is inferable from the others."""
    return int(math.ceil(24 * d * math.log(d + 1)))


@dataclass
class GtncConfig:
    model: GtncModel
    d: int
    k: int = 5
    gamma: Optional[float] = None
    delta_r: float = 0.05
    delta_u: float = 0.05
    epsilon: float = 0.05
    margin_gate: bool = False
    aid: bool = False
    acc_c2: Optional[float] = None
    c_k: float = 1.0
    # effective sizes (None: use the derived value)
    n: Optional[int] = None
    subset_size: Optional[int] = None
    eps_T: Optional[float] = None
    lambda_1: Optional[float] = None
    m_c: Optional[int] = None
    m_s: Optional[int] = None
    block_size: Optional[int] = None
    chain_gap: int = 2
    chain_length: Optional[int] = None
    label_size_mult: float = 1.0
    margin_size_mult: float = 1.0
    search_budget: int = 0
    T: Optional[int] = None
    C: Optional[int] = None
    n_mult: float = 1.0
    derived: Optional[GtncDerivedConstants] = field(default=None, repr=False)
    eps_prime: Optional[float] = None

    def __post_init__(self):
        for name in ("delta_r", "delta_u", "epsilon"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.d < 1:
            raise ConfigError("d must be positive")
        if self.aid:
            if self.acc_c2 is None:
                raise ConfigError("aid mode needs the distribution's anti-concentration constant c2")
            if self.gamma is None:
                self.gamma, self.eps_prime = aid_gamma(self.model, self.epsilon, self.acc_c2)
            self.margin_gate = True
        if self.gamma is None or self.gamma <= 0:
            raise ConfigError("gamma must be positive (or use aid mode)")
        try:
            self.derived = derive_constants(
                self.model, self.gamma, self.d, self.k, self.delta_r, n_mult=self.n_mult
            )
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        dc = self.derived
        if self.aid and self.n is not None:
            self.k = aid_inference_dimension(self.d, self.n, self.c_k)
        self.n = int(self.n if self.n is not None else dc.n)
        if self.n > MAX_PRACTICAL_N:
            raise ConfigError(
                f"sample size n = {self.n:.3g} is not practical; set n and the other sizes explicitly"
            )
        if self.eps_T is None:
            self.eps_T = dc.eps_T
        if self.lambda_1 is None:
            self.lambda_1 = dc.lambda_1
        if self.subset_size is None:
            self.subset_size = dc.subset_size
        if self.subset_size > self.n:
            raise ConfigError("subset_size exceeds n")
        if self.m_c is None:
            self.m_c = int(math.ceil(self.d * math.log(self.d + 1) * self.n))
        if self.m_s is None:
            self.m_s = 32 * self.k + 16
        if self.block_size is None:
            self.block_size = int(math.ceil(dc.block_gap))
        self.block_size = int(min(max(1, self.block_size), self.n + 1))
        if self.chain_length is None:
            self.chain_length = 4 * self.k
        if self.T is None:
            self.T = int(math.ceil(120 * math.log(1 / self.epsilon) * max(1.0, math.log(1 / self.delta_u))))
        if self.C is None:
            self.C = stop_cap(self.T * (self.n + self.m_c), self.delta_u, self.epsilon)

    @property
    def label_size(self) -> int:
        return labeling_size(self.model, self.gamma, self.delta_r, self.label_size_mult)

    @property
    def margin_size(self) -> int:
        return margin_test_size(self.model, self.gamma, self.delta_r, self.margin_size_mult)

    @property
    def cluster_min(self) -> int:
        need = cluster_id_size(self.d) + self.label_size
        if self.margin_gate:
            need = max(need, self.margin_size)
        return need

    def mislabel_band(self) -> float:
        return aid_band(self.model, self.gamma)

    def manifest(self) -> dict:
        eff = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("model", "derived")
        }
        eff["cluster_min"] = self.cluster_min
        return {
            "model": self.model.describe(),
            "derived": dataclasses.asdict(self.derived),
            "effective": eff,
        }


def _hull_members(points: Sample, d: int) -> list[Point]:
    """Members spanning the cluster's convex hull; the rest add no constraint."""
    if len(points) <= d + 1:
        return points.points()
    try:
        idx = np.sort(ConvexHull(points.X).vertices)
    except (QhullError, ValueError):
        return points.points()
    return points.take(idx).points()


def gtnc_weak_round(
    oracle: OracleState,
    sampler: RestrictedSampler,
    cfg: GtncConfig,
    rng: np.random.Generator,
    tag: str = "",
) -> WeakResult:
    S = sampler.draw(cfg.n)
    table = ComparisonTable.from_oracle(oracle, S, sentinel=True)
    found = find_equitable_subset(table, cfg.subset_size, cfg.eps_T, cfg.search_budget, rng)
    if found is None:
        res = chain_step(
            oracle, sampler, table, rng, cfg.block_size, cfg.m_s, cfg.chain_gap,
            cfg.chain_length, tag,
        )
        res.branch = "sort"
        return res
    S2 = sampler.draw(cfg.m_c)
    joins = cluster_joiners(oracle, table, found, S2, cfg.lambda_1)
    members = S2.take(np.flatnonzero(joins))
    if len(members) < cfg.cluster_min:
        return WeakResult(outcome="cluster_small", branch="skipped")
    labels = oracle.labels(members.ids, members.X)
    try:
        label = majority_label(labels)
    except TieError:
        return WeakResult(outcome="tie", branch="skipped")
    if cfg.margin_gate:
        verdict = margin_test(labels, cfg.gamma, cfg.model, cfg.delta_r, cfg.margin_size_mult)
        if verdict != FAR_ENOUGH:
            return WeakResult(outcome="too_close", branch="skipped")
    hull = _hull_members(members, cfg.d)
    c = Constraint.cluster(hull, cfg.gamma / cfg.d, label, provenance=f"{tag}cluster:{len(members)}")
    return WeakResult([c], True, "cluster", branch="cluster")


def run_gtnc(
    oracle: OracleState,
    sampler: RestrictedSampler,
    cfg: GtncConfig,
    rng: np.random.Generator,
    label_budget: Optional[int] = None,
    comparison_budget: Optional[int] = None,
) -> tuple[PartialClassifier, RunReport]:
    report = RunReport("gtnc_aid" if cfg.aid else "gtnc")
    sampler.cap = cfg.C

    def step(r):
        return gtnc_weak_round(oracle, sampler, cfg, rng, tag=f"r{r}:")

    clf = boost(oracle, sampler, cfg.d, cfg.T, step, report, label_budget, comparison_budget)
    return clf, report
