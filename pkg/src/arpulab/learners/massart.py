"""Reliable learner for halfspaces under Massart noise.

Each round sorts a fresh sample (plus the sentinel 0, whose comparisons are
label queries), slots a second sample into the blocked order, and trusts the
labels and consecutive comparisons of a chain of slotted points that are many
blocks apart.  Rounds repeat on points the current classifier abstains on.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import ConfigError, Point, Sample
from ..inference import Constraint, ConstraintSet
from ..oracles import OracleState
from ..ordering import ComparisonTable, mle_order, select_separated_chain, slot_point
from .common import (
    DrawBudgetExceeded,
    PartialClassifier,
    RestrictedSampler,
    RoundRecord,
    RunReport,
    StopRule,
    stop_cap,
)

WEAK_COVERAGE = 1 / 120


def _fixed_point(f, start: float, iters: int = 50) -> int:
    n = max(2.0, start)
    for _ in range(iters):
        nxt = max(2.0, f(n))
        if math.ceil(nxt) == math.ceil(n):
            return int(math.ceil(nxt))
        n = nxt
    return int(math.ceil(n))


def sort_sample_size(k: int, lam: float, delta: float, mult: float = 1.0) -> int:
    """Smallest n with n >= mult * k log^3(1/lam) log(nk/delta) / lam^5."""
    base = mult * k * math.log(1 / lam) ** 3 / lam**5
    return _fixed_point(lambda n: base * math.log(n * k / delta), base)


def block_size_bound(lam: float, n: int, m: int, delta: float, mult: float = 1.0) -> int:
    """mult * log^3(1/lam) log(nm/delta) / lam^5."""
    return int(math.ceil(mult * math.log(1 / lam) ** 3 * math.log(n * m / delta) / lam**5))


def aid_inference_dimension(d: int, sample_size: int, c_k: float = 1.0) -> int:
    """Effective k for average-inference-dimension mode."""
    return max(2, int(math.ceil(c_k * d * math.log(max(d, 2)) * math.log(sample_size))))


@dataclass
class MassartConfig:
    k: int
    lam: float
    delta_r: float = 0.05
    delta_u: float = 0.05
    epsilon: float = 0.05
    n: Optional[int] = None
    m: Optional[int] = None
    T: Optional[int] = None
    C: Optional[int] = None
    block_size: Optional[int] = None
    chain_gap: int = 8
    chain_length: Optional[int] = None
    n_mult: float = 1.0
    block_mult: float = 1.0
    weak_coverage: float = WEAK_COVERAGE
    sort_time_limit: Optional[float] = None
    max_draws: int = 50_000_000

    def __post_init__(self):
        if not 0 < self.lam <= 0.5:
            raise ConfigError("lam must lie in (0, 1/2]")
        for name in ("delta_r", "delta_u", "epsilon"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.k < 1:
            raise ConfigError("k must be positive")
        if self.chain_gap < 1:
            raise ConfigError("chain_gap must be positive")
        # per-round failure budget split across the expected number of rounds
        rounds = self.rounds_cap()
        delta_w = self.delta_r / max(1, rounds)
        if self.m is None:
            self.m = 32 * self.k + 16
        if self.n is None:
            self.n = sort_sample_size(self.k, self.lam, delta_w, self.n_mult)
        if self.block_size is None:
            self.block_size = block_size_bound(self.lam, self.n, self.m, delta_w, self.block_mult)
        self.block_size = int(min(max(1, self.block_size), self.n + 1))
        if self.chain_length is None:
            self.chain_length = 4 * self.k
        if self.C is None:
            self.C = stop_cap(self.planned_draws(), self.delta_u, self.epsilon)

    def rounds_cap(self) -> int:
        if self.T is None:
            c1 = self.weak_coverage
            per_level = math.log(1 / self.epsilon) / -math.log1p(-c1)
            self.T = int(math.ceil(per_level * max(1.0, math.log(1 / self.delta_u))))
        return int(self.T)

    def planned_draws(self) -> float:
        """Total queried points over all rounds, the N of the stop cap."""
        return float(self.rounds_cap() * (self.n + self.m))


@dataclass
class WeakResult:
    constraints: list = field(default_factory=list)
    chain_found: bool = False
    outcome: str = ""
    branch: str = "sort"


def chain_step(
    oracle: OracleState,
    sampler: RestrictedSampler,
    table: ComparisonTable,
    rng: np.random.Generator,
    block_size: int,
    extra: int,
    gap: int,
    min_length: int,
    tag: str = "",
    time_limit: Optional[float] = None,
) -> WeakResult:
    """Sort the table (which holds the sentinel), slot ``extra`` fresh points
    and turn a block-separated chain into trusted labels and comparisons."""
    t0 = time.perf_counter()
    order = mle_order(table, rng).with_blocks(block_size)
    if time_limit is not None and time.perf_counter() - t0 > time_limit:
        return WeakResult(outcome="sort_timeout")
    S2 = sampler.draw(extra)
    slotted = [(p, slot_point(order, table, oracle, p).block) for p in S2.points()]
    s_block = order.block_of(int(order.positions[table.sentinel_index]))
    chain = select_separated_chain(order, slotted, gap, s_block)
    if len(chain) < min_length:
        return WeakResult(outcome="short_chain")
    blocks = dict((p.id, b) for p, b in slotted)
    out = []
    for p in chain:
        sign = 1 if blocks[p.id] > s_block else -1
        out.append(Constraint.label(p, sign, provenance=f"{tag}label:{p.id}"))
    for lo, hi in zip(chain[:-1], chain[1:]):
        out.append(Constraint.comparison(hi, lo, provenance=f"{tag}cmp:{lo.id}<{hi.id}"))
    return WeakResult(out, True, "chain")


def massart_weak_learner(
    oracle: OracleState,
    sampler: RestrictedSampler,
    cfg: MassartConfig,
    rng: np.random.Generator,
    tag: str = "",
) -> WeakResult:
    """One round: sort, slot, chain.  StopRule propagates from the sampler."""
    S = sampler.draw(cfg.n)
    table = ComparisonTable.from_oracle(oracle, S, sentinel=True)
    return chain_step(
        oracle, sampler, table, rng, cfg.block_size, cfg.m, cfg.chain_gap,
        cfg.chain_length, tag, cfg.sort_time_limit,
    )


def boost(
    oracle: OracleState,
    sampler: RestrictedSampler,
    d: int,
    rounds_cap: int,
    step,
    report: RunReport,
    label_budget: Optional[int] = None,
    comparison_budget: Optional[int] = None,
) -> PartialClassifier:
    """Shared boosting loop: call ``step`` on the restricted sampler until the
    stop rule fires, the round cap is hit, or a query budget runs out."""
    cs = ConstraintSet(d)
    clf = PartialClassifier(cs)
    sampler.update(clf)
    for r in range(rounds_cap):
        lq, cq = oracle.budget()
        try:
            res = step(r)
        except StopRule:
            report.stop_reason = "consecutive_inferred"
            break
        except DrawBudgetExceeded:
            report.stop_reason = "draw_budget"
            report.truncated = True
            break
        report.rounds = r + 1
        lq2, cq2 = oracle.budget()
        rec = RoundRecord(
            r, getattr(res, "branch", "sort"), res.outcome, len(res.constraints),
            sum(c.kind == "label" for c in res.constraints), lq2 - lq, cq2 - cq,
        )
        report.history.append(rec)
        if res.constraints:
            cs.extend(res.constraints)
            clf = PartialClassifier(cs)
            sampler.update(clf)
        if (label_budget is not None and lq2 >= label_budget) or (
            comparison_budget is not None and cq2 >= comparison_budget
        ):
            report.stop_reason = "query_budget"
            report.truncated = True
            break
    else:
        report.stop_reason = "round_cap"
    report.label_queries, report.comparison_queries = oracle.budget()
    return clf


def run_massart(
    oracle: OracleState,
    sampler: RestrictedSampler,
    cfg: MassartConfig,
    rng: np.random.Generator,
    d: int,
    label_budget: Optional[int] = None,
    comparison_budget: Optional[int] = None,
) -> tuple[PartialClassifier, RunReport]:
    report = RunReport("massart")
    sampler.cap = cfg.C

    def step(r):
        return massart_weak_learner(oracle, sampler, cfg, rng, tag=f"r{r}:")

    clf = boost(oracle, sampler, d, cfg.rounds_cap(), step, report, label_budget, comparison_budget)
    return clf, report
