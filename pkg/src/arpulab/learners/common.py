"""Pieces shared by both learners: the partial classifier, rejection sampling
restricted to un-inferred points, and the per-run report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from ..core import Hypothesis, IdAllocator, Point, Sample
from ..distributions import DistributionSpec, sample_coords
from ..inference import BulkClassifier, Constraint, ConstraintSet

ABSTAIN = 0


class PartialClassifier:
    """Maps points to +1, -1 or ABSTAIN using a frozen constraint set."""

    def __init__(self, cs: ConstraintSet):
        self.cs = cs.frozen()
        self._bulk = BulkClassifier.build(self.cs)

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return self.cs.constraints

    def classify(self, x: Point) -> int:
        return int(self.classify_many(np.asarray([x.coords], dtype=float))[0][0])

    def classify_many(self, X: NDArray[np.float64]) -> tuple[NDArray[np.int8], NDArray[np.bool_]]:
        """Labels (ABSTAIN where not forced) and a mask of inconsistent verdicts."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.cs) == 0:
            return np.zeros(X.shape[0], dtype=np.int8), np.zeros(X.shape[0], dtype=bool)
        return self._bulk.classify(X)

    @classmethod
    def empty(cls, d: int) -> "PartialClassifier":
        return cls(ConstraintSet(d))


class StopRule(Exception):
    """Raised by the sampler once C consecutive draws were already inferred."""


class DrawBudgetExceeded(Exception):
    pass


class RestrictedSampler:
    """Rejection sampling from the distribution restricted to abstained points.

    Every candidate is classified in draw order; ``run`` counts consecutive
    inferred candidates and triggers the stop rule at ``cap``.  The run
    carries over between calls, matching a single stream of draws.
    """

    def __init__(
        self,
        spec: DistributionSpec,
        rng: np.random.Generator,
        ids: IdAllocator,
        h_star: Optional[Hypothesis],
        cap: int,
        max_draws: int = 50_000_000,
    ):
        self.spec = spec
        self.rng = rng
        self.ids = ids
        self.h_star = h_star
        self.cap = int(cap)
        self.max_draws = int(max_draws)
        self.classifier: Optional[PartialClassifier] = None
        self.run = 0
        self.draws = 0

    def update(self, classifier: PartialClassifier) -> None:
        self.classifier = classifier

    def draw(self, count: int) -> Sample:
        kept: list[NDArray[np.float64]] = []
        have = 0
        accept = 1.0
        while have < count:
            need = count - have
            batch = int(min(max(64, 1.3 * need / max(accept, 1e-4)), 2_000_000))
            X = sample_coords(self.spec, self.rng, batch, self.h_star)
            if self.classifier is None:
                inferred = np.zeros(batch, dtype=bool)
            else:
                inferred = self.classifier.classify_many(X)[0] != ABSTAIN
            for i in range(batch):
                self.draws += 1
                if inferred[i]:
                    self.run += 1
                    if self.run >= self.cap:
                        raise StopRule()
                else:
                    self.run = 0
                    kept.append(X[i])
                    have += 1
                    if have == count:
                        break
                if self.draws >= self.max_draws:
                    raise DrawBudgetExceeded()
            accept = max(1e-4, np.mean(~inferred))
        return Sample(self.ids.take(count), np.asarray(kept))


def stop_cap(N: float, delta_u: float, epsilon: float) -> int:
    """Consecutive-inferred cap C = ceil(2 log(N / delta_u) / epsilon)."""
    return int(math.ceil(2 * math.log(N / delta_u) / epsilon))


@dataclass
class RoundRecord:
    index: int
    branch: str
    outcome: str
    constraints_added: int = 0
    chain_length: int = 0
    label_queries: int = 0
    comparison_queries: int = 0


@dataclass
class RunReport:
    learner: str
    rounds: int = 0
    stop_reason: str = ""
    label_queries: int = 0
    comparison_queries: int = 0
    truncated: bool = False
    inconsistencies: int = 0
    history: list = field(default_factory=list)

    def audit(self, classifier: PartialClassifier, h_star: Hypothesis) -> list[Constraint]:
        """Trusted constraints that disagree with the planted hypothesis."""
        return [c for c in classifier.constraints if not c.holds_for(h_star)]

    def explain_mislabels(
        self, classifier: PartialClassifier, h_star: Hypothesis, X: NDArray[np.float64]
    ) -> dict:
        """Cross-reference mislabeled points with violated constraints.

        A non-abstaining wrong answer needs at least one wrong trusted
        constraint; ``unexplained`` counts mislabels where none was found.
        """
        labels, _ = classifier.classify_many(X)
        truth = np.sign(h_star.values(X))
        wrong = np.flatnonzero((labels != ABSTAIN) & (labels != truth))
        bad = self.audit(classifier, h_star)
        return {
            "mislabeled": wrong.tolist(),
            "violated_constraints": [(c.kind, c.provenance) for c in bad],
            "unexplained": int(wrong.size if not bad else 0),
        }
