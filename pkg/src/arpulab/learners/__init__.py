from .common import ABSTAIN, PartialClassifier, RestrictedSampler, RunReport
from .gtnc import GtncConfig, gtnc_weak_round, run_gtnc
from .massart import MassartConfig, massart_weak_learner, run_massart

__all__ = [
    "ABSTAIN",
    "PartialClassifier",
    "RestrictedSampler",
    "RunReport",
    "GtncConfig",
    "gtnc_weak_round",
    "run_gtnc",
    "MassartConfig",
    "massart_weak_learner",
    "run_massart",
]
