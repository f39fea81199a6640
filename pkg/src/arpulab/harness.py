"""Experiment orchestration: config files, seeded trials, CSV rows and JSON summaries.

A run config is an INI file with the sections ``experiment``, ``distribution``,
``noise``, ``learner`` and optionally ``sweep`` and ``check``.  Every output
row carries a hash of the fully resolved config.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
from scipy.stats import binomtest

from .core import ConfigError, Hypothesis, IdAllocator, RunSeed
from .distributions import FAMILIES, DistributionSpec, plant_hypothesis, sample_coords
from .learners.common import PartialClassifier, RestrictedSampler
from .learners.gtnc import GtncConfig, run_gtnc
from .learners.massart import MassartConfig, run_massart
from .oracles import NOISELESS, GtncModel, MassartModel, OracleState, ParameterError

CSV_COLUMNS = (
    "config_hash",
    "seed",
    "learner",
    "rounds",
    "stop_reason",
    "label_queries",
    "comparison_queries",
    "coverage",
    "mislabels",
    "inconsistencies",
    "wall_ms",
)
LEARNERS = ("massart", "gtnc", "gtnc_aid")
NOISE_MODELS = ("noiseless", "massart", "tnc", "gtnc")

_INT_KEYS = {
    "k", "n", "m", "T", "C", "block_size", "chain_gap", "chain_length", "subset_size",
    "m_c", "m_s", "search_budget", "max_draws",
}
_BOOL_KEYS = {"margin_gate"}


class ConfigFieldError(ConfigError):
    def __init__(self, section: str, key: str, message: str):
        super().__init__(f"[{section}] {key}: {message}")
        self.section, self.key = section, key


def _number(section, key, raw):
    try:
        # integer sizes live in the learner block; noise "m" is a real slope
        if key in _INT_KEYS and section in ("learner", "sweep"):
            return int(raw)
        if key in _BOOL_KEYS:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return float(raw)
    except ValueError:
        raise ConfigFieldError(section, key, f"cannot parse {raw!r}") from None


@dataclass
class RunConfig:
    name: str
    learner: str
    distribution: dict
    noise: dict
    learner_params: dict
    trials: int = 10
    seed: int = 0
    test_size: int = 10_000
    out: str = "results"
    record_wall_time: bool = False
    sweep: dict = field(default_factory=dict)
    check: dict = field(default_factory=dict)

    # ---------------------------------------------------------------- parsing

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        for sec in ("experiment", "distribution", "noise", "learner"):
            if not cp.has_section(sec):
                raise ConfigFieldError(sec, "*", "section missing")
        ex = cp["experiment"]

        def get(key, conv, default):
            if key not in ex:
                return default
            try:
                return conv(ex[key])
            except ValueError:
                raise ConfigFieldError("experiment", key, f"cannot parse {ex[key]!r}") from None

        learner = ex.get("learner", "massart").strip()
        if learner not in LEARNERS:
            raise ConfigFieldError("experiment", "learner", f"must be one of {LEARNERS}")
        dist = dict(cp["distribution"])
        if dist.get("family") not in FAMILIES:
            raise ConfigFieldError("distribution", "family", f"must be one of {FAMILIES}")
        dist_params = {}
        for k, v in dist.items():
            if k == "family":
                continue
            dist_params[k] = int(v) if k == "d" else _number("distribution", k, v)
        noise = dict(cp["noise"])
        model = noise.get("model", "").strip()
        if model not in NOISE_MODELS:
            raise ConfigFieldError("noise", "model", f"must be one of {NOISE_MODELS}")
        noise_params = {"model": model}
        for k, v in noise.items():
            if k == "model":
                continue
            noise_params[k] = v.strip() if k == "adversary_mode" else _number("noise", k, v)
        lp = {k: _number("learner", k, v) for k, v in cp["learner"].items()}
        sweep = {}
        if cp.has_section("sweep"):
            for k, v in cp["sweep"].items():
                sweep[k] = [_number("sweep", k, t) for t in v.replace(",", " ").split()]
        check = {}
        if cp.has_section("check"):
            check = {k: _number("check", k, v) for k, v in cp["check"].items()}
        cfg = cls(
            name=ex.get("name", "experiment"),
            learner=learner,
            distribution={"family": dist["family"], **dist_params},
            noise=noise_params,
            learner_params=lp,
            trials=get("trials", int, 10),
            seed=get("seed", int, 0),
            test_size=get("test_size", int, 10_000),
            out=ex.get("out", "results"),
            record_wall_time=get("record_wall_time", lambda s: s.lower() in ("1", "true", "yes"), False),
            sweep=sweep,
            check=check,
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text)

    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["experiment"] = {
            "name": self.name, "learner": self.learner, "trials": str(self.trials),
            "seed": str(self.seed), "test_size": str(self.test_size), "out": self.out,
            "record_wall_time": str(self.record_wall_time).lower(),
        }
        cp["distribution"] = {k: str(v) for k, v in self.distribution.items()}
        cp["noise"] = {k: str(v) for k, v in self.noise.items()}
        cp["learner"] = {k: str(v) for k, v in self.learner_params.items()}
        if self.sweep:
            cp["sweep"] = {k: " ".join(str(x) for x in v) for k, v in self.sweep.items()}
        if self.check:
            cp["check"] = {k: str(v) for k, v in self.check.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    # ------------------------------------------------------------- resolution

    def validate(self) -> None:
        if self.trials < 0:
            raise ConfigFieldError("experiment", "trials", "must be >= 0")
        if self.test_size < 1:
            raise ConfigFieldError("experiment", "test_size", "must be positive")
        for key in self.sweep:
            if key not in ("epsilon", "lam", "delta_r", "delta_u", "n", "k"):
                raise ConfigFieldError("sweep", key, "unsupported sweep key")
        for params in self.groups():
            self.spec()
            self.model()
            self.learner_config(params)

    def groups(self) -> list[dict]:
        """Learner parameter sets: one per sweep value (a single one without sweep)."""
        if not self.sweep:
            return [dict(self.learner_params)]
        (key, values), *rest = self.sweep.items()
        if rest:
            raise ConfigFieldError("sweep", rest[0][0], "only one sweep key is supported")
        return [{**self.learner_params, key: v} for v in values]

    def spec(self) -> DistributionSpec:
        params = {k: v for k, v in self.distribution.items() if k not in ("family", "d")}
        try:
            return DistributionSpec(self.distribution["family"], int(self.distribution.get("d", 2)), params)
        except ConfigError as exc:
            raise ConfigFieldError("distribution", "family", str(exc)) from None

    def model(self):
        nz = self.noise
        kind = nz["model"]
        try:
            if kind == "noiseless":
                return NOISELESS
            if kind == "massart":
                return MassartModel(float(nz["lam"]), nz.get("adversary_mode", "worst_case_flip"))
            m = float(nz["m"])
            return GtncModel.tnc(
                m, float(nz.get("M", m)), float(nz["kappa"]), float(nz.get("eps0", 1.0)),
                nz.get("adversary_mode", "lower_envelope"),
            )
        except KeyError as exc:
            raise ConfigFieldError("noise", exc.args[0], "required field missing") from None
        except (ConfigError, ParameterError) as exc:
            raise ConfigFieldError("noise", kind, str(exc)) from None

    def learner_config(self, params: dict):
        p = dict(params)
        try:
            if self.learner == "massart":
                if "lam" not in p:
                    lam = self.noise.get("lam")
                    if lam is None:
                        raise ConfigFieldError("learner", "lam", "required when the noise is not Massart")
                    p["lam"] = float(lam)
                return MassartConfig(**p)
            model = self.model()
            if not isinstance(model, GtncModel):
                raise ConfigFieldError("noise", "model", "gtnc learners need a tnc/gtnc noise model")
            d = int(self.distribution.get("d", 2))
            if self.learner == "gtnc_aid":
                p.setdefault("acc_c2", self.spec().acc_constants()[1])
                p["aid"] = True
            return GtncConfig(model, d, **p)
        except TypeError as exc:
            raise ConfigFieldError("learner", "*", str(exc)) from None
        except ConfigFieldError:
            raise
        except (ConfigError, ParameterError) as exc:
            raise ConfigFieldError("learner", "*", str(exc)) from None

    def canonical(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("trials")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ------------------------------------------------------------------ metrics


def evaluate_classifier(
    classifier: PartialClassifier,
    h_star: Hypothesis,
    spec: DistributionSpec,
    test_size: int,
    rng: np.random.Generator,
) -> tuple[float, int, int, float]:
    """(coverage, mislabels, inconsistent verdicts, largest |h(x)| among
    mislabeled points) over fresh test points."""
    X = sample_coords(spec, rng, test_size, h_star)
    labels, incons = classifier.classify_many(X)
    truth = np.sign(h_star.values(X))
    coverage = float(np.mean(labels != 0))
    wrong = (labels != 0) & (labels != truth)
    worst = float(np.abs(h_star.values(X[wrong])).max()) if wrong.any() else 0.0
    return coverage, int(np.count_nonzero(wrong)), int(np.count_nonzero(incons)), worst


def wilson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


# ------------------------------------------------------------------- trials


def trial_seed(master: int, trial: int) -> int:
    return int(master) * 1_000_003 + int(trial)


def run_trial(cfg: RunConfig, params: dict, trial: int, seed: Optional[int] = None) -> dict:
    """One seeded trial; returns a CSV row (as a dict) plus extra detail."""
    seed = trial_seed(cfg.seed, trial) if seed is None else seed
    rs = RunSeed(seed)
    spec = cfg.spec()
    model = cfg.model()
    lcfg = cfg.learner_config(params)
    row: dict[str, Any] = {"config_hash": cfg.config_hash(), "seed": seed, "learner": cfg.learner}
    t0 = time.perf_counter()
    try:
        h = plant_hypothesis(spec, rs.rng("harness", 0))
        oracle = OracleState(model, h, rs.key64("oracle"))
        sampler = RestrictedSampler(spec, rs.rng("sampler"), IdAllocator(0), h, 1)
        if cfg.learner == "massart":
            sampler.max_draws = lcfg.max_draws
            clf, rep = run_massart(oracle, sampler, lcfg, rs.rng("learner"), spec.d)
        else:
            clf, rep = run_gtnc(oracle, sampler, lcfg, rs.rng("learner"))
        cov, mis, inc, worst = evaluate_classifier(clf, h, spec, cfg.test_size, rs.rng("harness", 1))
        row.update(
            rounds=rep.rounds,
            stop_reason=rep.stop_reason,
            label_queries=rep.label_queries,
            comparison_queries=rep.comparison_queries,
            coverage=f"{cov:.6f}",
            mislabels=mis,
            inconsistencies=inc,
        )
        detail = {
            "bad_constraints": len(rep.audit(clf, h)),
            "branches": [r.branch for r in rep.history],
            "mislabel_margin": worst,
        }
    except Exception as exc:  # partial failure: flag the row, keep the run going
        row.update(
            rounds="", stop_reason=f"error:{type(exc).__name__}", label_queries="",
            comparison_queries="", coverage="", mislabels="", inconsistencies="",
        )
        detail = {"error": repr(exc)}
    wall = (time.perf_counter() - t0) * 1000
    row["wall_ms"] = f"{wall:.0f}" if cfg.record_wall_time else ""
    detail["wall_ms"] = wall
    return {"row": row, "detail": detail}


def _trial_job(args):
    text, params, trial = args
    return run_trial(RunConfig.from_text(text), params, trial)


def resolve_workers(parallel: Optional[int]) -> int:
    env = os.environ.get("ARPULAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"ARPULAB_THREADS must be an integer, got {env!r}") from None
    return max(1, int(parallel or 1))


def run_group(cfg: RunConfig, params: dict, workers: int = 1) -> list[dict]:
    jobs = [(cfg.to_text(), params, t) for t in range(cfg.trials)]
    if workers <= 1 or len(jobs) <= 1:
        return [_trial_job(j) for j in jobs]
    import multiprocessing as mp

    with mp.get_context("fork").Pool(workers) as pool:
        # map preserves job order, so rows come back in trial order
        return pool.map(_trial_job, jobs)


def summarize(cfg: RunConfig, params: dict, results: list[dict]) -> dict:
    rows = [r["row"] for r in results]
    ok = [r for r in rows if not str(r["stop_reason"]).startswith("error:")]
    n = len(ok)
    eps = float(params.get("epsilon", 0.05))

    def mean(key):
        return float(np.mean([float(r[key]) for r in ok])) if ok else math.nan

    mis_trials = sum(int(r["mislabels"]) > 0 for r in ok)
    cov_ok = sum(float(r["coverage"]) >= 1 - eps for r in ok)
    inc_trials = sum(int(r["inconsistencies"]) > 0 for r in ok)
    return {
        "params": params,
        "trials": len(rows),
        "errors": len(rows) - n,
        "mean_rounds": mean("rounds"),
        "mean_label_queries": mean("label_queries"),
        "mean_comparison_queries": mean("comparison_queries"),
        "mean_queries": (mean("label_queries") + mean("comparison_queries")) if ok else math.nan,
        "mean_coverage": mean("coverage"),
        "mislabel_trial_rate": mis_trials / n if n else math.nan,
        "mislabel_trial_wilson": wilson(mis_trials, n),
        "coverage_target": 1 - eps,
        "coverage_met_rate": cov_ok / n if n else math.nan,
        "coverage_met_wilson": wilson(cov_ok, n),
        "inconsistency_trial_rate": inc_trials / n if n else math.nan,
        "inconsistency_trial_wilson": wilson(inc_trials, n),
        "bad_constraint_trials": sum(r["detail"].get("bad_constraints", 0) > 0 for r in results),
        "mislabel_margins": [r["detail"].get("mislabel_margin") for r in results],
        "wall_ms_total": float(sum(r["detail"]["wall_ms"] for r in results)),
    }


def write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def check_thresholds(cfg: RunConfig, summaries: list[dict]) -> list[str]:
    """Violations of the [check] section, judged on Wilson intervals."""
    out = []
    for s in summaries:
        tag = json.dumps(s["params"], sort_keys=True)
        if "max_mislabel_rate" in cfg.check:
            lo, _ = s["mislabel_trial_wilson"]
            if lo > cfg.check["max_mislabel_rate"]:
                out.append(f"{tag}: mislabel rate interval starts above {cfg.check['max_mislabel_rate']}")
        if "min_coverage_rate" in cfg.check:
            _, hi = s["coverage_met_wilson"]
            if hi < cfg.check["min_coverage_rate"]:
                out.append(f"{tag}: coverage-met rate interval ends below {cfg.check['min_coverage_rate']}")
        if s["errors"]:
            out.append(f"{tag}: {s['errors']} trial(s) failed")
    return out


def run_experiment(cfg: RunConfig, out_dir=None, workers: int = 1) -> dict:
    """Run every group, write ``<name>.csv`` and ``<name>.json``; return the summary."""
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    all_rows, summaries = [], []
    t0 = time.perf_counter()
    for params in cfg.groups():
        results = run_group(cfg, params, workers)
        all_rows.extend(r["row"] for r in results)
        summaries.append(summarize(cfg, params, results))
    write_csv(out / f"{cfg.name}.csv", all_rows)
    summary = {
        "name": cfg.name,
        "config_hash": cfg.config_hash(),
        "learner": cfg.learner,
        "config": cfg.canonical(),
        "manifest": [_manifest(cfg, p) for p in cfg.groups()],
        "groups": summaries,
        "wall_ms": (time.perf_counter() - t0) * 1000,
    }
    (out / f"{cfg.name}.json").write_text(json.dumps(summary, indent=2, default=_json_default))
    return summary


def _manifest(cfg: RunConfig, params: dict) -> dict:
    lc = cfg.learner_config(params)
    if isinstance(lc, GtncConfig):
        return lc.manifest()
    return dataclasses.asdict(lc)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)
