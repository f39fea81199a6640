import csv
import json
import math

import numpy as np
import pytest

from arpulab.core import ConfigError, Hypothesis, Point, RunSeed
from arpulab.distributions import DistributionSpec, sample_coords
from arpulab.harness import (
    CSV_COLUMNS,
    ConfigFieldError,
    RunConfig,
    check_thresholds,
    evaluate_classifier,
    resolve_workers,
    run_experiment,
    run_trial,
    trial_seed,
    wilson,
)
from arpulab.inference import ConstraintSet, infer_label, noiseless_constraints
from arpulab.learners import PartialClassifier

SMALL = """
[experiment]
name = small
learner = massart
trials = 2
seed = 3
test_size = 500

[distribution]
family = uniform_ball
d = 2

[noise]
model = massart
lam = 0.2

[learner]
k = 5
epsilon = 0.2
n = 600
block_size = 30
chain_gap = 3
chain_length = 4
T = 3
"""


def small(**exp):
    cfg = RunConfig.from_text(SMALL)
    for k, v in exp.items():
        setattr(cfg, k, v)
    return cfg


def test_roundtrip_and_hash():
    cfg = small()
    again = RunConfig.from_text(cfg.to_text())
    assert again.canonical() == cfg.canonical()
    assert again.config_hash() == cfg.config_hash()
    assert len(cfg.config_hash()) == 16
    other = small(seed=4)
    assert other.config_hash() != cfg.config_hash()


@pytest.mark.parametrize(
    "edit, section, key",
    [
        (("[noise]", "[noize]"), "noise", "*"),
        (("learner = massart", "learner = svm"), "experiment", "learner"),
        (("lam = 0.2", "lam = fast"), "noise", "lam"),
        (("lam = 0.2", "lam = 0.9"), "noise", "massart"),
        (("n = 600", "n = 6x0"), "learner", "n"),
        (("family = uniform_ball", "family = blob"), "distribution", "family"),
    ],
)
def test_config_errors_name_the_field(edit, section, key):
    with pytest.raises(ConfigFieldError) as exc:
        RunConfig.from_text(SMALL.replace(*edit))
    assert (exc.value.section, exc.value.key) == (section, key)


def test_sweep_needs_single_supported_key():
    with pytest.raises(ConfigError):
        RunConfig.from_text(SMALL + "\n[sweep]\nblock_size = 10 20\n")
    cfg = RunConfig.from_text(SMALL + "\n[sweep]\nepsilon = 0.1 0.05 0.025\n")
    assert [g["epsilon"] for g in cfg.groups()] == [0.1, 0.05, 0.025]


def test_zero_trials_gives_header_only(tmp_path):
    run_experiment(small(trials=0), tmp_path)
    assert (tmp_path / "small.csv").read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_identical_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(small(), a)
    run_experiment(small(), b)
    body_a = (a / "small.csv").read_bytes()
    assert body_a == (b / "small.csv").read_bytes()
    assert b"\r\n" not in body_a
    rows = list(csv.DictReader(body_a.decode().splitlines()))
    assert [int(r["seed"]) for r in rows] == [trial_seed(3, 0), trial_seed(3, 1)]
    assert all(r["wall_ms"] == "" for r in rows)


def test_parallel_rows_match_serial(tmp_path):
    run_experiment(small(), tmp_path / "s", workers=1)
    run_experiment(small(), tmp_path / "p", workers=2)
    assert (tmp_path / "s" / "small.csv").read_bytes() == (tmp_path / "p" / "small.csv").read_bytes()


def test_sweep_groups_and_summary(tmp_path):
    cfg = RunConfig.from_text(SMALL.replace("trials = 2", "trials = 1") + "\n[sweep]\nepsilon = 0.2 0.1 0.05\n")
    summary = run_experiment(cfg, tmp_path)
    assert len(summary["groups"]) == 3
    for g in summary["groups"]:
        assert g["trials"] == 1 and g["mean_queries"] > 0
    saved = json.loads((tmp_path / "small.json").read_text())
    assert saved["config_hash"] == cfg.config_hash()
    assert len(saved["manifest"]) == 3


def test_wall_time_is_opt_in():
    row = run_trial(small(record_wall_time=True), small().groups()[0], 0)["row"]
    assert float(row["wall_ms"]) > 0


def test_error_rows_keep_the_run_going():
    cfg = small()
    cfg.learner_params = dict(cfg.learner_params, max_draws=10)
    out = run_trial(cfg, cfg.learner_params, 0)
    assert out["row"]["stop_reason"] in ("draw_budget",) or out["row"]["stop_reason"].startswith("error:")


def test_wilson_interval():
    lo, hi = wilson(0, 200)
    z2 = 1.959963984540054**2
    assert lo == 0.0
    assert hi == pytest.approx(z2 / (200 + z2), rel=1e-6)
    lo, hi = wilson(10, 200)
    assert lo < 0.05 < hi


def test_evaluate_always_abstain(rng):
    spec = DistributionSpec("uniform_ball", 2)
    h = Hypothesis((1.0, 0.0), 0.1)
    cov, mis, inc, worst = evaluate_classifier(PartialClassifier.empty(2), h, spec, 1000, rng)
    assert (cov, mis, inc, worst) == (0.0, 0, 0, 0.0)


def test_evaluate_matches_lp_region_mass(rng):
    """Bulk coverage agrees with a pointwise LP estimate of the forced region."""
    spec = DistributionSpec("uniform_ball", 2)
    h = Hypothesis((1.0, 0.0), -0.2)
    X = rng.uniform(-1, 1, (8, 2))
    pts = [Point(i, tuple(x)) for i, x in enumerate(X)]
    cs = noiseless_constraints(pts, h.values(X), range(8), 2)
    clf = PartialClassifier(cs)
    cov, mis, inc, _ = evaluate_classifier(clf, h, spec, 20_000, rng)
    assert mis == 0 and inc == 0
    probe = sample_coords(spec, np.random.default_rng(99), 1500)
    lp = np.mean([infer_label(cs, Point(-3, tuple(p))).label != 0 for p in probe])
    slack = 3 * math.sqrt(lp * (1 - lp) / 1500) + 3 * math.sqrt(cov * (1 - cov) / 20_000)
    assert abs(cov - lp) <= slack


def test_threshold_checks_use_intervals():
    cfg = small()
    cfg.check = {"max_mislabel_rate": 0.05, "min_coverage_rate": 0.9}
    good = {"params": {}, "errors": 0, "mislabel_trial_wilson": wilson(1, 20), "coverage_met_wilson": wilson(18, 20)}
    bad = {"params": {}, "errors": 0, "mislabel_trial_wilson": wilson(8, 20), "coverage_met_wilson": wilson(5, 20)}
    assert check_thresholds(cfg, [good]) == []
    assert len(check_thresholds(cfg, [bad])) == 2


def test_thread_override(monkeypatch):
    monkeypatch.delenv("ARPULAB_THREADS", raising=False)
    assert resolve_workers(3) == 3
    monkeypatch.setenv("ARPULAB_THREADS", "2")
    assert resolve_workers(5) == 2
    monkeypatch.setenv("ARPULAB_THREADS", "lots")
    with pytest.raises(ConfigError):
        resolve_workers(1)


def test_shipped_configs_validate():
    from pathlib import Path

    root = Path(__file__).resolve().parent.parent / "configs"
    names = sorted(p.name for p in root.glob("*.ini"))
    assert names
    for p in root.glob("*.ini"):
        RunConfig.load(p)
