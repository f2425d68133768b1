import csv
import io
import json

import pytest

from linpert.errors import ArgumentError, ConfigError
from linpert.experiments import (
    ExperimentConfig,
    config_from_mapping,
    load_config,
    parse_config_text,
    run_experiment,
    tolerance_sweep,
)
from linpert.verifiers import Budget

CONFIG_TEXT = """
# morse sweep
catalog = circle_in_R2
F = height_cubed
properties = morse
trials = 4
seed = 17
grid_density = 10
control_zero_alpha = true
tol.newton_tol = 1e-10
"""


def small_cfg(**kw):
    base = dict(catalog="circle_in_R2", F="height_cubed", properties=("morse",), trials=3, seed=2, control_zero_alpha=True)
    base.update(kw)
    return ExperimentConfig(**base)


def test_parse_config_text():
    values = parse_config_text(CONFIG_TEXT)
    assert values["properties"] == ("morse",)
    assert values["trials"] == 4 and values["control_zero_alpha"] is True
    cfg = config_from_mapping(values)
    assert cfg.budget == Budget(grid_density=10)
    assert cfg.tolerances.newton_tol == 1e-10


def test_per_property_budget_and_unknown_keys():
    cfg = config_from_mapping(parse_config_text(
        "catalog = circle_in_R3\nF = constant\nl = 2\nproperties = immersion, injective\nbudget.injective.samples = 32\n"
    ))
    assert cfg.budget_for("injective").samples == 32
    assert cfg.budget_for("immersion").samples == Budget().samples
    with pytest.raises(ConfigError):
        parse_config_text("colour = blue")
    with pytest.raises(ConfigError):
        parse_config_text("tol.magic = 1")
    with pytest.raises(ConfigError):
        parse_config_text("trials = many")
    with pytest.raises(ConfigError):
        config_from_mapping({"catalog": "circle_in_R2", "F": "height", "properties": ("levitation",)})


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(CONFIG_TEXT)
    assert load_config(str(path)).seed == 17


def test_experiment_report_structure():
    rep = run_experiment(small_cfg())
    d = json.loads(rep.to_json())
    assert set(d) == {"config", "environment", "regimes", "aggregate", "control", "trials"}
    agg = d["aggregate"]["morse"]
    assert agg["pass_count"] + agg["fail_count"] + agg["error_count"] == 3
    assert agg["failure_frequency"] == agg["fail_count"] / 3
    assert d["control"]["verdicts"]["morse"]["outcome"] == "fail"
    assert d["regimes"] == {"morse": True}
    digests = [t["alpha_digest"] for t in d["trials"]]
    assert len(set(digests)) == 3


def test_csv_rows():
    rep = run_experiment(small_cfg())
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert [r["trial"] for r in rows] == ["0", "1", "2", "control"]
    assert {r["pass"] for r in rows} <= {"true", "false", "error"}
    assert rows[-1]["pass"] == "false"


def test_trials_are_independent_of_trial_count_and_property_set():
    a = run_experiment(small_cfg(trials=2)).to_dict()["trials"]
    b = run_experiment(small_cfg(trials=4)).to_dict()["trials"][:2]
    assert a == b
    c = run_experiment(small_cfg(catalog="circle_in_R3", F="collapse_xy", l=3, properties=("immersion",), trials=2,
                                 control_zero_alpha=False)).to_dict()["trials"]
    d = run_experiment(small_cfg(catalog="circle_in_R3", F="collapse_xy", l=3, properties=("immersion", "corank"), trials=2,
                                 control_zero_alpha=False)).to_dict()["trials"]
    assert [t["verdicts"]["immersion"] for t in c] == [t["verdicts"]["immersion"] for t in d]


def test_errors_are_recorded_not_raised():
    # morse on an l = 2 target is a predicate error inside every trial
    rep = run_experiment(small_cfg(catalog="circle_in_R3", F="constant", l=2, properties=("morse",), control_zero_alpha=False))
    assert rep.aggregate["morse"]["error_count"] == 3
    assert "PredicateError" in rep.trials[0]["verdicts"]["morse"]["error"]


def test_dump_alpha():
    rep = run_experiment(small_cfg(trials=1, dump_alpha=True, control_zero_alpha=False))
    assert len(rep.trials[0]["alpha"]) == 1 and len(rep.trials[0]["alpha"][0]) == 2


def test_parallel_matches_serial():
    cfg = small_cfg(trials=6)
    assert run_experiment(cfg).to_json() == run_experiment(small_cfg(trials=6, workers=3)).to_json()


def test_tolerance_sweep():
    out = tolerance_sweep(small_cfg(trials=2), [1e-6, 1e-8])
    assert [r["floor"] for r in out["rows"]] == [1e-6, 1e-8]
    assert set(out["non_increasing"]) == {"morse"}
    with pytest.raises(ArgumentError):
        tolerance_sweep(small_cfg(), [1e-8, 1e-6])


def test_config_validation():
    with pytest.raises(ConfigError):
        small_cfg(trials=0)
    with pytest.raises(ConfigError):
        small_cfg(workers=0)
