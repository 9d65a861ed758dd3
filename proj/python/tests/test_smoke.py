import json
import math

import pytest

import sap


def test_environment_roundtrip():
    e = sap.Environment("gridworld", "World-1")
    e.reset(3)
    assert e.action_count == 4
    snap = e.snapshot()
    for a in [0, 3, 3, 1]:
        e.step(a)
    assert e.step_count == 4
    after = e.snapshot()
    e.restore(snap)
    assert e.step_count == 0
    for a in [0, 3, 3, 1]:
        e.step(a)
    assert e.snapshot() == after
    with pytest.raises(sap.ContractError):
        e.step(7)


def test_windows():
    for name, width in [("gridworld", 144), ("platformer", 200), ("reacher", 3375)]:
        assert sap.window_width(name) == width
        e = sap.Environment(name, sap.config_names(name)[0])
        e.reset(0)
        assert len(sap.extract_window(e)) == width


def test_bank_replays():
    text = sap.exploration_bank("platformer", "Level-A", 5, seed=2)
    header = json.loads(text.splitlines()[0])
    assert header["n"] == 5
    assert sap.replay_check(text)


def test_ci_and_aggregate():
    ci = sap.compute_ci([0.0, 2.0])
    assert ci["mean"] == 1.0
    assert math.isclose(ci["half_width"], 1.96)
    assert sap.aggregate([1.0, 5.0, 2.0], "max") == 5.0
    with pytest.raises(sap.ContractError):
        sap.compute_ci([1.0])


def test_config_errors_name_the_field():
    cfg = sap.default_config("platformer")
    assert cfg["env"] == "platformer"
    with pytest.raises(sap.ConfigError, match="bank.sise"):
        sap.parse_config('{"env": "gridworld", "bank": {"sise": 1}}')
    h1 = sap.config_hash('{"env": "gridworld"}')
    h2 = sap.config_hash('{"env": "gridworld", "out_dir": "x"}')
    assert h1 == h2 and len(h1) == 16


def test_pipeline_commands(tmp_path):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps({
        "env": "gridworld",
        "bank": {"size": 10},
        "score": {"iterations": 50, "eval_every": 25},
        "methods": ["sap"],
        "eval_episodes": 2,
    }))
    out = tmp_path / "out"
    with pytest.raises(sap.ConfigError, match="missing artifact"):
        sap.run("eval", cfg, out=out)
    sap.run("gen-data", cfg, out=out)
    sap.run("train-score", cfg, out=out)
    report = sap.run("eval", cfg, out=out)
    lines = open(report).read().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[1] == "method,env_config,metric,mean,ci95,n"
    assert any(l.startswith("sap,World-2,return,") for l in lines[2:])
