"""Runner plumbing: configs, determinism, suite dispatch, artifacts."""

import json
import os

import pytest

from spinboard.cli_runner import RunConfig, SUITE_NAMES, main, run, suite


def test_config_round_trip():
    cfg = RunConfig(
        suite="contours",
        seed=11,
        out="somewhere",
        jobs=2,
        tolerance_scale=1.5,
        params={"max_side": 2, "q": 0.02, "tag": "x", "flag": True},
    )
    back = RunConfig.from_toml(cfg.to_toml())
    assert back == cfg
    assert back.content_hash() == cfg.content_hash()


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        RunConfig.from_toml('[run]\nsuite = "contours"\nbogus = 1\n')
    with pytest.raises(ValueError):
        RunConfig.from_toml('[run]\nsuite = "contours"\n[extra]\nx = 1\n')


def test_suite_names_and_unknown():
    for name in SUITE_NAMES:
        cfg = suite(name)
        assert cfg.suite == name
    with pytest.raises(ValueError) as err:
        suite("nonexistent")
    assert "contours" in str(err.value)  # error lists the available suites


def test_content_id_is_git_blob_style():
    import hashlib

    cfg = suite("entropy")
    blob = cfg.scientific_toml().encode()
    want = hashlib.sha1(b"blob %d\0" % len(blob) + blob).hexdigest()
    assert cfg.content_id() == want
    # output dir and worker count do not alter the content id
    from dataclasses import replace

    assert replace(cfg, out="elsewhere", jobs=4).content_id() == cfg.content_id()


def test_run_contours_and_determinism(tmp_path):
    cfg = RunConfig(suite="contours", seed=3, out=str(tmp_path / "a"), params={"max_side": 2})
    status = run(cfg)
    assert status == 0
    ledger_a = (tmp_path / "a" / "contours-ledger.jsonl").read_bytes()
    cfg_b = RunConfig(suite="contours", seed=3, out=str(tmp_path / "b"), params={"max_side": 2})
    run(cfg_b)
    ledger_b = (tmp_path / "b" / "contours-ledger.jsonl").read_bytes()
    assert ledger_a == ledger_b  # byte-identical reruns
    recs = [json.loads(line) for line in ledger_a.splitlines()]
    assert all(r["seed"] == 3 for r in recs)
    assert all(r["config_hash"] == cfg.content_hash() for r in recs)
    assert all(r["config_id"] == cfg.content_id() for r in recs)
    csv_text = (tmp_path / "a" / "contours.csv").read_text()
    header = csv_text.splitlines()[0].split(",")
    for col in ("check", "value", "passed", "sigma"):
        assert col in header


def test_run_entropy_suite(tmp_path):
    cfg = RunConfig(suite="entropy", seed=1, out=str(tmp_path))
    assert run(cfg) == 0
    lines = (tmp_path / "entropy-ledger.jsonl").read_text().splitlines()
    checks = {json.loads(l)["check"] for l in lines}
    assert {"power_mean_limit_gap", "bond_pattern_d2", "bond_pattern_d3"} <= checks


def test_run_with_jobs_pool(tmp_path):
    cfg = RunConfig(
        suite="contours", seed=5, out=str(tmp_path / "p"), jobs=2, params={"max_side": 2}
    )
    assert run(cfg) == 0
    cfg1 = RunConfig(
        suite="contours", seed=5, out=str(tmp_path / "s"), jobs=1, params={"max_side": 2}
    )
    run(cfg1)
    a = (tmp_path / "p" / "contours-ledger.jsonl").read_bytes()
    b = (tmp_path / "s" / "contours-ledger.jsonl").read_bytes()
    assert a == b  # pool order does not leak into artifacts


def test_main_cli_flags(tmp_path):
    out = str(tmp_path / "cli")
    status = main(["--suite", "entropy", "--seed", "9", "--out", out])
    assert status == 0
    assert os.path.exists(os.path.join(out, "entropy.csv"))


def test_main_env_fallback(tmp_path, monkeypatch):
    out = str(tmp_path / "env")
    monkeypatch.setenv("SPINBOARD_OUT", out)
    status = main(["--suite", "entropy"])
    assert status == 0
    assert os.path.exists(os.path.join(out, "entropy-ledger.jsonl"))


def test_main_config_file(tmp_path):
    cfg = RunConfig(suite="contours", seed=2, out=str(tmp_path / "c"), params={"max_side": 2})
    path = tmp_path / "run.toml"
    path.write_text(cfg.to_toml())
    assert main(["--config", str(path)]) == 0
    assert (tmp_path / "c" / "contours.csv").exists()


def test_tolerance_scale_override(tmp_path):
    # absurdly tight tolerance forces a failure exit without touching physics
    cfg = RunConfig(
        suite="coherent",
        seed=0,
        out=str(tmp_path),
        tolerance_scale=1e-12,
        params={"twoS_max": 2, "n_random": 50},
    )
    assert run(cfg) == 1
