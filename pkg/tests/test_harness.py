import json
import math
from pathlib import Path

import numpy as np
import pytest

from gossipgap.cli import main
from gossipgap.config import ConfigError, ExperimentConfig, load_config
from gossipgap.report import format_value, sha256_of, verify_manifest

PUSH_SUM_CFG = {
    "process": {
        "kind": "push_sum",
        "seed": 20240,
        "p": 4,
        "edges": [[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]],
        "share": 0.5,
        "loss_prob": [0.0, 0.2, 0.4, 0.1, 0.3],
    },
    "initial": {"x0": "random-positive", "w0": "ones", "sub_seed": 3},
    "horizon": {"n": 2000, "checkpoints": "geometric"},
    "estimators": {"k": 2, "replicates": 4, "birkhoff_m": [8, 32], "trials": 32,
                   "wedge_n": 2000},
    "output": {"prefix": "demo"},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(PUSH_SUM_CFG), encoding="utf-8")
    return p


# -- config parsing -----------------------------------------------------------


def test_config_round_trip(cfg_path):
    cfg = load_config(cfg_path)
    again = ExperimentConfig.from_dict(json.loads(cfg.to_json()))
    assert again.to_dict() == cfg.to_dict()


def test_config_unknown_keys_rejected(tmp_path):
    bad = dict(PUSH_SUM_CFG)
    bad["extra_section"] = {}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad), encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(p)


def test_config_unknown_nested_key_rejected():
    bad = json.loads(json.dumps(PUSH_SUM_CFG))
    bad["process"]["loss_probability"] = 0.1
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_dict(bad)


def test_config_missing_required():
    with pytest.raises(ConfigError, match="missing"):
        ExperimentConfig.from_dict({"process": {"kind": "push_sum", "seed": 1}})
    with pytest.raises(ConfigError, match="unknown kind"):
        ExperimentConfig.from_dict({"process": {"kind": "pull_sum", "seed": 1}})


def test_config_builds_each_kind():
    for proc_spec, kind in (
            ({"kind": "constant", "seed": 1, "matrix": [[1.0, 0.5], [0.0, 0.5]]},
             "constant"),
            ({"kind": "iid_family", "seed": 1,
              "matrices": [[[1, 0], [0, 1]], [[1, 1], [1, 0]]],
              "probs": [0.5, 0.5]}, "iid_family"),
            ({"kind": "markov_family", "seed": 1,
              "matrices": [[[1, 0], [0, 1]], [[1, 1], [1, 0]]],
              "transition": [[0.5, 0.5], [0.3, 0.7]]}, "markov_family")):
        cfg = ExperimentConfig.from_dict({"process": proc_spec})
        proc = cfg.build_process()
        assert proc.kind == kind
        assert proc.next_matrix().p == 2


def test_config_initial_vectors():
    cfg = ExperimentConfig.from_dict({
        "process": {"kind": "constant", "seed": 1, "matrix": [[1.0]]},
        "initial": {"x0": [2.5], "w0": "ones", "sub_seed": 9}})
    x0, w0 = cfg.build_initial(1)
    assert x0.tolist() == [2.5] and w0.tolist() == [1.0]
    cfg2 = ExperimentConfig.from_dict({
        "process": {"kind": "constant", "seed": 1, "matrix": [[1.0]]},
        "initial": {"x0": "random-positive", "sub_seed": 9}})
    a, _ = cfg2.build_initial(1)
    b, _ = cfg2.build_initial(1)
    assert a == pytest.approx(b)  # sub-seeded, reproducible
    assert 0 < a[0] <= 1


def test_config_invalid_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(p)


# -- report formatting ----------------------------------------------------------


def test_format_value():
    assert format_value(None) == ""
    assert format_value(float("nan")) == ""
    assert format_value(float("inf")) == "inf"
    assert format_value(1) == "1"
    assert format_value(math.pi) == format(math.pi, ".17g")
    assert float(format_value(0.1)) == 0.1


# -- CLI end-to-end ---------------------------------------------------------------


def test_cli_simulate_writes_bundle(cfg_path, tmp_path):
    out = tmp_path / "out"
    rc = main(["simulate", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    traj = out / "demo_trajectory.csv"
    summary = out / "demo_summary.csv"
    manifest = out / "demo_manifest.json"
    assert traj.exists() and summary.exists() and manifest.exists()
    header = traj.read_text().splitlines()[0]
    assert header == "n,max_ratio_error,tv,envelope_min,envelope_max,hilbert,limit_estimate"
    assert verify_manifest(manifest)


def test_cli_simulate_deterministic(cfg_path, tmp_path):
    out1, out2, out3 = (tmp_path / d for d in ("a", "b", "c"))
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out2)]) == 0
    assert (sha256_of(out1 / "demo_trajectory.csv")
            == sha256_of(out2 / "demo_trajectory.csv"))
    assert (sha256_of(out1 / "demo_summary.csv")
            == sha256_of(out2 / "demo_summary.csv"))
    # a different seed changes the tables
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out3),
                 "--seed", "999"]) == 0
    assert (sha256_of(out1 / "demo_trajectory.csv")
            != sha256_of(out3 / "demo_trajectory.csv"))


def test_cli_simulate_no_loss_limit_is_mean(tmp_path):
    cfg = json.loads(json.dumps(PUSH_SUM_CFG))
    cfg["process"]["loss_prob"] = 0.0
    cfg["horizon"]["n"] = 5000
    path = tmp_path / "noloss.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == 0
    rows = (out / "demo_summary.csv").read_text().splitlines()
    summary = dict(line.split(",", 1) for line in rows[1:])
    x0, _ = ExperimentConfig.from_dict(cfg).build_initial(4)
    assert float(summary["limit_estimate"]) == pytest.approx(x0.mean(), abs=1e-8)
    assert summary["column_stochastic"] == "True"


def test_cli_spectrum(cfg_path, tmp_path):
    out = tmp_path / "spec"
    rc = main(["spectrum", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    rows = (out / "demo_summary.csv").read_text().splitlines()
    summary = dict(line.split(",", 1) for line in rows[1:])
    # half-share transactions: log|det| = -log 2 regardless of loss
    assert float(summary["det_identity_lhs"]) == pytest.approx(-math.log(2), abs=1e-12)
    assert float(summary["gap"]) > 0


def test_cli_gap_parallel_matches_serial(cfg_path, tmp_path):
    out1, out2 = tmp_path / "g1", tmp_path / "g2"
    assert main(["gap", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["gap", "--config", str(cfg_path), "--out", str(out2),
                 "--threads", "2"]) == 0
    assert sha256_of(out1 / "demo_gap.csv") == sha256_of(out2 / "demo_gap.csv")


def test_cli_primitivity(tmp_path):
    cfg = json.loads(json.dumps(PUSH_SUM_CFG))
    cfg["horizon"]["n"] = 300  # number of index samples
    p = tmp_path / "prim.json"
    p.write_text(json.dumps(cfg), encoding="utf-8")
    out = tmp_path / "prim"
    rc = main(["primitivity", "--config", str(p), "--out", str(out)])
    assert rc == 0
    rows = (out / "demo_summary.csv").read_text().splitlines()
    summary = dict(line.split(",", 1) for line in rows[1:])
    assert summary["family_primitive"] == "True"
    assert (out / "demo_indices.csv").exists()


def test_cli_config_error_exit_code(tmp_path):
    missing = tmp_path / "nope.json"
    assert main(["simulate", "--config", str(missing)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"process": {"kind": "push_sum", "seed": 1}}),
                   encoding="utf-8")
    assert main(["simulate", "--config", str(bad)]) == 1


def test_cli_numerical_error_exit_code(tmp_path):
    cfg = json.loads(json.dumps(PUSH_SUM_CFG))
    cfg["estimators"]["k"] = 17  # k > p triggers a numerical-domain failure
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg), encoding="utf-8")
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_manifest_detects_tampering(cfg_path, tmp_path):
    out = tmp_path / "out"
    main(["simulate", "--config", str(cfg_path), "--out", str(out)])
    manifest = out / "demo_manifest.json"
    assert verify_manifest(manifest)
    (out / "demo_trajectory.csv").write_text("tampered\n", encoding="utf-8")
    assert not verify_manifest(manifest)


def test_manifest_detects_missing_file(cfg_path, tmp_path):
    out = tmp_path / "out"
    main(["simulate", "--config", str(cfg_path), "--out", str(out)])
    (out / "demo_summary.csv").unlink()
    assert not verify_manifest(out / "demo_manifest.json")


def test_threads_env_override(monkeypatch):
    from argparse import Namespace
    from gossipgap.cli import _thread_count
    monkeypatch.setenv("GOSSIPGAP_THREADS", "3")
    assert _thread_count(Namespace(threads=None)) == 3
    assert _thread_count(Namespace(threads=2)) == 2
    monkeypatch.delenv("GOSSIPGAP_THREADS")
    assert _thread_count(Namespace(threads=None)) == 1


def test_cli_acceptance_exit_codes(monkeypatch, tmp_path, capsys):
    from gossipgap import acceptance as acc_mod
    from gossipgap import cli as cli_mod

    def fake_run_all(verbose=False):
        return [acc_mod.CriterionResult(1, "stub ok", True, 0.0, "fine"),
                acc_mod.CriterionResult(2, "stub bad", False, 0.0, "broken")]

    monkeypatch.setattr(cli_mod.acceptance, "run_all", fake_run_all)
    rc = main(["acceptance", "--out", str(tmp_path)])
    assert rc == 3
    assert (tmp_path / "acceptance_criteria.csv").exists()

    monkeypatch.setattr(cli_mod.acceptance, "run_all",
                        lambda verbose=False: [acc_mod.CriterionResult(
                            1, "stub ok", True, 0.0, "fine")])
    assert main(["acceptance"]) == 0
