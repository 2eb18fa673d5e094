import json
import math
import os

import numpy as np
import pytest

from spdelab.harness import (
    ExperimentConfig,
    _blocks,
    compute_block,
    content_hash,
    load_summary,
    persist,
    run_ensemble,
)
from spdelab.noise import NoiseStream
from spdelab.sode import SodeConfig, euler_ensemble


def _cfg(**kw):
    base = dict(kind="sode-bounds", paths=8, master_seed=7, dt=1e-3, T=0.02)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(kind="nonsense")
    with pytest.raises(ValueError):
        ExperimentConfig(kind="sode-bounds", paths=0)
    with pytest.raises(ValueError):
        ExperimentConfig(kind="sode-bounds", workers=0)
    with pytest.raises(ValueError):
        ExperimentConfig(kind="sode-bounds", u0_kind="delta")


def test_config_round_trip_with_inf_truncation():
    cfg = ExperimentConfig(kind="blowup-scan", trunc_n=math.inf, paths=4)
    d = cfg.to_dict()
    assert d["trunc_n"] == "inf"
    back = ExperimentConfig.from_dict(d)
    assert math.isinf(back.trunc_n)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"kind": "sode-bounds", "bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"paths": 4})


def test_runtime_fields_excluded_from_summary_config():
    cfg = _cfg(workers=4, out_dir="/tmp/somewhere")
    d = cfg.to_dict(include_runtime=False)
    assert "workers" not in d and "out_dir" not in d


def test_blocks_partition_paths():
    cfg = _cfg(paths=10, block_size=4)
    blocks = _blocks(cfg)
    assert [len(b) for b in blocks] == [4, 4, 2]
    assert sorted(i for b in blocks for i in b) == list(range(10))


def test_single_path_matches_direct_simulator():
    cfg = _cfg(paths=1)
    block = compute_block(cfg, [0])
    direct = euler_ensemble(
        SodeConfig(gamma=cfg.gamma, u0=cfg.u0_value, dt=cfg.dt, T=cfg.T),
        cfg.master_seed,
        [0],
        collect_qv=True,
    )
    assert np.array_equal(block["terminal"], direct["terminal"])
    assert np.array_equal(block["qv"], direct["qv"])


def test_summary_independent_of_block_size():
    a = run_ensemble(_cfg(paths=10, block_size=3)).to_dict()
    b = run_ensemble(_cfg(paths=10, block_size=10)).to_dict()
    a["config"]["block_size"] = b["config"]["block_size"]
    assert {k: a["stats"][k]["mean"] for k in a["stats"]} == {
        k: b["stats"][k]["mean"] for k in b["stats"]
    }


def test_worker_counts_agree():
    base = _cfg(paths=8, block_size=2, workers=1)
    multi = _cfg(paths=8, block_size=2, workers=2)
    assert run_ensemble(base).to_dict() == run_ensemble(multi).to_dict()


def test_summary_hash_changes_with_seed():
    a = run_ensemble(_cfg(master_seed=1)).to_dict()
    b = run_ensemble(_cfg(master_seed=2)).to_dict()
    assert a["content_hash"] != b["content_hash"]


def test_persist_round_trip(tmp_path):
    cfg = _cfg(paths=5, out_dir=str(tmp_path))
    summary = run_ensemble(cfg)
    persist(summary, str(tmp_path))
    loaded = load_summary(str(tmp_path))
    assert loaded == summary.to_dict()
    # CSV has one row per (path, functional)
    with open(tmp_path / "series.csv") as f:
        rows = f.read().strip().splitlines()
    assert len(rows) - 1 == 5 * len(summary.series)
    echo = json.loads((tmp_path / "config.echo.json").read_text())
    assert echo == summary.config


def test_load_summary_detects_tampering(tmp_path):
    cfg = _cfg(paths=3)
    persist(run_ensemble(cfg), str(tmp_path))
    path = tmp_path / "summary.json"
    body = json.loads(path.read_text())
    body["meta"]["paths"] = 999
    path.write_text(json.dumps(body))
    with pytest.raises(ValueError):
        load_summary(str(tmp_path))


def test_content_hash_is_order_insensitive():
    a = content_hash({"x": 1, "y": [2, 3]})
    b = content_hash({"y": [2, 3], "x": 1})
    assert a == b


def test_sode_asymptotic_kind():
    cfg = ExperimentConfig(
        kind="sode-asymptotic", paths=400, gamma=2.0, exact_T=100.0, master_seed=3
    )
    s = run_ensemble(cfg)
    names = [c["name"] for c in s.checks]
    assert "ks-chi-square" in names and "ks-literal-density" in names
    lit = next(c for c in s.checks if c["name"] == "ks-literal-density")
    assert lit["verdict"] == "inconclusive"


def test_spde_martingale_kind_small():
    cfg = ExperimentConfig(
        kind="spde-martingale",
        paths=50,
        m=8,
        dt=1e-3,
        T=0.05,
        qv_snapshot_times=(0.02,),
        compare_trunc_double=True,
        master_seed=5,
    )
    s = run_ensemble(cfg)
    names = [c["name"] for c in s.checks]
    assert "drift-test" in names
    assert "qv-consistency" in names
    assert "qv-horizon-stability-t0.02" in names
    assert "qv-truncation-stability" in names
    assert "raw-mass-drift" in names


def test_blowup_scan_kind_small():
    cfg = ExperimentConfig(
        kind="blowup-scan",
        paths=20,
        m=8,
        dt=1e-3,
        T=0.05,
        gammas=(1.5, 2.0),
        blowup_threshold=1e6,
        master_seed=6,
    )
    s = run_ensemble(cfg)
    trend = next(c for c in s.checks if c["name"] == "blowup-trend")
    fracs = [f["fraction"] for f in trend["empirical"]["fractions"]]
    assert len(fracs) == 2


def test_fourier_kind_small():
    cfg = ExperimentConfig(
        kind="fourier-check",
        paths=60,
        m=8,
        trunc_n=2.0,
        dt_ladder=(2e-3, 1e-3),
        T=0.02,
        u0_kind="cosine",
        u0_value=1.0,
        u0_param=0.5,
        master_seed=8,
    )
    s = run_ensemble(cfg)
    names = [c["name"] for c in s.checks]
    assert "mode1-drift-residual-twopi-re" in names
    qv_rel = next(c for c in s.checks if c["name"].startswith("qv-relation"))
    assert len(qv_rel["empirical"]["rms_per_level"]) == 2


def test_lp_norms_kind_small():
    cfg = ExperimentConfig(
        kind="lp-norms", paths=40, m=8, dt=1e-3, T=0.05, alphas=(0.25,), ps=(2.0,), master_seed=9
    )
    s = run_ensemble(cfg)
    names = [c["name"] for c in s.checks]
    assert "lp-stability-dt-p4-a0.25" in names
    assert "lp-stability-trunc-p4-a0.25" in names
