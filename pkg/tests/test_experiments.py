import json

import numpy as np
import pytest

import symqnn.experiments as ex
from symqnn.experiments import (
    ExperimentConfig,
    ExperimentReport,
    VarianceScanResult,
    bp_variance_scan,
    build_model,
    derive_seeds,
    evaluate_report,
    gradient_samples,
    load_dataset,
    loss_quantiles,
    run_classification,
    structure,
)
from symqnn.training import fit_model, make_model

SMALL = dict(n_train=40, n_test=24, iterations=12, n_inits=2)


@pytest.fixture(scope="module")
def small_report():
    return run_classification(ExperimentConfig(task="shapes2d", **SMALL))


def quantiles_ordered(q):
    return all(a <= b + 1e-15 <= c + 2e-15 for a, b, c in zip(q["q25"], q["median"], q["q75"]))


# --- config -------------------------------------------------------------------------


@pytest.mark.parametrize("kw", [{"task": "mnist"}, {"model": "cnn"}, {"n_inits": 0}, {"iterations": 0},
                                {"layers": -1}, {"scan_samples": 1}, {"scan_axes": ("time",)}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


def test_config_from_dict_rejects_unknown():
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"task": "decay", "epochs": 3})


def test_config_roundtrip_and_resolution():
    cfg = ExperimentConfig(task="decay")
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    r = cfg.resolved()
    assert (r.n_train, r.n_test, r.include_self, r.use_offset_loss) == (1000, 400, False, True)
    assert ExperimentConfig(task="shapes2d", n_train=7).resolved().n_train == 7


def test_seed_derivation_is_prefix_stable():
    d3, s3 = derive_seeds(5, 3)
    d5, s5 = derive_seeds(5, 5)
    assert d3 == d5 and s5[:3] == s3
    assert len(set(s5 + [d5])) == 6


@pytest.mark.parametrize("task, model, qubits, params", [
    ("shapes2d", "fully_symmetric", 10, 8),
    ("shapes2d", "rotational", 10, 30),
    ("shapes2d", "baseline", 8, 24),
    ("decay", "fully_symmetric", 6, 4),
    ("decay", "rotational", 6, 18),
    ("decay", "baseline", 16, 48),
])
def test_structure_echo(task, model, qubits, params):
    cfg = ExperimentConfig(task=task, model=model)
    n, d = cfg.geometry
    s = structure(build_model(cfg, n, d))
    assert (s["n_qubits"], s["n_params"]) == (qubits, params)


def test_load_dataset_from_csv(tmp_path):
    from symqnn.datasets import generate_shapes, ShapeConfig, write_csv
    ds = generate_shapes(ShapeConfig(n_samples=30)).with_split(20, 10)
    write_csv(ds, tmp_path / "s.csv")
    got = load_dataset(ExperimentConfig(data=str(tmp_path / "s.csv")), 0)
    assert len(got.train_idx) == 20 and len(got.test_idx) == 10


# --- quantiles -----------------------------------------------------------------------


def test_single_run_quantiles_equal():
    q = loss_quantiles([[3.0, 2.0, 1.0]])
    assert q["q25"] == q["median"] == q["q75"] == [3.0, 2.0, 1.0]


def test_quantiles_pad_with_final_value():
    q = loss_quantiles([[3.0, 1.0], [4.0, 2.0, 0.5, 0.2]])
    assert len(q["median"]) == 4
    assert q["median"][-1] == pytest.approx(0.6)
    assert quantiles_ordered(q)


# --- classification runs -----------------------------------------------------------------


def test_report_contents(small_report):
    r = small_report
    assert len(r.seeds) == 2 and all(s["status"] == "ok" for s in r.seeds)
    assert r.structure["n_qubits"] == 10 and r.structure["n_params"] == 8
    assert quantiles_ordered(r.loss) and quantiles_ordered(r.full_loss)
    assert len(r.roc_band["fpr"]) == 101
    assert r.auc["per_seed"] == r.aucs
    assert all(0.0 <= a <= 1.0 for a in r.aucs)


def test_report_determinism(small_report):
    again = run_classification(ExperimentConfig(task="shapes2d", **SMALL))
    assert again.checksum() == small_report.checksum()
    a, b = again.to_dict(), small_report.to_dict()
    a.pop("timestamp"), b.pop("timestamp")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_report_roundtrip(small_report, tmp_path):
    path = tmp_path / "r.json"
    small_report.write(path)
    back = ExperimentReport.read(path)
    assert back.checksum() == json.loads(path.read_text())["checksum"]
    bad = json.loads(path.read_text())
    bad["schema_version"] = "0.1"
    with pytest.raises(ValueError):
        ExperimentReport.from_dict(bad)


def test_roc_csv_export(small_report, tmp_path):
    small_report.export_roc_csv(tmp_path / "roc.csv")
    lines = (tmp_path / "roc.csv").read_text().splitlines()
    assert lines[0] == "curve,fpr,tpr,tpr_std"
    assert sum(l.startswith("mean,") for l in lines) == 101


def test_evaluate_reproduces_test_aucs(small_report):
    cfg = ExperimentConfig.from_dict(small_report.config)
    ds = load_dataset(cfg, derive_seeds(cfg.seed, cfg.n_inits)[0])
    out = evaluate_report(small_report, ds, "test")
    assert [s["auc"] for s in out["seeds"]] == pytest.approx(small_report.aucs, abs=1e-12)
    assert out["n"] == 24


def test_single_init_quantiles_collapse():
    r = run_classification(ExperimentConfig(task="shapes2d", n_train=20, n_test=10, iterations=6, n_inits=1))
    assert r.loss["q25"] == r.loss["median"] == r.loss["q75"]


def test_decay_reference_and_offset():
    r = run_classification(ExperimentConfig(task="decay", n_train=30, n_test=20, iterations=6, n_inits=1))
    assert r.reference["name"] == "mass_cut" and 0.5 < r.reference["auc"] <= 1.0
    assert r.seeds[0]["result"]["best_offset"] is not None
    assert (r.structure["n_qubits"], r.structure["n_params"]) == (6, 4)


def test_parallel_workers_match_serial():
    cfg = dict(task="shapes2d", n_train=20, n_test=10, iterations=6, n_inits=2)
    serial = run_classification(ExperimentConfig(**cfg))
    parallel = run_classification(ExperimentConfig(workers=2, **cfg))
    assert serial.seeds == parallel.seeds


def test_failed_seed_is_recorded(monkeypatch):
    real = ex.train
    calls = []

    def flaky(*a, **kw):
        calls.append(1)
        if len(calls) == 1:
            raise RuntimeError("boom")
        return real(*a, **kw)

    monkeypatch.setattr(ex, "train", flaky)
    r = run_classification(ExperimentConfig(task="shapes2d", n_train=20, n_test=10, iterations=4, n_inits=2))
    assert r.seeds[0]["status"].startswith("failed") and r.seeds[1]["status"] == "ok"
    assert len(r.aucs) == 1


def test_run_rejects_scan_task():
    with pytest.raises(ValueError):
        run_classification(ExperimentConfig(task="bp_scan"))


# --- gradient variance ------------------------------------------------------------------------


def test_zero_layer_gradient_vanishes(rng):
    model = fit_model(make_model("fully_symmetric", 3, 2, 0), rng.normal(size=(20, 3, 2)))
    g = gradient_samples(model, rng.normal(size=(3, 2)), 10, rng)
    assert np.all(g == 0) and np.var(g) == 0


def test_small_scan(tmp_path):
    cfg = ExperimentConfig(task="bp_scan", scan_axes=("dimension",), scan_samples=8, scan_inputs=2,
                           output=str(tmp_path / "v.json"))
    res = bp_variance_scan(cfg)
    assert len(res.entries) == 6
    assert all(e["variance"] >= 0 and "n_qubits" in e for e in res.entries)
    assert res.variance("dimension", "fully_symmetric", dim=3) >= 0
    back = VarianceScanResult.from_dict(json.loads((tmp_path / "v.json").read_text()))
    assert back.entries == res.entries
    again = bp_variance_scan(cfg)
    assert again.to_json() == res.to_json()
    res.export_csv(tmp_path / "v.csv")
    assert (tmp_path / "v.csv").read_text().startswith("axis,model,n_points")
    with pytest.raises(KeyError):
        res.variance("dimension", "rotational")
