import json
import math
import os

import numpy as np
import pytest

import oodlab


def gaussian_problem(seed=0, n=300, d=6):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2 + 1
    means = np.zeros((2, d))
    means[0, 0] = means[1, 1] = 6.0
    feats = means[labels - 1] + rng.normal(size=(n, d))
    head = oodlab.ClassifierHead(means / 6.0)
    ood = oodlab.FeatureSet(rng.normal(size=(n, d)) + np.r_[3.0, 3.0, 6.0, 0, 0, 0][:d], dataset_id="ood")
    return oodlab.FeatureSet(feats, labels=list(labels), dataset_id="train"), head, ood


def test_registry():
    methods = oodlab.list_methods()
    assert len(methods) == 28
    msr = next(m for m in methods if m["method_id"] == "MSR")
    assert msr["orientation"] == "HigherIsConfident"
    assert "Unmodified" in msr["variants"]


def test_engine_scores_and_metrics():
    train, head, ood = gaussian_problem()
    engine = oodlab.ScoringEngine(train, head)
    values, orientation = engine.score("Energy", "Unmodified", train)
    assert values.shape == (len(train),)
    assert np.isfinite(values).all()
    id_conf = engine.confidence("Maha", "Unmodified", train)
    ood_conf = engine.confidence("Maha", "Unmodified", ood)
    assert oodlab.auroc(id_conf, ood_conf) > 0.95
    r = oodlab.evaluate_detection(id_conf, train.labels, engine.logits_of(train), ood_conf)
    assert 0 <= r["augrc"] <= r["aurc"]
    assert r["n_failure"] == len(ood)


def test_metric_hand_example():
    assert oodlab.aurc(np.array([0.9, 0.1]), [False, True]) == pytest.approx(0.25)
    assert oodlab.evaluate(np.array([0.9, 0.1]), [False, True])["aurc"] == pytest.approx(250.0)


def test_errors_carry_kind():
    train, head, _ = gaussian_problem()
    engine = oodlab.ScoringEngine(train, head)
    with pytest.raises(oodlab.OodlabError) as info:
        engine.score("PCA", "Unmodified", train)
    assert info.value.kind == "unsupported-variant"
    assert info.value.exit_code == 2


def test_ranking_and_buckets():
    losses = np.tile([1.0, 2.0, 3.0], (20, 1))
    rep = oodlab.top_cliques(losses, ["a", "b", "c"], alpha=1.0)
    assert [c["members"] for c in rep["cliques"]] == [["a"], ["b"], ["c"]]
    assert oodlab.holm_adjust([0.01, 0.04, 0.03]) == pytest.approx([0.03, 0.06, 0.06])
    buckets = oodlab.bucketize([("x", (0, 0, 0, 0)), ("y", (4, 4, 4, 4)), ("z", (9, 9, 9, 9))])
    assert buckets == {"x": "near", "y": "mid", "z": "far"}


def test_fmx_round_trip(tmp_path):
    a = np.arange(12, dtype=float).reshape(4, 3)
    oodlab.write_fmx(tmp_path / "a.fmx", a, role="features")
    assert np.array_equal(oodlab.read_fmx(tmp_path / "a.fmx"), a)


def test_pipeline(tmp_path):
    config = os.environ.get("OODLAB_CONFIG")
    if not config:
        config = oodlab.write_fixture(tmp_path / "fixture")
    summary = oodlab.run_pipeline(config, tmp_path / "out")
    assert summary["metric_rows"] > 0
    assert (tmp_path / "out" / "metrics.csv").exists()
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["version"] == oodlab.__version__
    assert any(r is not None for r in summary["regimes"].values())
