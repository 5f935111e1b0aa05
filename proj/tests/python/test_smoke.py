import numpy as np
import pytest

import hsforest


def small_config(seed=1):
    cfg = hsforest.ChainConfig()
    cfg.m_f = 10
    cfg.m_tau = 5
    cfg.iterations = 40
    cfg.burnin = 20
    cfg.propensity_trees = 5
    cfg.propensity_iterations = 20
    cfg.propensity_burnin = 10
    cfg.seed = seed
    return cfg


def test_simulate_null_has_zero_truth():
    d = hsforest.simulate("null", n=30, p=3, seed=2)
    assert d["X"].shape == (30, 3)
    assert np.all(d["truth_cate"] == 0.0)
    assert d["truth_ate"] == 0.0
    assert set(np.unique(d["status"])) <= {0, 1}


def test_simulate_rejects_small_p():
    with pytest.raises(ValueError, match="p >= 5"):
        hsforest.simulate("friedman", n=10, p=4)


def test_fit_causal_shapes_and_determinism():
    d = hsforest.simulate("homogeneous", n=25, p=3, seed=4)
    a = hsforest.fit_causal(d["X"], d["time"], d["treatment"], d["status"], small_config())
    b = hsforest.fit_causal(d["X"], d["time"], d["treatment"], d["status"], small_config())
    assert a["cate"].shape == (25, 20)
    assert len(a["ate"]) == 20
    np.testing.assert_array_equal(a["cate"], b["cate"])
    np.testing.assert_allclose(a["ate"], a["cate"].mean(axis=0), rtol=1e-12)


def test_fit_forest_continuous_with_test_rows():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(40, 2))
    y = 3.0 * (X[:, 0] > 0.5) + 0.1 * rng.normal(size=40)
    cfg = small_config()
    cfg.iterations = 200
    cfg.burnin = 100
    out = hsforest.fit_forest(X, y, config=cfg, outcome="continuous", X_test=X[:5])
    assert out["fit_mean"].shape == (40,)
    assert out["test_fit_mean"].shape == (5,)
    assert np.corrcoef(out["fit_mean"], y)[0, 1] > 0.8


def test_single_arm_is_rejected():
    d = hsforest.simulate("null", n=20, p=3, seed=1)
    with pytest.raises(ValueError):
        hsforest.fit_causal(d["X"], d["time"], np.ones(20, dtype=np.int32), d["status"], small_config())


def test_c_index_and_interval():
    assert hsforest.c_index([1, 2, 3], [1, 2, 3], [1, 0, 1]) == 1.0
    with pytest.raises(hsforest.EstimationError):
        hsforest.c_index([1, 2], [1, 2], [0, 0])
    mean, lo, hi = hsforest.interval(list(range(1, 101)), 0.9)
    assert mean == pytest.approx(50.5)
    assert lo == pytest.approx(5.95)
    assert hi == pytest.approx(95.05)
