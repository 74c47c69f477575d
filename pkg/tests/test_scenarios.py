import numpy as np
import pytest
from hypothesis import given, strategies as st

from gbridge.model import Hyperparams
from gbridge.scenarios import (
    METHODS,
    SCENARIOS,
    ConsistencySpec,
    ScenarioSpec,
    aggregate,
    consistency_experiment,
    design_covariance,
    draw_beta,
    fit_metrics,
    generate,
    generate_multivariate,
    lambda_schedule,
    replicate_study,
)

SHAPES = {
    "I": (20, 100, 900, 18),
    "II": (20, 100, 900, 10),
    "III": (20, 100, 900, 0),
    "IV": (150, 50, 950, 142),
    "V": (40, 200, 400, 20),
    "VI": (40, 200, 400, 20),
}


@pytest.mark.parametrize("sid", SCENARIOS)
def test_scenario_shapes_and_zero_counts(sid):
    p, n_train, n_test, zeros = SHAPES[sid]
    train, test, beta = generate(ScenarioSpec.preset(sid, seed=3))
    assert train.X.shape == (n_train, p + 1)
    assert test.X.shape == (n_test, p + 1)
    assert beta.shape == (p + 1,) and beta[0] == 0.0
    assert int(np.sum(beta[1:] == 0)) == zeros
    assert np.all(train.X[:, 0] == 1.0)
    assert train.names[0] == "intercept" and train.intercept


def test_coefficient_recipes():
    rng = np.random.default_rng(0)
    assert np.all(np.abs(draw_beta("III", rng) - 2.0) < 0.01)
    assert sorted(set(draw_beta("V", rng))) == [0.0, 2.0]
    assert sorted(set(draw_beta("VI", rng))) == [0.0, 150.0]
    big = np.concatenate([draw_beta("I", rng) for _ in range(200)])
    nz = big[big != 0]
    assert nz.mean() == pytest.approx(15.0, abs=0.5)
    assert nz.std() == pytest.approx(3.0, abs=0.4)


def test_zero_positions_vary_between_replications():
    spec = ScenarioSpec.preset("I", seed=1)
    supports = {tuple(np.flatnonzero(generate(spec, r)[2])) for r in range(10)}
    assert len(supports) > 1


@pytest.mark.parametrize("p", [2, 20, 40, 150])
def test_covariance_constructions(p):
    ar = design_covariance(p, "ar_decay")
    i, j = np.indices((p, p))
    assert np.array_equal(ar, 0.5 ** np.abs(i - j))
    cs = design_covariance(p, "compound")
    assert np.all(np.diag(cs) == 1.0) and np.all(cs[i != j] == 0.5)
    np.linalg.cholesky(ar)
    np.linalg.cholesky(cs)
    with pytest.raises(ValueError):
        design_covariance(p, "banded")


def test_design_has_requested_correlation():
    spec = ScenarioSpec("V", n_train=20_000, n_test=0, p=40, correlation="compound")
    train, _, _ = generate(spec)
    C = np.corrcoef(train.X[:, 1:], rowvar=False)
    assert np.max(np.abs(C - design_covariance(40, "compound"))) < 0.05


def test_zero_noise_variant():
    train, test, beta = generate(ScenarioSpec.preset("II", noise_scale=0.0))
    # equal up to BLAS summation order
    assert np.max(np.abs(train.y - train.X @ beta)) < 1e-12
    assert np.max(np.abs(test.y - test.X @ beta)) < 1e-12


def test_seed_determinism():
    a = generate(ScenarioSpec.preset("IV", seed=9), rep=4)
    b = generate(ScenarioSpec.preset("IV", seed=9), rep=4)
    c = generate(ScenarioSpec.preset("IV", seed=9), rep=5)
    assert np.array_equal(a[0].X, b[0].X) and np.array_equal(a[0].y, b[0].y) and np.array_equal(a[2], b[2])
    assert not np.array_equal(a[0].y, c[0].y)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec.preset("VII")
    with pytest.raises(ValueError):
        ScenarioSpec("I", n_train=100, n_test=900, p=30)
    with pytest.raises(ValueError):
        ScenarioSpec.preset("I", noise_scale=-1.0)
    assert ScenarioSpec.preset("I").to_dict()["noise_scale"] == 2.0


def test_multivariate_example_layout():
    d, B, Sigma = generate_multivariate(seed=2)
    assert d.Y.shape == (100, 10) and d.X.shape == (100, 21)
    assert B.shape == (21, 10)
    assert np.all(B[0] == 0)
    assert np.all(np.sum(B[1:] != 0, axis=0) == 2)
    np.linalg.cholesky(Sigma)
    L = np.linalg.cholesky(Sigma)
    assert np.allclose(np.diag(L), 1.0)


# ----------------------------------------------------------------------
# Concentration experiment
# ----------------------------------------------------------------------
def test_consistency_spec_validation():
    with pytest.raises(ValueError):
        ConsistencySpec(epsilon=0.0)
    with pytest.raises(ValueError):
        ConsistencySpec(n_grid=(200, 100))
    with pytest.raises(ValueError):
        ConsistencySpec(p_exponent=1.0)
    assert ConsistencySpec().p_n(800) == int(800**0.6)


def test_lambda_schedule_formula():
    n, p = 400, 36
    expected = (2.0 * 6.0 * 400**0.25 * np.log(400)) ** 1.5
    assert lambda_schedule(n, p, 0.5, 2.0, 1.5) == pytest.approx(expected, rel=1e-14)


def test_huge_radius_has_no_mass():
    spec = ConsistencySpec(epsilon=1e6, n_grid=(50, 100), iterations=2000, burn_in=200)
    rows = consistency_experiment(spec)
    assert [r["n"] for r in rows] == [50, 100]
    assert all(r["mass"] == 0.0 for r in rows)


def test_consistency_rows_are_deterministic():
    spec = ConsistencySpec(n_grid=(50, 100), iterations=1500, burn_in=100, seed=3)
    assert consistency_experiment(spec) == consistency_experiment(spec)


# ----------------------------------------------------------------------
# Replication metrics
# ----------------------------------------------------------------------
def test_single_replication_aggregation():
    spec = ScenarioSpec("I", n_train=60, n_test=40, p=20)
    rows = replicate_study(spec, reps=1, methods=("full", "alpha_fixed_2"), h=Hyperparams(iterations=1500))
    assert [r["method"] for r in rows] == ["full", "alpha_fixed_2"]
    table = aggregate(rows)
    for row, agg in zip(rows, table):
        assert agg["reps"] == 1
        assert agg["mean_l2"] == row["l2"]
        assert agg["median_mse"] == row["mse"]
        assert agg["avg_model_size"] == row["model_size"]
        assert agg["exact_recovery_count"] == int(row["exact"])
        assert agg["se_l2"] == 0.0 and agg["se_mse"] == 0.0
    assert rows[1]["alpha_mean"] == 2.0


def test_replication_parallel_matches_serial():
    spec = ScenarioSpec("I", n_train=40, n_test=10, p=20, seed=5)
    h = Hyperparams(iterations=800)
    assert replicate_study(spec, 2, h=h, workers=1) == replicate_study(spec, 2, h=h, workers=2)


def test_replication_argument_checks():
    spec = ScenarioSpec.preset("I")
    with pytest.raises(ValueError):
        replicate_study(spec, 1, methods=("horseshoe",))
    with pytest.raises(ValueError):
        replicate_study(spec, 0)
    assert set(METHODS) == {"full", "alpha_fixed_1", "alpha_fixed_2"}


def test_fit_metrics_on_easy_problem():
    spec = ScenarioSpec("I", n_train=400, n_test=200, p=20, noise_scale=0.5, seed=2)
    train, test, beta = generate(spec)
    m = fit_metrics(train, test, beta, Hyperparams(iterations=4000, seed=1))
    assert m["l2"] < 0.5
    assert m["exact"]
    assert m["model_size"] == 3
    assert 0.85 <= m["coverage"] <= 1.0


@given(st.lists(st.floats(0, 100), min_size=2, max_size=20))
def test_aggregate_statistics(values):
    rows = [{"method": "full", "l2": v, "mse": v, "model_size": 1, "exact": True, "coverage": 1.0} for v in values]
    agg = aggregate(rows)[0]
    assert agg["mean_l2"] == pytest.approx(np.mean(values))
    assert agg["median_mse"] == pytest.approx(np.median(values))
    assert agg["exact_recovery_count"] == len(values)
    assert agg["se_l2"] >= 0
