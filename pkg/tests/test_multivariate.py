import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from gbridge.model import ChainState, Dataset, DimensionError, DomainError, Hyperparams, log_cond_beta_i
from gbridge.multivariate import (
    MVDataset,
    MVHyperparams,
    MVState,
    flatten,
    inv_wishart_draw,
    mv_initial_state,
    mv_log_cond_beta_j,
    mv_run_chain,
    mv_update_sigma,
    unflatten,
)
from gbridge.inference import batch_means_ess
from gbridge.sampler import SamplerConfig, run_chain

ONLY_SIGMA = SamplerConfig(frozen={"beta", "alpha", "lambda", "kappa"})


def _mv_problem(seed=0, n=30, p=3, m=3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    B = rng.standard_normal((p, m))
    L = np.tril(0.3 * rng.standard_normal((m, m)), -1) + np.eye(m)
    Y = X @ B + rng.standard_normal((n, m)) @ L.T
    return MVDataset(Y, X), B


def _state(B, Sigma, lam=1.0, alpha=1.5):
    p, m = B.shape
    return MVState(B, Sigma, np.full(p * m, lam), alpha, np.zeros(p * m))


# ----------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 1000))
def test_flat_index_round_trip(p, m, seed):
    B = np.random.default_rng(seed).standard_normal((p, m))
    b = flatten(B)
    assert np.array_equal(unflatten(b, p, m), B)
    # column-major: entry (row, col) sits at col * p + row
    assert all(b[c * p + r] == B[r, c] for r in range(p) for c in range(m))


def test_unflatten_shape_check():
    with pytest.raises(DimensionError):
        unflatten(np.zeros(5), 2, 3)


def test_dataset_and_state_validation():
    with pytest.raises(DimensionError):
        MVDataset(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(DomainError):
        MVDataset(np.full((2, 1), np.nan), np.zeros((2, 1)))
    with pytest.raises(DomainError):
        _state(np.zeros((2, 2)), np.array([[1.0, 2.0], [2.0, 1.0]])).validate()
    with pytest.raises(DimensionError):
        _state(np.zeros((2, 2)), np.eye(3)).validate()


def test_hyperparams_defaults_and_checks():
    h = MVHyperparams()
    assert np.array_equal(h.scale(3), np.eye(3))
    assert h.dof(3) == 5.0
    assert h.burn_in == 2000
    with pytest.raises(DomainError):
        MVHyperparams(v=1.5).dof(3)
    with pytest.raises(DomainError):
        MVHyperparams(Psi=-np.eye(2))
    with pytest.raises(DimensionError):
        MVHyperparams(Psi=np.eye(2)).scale(3)


# ----------------------------------------------------------------------
# Sigma update
# ----------------------------------------------------------------------
def test_sigma_draws_spd_and_mean_formula():
    d, B = _mv_problem()
    h = MVHyperparams(iterations=10_000, burn_in=0, seed=1)
    out = mv_run_chain(d, h, ONLY_SIGMA, _state(B, np.eye(3)))
    for S in out.Sigma[::97]:
        np.linalg.cholesky(S)
    R = d.Y - d.X @ B
    expected = (np.eye(3) + R.T @ R) / (h.dof(3) + d.n - 3 - 1)
    draws = out.Sigma.reshape(len(out), -1)
    se = draws.std(axis=0, ddof=1) / np.sqrt(batch_means_ess(draws))
    assert np.all(np.abs(draws.mean(axis=0) - expected.ravel()) < 3 * se + 1e-15)


def test_sigma_python_update_mean_formula():
    d, B = _mv_problem(seed=2, m=2)
    h = MVHyperparams()
    s = _state(B, np.eye(2))
    rng = np.random.default_rng(3)
    draws = np.array([mv_update_sigma(s, d, h, rng) for _ in range(20_000)])
    R = d.Y - d.X @ B
    expected = (np.eye(2) + R.T @ R) / (h.dof(2) + d.n - 2 - 1)
    se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - expected) < 3 * se)


def test_single_response_is_inverse_gamma():
    rng = np.random.default_rng(4)
    scale, dof = 7.5, 9.0
    draws = np.array([inv_wishart_draw(np.array([[scale]]), dof, rng)[0, 0] for _ in range(20_000)])
    ref = stats.invgamma(dof / 2, scale=scale / 2)
    assert stats.kstest(draws, ref.cdf).pvalue > 1e-3


def test_single_response_kernel_matches_scalar_gibbs():
    d, B = _mv_problem(seed=5, m=1)
    h = MVHyperparams(iterations=20_000, burn_in=0, seed=6)
    out = mv_run_chain(d, h, ONLY_SIGMA, _state(B, np.eye(1)))
    R = d.Y - d.X @ B
    # Sigma^{-1} ~ Gamma((v + n) / 2, rate = (1 + R'R) / 2)
    ref = stats.gamma((h.dof(1) + d.n) / 2, scale=2 / (1 + float((R.T @ R)[0, 0])))
    assert stats.kstest(1 / out.Sigma[:, 0, 0], ref.cdf).pvalue > 1e-3


def test_no_data_sigma_is_prior_draw():
    m = 2
    d = MVDataset(np.zeros((0, m)), np.zeros((0, 1)))
    h = MVHyperparams(v=m + 4.0)
    s = _state(np.zeros((1, m)), np.eye(m))
    rng = np.random.default_rng(7)
    draws = np.array([mv_update_sigma(s, d, h, rng) for _ in range(40_000)])
    se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - np.eye(m) / (h.dof(m) - m - 1)) < 3 * se)


def test_sigma_jitter_then_error():
    d, B = _mv_problem(seed=8, m=2)
    bad = MVHyperparams(Psi=np.eye(2))
    object.__setattr__(bad, "Psi", np.array([[1.0, 0.0], [0.0, -1e9]]))
    with pytest.raises(Exception, match="positive definite"):
        mv_update_sigma(_state(B, np.eye(2)), d, bad, np.random.default_rng(0), max_tries=2)


# ----------------------------------------------------------------------
# beta conditional
# ----------------------------------------------------------------------
def test_single_response_reduces_to_univariate_conditional():
    rng = np.random.default_rng(9)
    n, p = 20, 3
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    gamma, lam, alpha = 2.5, np.array([0.5, 1.0, 3.0]), 1.3
    beta = rng.standard_normal(p)
    uni = ChainState(beta, gamma, lam, alpha, np.zeros(p))
    mv = MVState(beta[:, None], [[1 / gamma]], gamma * lam, alpha, np.zeros(p))
    d_uni, d_mv = Dataset(y, X, intercept=False), MVDataset(y[:, None], X)
    for i in range(p):
        assert mv_log_cond_beta_j(i, mv, d_mv) == pytest.approx(log_cond_beta_i(i, uni, d_uni), rel=1e-12)


def test_beta_conditional_gaussian_at_alpha_two():
    d, B = _mv_problem(seed=10, p=2, m=2)
    Sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
    s = _state(B, Sigma, lam=1.7, alpha=2.0)
    j = 3  # row 1, column 1
    r, c = j % 2, j // 2
    Omega = np.linalg.inv(Sigma)
    # coefficient of b in the quadratic form: precision and linear term
    x = d.X[:, r]
    prec = Omega[c, c] * (x @ x) + 1.7
    R0 = d.Y - d.X @ np.where(np.arange(4).reshape(2, 2, order="F") == j, 0.0, B)
    mu = float(x @ R0 @ Omega[:, c]) / prec
    grid = np.linspace(mu - 12 / math.sqrt(prec), mu + 12 / math.sqrt(prec), 2001)
    logd = []
    for b in grid:
        t = s.copy()
        t.beta[r, c] = b
        logd.append(mv_log_cond_beta_j(j, t, d))
    logd = np.array(logd)
    dens = np.exp(logd - logd.max())
    dens /= integrate.trapezoid(dens, grid)
    assert np.max(np.abs(dens - stats.norm(mu, 1 / math.sqrt(prec)).pdf(grid))) < 1e-6


def test_beta_conditional_even_without_data_signal():
    d = MVDataset(np.zeros((10, 2)), np.random.default_rng(11).standard_normal((10, 2)))
    s = _state(np.zeros((2, 2)), np.eye(2))
    for c in (0.3, 2.0):
        s.beta[1, 0] = c
        a = mv_log_cond_beta_j(1, s, d)
        s.beta[1, 0] = -c
        assert mv_log_cond_beta_j(1, s, d) == pytest.approx(a, rel=1e-14)


def test_beta_conditional_index_errors():
    d, B = _mv_problem()
    with pytest.raises(IndexError):
        mv_log_cond_beta_j(9, _state(B, np.eye(3)), d)


# ----------------------------------------------------------------------
# Full chain
# ----------------------------------------------------------------------
def test_chain_determinism_and_support():
    d, _ = _mv_problem(seed=12)
    h = MVHyperparams(iterations=1500, seed=42)
    a, b = mv_run_chain(d, h), mv_run_chain(d, h)
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.Sigma, b.Sigma)
    assert len(a) == 1350
    for S in a.Sigma:
        np.linalg.cholesky(S)
    assert np.all(a.lam > 0)
    assert np.all((a.alpha >= h.k1) & (a.alpha <= h.k2))
    assert set(np.unique(a.kappa)) <= {0, 1}


def test_initial_state_valid():
    d, _ = _mv_problem(seed=13)
    s = mv_initial_state(d, MVHyperparams(), np.random.default_rng(0))
    s.validate()
    assert np.all(s.beta == 0) and s.alpha == 2.25


def test_single_response_chain_matches_univariate_chain():
    # Same (beta, alpha) posterior once gamma/Sigma and lambda are frozen
    rng = np.random.default_rng(14)
    n, p = 25, 3
    X = rng.standard_normal((n, p))
    y = X @ np.array([1.5, 0.0, -0.5]) + rng.standard_normal(n)
    gamma, lam = 1.2, np.array([1.0, 4.0, 0.5])
    frozen = SamplerConfig(frozen={"gamma", "lambda", "kappa"})
    uni_init = ChainState(np.zeros(p), gamma, lam, 1.5, np.zeros(p))
    mv_init = MVState(np.zeros((p, 1)), [[1 / gamma]], gamma * lam, 1.5, np.zeros(p))
    uni, mv = [], []
    for seed in range(8):
        o = run_chain(Dataset(y, X, intercept=False), Hyperparams(iterations=20_000, seed=seed), frozen, uni_init)
        uni.append(np.append(o.beta.mean(axis=0), o.alpha.mean()))
        q = mv_run_chain(MVDataset(y[:, None], X), MVHyperparams(iterations=20_000, seed=seed), frozen, mv_init)
        mv.append(np.append(q.beta[:, :, 0].mean(axis=0), q.alpha.mean()))
    uni, mv = np.array(uni), np.array(mv)
    for k in range(p + 1):
        assert stats.ttest_ind(uni[:, k], mv[:, k], equal_var=False).pvalue > 1e-3
