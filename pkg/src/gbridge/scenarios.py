"""Synthetic data for the simulation studies, the matrix-response example and
the posterior-concentration experiment, plus a replication driver.

Every dataset has an intercept column followed by ``p`` Gaussian predictors
with either AR-type correlation ``0.5^|i-j|`` or compound symmetry ``0.5``.
Responses are ``y = X beta0 + noise_scale * eps``.  Coefficient recipes apply
to the ``p`` non-intercept entries; the true intercept is 0.

Replication ``r`` of a spec with seed ``s`` draws from
``SeedSequence([s, r])``, so replications are independent of worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .inference import predictive_draws, select_variables
from .model import ChainState, Dataset, Hyperparams
from .multivariate import MVDataset
from .sampler import SamplerConfig, run_chain

__all__ = [
    "SCENARIOS",
    "METHODS",
    "ScenarioSpec",
    "ConsistencySpec",
    "design_covariance",
    "draw_beta",
    "generate",
    "generate_multivariate",
    "lambda_schedule",
    "consistency_experiment",
    "fit_metrics",
    "replicate_study",
    "aggregate",
    "default_workers",
]

SCENARIOS = ("I", "II", "III", "IV", "V", "VI")
METHODS = {"full": None, "alpha_fixed_1": 1.0, "alpha_fixed_2": 2.0}

# id -> (p, n_train, n_test, correlation)
_PRESETS = {
    "I": (20, 100, 900, "ar_decay"),
    "II": (20, 100, 900, "ar_decay"),
    "III": (20, 100, 900, "ar_decay"),
    "IV": (150, 50, 950, "ar_decay"),
    "V": (40, 200, 400, "compound"),
    "VI": (40, 200, 400, "compound"),
}


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    n_train: int
    n_test: int
    p: int
    correlation: str = "ar_decay"
    noise_scale: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.id not in _PRESETS:
            raise ValueError(f"unknown scenario {self.id!r}; choose from {SCENARIOS}")
        if self.correlation not in ("ar_decay", "compound"):
            raise ValueError("correlation must be 'ar_decay' or 'compound'")
        if self.n_train < 1 or self.n_test < 0 or self.p < 1:
            raise ValueError("n_train and p must be positive, n_test nonnegative")
        if self.p != _PRESETS[self.id][0]:
            raise ValueError(f"scenario {self.id} has p={_PRESETS[self.id][0]}")
        if not self.noise_scale >= 0:
            raise ValueError("noise_scale must be nonnegative")

    @classmethod
    def preset(cls, id: str, seed: int = 0, **overrides) -> "ScenarioSpec":
        if id not in _PRESETS:
            raise ValueError(f"unknown scenario {id!r}; choose from {SCENARIOS}")
        p, n_train, n_test, corr = _PRESETS[id]
        return cls(id=id, n_train=n_train, n_test=n_test, p=p, correlation=corr, seed=seed, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)


def design_covariance(p: int, correlation: str) -> np.ndarray:
    if correlation == "ar_decay":
        idx = np.arange(p)
        return 0.5 ** np.abs(idx[:, None] - idx[None, :])
    if correlation == "compound":
        return np.full((p, p), 0.5) + 0.5 * np.eye(p)
    raise ValueError(f"unknown correlation {correlation!r}")


def _rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, rep]))


def _sparse_normal(rng, p: int, n_zero: int, mean: float, sd: float) -> np.ndarray:
    beta = np.zeros(p)
    nonzero = np.sort(rng.choice(p, size=p - n_zero, replace=False))
    beta[nonzero] = rng.normal(mean, sd, size=nonzero.size)
    return beta


def draw_beta(id: str, rng: np.random.Generator) -> np.ndarray:
    """Non-intercept true coefficients for a scenario."""
    if id == "I":
        return _sparse_normal(rng, 20, 18, 15.0, 3.0)
    if id == "II":
        return _sparse_normal(rng, 20, 10, 5.0, 1.0)
    if id == "III":
        return rng.normal(2.0, 0.001, size=20)
    if id == "IV":
        return _sparse_normal(rng, 150, 142, 15.0, 3.0)
    if id in ("V", "VI"):
        v = 2.0 if id == "V" else 150.0
        block = np.r_[np.zeros(10), np.full(10, v)]
        return np.tile(block, 2)
    raise ValueError(f"unknown scenario {id!r}")


def _design(rng, n: int, p: int, correlation: str) -> np.ndarray:
    chol = np.linalg.cholesky(design_covariance(p, correlation))
    Z = rng.standard_normal((n, p)) @ chol.T
    return np.column_stack([np.ones(n), Z])


def generate(spec: ScenarioSpec, rep: int = 0) -> tuple[Dataset, Dataset, np.ndarray]:
    """Training set, test set and the true coefficients (intercept first)."""
    rng = _rng(spec.seed, rep)
    beta = np.r_[0.0, draw_beta(spec.id, rng)]
    n = spec.n_train + spec.n_test
    X = _design(rng, n, spec.p, spec.correlation)
    y = X @ beta + spec.noise_scale * rng.standard_normal(n)
    names = ["intercept"] + [f"x{i}" for i in range(1, spec.p + 1)]
    train = Dataset(y[: spec.n_train], X[: spec.n_train], names=names, intercept=True)
    test = Dataset(y[spec.n_train:], X[spec.n_train:], names=names, intercept=True)
    return train, test, beta


def generate_multivariate(
    seed: int = 0, n: int = 100, p: int = 20, m: int = 10, lower_density: float = 0.05
) -> tuple[MVDataset, np.ndarray, np.ndarray]:
    """Matrix-response example: returns (data, true B with intercept row, true Sigma).

    Each column of B has two nonzero N(15, 3^2) entries among ``p`` predictors.
    ``Sigma = L L'`` with ``L`` unit lower triangular whose strictly-lower
    entries are N(0, 1) with probability ``lower_density`` and 0 otherwise.
    """
    rng = _rng(seed, 0)
    B = np.zeros((p + 1, m))
    for c in range(m):
        B[1:, c] = _sparse_normal(rng, p, p - 2, 15.0, 3.0)
    L = np.eye(m)
    lower = np.tril_indices(m, -1)
    keep = rng.random(lower[0].size) < lower_density
    L[lower] = np.where(keep, rng.standard_normal(lower[0].size), 0.0)
    Sigma = L @ L.T
    X = _design(rng, n, p, "ar_decay")
    E = rng.standard_normal((n, m)) @ L.T
    return MVDataset(X @ B + E, X), B, Sigma


# ----------------------------------------------------------------------
# Posterior concentration experiment
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ConsistencySpec:
    """Fixed-hyperparameter posterior-concentration experiment.

    ``p_n = floor(n ** p_exponent)``; the first ``n_nonzero`` true coefficients
    equal ``signal``, the rest are 0.  The noise precision is known and
    ``lambda_nj = (C sqrt(p_n) n^(rho/2) log n) ** alpha`` for all ``j``.
    """

    rho: float = 0.5
    C: float = 1.0
    n_grid: tuple = (100, 200, 400, 800)
    p_exponent: float = 0.6
    epsilon: float = 0.5
    alpha: float = 1.0
    n_nonzero: int = 2
    signal: float = 1.0
    noise_scale: float = 1.0
    iterations: int = 20_000
    burn_in: int = 2_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.n_grid[0] < 2:
            raise ValueError("n_grid entries must be at least 2")
        if not 0 < self.p_exponent < 1:
            raise ValueError("p_exponent must lie in (0, 1) so that p_n = o(n)")
        if not (self.alpha > 0 and self.noise_scale > 0):
            raise ValueError("alpha and noise_scale must be positive")
        if self.n_nonzero < 0:
            raise ValueError("n_nonzero must be nonnegative")

    def p_n(self, n: int) -> int:
        return max(1, int(math.floor(n ** self.p_exponent)))


def lambda_schedule(n: int, p_n: int, rho: float, C: float, alpha: float) -> float:
    return (C * math.sqrt(p_n) * n ** (rho / 2.0) * math.log(n)) ** alpha


def consistency_experiment(spec: ConsistencySpec, config: Optional[SamplerConfig] = None) -> list[dict]:
    """Posterior mass of ``{beta : ||beta - beta0|| > epsilon}`` for each ``n``.

    Only beta is sampled; lambda, alpha, kappa and the precision stay at their
    fixed values.  ``config`` may adjust adaptation settings.
    """
    base = SamplerConfig() if config is None else config
    c = replace(base, frozen=frozenset({"gamma", "lambda", "kappa"}), alpha_fixed=spec.alpha)
    gamma = 1.0 / spec.noise_scale**2
    rows = []
    for k, n in enumerate(spec.n_grid):
        rng = _rng(spec.seed, k)
        p = spec.p_n(n)
        beta0 = np.zeros(p)
        beta0[: min(spec.n_nonzero, p)] = spec.signal
        X = rng.standard_normal((n, p))
        y = X @ beta0 + spec.noise_scale * rng.standard_normal(n)
        d = Dataset(y, X, intercept=False)
        lam = lambda_schedule(n, p, spec.rho, spec.C, spec.alpha)
        h = Hyperparams(iterations=spec.iterations, burn_in=spec.burn_in, seed=spec.seed + k)
        init = ChainState(beta0.copy(), gamma, np.full(p, lam), spec.alpha, np.zeros(p, dtype=np.int8))
        out = run_chain(d, h, c, init)
        dist = np.linalg.norm(out.beta - beta0, axis=1)
        rows.append({"n": n, "p_n": p, "lambda": lam, "mass": float(np.mean(dist > spec.epsilon))})
    return rows


# ----------------------------------------------------------------------
# Replication study
# ----------------------------------------------------------------------
COVERAGE_DRAWS = 2000


def fit_metrics(
    train: Dataset,
    test: Dataset,
    beta_true: np.ndarray,
    h: Hyperparams,
    alpha_fixed: Optional[float] = None,
    level: float = 0.95,
) -> dict:
    """Fit one method on one replication and score it.

    Model size counts the intercept as always included plus the selected
    non-intercept coefficients; exact recovery compares the selected
    non-intercept set with the true nonzero set.
    """
    c = SamplerConfig(alpha_fixed=alpha_fixed)
    out = run_chain(train, h, c)
    beta_hat = out.beta.mean(axis=0)
    pred = test.X @ beta_hat
    selected = select_variables(out, level)
    sel = selected[1:] if train.intercept else selected
    truth = (beta_true[1:] if train.intercept else beta_true) != 0
    size = int(sel.sum()) + (1 if train.intercept else 0)

    coverage = float("nan")
    if test.n > 0:
        stride = max(1, len(out) // COVERAGE_DRAWS)
        sub = out.thinned(stride)
        draws = predictive_draws(test.X, sub, np.random.default_rng(np.random.SeedSequence([h.seed, 1])))
        tail = 0.5 * (1.0 - level)
        lo, hi = np.quantile(draws, [tail, 1.0 - tail], axis=0)
        coverage = float(np.mean((test.y >= lo) & (test.y <= hi)))
    return {
        "l2": float(np.linalg.norm(beta_hat - beta_true)),
        "mse": float(np.mean((test.y - pred) ** 2)) if test.n > 0 else float("nan"),
        "model_size": size,
        "exact": bool(np.array_equal(sel, truth)),
        "coverage": coverage,
        "alpha_mean": float(out.alpha.mean()),
    }


def _one_rep(args) -> list[dict]:
    spec, rep, methods, h = args
    train, test, beta = generate(spec, rep)
    rows = []
    for name in methods:
        hr = replace(h, seed=int(np.random.SeedSequence([spec.seed, rep, 2]).generate_state(1)[0]))
        m = fit_metrics(train, test, beta, hr, METHODS[name])
        rows.append({"rep": rep, "method": name, **m})
    return rows


def default_workers() -> int:
    env = os.environ.get("GBRIDGE_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def replicate_study(
    spec: ScenarioSpec,
    reps: int,
    methods: Sequence[str] = ("full",),
    h: Optional[Hyperparams] = None,
    workers: Optional[int] = None,
) -> list[dict]:
    """Per-replication metrics for every requested method, ordered by (rep, method)."""
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}; choose from {sorted(METHODS)}")
    if reps < 1:
        raise ValueError("reps must be positive")
    h = Hyperparams(iterations=20_000) if h is None else h
    workers = default_workers() if workers is None else workers
    jobs = [(spec, r, tuple(methods), h) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_one_rep, jobs))
    else:
        chunks = [_one_rep(j) for j in jobs]
    return [row for chunk in chunks for row in chunk]


def _se_median(x: np.ndarray) -> float:
    # asymptotic SE of a sample median under approximate normality
    if x.size < 2:
        return 0.0
    return float(math.sqrt(math.pi / 2.0) * np.std(x, ddof=1) / math.sqrt(x.size))


def _se_mean(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def aggregate(rows: Sequence[dict]) -> list[dict]:
    """One summary row per method: mean L2, median MSE, selection and coverage."""
    out = []
    for method in dict.fromkeys(r["method"] for r in rows):
        sub = [r for r in rows if r["method"] == method]
        l2 = np.array([r["l2"] for r in sub])
        mse = np.array([r["mse"] for r in sub])
        size = np.array([r["model_size"] for r in sub], dtype=float)
        cov = np.array([r["coverage"] for r in sub])
        out.append({
            "method": method,
            "reps": len(sub),
            "mean_l2": float(l2.mean()),
            "se_l2": _se_mean(l2),
            "median_mse": float(np.median(mse)),
            "se_mse": _se_median(mse),
            "avg_model_size": float(size.mean()),
            "exact_recovery_count": int(sum(r["exact"] for r in sub)),
            "coverage": float(np.mean(cov)),
        })
    return out
