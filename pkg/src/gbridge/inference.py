"""Posterior summaries, credible-interval selection, prediction and diagnostics.

Quantiles are type-7 sample quantiles (linear interpolation between order
statistics, numpy's default), so for draws 1..100 the median is 50.5 and the
2.5% quantile is 3.475.  Selection outcomes at small draw counts depend on this
rule.

Effective sample sizes use non-overlapping batch means with batch size
``floor(sqrt(M))``.  A chain with zero sample variance has ESS 1.0 (the floor)
and MCSE 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ChainOutput, DimensionError

__all__ = [
    "DEFAULT_LEVELS",
    "ESS_FLOOR",
    "MIN_ESS_DRAWS",
    "PosteriorSummary",
    "summarize",
    "credible_interval",
    "select_variables",
    "predict_mean",
    "predictive_draws",
    "batch_means_ess",
    "effective_sample_size",
    "mcse",
]

DEFAULT_LEVELS = (0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975)
ESS_FLOOR = 1.0
MIN_ESS_DRAWS = 100


def _require_draws(out: ChainOutput, minimum: int) -> None:
    if len(out) < minimum:
        raise ValueError(f"need at least {minimum} draws, chain has {len(out)}")


@dataclass(frozen=True)
class PosteriorSummary:
    """Draw-based posterior summary.

    ``ess`` and ``mcse`` map ``"beta"``, ``"gamma"`` and ``"alpha"`` to arrays
    (scalars for the latter two); they are ``None`` with fewer than
    ``MIN_ESS_DRAWS`` draws.
    """

    levels: np.ndarray
    beta_mean: np.ndarray
    beta_sd: np.ndarray
    beta_quantiles: np.ndarray  # (len(levels), p)
    gamma_mean: float
    alpha_mean: float
    alpha_quantiles: np.ndarray
    selected: np.ndarray
    selection_level: float
    ess: dict | None
    mcse: dict | None
    n_draws: int

    def quantile(self, level: float) -> np.ndarray:
        k = np.flatnonzero(np.isclose(self.levels, level))
        if k.size == 0:
            raise KeyError(f"level {level} not in summary levels {self.levels.tolist()}")
        return self.beta_quantiles[k[0]]

    def to_dict(self) -> dict:
        return {
            "n_draws": self.n_draws,
            "levels": self.levels.tolist(),
            "beta_mean": self.beta_mean.tolist(),
            "beta_sd": self.beta_sd.tolist(),
            "beta_quantiles": self.beta_quantiles.tolist(),
            "gamma_mean": self.gamma_mean,
            "alpha_mean": self.alpha_mean,
            "alpha_quantiles": self.alpha_quantiles.tolist(),
            "selected": self.selected.astype(int).tolist(),
            "selection_level": self.selection_level,
            "ess": None if self.ess is None else {k: np.asarray(v).tolist() for k, v in self.ess.items()},
            "mcse": None if self.mcse is None else {k: np.asarray(v).tolist() for k, v in self.mcse.items()},
        }


def _interval_levels(level: float) -> tuple[float, float]:
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    tail = 0.5 * (1.0 - level)
    return tail, 1.0 - tail


def credible_interval(draws: np.ndarray, level: float = 0.95) -> np.ndarray:
    """Equal-tailed interval per column, shape ``(2, k)``."""
    lo, hi = _interval_levels(level)
    return np.quantile(np.asarray(draws, dtype=float), [lo, hi], axis=0)


def _excludes_zero(interval: np.ndarray) -> np.ndarray:
    return (interval[0] > 0) | (interval[1] < 0)


def select_variables(out: ChainOutput, level: float = 0.95) -> np.ndarray:
    """Boolean vector: coordinate ``i`` is selected iff its level-CI excludes 0."""
    _require_draws(out, 1)
    return _excludes_zero(credible_interval(out.beta, level))


def summarize(out: ChainOutput, levels: Sequence[float] = DEFAULT_LEVELS, selection_level: float = 0.95) -> PosteriorSummary:
    _require_draws(out, 2)
    lo, hi = _interval_levels(selection_level)
    levels = np.asarray(levels, dtype=float).ravel()
    extra = [q for q in (lo, hi) if not np.any(np.isclose(levels, q))]
    levels = np.unique(np.concatenate([levels, extra]))
    if np.any((levels < 0) | (levels > 1)):
        raise ValueError("quantile levels must lie in [0, 1]")
    beta_q = np.quantile(out.beta, levels, axis=0)
    ci = beta_q[[np.flatnonzero(np.isclose(levels, lo))[0], np.flatnonzero(np.isclose(levels, hi))[0]]]
    ess = se = None
    if len(out) >= MIN_ESS_DRAWS:
        ess = effective_sample_size(out)
        se = mcse(out)
    return PosteriorSummary(
        levels=levels,
        beta_mean=out.beta.mean(axis=0),
        beta_sd=np.where(_constant(out.beta), 0.0, out.beta.std(axis=0, ddof=1)),
        beta_quantiles=beta_q,
        gamma_mean=float(out.gamma.mean()),
        alpha_mean=float(out.alpha.mean()),
        alpha_quantiles=np.quantile(out.alpha, levels),
        selected=_excludes_zero(ci),
        selection_level=selection_level,
        ess=ess,
        mcse=se,
        n_draws=len(out),
    )


def _check_x(X_new, p: int) -> np.ndarray:
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if X_new.shape[1] != p:
        raise DimensionError(f"X_new has {X_new.shape[1]} columns, chain has p={p}")
    return X_new


def predict_mean(X_new, out: ChainOutput) -> np.ndarray:
    """Posterior predictive mean ``X_new @ E[beta | y]``."""
    _require_draws(out, 1)
    X_new = _check_x(X_new, out.p)
    return X_new @ out.beta.mean(axis=0)


def predictive_draws(X_new, out: ChainOutput, rng: np.random.Generator) -> np.ndarray:
    """One predictive response vector per stored draw, shape ``(T, rows)``."""
    _require_draws(out, 1)
    X_new = _check_x(X_new, out.p)
    mean = out.beta @ X_new.T
    noise = rng.standard_normal(mean.shape)
    return mean + noise / np.sqrt(out.gamma)[:, None]


# ----------------------------------------------------------------------
# Diagnostics
# ----------------------------------------------------------------------
def _constant(x: np.ndarray) -> np.ndarray:
    return np.all(x == x[:1], axis=0)


def _batch_means_var(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample variance and batch-means long-run variance per column.

    Constant columns get exactly zero for both, whatever the rounding in the mean.
    """
    M = x.shape[0]
    b = max(1, math.isqrt(M))
    a = M // b
    batches = x[: a * b].reshape(a, b, -1).mean(axis=1)
    centre = x[: a * b].mean(axis=0)
    lrv = b * ((batches - centre) ** 2).sum(axis=0) / max(a - 1, 1)
    var = x.var(axis=0, ddof=1)
    const = _constant(x)
    var[const] = 0.0
    lrv[const] = 0.0
    return var, lrv


def batch_means_ess(draws) -> np.ndarray | float:
    """Batch-means ESS of each column of ``draws`` (a 1-D input gives a float)."""
    x = np.asarray(draws, dtype=float)
    scalar = x.ndim == 1
    x = x.reshape(x.shape[0], -1)
    M = x.shape[0]
    if M < MIN_ESS_DRAWS:
        raise ValueError(f"need at least {MIN_ESS_DRAWS} draws for ESS, got {M}")
    var, lrv = _batch_means_var(x)
    ess = np.full(x.shape[1], ESS_FLOOR)
    ok = (var > 0) & (lrv > 0)
    ess[ok] = np.clip(M * var[ok] / lrv[ok], ESS_FLOOR, M)
    # positive variance but degenerate batch means: no autocorrelation signal
    ess[(var > 0) & ~(lrv > 0)] = M
    return float(ess[0]) if scalar else ess


def _mcse_columns(draws) -> np.ndarray | float:
    x = np.asarray(draws, dtype=float)
    scalar = x.ndim == 1
    x = x.reshape(x.shape[0], -1)
    M = x.shape[0]
    if M < MIN_ESS_DRAWS:
        raise ValueError(f"need at least {MIN_ESS_DRAWS} draws for MCSE, got {M}")
    _, lrv = _batch_means_var(x)
    se = np.sqrt(np.maximum(lrv, 0.0) / M)
    return float(se[0]) if scalar else se


def effective_sample_size(out: ChainOutput) -> dict:
    _require_draws(out, MIN_ESS_DRAWS)
    return {
        "beta": batch_means_ess(out.beta),
        "gamma": batch_means_ess(out.gamma),
        "alpha": batch_means_ess(out.alpha),
    }


def mcse(out: ChainOutput) -> dict:
    """Monte Carlo standard errors of the posterior means, ``sqrt(lrv / M)``."""
    _require_draws(out, MIN_ESS_DRAWS)
    return {
        "beta": _mcse_columns(out.beta),
        "gamma": _mcse_columns(out.gamma),
        "alpha": _mcse_columns(out.alpha),
    }
