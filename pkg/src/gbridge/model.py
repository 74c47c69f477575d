"""Hierarchical generalized-bridge regression model: domain types and log densities.

The model is

    y | beta, gamma          ~ N(X beta, gamma^{-1} I_n)
    beta_i | gamma, lam_i, a ~ exponential power, density prop. to exp(-gamma lam_i |beta_i|^a / 2)
    lam_i | kappa_i          ~ (1 - kappa_i) Gamma(e1, f1) + kappa_i Gamma(e2, f2)
    kappa_i                  ~ Bernoulli(1/2)
    a                        ~ Uniform(k1, k2)
    gamma                    ~ Gamma(e3, f3)

Gamma distributions use the shape/rate parameterization throughout.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, gammaln

__all__ = [
    "DomainError",
    "DimensionError",
    "Dataset",
    "Hyperparams",
    "ChainState",
    "ChainOutput",
    "abs_pow",
    "log_likelihood",
    "log_prior_beta",
    "prior_beta_variance",
    "log_cond_beta_i",
    "log_cond_alpha",
    "gamma_cond_params",
    "lambda_cond_params",
    "kappa_prob",
    "kappa_marginal_prob",
    "mixture_weight",
    "log_gamma_density",
    "log_joint",
]

LOG2 = math.log(2.0)
LOG2PI = math.log(2.0 * math.pi)


class DomainError(ValueError):
    """An argument lies outside the support of the density being evaluated."""


class DimensionError(ValueError):
    """Array shapes do not conform."""


def abs_pow(x, a: float):
    """``|x|**a`` evaluated as ``exp(a * log|x|)`` with ``|0|**a == 0`` exactly."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    nz = x > 0
    out[nz] = np.exp(a * np.log(x[nz]))
    return out if out.ndim else float(out)


# ----------------------------------------------------------------------
# Domain types
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Dataset:
    """Response vector and design matrix.

    ``intercept`` marks column 0 as an all-ones intercept column. ``x_center``,
    ``x_scale`` and ``y_center`` hold standardization metadata (``None`` when the
    data were used as given).
    """

    y: np.ndarray
    X: np.ndarray
    names: tuple = ()
    intercept: bool = False
    standardized: tuple = ()
    x_center: Optional[np.ndarray] = None
    x_scale: Optional[np.ndarray] = None
    y_center: float = 0.0

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DimensionError("X must be a 2-D array")
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"len(y)={y.shape[0]} but X has {X.shape[0]} rows")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", np.asfortranarray(X))
        p = X.shape[1]
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{j}" for j in range(p)))
        elif len(self.names) != p:
            raise DimensionError("one name per design column is required")
        if not self.standardized:
            object.__setattr__(self, "standardized", (False,) * p)
        if self.intercept and not np.all(X[:, 0] == 1.0):
            raise ValueError("intercept=True requires an all-ones first column")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_arrays(cls, y, X, names: Sequence[str] = (), intercept: Optional[bool] = None) -> "Dataset":
        """Build a dataset, detecting an all-ones first column as an intercept."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if intercept is None:
            intercept = X.shape[0] > 0 and bool(np.all(X[:, 0] == 1.0))
        return cls(y=y, X=X, names=tuple(names), intercept=intercept)

    def standardize(self, center_y: bool = True) -> "Dataset":
        """Center and scale every non-intercept column to unit sample variance."""
        X = self.X.copy()
        center = np.zeros(self.p)
        scale = np.ones(self.p)
        flags = []
        for j in range(self.p):
            if self.intercept and j == 0:
                flags.append(False)
                continue
            center[j] = X[:, j].mean()
            sd = X[:, j].std(ddof=1) if self.n > 1 else 0.0
            scale[j] = sd if sd > 0 else 1.0
            X[:, j] = (X[:, j] - center[j]) / scale[j]
            flags.append(True)
        y_center = float(self.y.mean()) if center_y else 0.0
        return replace(
            self,
            y=self.y - y_center,
            X=X,
            standardized=tuple(flags),
            x_center=center,
            x_scale=scale,
            y_center=y_center,
        )

    def penalty_mask(self, penalize_intercept: bool = True) -> np.ndarray:
        mask = np.ones(self.p, dtype=bool)
        if self.intercept and not penalize_intercept:
            mask[0] = False
        return mask

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.y).tobytes())
        h.update(np.ascontiguousarray(self.X).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Hyperparams:
    """Prior constants and sampler controls.

    ``v_b`` is the initial random-walk proposal standard deviation for each
    ``beta_i``; ``None`` selects ``2.4 * sd(y) / sqrt(n)``. ``burn_in=None``
    selects a tenth of ``iterations``.
    """

    e1: float = 1.0
    f1: float = 1.0
    e2: float = 40.0
    f2: float = 0.5
    e3: float = 0.001
    f3: float = 0.001
    k1: float = 0.5
    k2: float = 4.0
    v_b: Optional[float] = None
    iterations: int = 100_000
    burn_in: Optional[int] = None
    thin: int = 1
    seed: int = 0
    penalize_intercept: bool = True

    def __post_init__(self):
        for name in ("e1", "f1", "e2", "f2", "e3", "f3"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.k1 < self.k2:
            raise ValueError("require 0 < k1 < k2")
        if self.v_b is not None and not self.v_b > 0:
            raise ValueError("v_b must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 10)
        if not 0 <= self.burn_in <= self.iterations:
            raise ValueError("require 0 <= burn_in <= iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def n_stored(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def prior_array(self) -> np.ndarray:
        return np.array([self.e1, self.f1, self.e2, self.f2, self.e3, self.f3, self.k1, self.k2])

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ChainState:
    beta: np.ndarray
    gamma: float
    lam: np.ndarray
    alpha: float
    kappa: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).reshape(-1)
        self.lam = np.asarray(self.lam, dtype=float).reshape(-1)
        self.kappa = np.asarray(self.kappa, dtype=np.int8).reshape(-1)
        self.gamma = float(self.gamma)
        self.alpha = float(self.alpha)
        if not (self.beta.shape == self.lam.shape == self.kappa.shape):
            raise DimensionError("beta, lam and kappa must have the same length")

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    def validate(self, h: Optional[Hyperparams] = None) -> None:
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if np.any(self.lam <= 0):
            raise DomainError("every lambda_i must be positive")
        if not np.all((self.kappa == 0) | (self.kappa == 1)):
            raise DomainError("kappa entries must be 0 or 1")
        if h is not None and not h.k1 <= self.alpha <= h.k2:
            raise DomainError(f"alpha={self.alpha} outside [{h.k1}, {h.k2}]")

    def copy(self) -> "ChainState":
        return ChainState(self.beta.copy(), self.gamma, self.lam.copy(), self.alpha, self.kappa.copy())


@dataclass
class ChainOutput:
    """Post burn-in, thinned draws stored column-wise.

    Row ``t`` of every array is one stored :class:`ChainState`.
    """

    beta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray
    kappa: np.ndarray
    accept_beta: np.ndarray
    attempts_beta: np.ndarray
    accept_alpha: int
    attempts_alpha: int
    step_sizes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.beta.shape[0]

    @property
    def p(self) -> int:
        return self.beta.shape[1]

    def state(self, t: int) -> ChainState:
        return ChainState(self.beta[t], self.gamma[t], self.lam[t], self.alpha[t], self.kappa[t])

    def __iter__(self):
        for t in range(len(self)):
            yield self.state(t)

    @property
    def beta_acceptance_rate(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.attempts_beta > 0, self.accept_beta / np.maximum(self.attempts_beta, 1), np.nan)

    @property
    def alpha_acceptance_rate(self) -> float:
        return self.accept_alpha / self.attempts_alpha if self.attempts_alpha else float("nan")

    def thinned(self, stride: int) -> "ChainOutput":
        """Every ``stride``-th draw; acceptance counters are kept as-is."""
        if stride < 1:
            raise ValueError("stride must be positive")
        sl = slice(None, None, stride)
        return replace(
            self, beta=self.beta[sl], gamma=self.gamma[sl], alpha=self.alpha[sl],
            lam=self.lam[sl], kappa=self.kappa[sl], meta=dict(self.meta),
        )

    @classmethod
    def concatenate(cls, outputs: Sequence["ChainOutput"]) -> "ChainOutput":
        """Merge independent chains; per-chain metadata is kept under ``meta['chains']``."""
        if not outputs:
            raise ValueError("nothing to concatenate")
        return cls(
            beta=np.concatenate([o.beta for o in outputs]),
            gamma=np.concatenate([o.gamma for o in outputs]),
            alpha=np.concatenate([o.alpha for o in outputs]),
            lam=np.concatenate([o.lam for o in outputs]),
            kappa=np.concatenate([o.kappa for o in outputs]),
            accept_beta=sum(o.accept_beta for o in outputs),
            attempts_beta=sum(o.attempts_beta for o in outputs),
            accept_alpha=sum(o.accept_alpha for o in outputs),
            attempts_alpha=sum(o.attempts_alpha for o in outputs),
            step_sizes=np.vstack([o.step_sizes for o in outputs]),
            meta={"chains": [o.meta for o in outputs], "lengths": [len(o) for o in outputs]},
        )


# ----------------------------------------------------------------------
# Log densities
# ----------------------------------------------------------------------
def _check_positive(name: str, value) -> None:
    if np.any(np.asarray(value) <= 0) or np.any(~np.isfinite(np.asarray(value, dtype=float))):
        raise DomainError(f"{name} must be positive and finite")


def log_likelihood(d: Dataset, beta, gamma: float) -> float:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (d.p,):
        raise DimensionError(f"beta has shape {beta.shape}, expected ({d.p},)")
    _check_positive("gamma", gamma)
    r = d.y - d.X @ beta
    return 0.5 * d.n * (math.log(gamma) - LOG2PI) - 0.5 * gamma * float(r @ r)


def log_prior_beta(beta, gamma: float, lam, alpha: float) -> float:
    """Log density of the exponential-power prior, summed over coordinates."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    lam = np.broadcast_to(np.asarray(lam, dtype=float), beta.shape)
    _check_positive("gamma", gamma)
    _check_positive("lambda", lam)
    _check_positive("alpha", alpha)
    gl = gamma * lam
    const = math.log(alpha) - (1.0 / alpha + 1.0) * LOG2 - float(gammaln(1.0 / alpha))
    return float(np.sum(const + np.log(gl) / alpha - 0.5 * gl * abs_pow(beta, alpha)))


def prior_beta_variance(gamma: float, lambda_i: float, alpha: float) -> float:
    for name, v in (("gamma", gamma), ("lambda_i", lambda_i), ("alpha", alpha)):
        _check_positive(name, v)
    log_var = (
        gammaln(3.0 / alpha) - gammaln(1.0 / alpha)
        - (2.0 / alpha) * math.log(gamma * lambda_i)
        + (2.0 / alpha) * LOG2
    )
    return float(math.exp(log_var))


def log_cond_beta_i(i: int, s: ChainState, d: Dataset, penalized: bool = True) -> float:
    """Unnormalized log full conditional of ``beta_i`` at its current value in ``s``."""
    if not 0 <= i < d.p:
        raise IndexError(f"coefficient index {i} out of range for p={d.p}")
    if s.p != d.p:
        raise DimensionError("state and dataset disagree on p")
    r = d.y - d.X @ s.beta
    value = -0.5 * s.gamma * float(r @ r)
    if penalized:
        value -= 0.5 * s.gamma * s.lam[i] * abs_pow(s.beta[i], s.alpha)
    return value


def log_cond_alpha(
    s: ChainState,
    d: Optional[Dataset] = None,
    alpha: Optional[float] = None,
    mask: Optional[np.ndarray] = None,
) -> float:
    """Unnormalized log full conditional of the bridge exponent.

    Evaluated at ``alpha`` when given, otherwise at ``s.alpha``. Only the
    coordinates selected by ``mask`` (default: all) carry the bridge prior.
    The uniform prior's support is enforced by the sampler, not here.
    """
    a = s.alpha if alpha is None else float(alpha)
    if not a > 0:
        raise DomainError("alpha must be positive")
    beta, lam = s.beta, s.lam
    if mask is not None:
        beta, lam = beta[mask], lam[mask]
    k = beta.shape[0]
    inv = 1.0 / a
    head = k * (math.log(a) + inv * math.log(s.gamma) - inv * LOG2 - float(gammaln(inv)))
    return head + inv * float(np.sum(np.log(lam))) - 0.5 * s.gamma * float(np.sum(lam * abs_pow(beta, a)))


def gamma_cond_params(
    s: ChainState, d: Dataset, h: Hyperparams, mask: Optional[np.ndarray] = None
) -> tuple[float, float]:
    """Shape and rate of the Gamma full conditional of the noise precision."""
    r = d.y - d.X @ s.beta
    beta, lam = s.beta, s.lam
    if mask is not None:
        beta, lam = beta[mask], lam[mask]
    shape = h.e3 + 0.5 * d.n + beta.shape[0] / s.alpha
    rate = h.f3 + 0.5 * (float(r @ r) + float(np.sum(lam * abs_pow(beta, s.alpha))))
    return shape, rate


def lambda_cond_params(i: int, s: ChainState, h: Hyperparams) -> tuple[float, float]:
    if not 0 <= i < s.p:
        raise IndexError(f"coefficient index {i} out of range for p={s.p}")
    e, f = (h.e2, h.f2) if s.kappa[i] else (h.e1, h.f1)
    return e + 1.0 / s.alpha, f + 0.5 * s.gamma * abs_pow(s.beta[i], s.alpha)


def log_gamma_density(x, shape: float, rate: float):
    x = np.asarray(x, dtype=float)
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def kappa_prob(lambda_i: float, h: Hyperparams) -> float:
    """P(kappa_i = 1 | lambda_i): weight of the Gamma(e2, f2) component."""
    _check_positive("lambda_i", lambda_i)
    l1 = float(log_gamma_density(lambda_i, h.e1, h.f1))
    l2 = float(log_gamma_density(lambda_i, h.e2, h.f2))
    return mixture_weight(l1, l2)


def kappa_marginal_prob(beta_i: float, gamma: float, alpha: float, h: Hyperparams) -> float:
    """P(kappa_i = 1 | beta_i, gamma, alpha) with lambda_i integrated out.

    Each component contributes f^e Gamma(e + 1/alpha) / (Gamma(e) (f + gamma |beta_i|^alpha / 2)^(e + 1/alpha)).
    """
    x = 0.5 * gamma * abs_pow(beta_i, alpha)
    inv = 1.0 / alpha

    def log_w(e, f):
        return e * math.log(f) - gammaln(e) + gammaln(e + inv) - (e + inv) * math.log(f + x)

    return mixture_weight(log_w(h.e1, h.f1), log_w(h.e2, h.f2))


def mixture_weight(log_w1: float, log_w2: float) -> float:
    """``w2 / (w1 + w2)`` from log weights, as the logistic of their difference."""
    return float(expit(log_w2 - log_w1))


def log_joint(s: ChainState, d: Dataset, h: Hyperparams, mask: Optional[np.ndarray] = None) -> float:
    """Unnormalized log posterior of the full state (every prior term included)."""
    if not h.k1 <= s.alpha <= h.k2:
        return -math.inf
    if mask is None:
        mask = np.ones(d.p, dtype=bool)
    value = log_likelihood(d, s.beta, s.gamma)
    if np.any(mask):
        value += log_prior_beta(s.beta[mask], s.gamma, s.lam[mask], s.alpha)
    e = np.where(s.kappa == 1, h.e2, h.e1)
    f = np.where(s.kappa == 1, h.f2, h.f1)
    value += float(np.sum(log_gamma_density(s.lam, e, f)))
    value += float(log_gamma_density(s.gamma, h.e3, h.f3))
    value += -math.log(h.k2 - h.k1) - s.p * LOG2
    return value
