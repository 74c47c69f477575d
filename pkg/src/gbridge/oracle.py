"""Independent reference computations used as ground truth for the sampler.

* :func:`marginal_m` and :func:`posterior_mean_1d` integrate the one-dimensional
  model (unit noise precision) by quadrature, with ``lambda`` and ``kappa``
  integrated analytically and ``alpha`` on a fixed Gauss-Legendre rule.
* :func:`ridge_posterior` is the conjugate closed form at ``alpha = 2``.
* :func:`grid_posterior` normalizes the exact joint density over a grid of at
  most two free coordinates.

Nothing here calls the sampler.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln, ndtr

from .model import ChainState, Dataset, DimensionError, DomainError, Hyperparams, log_joint

__all__ = [
    "OracleError",
    "OneDimModel",
    "prior_density_1d",
    "marginal_m",
    "log_marginal",
    "score",
    "posterior_mean_1d",
    "posterior_mean_direct",
    "ridge_posterior",
    "GridPosterior",
    "grid_posterior",
]

ALPHA_NODES = 200
WINDOW = 40.0  # N(0,1) density beyond this distance is below 1e-347
QUAD_EPSREL = 1e-11
QUAD_LIMIT = 400


class OracleError(RuntimeError):
    """Quadrature failed to converge or a grid does not cover the posterior."""


@dataclass(frozen=True)
class OneDimModel:
    """y ~ N(beta, 1) under the bridge prior with lambda and kappa integrated out."""

    e1: float = 1.0
    f1: float = 1.0
    e2: float = 1.0
    f2: float = 1.0
    k1: float = 0.5
    k2: float = 4.0

    def __post_init__(self):
        for name in ("e1", "f1", "e2", "f2", "k1", "k2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite")
        if not self.k1 < self.k2:
            raise DomainError("need k1 < k2")

    @classmethod
    def from_hyperparams(cls, h: Hyperparams) -> "OneDimModel":
        return cls(h.e1, h.f1, h.e2, h.f2, h.k1, h.k2)

    @cached_property
    def _rule(self):
        x, w = np.polynomial.legendre.leggauss(ALPHA_NODES)
        a = 0.5 * (self.k2 - self.k1) * x + 0.5 * (self.k1 + self.k2)
        # uniform prior density times the interval half-length
        w = 0.5 * w
        inv = 1.0 / a
        log_c = np.log(a) - (inv + 1.0) * math.log(2.0) - gammaln(inv) - math.log(2.0)
        comps = []
        for e, f in ((self.e1, self.f1), (self.e2, self.f2)):
            comps.append((log_c + e * math.log(f) - gammaln(e) + gammaln(e + inv), f, e + inv))
        return a, np.log(w), comps


def prior_density_1d(beta, m: OneDimModel):
    """Marginal prior density of beta (alpha, lambda and kappa integrated)."""
    b = np.abs(np.asarray(beta, dtype=float))
    a, log_w, comps = m._rule
    shape = b.shape
    b = b.reshape(-1, 1)
    with np.errstate(divide="ignore"):
        log_b = np.log(b)
    bp = np.where(b > 0, np.exp(a * log_b), 0.0)
    terms = [log_w + lc - pw * np.log(0.5 * bp + f) for lc, f, pw in comps]
    out = np.exp(np.logaddexp.reduce(np.concatenate(terms, axis=1), axis=1))
    return out.reshape(shape) if shape else float(out[0])


def _quad(fn, lo, hi, points):
    pts = sorted({p for p in points if lo < p < hi})
    val, err, info = integrate.quad(
        fn, lo, hi, points=pts or None, epsabs=0.0, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, full_output=1
    )[:3]
    if not np.isfinite(val) or err > 1e-8 * abs(val) + 1e-300:
        raise OracleError(
            f"quadrature did not converge on [{lo}, {hi}]: value {val}, error estimate {err}, "
            f"{info['last']} subintervals"
        )
    return val


def _normal_pdf(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _moment(y: float, m: OneDimModel, k: int) -> float:
    lo, hi = y - WINDOW, y + WINDOW
    # the likelihood factor is centred at y; the prior has a cusp at 0
    fn = lambda b: b**k * _normal_pdf(y - b) * prior_density_1d(b, m)
    return _quad(fn, lo, hi, (0.0, y))


def marginal_m(y: float, m: OneDimModel) -> float:
    """Marginal density m(y) to relative accuracy 1e-8."""
    y = float(y)
    if not math.isfinite(y):
        raise DomainError("y must be finite")
    return _moment(abs(y), m, 0)


def log_marginal(y: float, m: OneDimModel) -> float:
    return math.log(marginal_m(y, m))


def score(y: float, m: OneDimModel) -> float:
    """(log m)'(y) by a Richardson-refined central difference."""
    y = float(y)
    h = max(1e-4, 1e-6 * abs(y))

    def diff(step):
        return (log_marginal(y + step, m) - log_marginal(y - step, m)) / (2.0 * step)

    if y == 0.0:
        return 0.0
    return (4.0 * diff(0.5 * h) - diff(h)) / 3.0


def posterior_mean_1d(y: float, m: OneDimModel) -> float:
    """E(beta | y) = y + (log m)'(y)."""
    return float(y) + score(y, m)


def posterior_mean_direct(y: float, m: OneDimModel) -> float:
    """E(beta | y) as the ratio of quadratures of beta * posterior and posterior."""
    y = float(y)
    sign = -1.0 if y < 0 else 1.0
    ya = abs(y)
    return sign * _moment(ya, m, 1) / _moment(ya, m, 0)


def ridge_posterior(d: Dataset, lam, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of beta | y at alpha = 2 with lambda and gamma fixed."""
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (d.p,))
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise DomainError("lambda must be nonnegative and finite")
    if not (math.isfinite(gamma) and gamma > 0):
        raise DomainError("gamma must be positive and finite")
    A = d.X.T @ d.X + np.diag(lam)
    try:
        chol = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise DomainError("X^T X + diag(lambda) is singular") from exc
    inv_chol = np.linalg.solve(chol, np.eye(d.p))
    A_inv = inv_chol.T @ inv_chol
    mean = A_inv @ (d.X.T @ d.y)
    cov = A_inv / gamma
    return mean, 0.5 * (cov + cov.T)


# ----------------------------------------------------------------------
# Grid posterior
# ----------------------------------------------------------------------
_COORD = re.compile(r"^(beta|lambda)\[(\d+)\]$")
GRID_TAIL_TOL = 1e-10


def _setter(name: str, p: int):
    if name in ("alpha", "gamma"):
        return lambda s, v: setattr(s, name, float(v))
    match = _COORD.match(name)
    if not match:
        raise ValueError(f"unknown coordinate {name!r}; use beta[i], lambda[i], alpha or gamma")
    field_name = "beta" if match.group(1) == "beta" else "lam"
    i = int(match.group(2))
    if i >= p:
        raise IndexError(f"{name} out of range for p={p}")

    def set_value(s, v):
        getattr(s, field_name)[i] = v

    return set_value


@dataclass(frozen=True)
class GridPosterior:
    """Normalized node probabilities of the exact posterior over a grid."""

    names: tuple
    nodes: tuple
    prob: np.ndarray
    log_density: np.ndarray = field(repr=False)

    def axis(self, name: str) -> int:
        return self.names.index(name)

    def marginal(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        k = self.axis(name)
        other = tuple(j for j in range(len(self.names)) if j != k)
        return self.nodes[k], self.prob.sum(axis=other) if other else self.prob

    def mean(self, name: str) -> float:
        x, w = self.marginal(name)
        return float(x @ w)

    def var(self, name: str) -> float:
        x, w = self.marginal(name)
        mu = float(x @ w)
        return float(((x - mu) ** 2) @ w)

    def bin_probabilities(self, name: str, edges) -> np.ndarray:
        """Marginal mass in each bin ``[edges[j], edges[j+1])``."""
        x, w = self.marginal(name)
        idx = np.searchsorted(np.asarray(edges, dtype=float), x, side="right") - 1
        inside = (idx >= 0) & (idx < len(edges) - 1)
        return np.bincount(idx[inside], weights=w[inside], minlength=len(edges) - 1)


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    if x.size == 1:
        return np.ones(1)
    dx = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def grid_posterior(
    d: Dataset,
    fixed: ChainState,
    grid: Mapping[str, Sequence[float]],
    h: Optional[Hyperparams] = None,
    penalize_intercept: bool = True,
    full_support: Sequence[str] = (),
) -> GridPosterior:
    """Exact posterior over the free coordinates named in ``grid``.

    ``fixed`` supplies every other component.  Node masses are density times
    trapezoid weight, normalized to sum to one.  Unless an axis is listed in
    ``full_support`` (or is ``alpha`` spanning ``[k1, k2]``), the mass on its
    two end slices must stay below ``GRID_TAIL_TOL`` or :class:`OracleError`
    asks for a wider grid.
    """
    h = Hyperparams() if h is None else h
    names = tuple(grid)
    if not 1 <= len(names) <= 2:
        raise ValueError("grid_posterior supports one or two free coordinates")
    if fixed.p != d.p:
        raise DimensionError("fixed state and dataset disagree on p")
    nodes = tuple(np.sort(np.asarray(grid[n], dtype=float).ravel()) for n in names)
    setters = [_setter(n, d.p) for n in names]
    mask = d.penalty_mask(penalize_intercept)

    shape = tuple(x.size for x in nodes)
    logd = np.empty(shape)
    s = fixed.copy()
    for idx in np.ndindex(*shape):
        for k, set_value in enumerate(setters):
            set_value(s, nodes[k][idx[k]])
        logd[idx] = log_joint(s, d, h, mask)
    if not np.any(np.isfinite(logd)):
        raise OracleError("posterior density vanishes on every grid node")

    log_w = np.zeros(shape)
    for k, x in enumerate(nodes):
        w = _trapezoid_weights(x)
        expand = [1] * len(shape)
        expand[k] = x.size
        with np.errstate(divide="ignore"):
            log_w = log_w + np.log(w).reshape(expand)
    lp = logd + log_w
    lp = lp - np.max(lp)
    prob = np.exp(lp)
    prob /= prob.sum()

    for k, (name, x) in enumerate(zip(names, nodes)):
        if x.size == 1 or name in full_support:
            continue
        if name == "alpha" and x[0] <= h.k1 and x[-1] >= h.k2:
            continue
        edge = np.take(prob, [0, x.size - 1], axis=k).sum()
        if edge > GRID_TAIL_TOL:
            raise OracleError(
                f"grid for {name} on [{x[0]}, {x[-1]}] leaves {edge:.3g} mass on its end nodes; widen it"
            )
    return GridPosterior(names, nodes, prob, logd)
