"""Matrix-response bridge regression with an inverse-Wishart error covariance.

Each of the ``n`` rows of ``Y`` (``n x m``) is ``N(x_i' B, Sigma)`` with
``B`` ``p x m``.  Every entry ``beta_j`` of ``B`` carries the exponential-power
prior ``exp(-lam_j |beta_j|^a / 2)`` (no precision factor), ``lam_j`` the
two-component Gamma mixture, ``a ~ Uniform(k1, k2)`` and
``Sigma ~ InvWishart(Psi, v)``.

Entries of ``B`` are addressed by a flat column-major index
``j = column * p + row``.

With ``m = 1`` and ``Sigma = 1 / gamma`` this is the univariate model whose
``lambda`` is multiplied by ``gamma``: the prior exponent ``gamma lam |b|^a``
becomes ``lam_mv |b|^a`` with ``lam_mv = gamma lam``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .model import DimensionError, DomainError, abs_pow
from .sampler import ChainError, SamplerConfig, kernel_seed

__all__ = [
    "MVDataset",
    "MVState",
    "MVHyperparams",
    "MVChainOutput",
    "flatten",
    "unflatten",
    "inv_wishart_draw",
    "mv_update_sigma",
    "mv_log_cond_beta_j",
    "mv_initial_state",
    "mv_run_chain",
]


def flatten(B: np.ndarray) -> np.ndarray:
    """Column-major flat view of a ``p x m`` coefficient matrix."""
    return np.asarray(B, dtype=float).ravel(order="F")


def unflatten(b: np.ndarray, p: int, m: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (p * m,):
        raise DimensionError(f"flat vector has shape {b.shape}, expected ({p * m},)")
    return b.reshape((p, m), order="F")


def _is_spd(a: np.ndarray) -> bool:
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12):
        return False
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    return True


@dataclass(frozen=True)
class MVDataset:
    Y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        Y = np.array(self.Y, dtype=float, ndmin=2)
        X = np.array(self.X, dtype=float, ndmin=2)
        if Y.shape[0] != X.shape[0]:
            raise DimensionError(f"Y has {Y.shape[0]} rows, X has {X.shape[0]}")
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise DomainError("Y and X must be finite")
        Y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass
class MVState:
    beta: np.ndarray  # p x m
    Sigma: np.ndarray
    lam: np.ndarray  # flat, length p*m
    alpha: float
    kappa: np.ndarray

    def __post_init__(self):
        self.beta = np.array(self.beta, dtype=float, ndmin=2)
        self.Sigma = np.array(self.Sigma, dtype=float, ndmin=2)
        self.lam = np.array(self.lam, dtype=float).ravel()
        self.kappa = np.array(self.kappa, dtype=np.int8).ravel()
        self.alpha = float(self.alpha)

    def validate(self) -> None:
        p, m = self.beta.shape
        if self.Sigma.shape != (m, m):
            raise DimensionError(f"Sigma has shape {self.Sigma.shape}, expected ({m}, {m})")
        if self.lam.shape != (p * m,) or self.kappa.shape != (p * m,):
            raise DimensionError("lambda and kappa must have length p*m")
        if not _is_spd(self.Sigma):
            raise DomainError("Sigma must be symmetric positive definite")
        if np.any(self.lam <= 0) or not np.all(np.isfinite(self.lam)):
            raise DomainError("lambda must be positive and finite")
        if not np.all(np.isin(self.kappa, (0, 1))):
            raise DomainError("kappa must be binary")
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")

    def copy(self) -> "MVState":
        return MVState(self.beta.copy(), self.Sigma.copy(), self.lam.copy(), self.alpha, self.kappa.copy())


@dataclass(frozen=True)
class MVHyperparams:
    """Priors and run length.  ``Psi=None`` means ``I_m``; ``v=None`` means ``m + 2``."""

    Psi: Optional[np.ndarray] = None
    v: Optional[float] = None
    e1: float = 1.0
    f1: float = 1.0
    e2: float = 40.0
    f2: float = 0.5
    k1: float = 0.5
    k2: float = 4.0
    v_b: Optional[float] = None
    iterations: int = 20_000
    burn_in: Optional[int] = None
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("e1", "f1", "e2", "f2", "k1", "k2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite")
        if not self.k1 < self.k2:
            raise DomainError("need k1 < k2")
        if self.Psi is not None:
            Psi = np.array(self.Psi, dtype=float, ndmin=2)
            if not _is_spd(Psi):
                raise DomainError("Psi must be symmetric positive definite")
            object.__setattr__(self, "Psi", Psi)
        if self.iterations < 1 or self.thin < 1:
            raise ValueError("iterations and thin must be positive")
        burn = self.iterations // 10 if self.burn_in is None else int(self.burn_in)
        if not 0 <= burn <= self.iterations:
            raise ValueError("burn_in must lie in [0, iterations]")
        object.__setattr__(self, "burn_in", burn)

    def scale(self, m: int) -> np.ndarray:
        if self.Psi is None:
            return np.eye(m)
        if self.Psi.shape != (m, m):
            raise DimensionError(f"Psi has shape {self.Psi.shape}, data has m={m}")
        return self.Psi

    def dof(self, m: int) -> float:
        v = m + 2.0 if self.v is None else float(self.v)
        if not v > m - 1:
            raise DomainError(f"inverse-Wishart dof {v} must exceed m - 1 = {m - 1}")
        return v

    def prior_array(self) -> np.ndarray:
        # precision hyperparameters are unused by this model
        return np.array([self.e1, self.f1, self.e2, self.f2, 1.0, 1.0, self.k1, self.k2])

    @property
    def n_stored(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def to_dict(self) -> dict:
        d = asdict(self)
        d["Psi"] = None if self.Psi is None else self.Psi.tolist()
        return d


@dataclass
class MVChainOutput:
    beta: np.ndarray  # (T, p, m)
    Sigma: np.ndarray  # (T, m, m)
    alpha: np.ndarray
    lam: np.ndarray  # (T, p*m)
    kappa: np.ndarray
    accept_beta: np.ndarray
    attempts_beta: np.ndarray
    accept_alpha: int
    attempts_alpha: int
    step_sizes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.beta.shape[0]

    def beta_mean(self) -> np.ndarray:
        return self.beta.mean(axis=0)

    def sigma_mean(self) -> np.ndarray:
        return self.Sigma.mean(axis=0)


# ----------------------------------------------------------------------
# Single updates
# ----------------------------------------------------------------------
def inv_wishart_draw(scale: np.ndarray, dof: float, rng: np.random.Generator) -> np.ndarray:
    """One W^{-1}(scale, dof) draw by the Bartlett construction."""
    m = scale.shape[0]
    chi2 = rng.chisquare(dof - np.arange(m))
    normals = np.tril(rng.standard_normal((m, m)), -1)
    return K.inv_wishart_from_variates(np.ascontiguousarray(scale, dtype=float), chi2, normals)


def _posterior_scale(s: MVState, d: MVDataset, h: MVHyperparams) -> np.ndarray:
    R = d.Y - d.X @ s.beta
    S = h.scale(d.m) + R.T @ R
    return 0.5 * (S + S.T)


def mv_update_sigma(s: MVState, d: MVDataset, h: MVHyperparams, rng: np.random.Generator, max_tries: int = 8) -> np.ndarray:
    """Gibbs draw of Sigma from W^{-1}(Psi + R'R, v + n)."""
    S = _posterior_scale(s, d, h)
    jitter = 1e-10 * np.trace(S) / d.m
    for _ in range(max_tries + 1):
        if _is_spd(S):
            break
        S = S + jitter * np.eye(d.m)
        jitter *= 10.0
    else:
        raise ChainError("inverse-Wishart scale is not positive definite", {"scale": S.tolist()})
    return inv_wishart_draw(S, h.dof(d.m) + d.n, rng)


def mv_log_cond_beta_j(j: int, s: MVState, d: MVDataset) -> float:
    """Unnormalized log full conditional of flat coefficient ``j``."""
    p, m = s.beta.shape
    if (p, m) != (d.p, d.m):
        raise DimensionError("state and dataset disagree on (p, m)")
    if not 0 <= j < p * m:
        raise IndexError(f"flat index {j} out of range for p*m={p * m}")
    R = d.Y - d.X @ s.beta
    Omega = np.linalg.inv(s.Sigma)
    quad = float(np.sum((R.T @ R) * Omega))
    b = s.beta[j % p, j // p]
    return -0.5 * (quad + s.lam[j] * abs_pow(b, s.alpha))


def mv_initial_state(d: MVDataset, h: MVHyperparams, rng: np.random.Generator, alpha: Optional[float] = None) -> MVState:
    mp = d.p * d.m
    kappa = (rng.random(mp) < 0.5).astype(np.int8)
    lam = rng.gamma(np.where(kappa == 1, h.e2, h.e1), 1.0 / np.where(kappa == 1, h.f2, h.f1))
    cov = np.cov(d.Y, rowvar=False).reshape(d.m, d.m) if d.n > d.m else np.eye(d.m)
    if not _is_spd(cov):
        cov = np.eye(d.m)
    a = 0.5 * (h.k1 + h.k2) if alpha is None else float(alpha)
    return MVState(np.zeros((d.p, d.m)), cov, np.maximum(lam, 5e-324), a, kappa)


def mv_run_chain(
    d: MVDataset,
    h: MVHyperparams,
    c: Optional[SamplerConfig] = None,
    init: Optional[MVState] = None,
) -> MVChainOutput:
    """Deterministic-scan sampler: beta entries, alpha, Sigma, lambda, kappa.

    ``c.frozen`` may contain ``"gamma"`` to hold Sigma fixed (it plays the role
    of the noise precision here).
    """
    c = SamplerConfig() if c is None else c
    init_rng, kseed = kernel_seed(h.seed)
    state = mv_initial_state(d, h, init_rng, c.alpha_fixed) if init is None else init.copy()
    if c.alpha_fixed is not None:
        state.alpha = float(c.alpha_fixed)
    state.validate()
    if state.beta.shape != (d.p, d.m):
        raise DimensionError("initial state and dataset disagree on (p, m)")

    mp = d.p * d.m
    if h.v_b is None:
        # one initial step per response column, scaled like the univariate default
        sd = np.std(d.Y, axis=0, ddof=1) if d.n > 1 else np.ones(d.m)
        sd = np.where(sd > 0, sd, 1.0)
        log_step = np.repeat(np.log(2.4 * sd / math.sqrt(max(d.n, 1))), d.p)
    else:
        log_step = np.full(mp, math.log(h.v_b))
    beta = np.ascontiguousarray(state.beta)
    Sigma = np.ascontiguousarray(state.Sigma)
    lam = state.lam.copy()
    kappa = state.kappa.copy()
    scalars = np.array([state.alpha])

    T = h.n_stored
    out_beta = np.empty((T, d.p, d.m))
    out_sigma = np.empty((T, d.m, d.m))
    out_alpha = np.empty(T)
    out_lam = np.empty((T, mp))
    out_kappa = np.empty((T, mp), dtype=np.int8)
    acc_beta = np.zeros(mp, dtype=np.int64)
    att_beta = np.zeros(mp, dtype=np.int64)
    acc_alpha = np.zeros(2, dtype=np.int64)

    K.seed_generator(kseed)
    status, t, coord = K.run_multivariate(
        np.ascontiguousarray(d.Y), np.ascontiguousarray(d.X), np.ascontiguousarray(h.scale(d.m)), h.dof(d.m),
        h.prior_array(), beta, Sigma, lam, kappa, scalars, log_step,
        h.iterations, h.burn_in, h.thin, c.adapt_during_burnin, c.target_accept, c.flags(), c.kappa_mode,
        out_beta, out_sigma, out_alpha, out_lam, out_kappa,
        acc_beta, att_beta, acc_alpha,
    )
    if status != K.STATUS_OK:
        raise ChainError(
            f"sampler failed (code {status}) at iteration {t}, coordinate {coord}",
            {"beta": beta.tolist(), "Sigma": Sigma.tolist(), "alpha": float(scalars[0]), "lambda": lam.tolist()},
        )
    return MVChainOutput(
        beta=out_beta,
        Sigma=out_sigma,
        alpha=out_alpha,
        lam=out_lam,
        kappa=out_kappa,
        accept_beta=acc_beta,
        attempts_beta=att_beta,
        accept_alpha=int(acc_alpha[0]),
        attempts_alpha=int(acc_alpha[1]),
        step_sizes=np.exp(log_step),
        meta={"hyperparams": h.to_dict(), "config": c.to_dict(), "seed": h.seed, "kernel_seed": kseed},
    )
