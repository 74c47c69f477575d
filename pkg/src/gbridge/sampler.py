"""Component-wise Metropolis-within-Gibbs sampler for the bridge posterior.

One sweep visits, in this fixed order: every ``beta_i`` (random-walk MH),
``alpha`` (independence MH with a Uniform(k1, k2) proposal), ``gamma`` (Gibbs),
every ``lambda_i`` (Gibbs) and every ``kappa_i`` (Gibbs).  By default the last
two are merged into one joint draw per coordinate; see ``SamplerConfig``.

The ``update_*`` functions perform a single update with a numpy ``Generator``
and are meant for testing and experimentation; :func:`run_chain` executes the
whole chain in a compiled kernel.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .model import (
    ChainOutput,
    ChainState,
    Dataset,
    Hyperparams,
    gamma_cond_params,
    kappa_marginal_prob,
    kappa_prob,
    lambda_cond_params,
    log_cond_alpha,
    log_cond_beta_i,
)

__all__ = [
    "SCAN_ORDER",
    "COMPONENTS",
    "ChainError",
    "SamplerConfig",
    "default_step",
    "initial_state",
    "update_beta_i",
    "update_alpha",
    "update_gamma",
    "update_lambda_i",
    "update_kappa_i",
    "update_lambda_kappa_i",
    "run_chain",
    "kernel_seed",
]

SCAN_ORDER = ("beta", "alpha", "gamma", "lambda", "kappa")
COMPONENTS = frozenset(SCAN_ORDER)


class ChainError(RuntimeError):
    """The chain hit a non-finite density; ``state`` holds the offending state."""

    def __init__(self, message: str, state: dict):
        super().__init__(f"{message}; state dump: {state}")
        self.state = state


@dataclass(frozen=True)
class SamplerConfig:
    """Sweep controls.

    ``frozen`` lists components held at their initial values (for oracle checks
    and the consistency experiment); ``alpha_fixed`` pins the bridge exponent,
    giving the Bayesian lasso (1) and ridge (2) specializations.

    ``kappa_update="blocked"`` draws each pair (kappa_i, lambda_i) from its
    joint conditional given beta_i (kappa_i with lambda_i integrated out, then
    lambda_i given kappa_i).  ``"conditional"`` uses the two-step
    lambda_i | kappa_i, kappa_i | lambda_i Gibbs scan, which leaves the same
    posterior invariant but almost never moves kappa_i when the two Gamma
    components barely overlap (as with the default e2=40, f2=0.5).
    """

    adapt_during_burnin: bool = True
    target_accept: float = 0.44
    frozen: frozenset = frozenset()
    alpha_fixed: Optional[float] = None
    kappa_update: str = "blocked"

    def __post_init__(self):
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        frozen = frozenset(self.frozen)
        unknown = frozen - COMPONENTS
        if unknown:
            raise ValueError(f"unknown components {sorted(unknown)}; choose from {SCAN_ORDER}")
        if self.alpha_fixed is not None:
            if not self.alpha_fixed > 0:
                raise ValueError("alpha_fixed must be positive")
            frozen = frozen | {"alpha"}
        object.__setattr__(self, "frozen", frozen)
        if self.kappa_update not in ("blocked", "conditional"):
            raise ValueError("kappa_update must be 'blocked' or 'conditional'")

    @property
    def scan_order(self) -> tuple:
        return SCAN_ORDER

    @property
    def kappa_mode(self) -> int:
        return 1 if self.kappa_update == "blocked" else 0

    def flags(self) -> np.ndarray:
        return np.array([c not in self.frozen for c in SCAN_ORDER], dtype=np.bool_)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frozen"] = sorted(self.frozen)
        return d


def default_step(d: Dataset) -> float:
    sd = float(np.std(d.y, ddof=1)) if d.n > 1 else 1.0
    if not sd > 0:
        sd = 1.0
    return 2.4 * sd / math.sqrt(max(d.n, 1))


def kernel_seed(seed: int) -> tuple[np.random.Generator, int]:
    """Split ``seed`` into an initialization generator and a 32-bit kernel seed."""
    init_ss, kern_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), int(kern_ss.generate_state(1)[0])


def initial_state(d: Dataset, h: Hyperparams, rng: np.random.Generator, alpha: Optional[float] = None) -> ChainState:
    """beta = 0, gamma = 1/var(y), alpha at the range midpoint, (kappa, lambda) from the prior."""
    var = float(np.var(d.y, ddof=1)) if d.n > 1 else 0.0
    gamma = 1.0 / var if var > 0 else 1.0
    kappa = (rng.random(d.p) < 0.5).astype(np.int8)
    shape = np.where(kappa == 1, h.e2, h.e1)
    rate = np.where(kappa == 1, h.f2, h.f1)
    lam = rng.gamma(shape, 1.0 / rate)
    a = 0.5 * (h.k1 + h.k2) if alpha is None else float(alpha)
    return ChainState(np.zeros(d.p), gamma, np.maximum(lam, 5e-324), a, kappa)


# ----------------------------------------------------------------------
# Single updates (numpy Generator)
# ----------------------------------------------------------------------
def update_beta_i(
    i: int,
    s: ChainState,
    d: Dataset,
    rng: np.random.Generator,
    step: Optional[float] = None,
    penalized: bool = True,
) -> tuple[float, bool]:
    """Random-walk MH update of ``beta_i``; ``s`` is not modified."""
    step = default_step(d) if step is None else step
    z = rng.standard_normal()
    u = rng.random()
    current = log_cond_beta_i(i, s, d, penalized)
    proposal = s.copy()
    proposal.beta[i] = s.beta[i] + step * z
    if step * z == 0.0:
        return float(proposal.beta[i]), True
    log_ratio = log_cond_beta_i(i, proposal, d, penalized) - current
    if math.log(u) < log_ratio:
        return float(proposal.beta[i]), True
    return float(s.beta[i]), False


def update_alpha(
    s: ChainState, d: Optional[Dataset], h: Hyperparams, rng: np.random.Generator, mask=None
) -> tuple[float, bool]:
    """Independence MH update of alpha with a Uniform(k1, k2) proposal."""
    prop = h.k1 + (h.k2 - h.k1) * rng.random()
    u = rng.random()
    log_ratio = log_cond_alpha(s, d, alpha=prop, mask=mask) - log_cond_alpha(s, d, mask=mask)
    if math.log(u) < log_ratio:
        return prop, True
    return s.alpha, False


def update_gamma(s: ChainState, d: Dataset, h: Hyperparams, rng: np.random.Generator, mask=None) -> float:
    shape, rate = gamma_cond_params(s, d, h, mask)
    return float(rng.gamma(shape, 1.0 / rate))


def update_lambda_i(i: int, s: ChainState, h: Hyperparams, rng: np.random.Generator) -> float:
    shape, rate = lambda_cond_params(i, s, h)
    return max(float(rng.gamma(shape, 1.0 / rate)), 5e-324)


def update_kappa_i(i: int, s: ChainState, h: Hyperparams, rng: np.random.Generator) -> int:
    return int(rng.random() < kappa_prob(s.lam[i], h))


def update_lambda_kappa_i(
    i: int, s: ChainState, h: Hyperparams, rng: np.random.Generator
) -> tuple[float, int]:
    """Joint draw of (lambda_i, kappa_i) given beta_i, gamma and alpha."""
    kappa = int(rng.random() < kappa_marginal_prob(s.beta[i], s.gamma, s.alpha, h))
    s_k = s.copy()
    s_k.kappa[i] = kappa
    return update_lambda_i(i, s_k, h, rng), kappa


# ----------------------------------------------------------------------
# Full chain
# ----------------------------------------------------------------------
def run_chain(
    d: Dataset,
    h: Hyperparams,
    c: Optional[SamplerConfig] = None,
    init: Optional[ChainState] = None,
) -> ChainOutput:
    """Run ``h.iterations`` sweeps and keep every ``h.thin``-th post burn-in state.

    Identical ``(d, h, c, init)`` give bit-identical output.  Step sizes adapt
    toward ``c.target_accept`` during burn-in only and are frozen afterwards.
    """
    c = SamplerConfig() if c is None else c
    init_rng, kseed = kernel_seed(h.seed)
    state = initial_state(d, h, init_rng, c.alpha_fixed) if init is None else init.copy()
    if c.alpha_fixed is not None:
        state.alpha = float(c.alpha_fixed)
    state.validate()
    if state.p != d.p:
        raise ValueError("initial state and dataset disagree on p")
    mask = d.penalty_mask(h.penalize_intercept)

    v_b = default_step(d) if h.v_b is None else h.v_b
    log_step = np.full(d.p, math.log(v_b))
    beta = state.beta.copy()
    lam = state.lam.copy()
    kappa = state.kappa.copy()
    scalars = np.array([state.gamma, state.alpha])

    T = h.n_stored
    out_beta = np.empty((T, d.p))
    out_gamma = np.empty(T)
    out_alpha = np.empty(T)
    out_lam = np.empty((T, d.p))
    out_kappa = np.empty((T, d.p), dtype=np.int8)
    acc_beta = np.zeros(d.p, dtype=np.int64)
    att_beta = np.zeros(d.p, dtype=np.int64)
    acc_alpha = np.zeros(2, dtype=np.int64)

    K.seed_generator(kseed)
    status, t, coord = K.run_univariate(
        d.y, d.X, mask, h.prior_array(), beta, lam, kappa, scalars, log_step,
        h.iterations, h.burn_in, h.thin, c.adapt_during_burnin, c.target_accept, c.flags(), c.kappa_mode,
        out_beta, out_gamma, out_alpha, out_lam, out_kappa,
        acc_beta, att_beta, acc_alpha,
    )
    if status != K.STATUS_OK:
        raise ChainError(
            f"non-finite density (code {status}) at iteration {t}, coordinate {coord}",
            {
                "beta": beta.tolist(), "gamma": float(scalars[0]), "alpha": float(scalars[1]),
                "lambda": lam.tolist(), "kappa": kappa.tolist(),
            },
        )
    meta = {
        "hyperparams": h.to_dict(),
        "config": c.to_dict(),
        "dataset_digest": d.digest(),
        "seed": h.seed,
        "kernel_seed": kseed,
        "names": list(d.names),
    }
    return ChainOutput(
        beta=out_beta,
        gamma=out_gamma,
        alpha=out_alpha,
        lam=out_lam,
        kappa=out_kappa,
        accept_beta=acc_beta,
        attempts_beta=att_beta,
        accept_alpha=int(acc_alpha[0]),
        attempts_alpha=int(acc_alpha[1]),
        step_sizes=np.exp(log_step),
        meta=meta,
    )
