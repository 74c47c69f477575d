"""Compiled sweep kernels shared by the univariate and multivariate samplers.

Step helpers take their random variates as arguments so the same arithmetic
serves both the compiled chains (numba's generator) and the per-update Python
API (a numpy ``Generator``).  Chain kernels return a status code instead of
raising; see ``STATUS_*``.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_NONFINITE_BETA = 1
STATUS_NONFINITE_ALPHA = 2
STATUS_NONFINITE_PRECISION = 3
STATUS_SIGMA_NOT_SPD = 4

LOG2 = math.log(2.0)

# indices into the prior array (see Hyperparams.prior_array)
E1, F1, E2, F2, E3, F3, K1, K2 = range(8)

# indices into the update-flag array
UPD_BETA, UPD_ALPHA, UPD_PRECISION, UPD_LAMBDA, UPD_KAPPA = range(5)


@njit(cache=True)
def abs_pow(x, a):
    if x == 0.0:
        return 0.0
    return math.exp(a * math.log(abs(x)))


@njit(cache=True)
def seed_generator(seed):
    np.random.seed(seed)


@njit(cache=True)
def log_cond_alpha_value(a, gamma, lam, beta, mask):
    inv = 1.0 / a
    k = 0
    slog = 0.0
    spen = 0.0
    for i in range(beta.shape[0]):
        if mask[i]:
            k += 1
            slog += math.log(lam[i])
            spen += lam[i] * abs_pow(beta[i], a)
    head = k * (math.log(a) + inv * math.log(gamma) - inv * LOG2 - math.lgamma(inv))
    return head + inv * slog - 0.5 * gamma * spen


@njit(cache=True)
def kappa_weight(lam, e1, f1, e2, f2):
    l1 = e1 * math.log(f1) - math.lgamma(e1) + (e1 - 1.0) * math.log(lam) - f1 * lam
    l2 = e2 * math.log(f2) - math.lgamma(e2) + (e2 - 1.0) * math.log(lam) - f2 * lam
    m = max(l1, l2)
    return math.exp(l2 - (m + math.log(math.exp(l1 - m) + math.exp(l2 - m))))


@njit(cache=True)
def blocked_kappa_weight(b_pow, gamma, alpha, e1, f1, e2, f2):
    """P(kappa_i = 1 | beta_i) with lambda_i integrated out.

    ``b_pow`` is |beta_i|^alpha; pass ``gamma = 0`` for an unpenalized coordinate.
    """
    inv = 1.0 / alpha if gamma > 0.0 else 0.0
    x = 0.5 * gamma * b_pow
    l1 = e1 * math.log(f1) - math.lgamma(e1) + math.lgamma(e1 + inv) - (e1 + inv) * math.log(f1 + x)
    l2 = e2 * math.log(f2) - math.lgamma(e2) + math.lgamma(e2 + inv) - (e2 + inv) * math.log(f2 + x)
    m = max(l1, l2)
    return math.exp(l2 - (m + math.log(math.exp(l1 - m) + math.exp(l2 - m))))


@njit(cache=True)
def beta_log_ratio(delta, b, xr, col_sq, lam_i, gamma, alpha, penalized):
    """Log target ratio for moving beta_i from ``b`` to ``b + delta``.

    ``xr`` is x_i' r with r the current residual.
    """
    dll = -0.5 * gamma * (delta * delta * col_sq - 2.0 * delta * xr)
    if penalized:
        dll -= 0.5 * gamma * lam_i * (abs_pow(b + delta, alpha) - abs_pow(b, alpha))
    return dll


@njit(cache=True)
def _residual(y, X, beta, out):
    n, p = X.shape
    for r in range(n):
        out[r] = y[r]
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for r in range(n):
                out[r] -= X[r, j] * bj


@njit(cache=True)
def run_univariate(
    y, X, mask, prior, beta, lam, kappa, scalars, log_step,
    iterations, burn_in, thin, adapt, target, flags, kappa_mode,
    out_beta, out_gamma, out_alpha, out_lam, out_kappa,
    acc_beta, att_beta, acc_alpha,
):
    """Deterministic-scan sweep: beta_1..beta_p, alpha, gamma, lambda_1..p, kappa_1..p.

    ``scalars`` holds (gamma, alpha) and is updated in place together with
    ``beta``, ``lam``, ``kappa`` and ``log_step``.  Returns (status, iteration,
    coordinate).  ``kappa_mode`` 0 draws kappa_i | lambda_i after the lambda
    sweep; 1 draws the pair (kappa_i, lambda_i) jointly given beta_i.
    """
    n, p = X.shape
    e1, f1, e2, f2 = prior[E1], prior[F1], prior[E2], prior[F2]
    e3, f3, k1, k2 = prior[E3], prior[F3], prior[K1], prior[K2]
    gamma = scalars[0]
    alpha = scalars[1]
    col_sq = np.empty(p)
    for j in range(p):
        s = 0.0
        for r in range(n):
            s += X[r, j] * X[r, j]
        col_sq[j] = s
    resid = np.empty(n)
    k_pen = 0
    for j in range(p):
        if mask[j]:
            k_pen += 1
    stored = 0
    for t in range(iterations):
        in_burn = t < burn_in
        _residual(y, X, beta, resid)
        if flags[UPD_BETA]:
            for i in range(p):
                step = math.exp(log_step[i])
                z = np.random.standard_normal()
                u = np.random.random()
                delta = step * z
                b = beta[i]
                xr = 0.0
                for r in range(n):
                    xr += X[r, i] * resid[r]
                lr = beta_log_ratio(delta, b, xr, col_sq[i], lam[i], gamma, alpha, mask[i])
                if not math.isfinite(lr):
                    scalars[0] = gamma
                    scalars[1] = alpha
                    return STATUS_NONFINITE_BETA, t, i
                accepted = delta == 0.0 or math.log(u) < lr
                if accepted:
                    beta[i] = b + delta
                    for r in range(n):
                        resid[r] -= delta * X[r, i]
                if in_burn:
                    if adapt:
                        a_prob = 1.0 if lr >= 0.0 else math.exp(lr)
                        log_step[i] += (t + 1.0) ** -0.6 * (a_prob - target)
                else:
                    att_beta[i] += 1
                    if accepted:
                        acc_beta[i] += 1
        if flags[UPD_ALPHA]:
            prop = k1 + (k2 - k1) * np.random.random()
            u = np.random.random()
            lr = log_cond_alpha_value(prop, gamma, lam, beta, mask) - log_cond_alpha_value(
                alpha, gamma, lam, beta, mask
            )
            if not math.isfinite(lr):
                scalars[0] = gamma
                scalars[1] = alpha
                return STATUS_NONFINITE_ALPHA, t, -1
            accepted = math.log(u) < lr
            if accepted:
                alpha = prop
            if not in_burn:
                acc_alpha[1] += 1
                if accepted:
                    acc_alpha[0] += 1
        if flags[UPD_PRECISION]:
            if flags[UPD_BETA]:
                _residual(y, X, beta, resid)
            rss = 0.0
            for r in range(n):
                rss += resid[r] * resid[r]
            pen = 0.0
            for i in range(p):
                if mask[i]:
                    pen += lam[i] * abs_pow(beta[i], alpha)
            shape = e3 + 0.5 * n + k_pen / alpha
            rate = f3 + 0.5 * (rss + pen)
            gamma = np.random.gamma(shape, 1.0 / rate)
            if not (math.isfinite(gamma) and gamma > 0.0):
                scalars[0] = gamma
                scalars[1] = alpha
                return STATUS_NONFINITE_PRECISION, t, -1
        blocked = kappa_mode == 1 and flags[UPD_LAMBDA] and flags[UPD_KAPPA]
        if flags[UPD_LAMBDA]:
            for i in range(p):
                if blocked:
                    g_i = gamma if mask[i] else 0.0
                    w = blocked_kappa_weight(abs_pow(beta[i], alpha), g_i, alpha, e1, f1, e2, f2)
                    kappa[i] = 1 if np.random.random() < w else 0
                if kappa[i]:
                    e, f = e2, f2
                else:
                    e, f = e1, f1
                if mask[i]:
                    shape = e + 1.0 / alpha
                    rate = f + 0.5 * gamma * abs_pow(beta[i], alpha)
                else:
                    shape = e
                    rate = f
                lam[i] = np.random.gamma(shape, 1.0 / rate)
                if lam[i] <= 0.0:
                    lam[i] = 5e-324
        if flags[UPD_KAPPA] and not blocked:
            for i in range(p):
                w = kappa_weight(lam[i], e1, f1, e2, f2)
                kappa[i] = 1 if np.random.random() < w else 0
        if not in_burn and (t - burn_in + 1) % thin == 0:
            for i in range(p):
                out_beta[stored, i] = beta[i]
                out_lam[stored, i] = lam[i]
                out_kappa[stored, i] = kappa[i]
            out_gamma[stored] = gamma
            out_alpha[stored] = alpha
            stored += 1
    scalars[0] = gamma
    scalars[1] = alpha
    return STATUS_OK, iterations, -1


# ----------------------------------------------------------------------
# Multivariate response
# ----------------------------------------------------------------------
@njit(cache=True)
def inv_wishart_from_variates(scale, chi2, normals):
    """Bartlett construction of an inverse-Wishart draw.

    With ``scale = U U'`` (lower Cholesky) and ``A`` lower triangular holding
    ``sqrt(chi2)`` on the diagonal and ``normals`` below it, the result is
    ``(U A^{-T})(U A^{-T})'``, distributed W^{-1}(scale, dof) when
    ``chi2[i] ~ chi^2(dof - i)``.
    """
    m = scale.shape[0]
    U = np.linalg.cholesky(scale)
    A = np.zeros((m, m))
    for i in range(m):
        A[i, i] = math.sqrt(chi2[i])
        for j in range(i):
            A[i, j] = normals[i, j]
    Ainv = np.linalg.inv(A)
    K = U @ Ainv.T
    S = K @ K.T
    return 0.5 * (S + S.T)


@njit(cache=True)
def _is_spd(a):
    m = a.shape[0]
    L = np.zeros((m, m))
    for j in range(m):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return False
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, m):
            s = a[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return True


@njit(cache=True)
def _draw_inv_wishart(scale, dof):
    m = scale.shape[0]
    chi2 = np.empty(m)
    for i in range(m):
        chi2[i] = np.random.chisquare(dof - i)
    normals = np.zeros((m, m))
    for i in range(m):
        for j in range(i):
            normals[i, j] = np.random.standard_normal()
    return inv_wishart_from_variates(scale, chi2, normals)


@njit(cache=True)
def run_multivariate(
    Y, X, Psi, dof, prior, beta, Sigma, lam, kappa, scalars, log_step,
    iterations, burn_in, thin, adapt, target, flags, kappa_mode,
    out_beta, out_sigma, out_alpha, out_lam, out_kappa,
    acc_beta, att_beta, acc_alpha,
):
    """Sweep for the matrix-response model: beta (column-major), alpha, Sigma, lambda, kappa.

    ``beta`` is p x m; flat coordinate j maps to (j % p, j // p).  ``lam``,
    ``kappa`` and ``log_step`` are flat of length p*m.  ``scalars[0]`` is alpha.
    """
    n, p = X.shape
    m = Y.shape[1]
    mp = m * p
    e1, f1, e2, f2 = prior[E1], prior[F1], prior[E2], prior[F2]
    k1, k2 = prior[K1], prior[K2]
    alpha = scalars[0]
    G = X.T @ X
    mask = np.ones(mp, dtype=np.bool_)
    beta_flat = np.empty(mp)
    Omega = np.linalg.inv(Sigma)
    stored = 0
    for t in range(iterations):
        in_burn = t < burn_in
        R = Y - X @ beta
        H = X.T @ R
        if flags[UPD_BETA]:
            for j in range(mp):
                k = j % p
                c = j // p
                step = math.exp(log_step[j])
                z = np.random.standard_normal()
                u = np.random.random()
                delta = step * z
                b = beta[k, c]
                ho = 0.0
                for q in range(m):
                    ho += H[k, q] * Omega[q, c]
                d_tr = -2.0 * delta * ho + delta * delta * G[k, k] * Omega[c, c]
                lr = -0.5 * d_tr - 0.5 * lam[j] * (abs_pow(b + delta, alpha) - abs_pow(b, alpha))
                if not math.isfinite(lr):
                    scalars[0] = alpha
                    return STATUS_NONFINITE_BETA, t, j
                accepted = delta == 0.0 or math.log(u) < lr
                if accepted:
                    beta[k, c] = b + delta
                    for r in range(n):
                        R[r, c] -= delta * X[r, k]
                    for q in range(p):
                        H[q, c] -= delta * G[q, k]
                if in_burn:
                    if adapt:
                        a_prob = 1.0 if lr >= 0.0 else math.exp(lr)
                        log_step[j] += (t + 1.0) ** -0.6 * (a_prob - target)
                else:
                    att_beta[j] += 1
                    if accepted:
                        acc_beta[j] += 1
        for j in range(mp):
            beta_flat[j] = beta[j % p, j // p]
        if flags[UPD_ALPHA]:
            prop = k1 + (k2 - k1) * np.random.random()
            u = np.random.random()
            lr = log_cond_alpha_value(prop, 1.0, lam, beta_flat, mask) - log_cond_alpha_value(
                alpha, 1.0, lam, beta_flat, mask
            )
            if not math.isfinite(lr):
                scalars[0] = alpha
                return STATUS_NONFINITE_ALPHA, t, -1
            accepted = math.log(u) < lr
            if accepted:
                alpha = prop
            if not in_burn:
                acc_alpha[1] += 1
                if accepted:
                    acc_alpha[0] += 1
        if flags[UPD_PRECISION]:
            R = Y - X @ beta
            S = Psi + R.T @ R
            S = 0.5 * (S + S.T)
            ok = _is_spd(S)
            jitter = 1e-10
            tries = 0
            while not ok and tries < 8:
                tr = 0.0
                for q in range(m):
                    tr += S[q, q]
                for q in range(m):
                    S[q, q] += jitter * tr / m
                jitter *= 10.0
                tries += 1
                ok = _is_spd(S)
            if not ok:
                scalars[0] = alpha
                return STATUS_SIGMA_NOT_SPD, t, -1
            Sigma[:, :] = _draw_inv_wishart(S, dof + n)
            if not _is_spd(Sigma):
                scalars[0] = alpha
                return STATUS_SIGMA_NOT_SPD, t, -1
            Omega = np.linalg.inv(Sigma)
        blocked = kappa_mode == 1 and flags[UPD_LAMBDA] and flags[UPD_KAPPA]
        if flags[UPD_LAMBDA]:
            for j in range(mp):
                if blocked:
                    w = blocked_kappa_weight(abs_pow(beta_flat[j], alpha), 1.0, alpha, e1, f1, e2, f2)
                    kappa[j] = 1 if np.random.random() < w else 0
                if kappa[j]:
                    e, f = e2, f2
                else:
                    e, f = e1, f1
                lam[j] = np.random.gamma(e + 1.0 / alpha, 1.0 / (f + 0.5 * abs_pow(beta_flat[j], alpha)))
                if lam[j] <= 0.0:
                    lam[j] = 5e-324
        if flags[UPD_KAPPA] and not blocked:
            for j in range(mp):
                w = kappa_weight(lam[j], e1, f1, e2, f2)
                kappa[j] = 1 if np.random.random() < w else 0
        if not in_burn and (t - burn_in + 1) % thin == 0:
            out_beta[stored, :, :] = beta
            out_sigma[stored, :, :] = Sigma
            for j in range(mp):
                out_lam[stored, j] = lam[j]
                out_kappa[stored, j] = kappa[j]
            out_alpha[stored] = alpha
            stored += 1
    scalars[0] = alpha
    return STATUS_OK, iterations, -1
