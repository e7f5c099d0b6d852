"""Least squares, logistic and Poisson regression, and the chi-square upper tail.

The GLMs are fitted by iteratively reweighted least squares (Newton-Raphson
with the canonical link) with step-halving, so the log-likelihood never
decreases between iterations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln

from .errors import SingularDesignError

SCORE_TOL = 1e-8
STEP_TOL = 1e-10
MAX_ITER = 50
MAX_HALVINGS = 40
# |linear predictor| beyond this means fitted values are numerically 0/1 (or 0 for Poisson)
DIVERGENCE_ETA = 15.0
DIVERGENCE_NORM = 1e3


class SeparationWarning(RuntimeWarning):
    """The likelihood has no finite maximiser (separation or all-zero counts)."""


@dataclass
class FitResult:
    coefficients: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    separated: bool = False
    score_norm: float = 0.0
    trace: list[float] = field(default_factory=list, repr=False)


def _design(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    if X.shape[0] < X.shape[1]:
        raise SingularDesignError(f"{X.shape[0]} rows cannot identify {X.shape[1]} coefficients")
    return X, y


def _check_rank(X: np.ndarray) -> None:
    if X.shape[1] == 0:
        return
    s = np.linalg.svd(X, compute_uv=False)
    if s[-1] <= s[0] * max(X.shape) * np.finfo(float).eps or s[0] == 0.0:
        raise SingularDesignError(f"design matrix of shape {X.shape} is rank deficient")


def fit_ols(X, y) -> FitResult:
    X, y = _design(X, y)
    _check_rank(X)
    q, r = np.linalg.qr(X)
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    n = y.size
    sigma2 = float(resid @ resid) / n
    ll = math.inf if sigma2 == 0.0 else -0.5 * n * (math.log(2 * math.pi * sigma2) + 1.0)
    return FitResult(coef, ll, True, 1)


def _logistic_ll(eta: np.ndarray, y: np.ndarray) -> float:
    # y*eta - log(1 + e^eta), stable for large |eta|
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def _poisson_ll(eta: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))


def _irls(X: np.ndarray, y: np.ndarray, family: str) -> FitResult:
    if family == "logistic":
        loglik, mean = _logistic_ll, expit
    else:
        loglik, mean = _poisson_ll, np.exp
    _check_rank(X)

    beta = np.zeros(X.shape[1])
    if family == "poisson" and y.mean() > 0:
        # start at the log mean so the first Newton step is sensible for large counts
        beta = np.linalg.lstsq(X, np.full_like(y, math.log(y.mean())), rcond=None)[0]
    eta = X @ beta
    ll = loglik(eta, y)
    trace = [ll]
    score = X.T @ (y - mean(eta))
    converged = False
    it = 0
    while True:
        score_max = float(np.max(np.abs(score), initial=0.0))
        if score_max <= SCORE_TOL:
            converged = True
            break
        if it >= MAX_ITER or np.linalg.norm(beta) > DIVERGENCE_NORM:
            break
        it += 1
        mu = mean(eta)
        w = mu * (1.0 - mu) if family == "logistic" else mu
        info = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, score, rcond=None)[0]
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta + t * step
            cand_eta = X @ cand
            cand_ll = loglik(cand_eta, y)
            if np.isfinite(cand_ll) and cand_ll >= ll:
                break
            t *= 0.5
        else:
            # no ascent possible at machine precision: we are at the maximum
            converged = score_max <= 1e-6
            break
        beta, eta, ll = cand, cand_eta, cand_ll
        trace.append(ll)
        score = X.T @ (y - mean(eta))
        if np.max(np.abs(t * step)) <= STEP_TOL and np.max(np.abs(score)) <= 1e-6:
            converged = True
            break

    if family == "logistic":
        diverged = bool(np.max(np.abs(eta), initial=0.0) >= DIVERGENCE_ETA)
    else:
        diverged = bool(np.min(eta, initial=0.0) <= -DIVERGENCE_ETA)
    diverged = diverged or bool(np.linalg.norm(beta) > DIVERGENCE_NORM)
    if diverged:
        converged = False
        warnings.warn(
            f"{family} likelihood has no finite maximiser (separation/divergence); "
            f"coefficients are capped after {it} iterations",
            SeparationWarning,
            stacklevel=3,
        )
    return FitResult(beta, ll, converged, it, diverged, float(np.max(np.abs(score), initial=0.0)), trace)


def fit_logistic(X, y) -> FitResult:
    X, y = _design(X, y)
    if np.any((y != 0) & (y != 1)):
        raise ValueError("logistic response must be 0/1")
    return _irls(X, y, "logistic")


def fit_poisson(X, y) -> FitResult:
    X, y = _design(X, y)
    if np.any(y < 0):
        raise ValueError("Poisson response must be nonnegative")
    return _irls(X, y, "poisson")


def _gammainc_lower_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    n = a
    for _ in range(10_000):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gammainc_upper_cf(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_upper_gamma(a: float, x: float) -> float:
    """Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gammainc_lower_series(a, x))
    return min(1.0, _gammainc_upper_cf(a, x))


def chi_square_sf(x: float, k: float) -> float:
    """Upper-tail probability of the chi-square distribution with ``k`` degrees of freedom."""
    if k <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {k}")
    if x != x:
        return math.nan
    return regularized_upper_gamma(k / 2.0, x / 2.0)
