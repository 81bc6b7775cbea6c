"""Multivariate normal and contaminated normal densities.

All densities are evaluated in the log domain. A contaminated normal is the
two-component mixture

    alpha * N(mu, Sigma) + (1 - alpha) * N(mu, eta * Sigma)

with ``0 < alpha < 1`` the proportion of good points and ``eta > 1`` the
inflation applied to the scale of the bad ones.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtri

from .errors import NotPositiveDefiniteError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GaussianParams:
    """Location ``mu`` (length p) and scale ``sigma`` (p x p, SPD)."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        p = mu.shape[0]
        if mu.ndim != 1 or sigma.shape != (p, p):
            raise ValueError(f"mu has length {p} but sigma has shape {sigma.shape}")
        if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-12):
            raise NotPositiveDefiniteError(sigma, "sigma is not symmetric")
        cholesky(sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def p(self):
        return self.mu.shape[0]


@dataclass(frozen=True)
class ContaminationParams:
    """Proportion of good points ``alpha`` and inflation factor ``eta``."""

    alpha: float
    eta: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.eta > 1.0:
            raise ValueError(f"eta must exceed 1, got {self.eta}")


def cholesky(sigma, context=""):
    """Lower Cholesky factor of ``sigma``; raises if it is not SPD."""
    sigma = np.asarray(sigma, dtype=float)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(sigma, context) from None
    if not np.all(np.isfinite(L)):
        raise NotPositiveDefiniteError(sigma, context)
    return L


def _mahalanobis_chol(x, mu, L):
    diff = np.atleast_2d(x) - mu
    sol = solve_triangular(L, diff.T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", sol, sol)


def _logdet_chol(L):
    return 2.0 * np.sum(np.log(np.diag(L)))


def _squeeze(values, x):
    return values[0] if np.ndim(x) == 1 else values


def mahalanobis_sq(x, mu, sigma):
    """Squared Mahalanobis distance ``(x - mu)' sigma^{-1} (x - mu)``.

    ``x`` may be a single point of length p or an ``(n, p)`` array, in which
    case an array of n distances is returned.
    """
    L = cholesky(sigma)
    return _squeeze(_mahalanobis_chol(x, np.asarray(mu, dtype=float), L), x)


def log_dmvnorm(x, mu, sigma):
    """Log density of N(mu, sigma) at ``x`` (point or rows of a matrix)."""
    L = cholesky(sigma)
    p = L.shape[0]
    delta = _mahalanobis_chol(x, np.asarray(mu, dtype=float), L)
    out = -0.5 * (p * LOG_2PI + _logdet_chol(L) + delta)
    return _squeeze(out, x)


def log_cn_terms(delta, logdet, p, alpha, eta):
    """Log of the good and bad terms of a contaminated normal.

    Given squared distances ``delta`` under the reference scale and its log
    determinant, return ``(log(alpha*phi(Sigma)), log((1-alpha)*phi(eta*Sigma)))``.
    Works elementwise, so the trailing axis may index components.
    """
    base = -0.5 * (p * LOG_2PI + logdet)
    log_good = np.log(alpha) + base - 0.5 * delta
    with np.errstate(divide="ignore"):
        log_bad = np.log1p(-alpha) + base - 0.5 * p * np.log(eta) - 0.5 * delta / eta
    return log_good, log_bad


def log_dcn(x, gauss, cont):
    """Log density of the contaminated normal at ``x``.

    Parameters
    ----------
    x : array_like
        A point of length p or an ``(n, p)`` matrix of points.
    gauss : GaussianParams
    cont : ContaminationParams
    """
    L = cholesky(gauss.sigma)
    delta = _mahalanobis_chol(x, gauss.mu, L)
    log_good, log_bad = log_cn_terms(delta, _logdet_chol(L), gauss.p, cont.alpha, cont.eta)
    return _squeeze(np.logaddexp(log_good, log_bad), x)


def dcn(x, gauss, cont):
    return np.exp(log_dcn(x, gauss, cont))


def sample_mvnorm(n, mu, sigma, rng):
    """Draw ``n`` rows from N(mu, sigma).

    Standard normals come from inverting the normal CDF on uniforms of the
    caller's ``numpy.random.Generator`` (or a seed); the stream is therefore fixed by the
    bit generator alone and reproducible across platforms.
    """
    rng = np.random.default_rng(rng)
    L = cholesky(sigma)
    u = rng.random((n, L.shape[0]))
    u[u == 0.0] = np.finfo(float).tiny
    return np.asarray(mu, dtype=float) + ndtri(u) @ L.T


def rcn(n, gauss, cont, rng):
    """Random deviates from a contaminated normal.

    Returns
    -------
    X : ndarray, shape (n, p)
    good : ndarray of bool, shape (n,)
        True where the row came from the reference (uninflated) component.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng)
    good = rng.random(n) < cont.alpha
    z = sample_mvnorm(n, np.zeros(gauss.p), gauss.sigma, rng)
    scale = np.where(good, 1.0, np.sqrt(cont.eta))
    return gauss.mu + z * scale[:, None], good
