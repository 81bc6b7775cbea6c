"""ECM fitting of a single parsimonious contaminated normal mixture.

Each iteration runs three steps in the order

1. CM-step 1: mixing proportions, good-point proportions, means and the
   constrained scale matrices, with the contamination factors held fixed;
2. CM-step 2: one contamination factor per component, by bounded Brent search;
3. E-step: component posteriors ``z`` and good-point posteriors ``v``.

Starting values ``(z, v, eta)`` are consumed directly by the first CM-step.
Convergence is judged on the observed log-likelihood with Aitken's
acceleration.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp

from .errors import CNMixError, EmptyComponentError, NumericFailureError
from .mvn import _logdet_chol, _mahalanobis_chol, cholesky, log_cn_terms
from .structures import ScatterSet, Scales, check_model, update_scales

logger = logging.getLogger(__name__)

ETA0 = 1.001
ALPHA_CAP = 1.0 - 1e-9
ETA_FLOOR = 1.0 + 1e-9
ETA_XTOL = 1e-6
# Inner scale sweeps per ECM iteration; warm starts make a few enough.
INNER_SWEEPS = 5
# Pinned values that turn the contaminated model into a plain normal mixture.
GAUSSIAN_ALPHA = 1.0 - 1e-12
GAUSSIAN_ETA = 1.0 + 1e-12


def per_group(value, G):
    """Expand ``value`` to a length-G float array.

    A sequence whose length differs from G contributes its first element,
    replicated.
    """
    if value is None:
        return None
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape[0] != G:
        arr = np.full(G, arr[0])
    return arr


@dataclass(frozen=True)
class FitOptions:
    """Tuning of the ECM algorithm; defaults follow the reference package.

    ``alphafix`` / ``etafix`` pin the good-point proportions / contamination
    factors instead of estimating them. ``alphamin`` is a lower bound for the
    estimated proportions (``None`` means unconstrained) and ``etamax`` an
    upper bound for the estimated factors. ``eps`` floors the eigenvalues of
    every fitted scale matrix.
    """

    alphafix: Optional[object] = None
    alphamin: Optional[object] = 0.5
    etafix: Optional[object] = None
    etamax: object = 1000.0
    iter_max: int = 1000
    threshold: float = 1e-3
    eps: float = 1e-100
    seed: Optional[int] = None

    def __post_init__(self):
        if self.iter_max < 1:
            raise ValueError("iter_max must be positive")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.alphamin is not None and np.any(
            (np.asarray(self.alphamin) < 0) | (np.asarray(self.alphamin) >= 1)
        ):
            raise ValueError("alphamin entries must lie in [0, 1)")
        if np.any(np.asarray(self.etamax) <= 1):
            raise ValueError("etamax entries must exceed 1")
        if self.alphafix is not None and np.any(
            (np.asarray(self.alphafix) <= 0) | (np.asarray(self.alphafix) >= 1)
        ):
            raise ValueError("alphafix entries must lie in (0, 1)")
        if self.etafix is not None and np.any(np.asarray(self.etafix) <= 1):
            raise ValueError("etafix entries must exceed 1")

    def for_groups(self, G):
        return _Resolved(
            alphafix=per_group(self.alphafix, G),
            alphamin=per_group(0.0 if self.alphamin is None else self.alphamin, G),
            etafix=per_group(self.etafix, G),
            etamax=per_group(self.etamax, G),
        )

    def gaussian(self):
        """Copy with contamination pinned to (numerically) nothing."""
        return replace(self, alphafix=GAUSSIAN_ALPHA, etafix=GAUSSIAN_ETA)


class _Resolved(NamedTuple):
    alphafix: Optional[np.ndarray]
    alphamin: np.ndarray
    etafix: Optional[np.ndarray]
    etamax: np.ndarray


@dataclass
class Psi:
    """Parameters of a fitted mixture with G components in p dimensions."""

    pi: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    eta: np.ndarray
    scales: Optional[Scales] = None

    @property
    def G(self):
        return self.pi.shape[0]


@dataclass
class Responsibilities:
    z: np.ndarray
    v: np.ndarray


@dataclass
class InitialValues:
    """Starting quantities fed to the first CM-step."""

    z: np.ndarray
    v: np.ndarray
    eta: np.ndarray
    strategy: str = "manual"
    # Log-likelihood of the normal-mixture warm start, when there is one.
    reference_loglik: Optional[float] = None


@dataclass
class FitResult:
    model: str
    G: int
    n: int
    p: int
    m: int
    psi: Optional[Psi] = None
    resp: Optional[Responsibilities] = None
    loglik_trace: list = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0
    q: int = 0
    criteria: dict = field(default_factory=dict)
    status: str = "ok"
    reason: str = ""
    init: str = ""
    labels: Optional[np.ndarray] = None
    gaussian_loglik: Optional[float] = None
    restart: int = 0

    @property
    def ok(self):
        return self.status == "ok"

    @property
    def loglik(self):
        return self.loglik_trace[-1] if self.loglik_trace else -math.inf


class CM1(NamedTuple):
    pi: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    scatter: ScatterSet


def label_matrix(labels, n, G):
    """Boolean mask of labelled rows and their indicator rows.

    ``labels`` holds a 0-based component per row, or -1 for unlabelled rows.
    """
    if labels is None:
        return np.zeros(n, dtype=bool), None
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (n,):
        raise ValueError(f"labels must have length {n}")
    if np.any(labels >= G) or np.any(labels < -1):
        raise ValueError(f"labels must lie in -1..{G - 1}")
    mask = labels >= 0
    ztilde = np.zeros((n, G))
    ztilde[mask, labels[mask]] = 1.0
    return mask, ztilde


def constrain_alpha(alpha_hat, alphamin):
    """Maximiser of the good-point log-likelihood over ``(alphamin, 1)``.

    The objective ``a log(alpha) + b log(1 - alpha)`` is concave with its
    unconstrained maximum at ``alpha_hat``, so clipping is exact. The open
    upper end is represented by ``1 - 1e-9``.
    """
    lower = np.maximum(alphamin, 1e-9)
    return np.clip(alpha_hat, lower, ALPHA_CAP)


def cm_step1(X, resp, eta, alphamin=0.5, alphafix=None):
    """First conditional maximisation: everything except the contamination factors.

    Returns the new mixing and good-point proportions, the down-weighted means
    and the weighted scatter matrices that feed the scale update.
    """
    z, v = resp.z, resp.v
    n = X.shape[0]
    G = z.shape[1]
    ng = z.sum(axis=0)
    if np.any(ng < 1e-10):
        g = int(np.argmin(ng))
        raise EmptyComponentError(f"component {g + 1} is empty (size {ng[g]:.3g})")
    pi = ng / n
    if alphafix is not None:
        alpha = per_group(alphafix, G)
    else:
        alpha = constrain_alpha((z * v).sum(axis=0) / ng, per_group(alphamin, G))
    w = z * (v + (1.0 - v) / eta)
    s = w.sum(axis=0)
    mu = (w.T @ X) / s[:, None]
    diff = X[:, None, :] - mu[None, :, :]
    W = np.einsum("ng,ngi,ngj->gij", w, diff, diff)
    return CM1(pi, alpha, mu, ScatterSet(W, ng))


def eta_objective(eta, bad_mass, bad_distance, p):
    """CM-step 2 objective ``-(p/2) A log(eta) - B / (2 eta)`` for one component.

    ``bad_mass`` is ``A = sum_i z_i (1 - v_i)`` and ``bad_distance`` is
    ``B = sum_i z_i (1 - v_i) delta_i``.
    """
    return -0.5 * p * bad_mass * math.log(eta) - 0.5 * bad_distance / eta


_CGOLD = 0.5 * (3.0 - math.sqrt(5.0))
_SQRT_EPS = math.sqrt(np.finfo(float).eps)


def brent_minimize(f, a, b, xtol):
    """Golden-section search with parabolic steps on ``[a, b]`` (Brent, 1973).

    The endpoints themselves are never evaluated. Returns ``(x, f(x))``.
    """
    x = w = v = a + _CGOLD * (b - a)
    fx = fw = fv = f(x)
    d = e = 0.0
    tol3 = xtol / 3.0
    while True:
        xm = 0.5 * (a + b)
        tol1 = _SQRT_EPS * abs(x) + tol3
        t2 = 2.0 * tol1
        if abs(x - xm) <= t2 - 0.5 * (b - a):
            return x, fx
        p = q = r = 0.0
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            else:
                q = -q
            r, e = e, d
        if abs(p) >= abs(0.5 * q * r) or p <= q * (a - x) or p >= q * (b - x):
            e = (b - x) if x < xm else (a - x)
            d = _CGOLD * e
        else:
            d = p / q
            u = x + d
            if u - a < t2 or b - u < t2:
                d = tol1 if x < xm else -tol1
        if abs(d) >= tol1:
            u = x + d
        else:
            u = x + tol1 if d > 0.0 else x - tol1
        fu = f(u)
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu


def maximize_eta(bad_mass, bad_distance, p, etamax):
    """Contamination factor maximising :func:`eta_objective` on ``(1, etamax]``.

    With no bad mass the objective is flat; the upper end ``etamax`` is then
    returned, which is where a golden-section search of a constant function
    ends up and which lets a fit started with all points good move away from
    the uncontaminated solution.
    """
    if bad_mass <= 0.0:
        return float(etamax)
    if etamax <= ETA_FLOOR:
        return float(etamax)
    pa, hb = 0.5 * p * bad_mass, 0.5 * bad_distance

    def neg(eta):
        return pa * math.log(eta) + hb / eta

    x, fx = brent_minimize(neg, ETA_FLOOR, float(etamax), ETA_XTOL)
    for end in (ETA_FLOOR, float(etamax)):
        fe = neg(end)
        if fe < fx:
            x, fx = end, fe
    return x


def _distances(X, mu, sigma):
    G = mu.shape[0]
    delta = np.empty((X.shape[0], G))
    logdet = np.empty(G)
    for g in range(G):
        L = cholesky(sigma[g], context=f"scale matrix of component {g + 1}")
        delta[:, g] = _mahalanobis_chol(X, mu[g], L)
        logdet[g] = _logdet_chol(L)
    return delta, logdet


def _eta_step(delta, z, v, p, etamax):
    bad = z * (1.0 - v)
    mass = bad.sum(axis=0)
    dist = (bad * delta).sum(axis=0)
    return np.array([maximize_eta(mass[g], dist[g], p, etamax[g]) for g in range(z.shape[1])])


def cm_step2_eta(X, resp, mu, sigma, etamax=1000.0, etafix=None):
    """Second conditional maximisation: the contamination factors.

    ``mu`` and ``sigma`` are the values just produced by CM-step 1; ``resp``
    are the posteriors used in that step.
    """
    G = mu.shape[0]
    if etafix is not None:
        return per_group(etafix, G)
    delta, _ = _distances(np.asarray(X, dtype=float), mu, sigma)
    return _eta_step(delta, resp.z, resp.v, X.shape[1], per_group(etamax, G))


def _expectation(delta, logdet, psi, mask, ztilde, iteration=None):
    p = psi.mu.shape[1]
    log_good, log_bad = log_cn_terms(delta, logdet, p, psi.alpha, psi.eta)
    log_cn = np.logaddexp(log_good, log_bad)
    v = np.exp(log_good - log_cn)
    with np.errstate(divide="ignore"):
        joint = np.log(psi.pi) + log_cn
    log_p = logsumexp(joint, axis=1)
    z = np.exp(joint - log_p[:, None])
    if mask.any():
        z[mask] = ztilde[mask]
        loglik = log_p[~mask].sum() + np.sum(ztilde[mask] * np.where(ztilde[mask] > 0, joint[mask], 0.0))
    else:
        loglik = log_p.sum()
    if not (np.isfinite(loglik) and np.all(np.isfinite(z)) and np.all(np.isfinite(v))):
        raise NumericFailureError("non-finite density or log-likelihood", iteration)
    return Responsibilities(z, v), float(loglik)


def e_step(X, psi, labels=None):
    """Posterior component memberships ``z`` and good-point probabilities ``v``.

    Labelled rows keep their indicator in ``z``; ``v`` is computed for every row.
    """
    X = np.asarray(X, dtype=float)
    mask, ztilde = label_matrix(labels, X.shape[0], psi.G)
    delta, logdet = _distances(X, psi.mu, psi.sigma)
    return _expectation(delta, logdet, psi, mask, ztilde)[0]


def observed_loglik(X, psi, labels=None):
    """Observed-data log-likelihood, with labelled rows contributing their own component only."""
    X = np.asarray(X, dtype=float)
    mask, ztilde = label_matrix(labels, X.shape[0], psi.G)
    delta, logdet = _distances(X, psi.mu, psi.sigma)
    return _expectation(delta, logdet, psi, mask, ztilde)[1]


def aitken_converged(loglik, threshold):
    """Aitken-accelerated stopping rule on a log-likelihood trace.

    Uses the last three values ``l0, l1, l2``: with ``a = (l2 - l1) / (l1 - l0)``
    the asymptotic estimate is ``l1 + (l2 - l1) / (1 - a)``, and the run has
    converged when that estimate exceeds ``l2`` by less than ``threshold``.
    A change below 1e-14 between the last two values also counts as converged.
    """
    if len(loglik) < 2:
        return False
    l1, l2 = loglik[-2], loglik[-1]
    if l2 - l1 < 1e-14:
        return True
    if len(loglik) < 3:
        return False
    l0 = loglik[-3]
    if l1 == l0:
        return False
    a = (l2 - l1) / (l1 - l0)
    if a == 1.0:
        return False
    l_inf = l1 + (l2 - l1) / (1.0 - a)
    return 0.0 <= l_inf - l2 < threshold


def fit_single(X, model, G, init, options=None, labels=None):
    """Fit one (structure, G) candidate.

    Parameters
    ----------
    X : ndarray, shape (n, p)
    model : str
        Covariance structure code.
    G : int
    init : InitialValues
    options : FitOptions, optional
    labels : array of int, optional
        0-based component of each labelled row, -1 elsewhere.

    Returns
    -------
    FitResult
        Failures (empty components, degenerate scatter, non-finite values)
        come back as results with ``status == "failed"`` and a reason.
    """
    from .selection import criteria, free_param_count

    check_model(model)
    options = options or FitOptions()
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    opts = options.for_groups(G)
    mask, ztilde = label_matrix(labels, n, G)
    q = free_param_count(model, G, p, alpha_fixed=opts.alphafix is not None, eta_fixed=opts.etafix is not None)
    result = FitResult(model=model, G=G, n=n, p=p, m=int(mask.sum()), q=q, init=init.strategy,
                       gaussian_loglik=init.reference_loglik,
                       labels=None if labels is None else np.asarray(labels, dtype=int))

    z = np.array(init.z, dtype=float)
    v = np.array(init.v, dtype=float)
    if mask.any():
        z[mask] = ztilde[mask]
    eta = opts.etafix if opts.etafix is not None else per_group(init.eta, G)
    scales = None
    trace = []
    try:
        for it in range(1, options.iter_max + 1):
            cm1 = cm_step1(X, Responsibilities(z, v), eta, opts.alphamin, opts.alphafix)
            scales = update_scales(model, cm1.scatter, prev=scales, max_iter=INNER_SWEEPS)
            sigma = scales.matrices(floor=options.eps)
            delta, logdet = _distances(X, cm1.mu, sigma)
            if opts.etafix is None:
                eta = _eta_step(delta, z, v, p, opts.etamax)
            psi = Psi(cm1.pi, cm1.alpha, cm1.mu, sigma, eta, scales)
            resp, ll = _expectation(delta, logdet, psi, mask, ztilde, it)
            z, v = resp.z, resp.v
            trace.append(ll)
            if aitken_converged(trace, options.threshold):
                result.converged = True
                break
    except (CNMixError, np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.debug("%s G=%d failed: %s", model, G, exc)
        result.status = "failed"
        result.reason = f"{type(exc).__name__}: {exc}".splitlines()[0]
        result.loglik_trace = trace
        result.n_iter = len(trace)
        return result

    result.psi = psi
    result.resp = resp
    result.loglik_trace = trace
    result.n_iter = len(trace)
    result.criteria = criteria(trace[-1], q, n, resp.z, mask)
    return result
