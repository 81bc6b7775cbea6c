"""Starting values ``(z0, v0, eta0)`` for the first CM-step."""

import logging
import warnings

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .ecm import ETA0, FitOptions, InitialValues, fit_single

logger = logging.getLogger(__name__)

STRATEGIES = ("random.soft", "random.hard", "kmeans", "mixt", "manual")


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_random_soft(n, G, rng):
    """One multinomial draw with equal probabilities per row (one-hot rows)."""
    rng = as_rng(rng)
    return rng.multinomial(1, np.full(G, 1.0 / G), size=n).astype(float)


def init_random_hard(n, G, rng):
    """Uniform draws normalised to sum to one across each row."""
    rng = as_rng(rng)
    u = rng.random((n, G))
    u[u == 0.0] = np.finfo(float).tiny
    return u / u.sum(axis=1, keepdims=True)


def init_kmeans(X, G, rng, n_init=10, max_iter=100):
    """One-hot memberships from the best of ``n_init`` Lloyd runs."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < G:
        raise ValueError(f"k-means needs at least G={G} observations, got {n}")
    if G == 1:
        return np.ones((n, 1))
    km = KMeans(n_clusters=G, init="k-means++", n_init=n_init, max_iter=max_iter,
                algorithm="lloyd", random_state=int(as_rng(rng).integers(2**31 - 1)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        labels = km.fit_predict(X)
    z = np.zeros((n, G))
    z[np.arange(n), labels] = 1.0
    return z


def align_to_labels(z, labels):
    """Permute the columns of ``z`` to agree best with the labelled rows.

    Unsupervised starts number their clusters arbitrarily; without this,
    labelled rows can be pinned to a component sitting on another group.
    """
    if labels is None:
        return z
    labels = np.asarray(labels)
    known = labels >= 0
    if not known.any():
        return z
    G = z.shape[1]
    overlap = np.zeros((G, G))
    np.add.at(overlap, labels[known], z[known])
    _, perm = linear_sum_assignment(-overlap)
    return z[:, perm]


def gaussian_fit(X, model, G, rng, options=None, labels=None):
    """Plain normal-mixture fit of the same structure, started from k-means.

    The contaminated engine is reused with the good-point proportion pinned
    just below 1 and the contamination factor just above 1.
    """
    options = (options or FitOptions()).gaussian()
    z0 = align_to_labels(init_kmeans(X, G, rng), labels)
    init = InitialValues(z0, np.ones_like(z0), np.full(G, ETA0), "kmeans")
    return fit_single(X, model, G, init, options, labels)


def init_mixt(X, model, G, rng, options=None, labels=None):
    """Posteriors of the fitted normal mixture with the same structure.

    Returns ``(z0, loglik)``; falls back to k-means (with ``loglik=None``) if
    the normal-mixture fit fails.
    """
    rng = as_rng(rng)
    res = gaussian_fit(X, model, G, rng, options, labels)
    if not res.ok:
        logger.warning("normal mixture %s G=%d failed (%s); using k-means start", model, G, res.reason)
        return align_to_labels(init_kmeans(X, G, rng), labels), None
    return res.resp.z, res.loglik


def initialize(strategy, X, model, G, rng=None, options=None, labels=None, start_z=None, start_v=None):
    """Build :class:`InitialValues` for one candidate.

    ``start_v`` defaults to all ones. ``start_z`` is required (and only used)
    by the ``manual`` strategy.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    rng = as_rng(rng)
    reference = None
    if strategy == "random.soft":
        z = align_to_labels(init_random_soft(n, G, rng), labels)
    elif strategy == "random.hard":
        z = align_to_labels(init_random_hard(n, G, rng), labels)
    elif strategy == "kmeans":
        z = align_to_labels(init_kmeans(X, G, rng), labels)
    elif strategy == "mixt":
        z, reference = init_mixt(X, model, G, rng, options, labels)
    elif strategy == "manual":
        if start_z is None:
            raise ValueError("manual initialisation needs start_z")
        z = np.asarray(start_z, dtype=float)
        if z.shape != (n, G):
            raise ValueError(f"start_z must have shape ({n}, {G}), got {z.shape}")
        if np.any(z < 0) or not np.allclose(z.sum(axis=1), 1.0):
            raise ValueError("start_z rows must be non-negative and sum to 1")
    else:
        raise ValueError(f"unknown initialisation {strategy!r}; expected one of {', '.join(STRATEGIES)}")
    if start_v is None or strategy == "mixt":
        v = np.ones((n, G))
    else:
        v = np.asarray(start_v, dtype=float)
        if v.shape != (n, G) or np.any((v < 0) | (v > 1)):
            raise ValueError(f"start_v must be an ({n}, {G}) matrix with entries in [0, 1]")
    return InitialValues(z, v, np.full(G, ETA0), strategy, reference)
