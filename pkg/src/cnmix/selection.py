"""Information criteria and best-model selection.

All criteria are on the "larger is better" scale, e.g. ``BIC = 2 l - q log n``.
"""

import math

import numpy as np

from .structures import check_model, n_sigma_params

CRITERIA = ("AIC", "AIC3", "AICc", "AICu", "AWE", "BIC", "CAIC", "ICL")


def free_param_count(model, G, p, alpha_fixed=False, eta_fixed=False):
    """Number of free parameters ``q`` of a contaminated mixture.

    Mixing proportions (G - 1), means (G p), scale matrices (per structure),
    plus G good-point proportions and G contamination factors unless fixed.
    """
    check_model(model)
    q = (G - 1) + G * p + n_sigma_params(model, G, p)
    if not alpha_fixed:
        q += G
    if not eta_fixed:
        q += G
    return q


def map_entropy(z, mask=None):
    """``sum_i sum_g MAP(z_ig) log z_ig`` over the unlabelled rows."""
    z = np.asarray(z, dtype=float)
    if mask is not None and np.any(mask):
        z = z[~np.asarray(mask, dtype=bool)]
    if z.size == 0:
        return 0.0
    best = z[np.arange(z.shape[0]), np.argmax(z, axis=1)]
    return float(np.sum(np.log(best)))


def criteria(loglik, q, n, z=None, mask=None):
    """The eight information criteria for a fit.

    AICc and AICu need ``n > q + 1``; otherwise they are ``-inf``. ICL is left
    out (NaN) when ``z`` is not supplied.
    """
    two_l = 2.0 * loglik
    out = {
        "AIC": two_l - 2.0 * q,
        "AIC3": two_l - 3.0 * q,
        "AWE": two_l - 2.0 * q * (1.5 + math.log(n)),
        "BIC": two_l - q * math.log(n),
        "CAIC": two_l - q * (1.0 + math.log(n)),
    }
    if n - q - 1 > 0:
        out["AICc"] = out["AIC"] - 2.0 * q * (q + 1) / (n - q - 1)
        out["AICu"] = out["AICc"] - n * math.log(n / (n - q - 1))
    else:
        out["AICc"] = out["AICu"] = -math.inf
    out["ICL"] = out["BIC"] + map_entropy(z, mask) if z is not None else math.nan
    return {k: out[k] for k in CRITERIA}


class NoSuccessfulFitError(RuntimeError):
    """Every candidate passing the filter failed."""


def _check_criterion(criterion):
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {', '.join(CRITERIA)}")


def rank_models(results, criterion="BIC", G=None, models=None):
    """Successful results passing the filter, best first.

    Ties on the criterion go to the smaller ``q``, then to the structure code
    in lexicographic order, then to the smaller G.
    """
    _check_criterion(criterion)
    pool = [r for r in results
            if (G is None or r.G in G) and (models is None or r.model in models)]
    ok = [r for r in pool if r.ok and np.isfinite(r.criteria.get(criterion, np.nan))]
    if not ok:
        reasons = "; ".join(f"{r.model} G={r.G}: {r.reason}" for r in pool) or "no candidates"
        raise NoSuccessfulFitError(f"no successful fit to choose from ({reasons})")
    return sorted(ok, key=lambda r: (-r.criteria[criterion], r.q, r.model, r.G))


def best_model(results, criterion="BIC", G=None, models=None):
    """Result maximising ``criterion`` among successful fits."""
    return rank_models(results, criterion, G, models)[0]
