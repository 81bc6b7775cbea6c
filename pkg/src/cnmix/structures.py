"""Parsimonious eigen-decomposed scale matrices.

Every component scale matrix is written as ``Sigma_g = lam_g G_g diag(A_g) G_g'``
with ``lam_g`` the volume, ``A_g`` a positive shape vector with unit product,
and ``G_g`` an orthogonal orientation. A three-letter code fixes, in order,
whether volume, shape and orientation are Equal across components, Variable,
or (for shape) spherical ``I`` / (for orientation) axis-aligned ``I``.

The updates minimise the weighted-scatter objective

    F = sum_g [ n_g log det Sigma_g + tr(Sigma_g^{-1} W_g) ]

subject to the code's constraints. EII, VII, EEI, VVI, EVI, EEE, EEV, EVV and
VVV have closed forms. VEI, VEE, VEV, EVE and VVE alternate between
conditional minimisers; EVE and VVE additionally need a common orientation,
found by a majorise-minimise iteration over orthogonal matrices.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateFitError

MODELS = (
    "EII", "VII",
    "EEI", "VEI", "EVI", "VVI",
    "EEE", "VEE", "EVE", "EEV", "VVE", "VEV", "EVV", "VVV",
)

FAMILY = {
    "EII": "spherical", "VII": "spherical",
    "EEI": "diagonal", "VEI": "diagonal", "EVI": "diagonal", "VVI": "diagonal",
}

DESCRIPTION = {
    "EII": "spherical, equal volume",
    "VII": "spherical, varying volume",
    "EEI": "diagonal, equal volume and shape",
    "VEI": "diagonal, varying volume, equal shape",
    "EVI": "diagonal, equal volume, varying shape",
    "VVI": "diagonal, varying volume and shape",
    "EEE": "ellipsoidal, equal volume, shape and orientation",
    "VEE": "ellipsoidal, varying volume, equal shape and orientation",
    "EVE": "ellipsoidal, equal volume and orientation, varying shape",
    "EEV": "ellipsoidal, equal volume and shape, varying orientation",
    "VVE": "ellipsoidal, varying volume and shape, equal orientation",
    "VEV": "ellipsoidal, varying volume and orientation, equal shape",
    "EVV": "ellipsoidal, equal volume, varying shape and orientation",
    "VVV": "ellipsoidal, varying volume, shape and orientation",
}

# With a single component these codes describe the same model.
G1_EQUIVALENCE = {
    "EII": ("EII", "VII"),
    "EEI": ("EEI", "VEI", "EVI", "VVI"),
    "EEE": ("EEE", "VEE", "EVE", "EEV", "VVE", "VEV", "EVV", "VVV"),
}


def check_model(code):
    if code not in MODELS:
        raise ValueError(f"unknown covariance structure {code!r}; expected one of {', '.join(MODELS)}")
    return code


def n_sigma_params(code, G, p):
    """Number of free parameters in the G scale matrices of structure ``code``."""
    check_model(code)
    rot = p * (p - 1) // 2
    return {
        "EII": 1,
        "VII": G,
        "EEI": p,
        "VEI": G + p - 1,
        "EVI": 1 + G * (p - 1),
        "VVI": G * p,
        "EEE": p * (p + 1) // 2,
        "VEE": G + p - 1 + rot,
        "EVE": 1 + G * (p - 1) + rot,
        "EEV": p + G * rot,
        "VVE": G * p + rot,
        "VEV": G + p - 1 + G * rot,
        "EVV": 1 + G * (p - 1) + G * rot,
        "VVV": G * p * (p + 1) // 2,
    }[code]


class ScatterSet(NamedTuple):
    """Weighted within-group scatter matrices ``W`` (G, p, p) and sizes ``ng``."""

    W: np.ndarray
    ng: np.ndarray

    @property
    def n(self):
        return float(np.sum(self.ng))


@dataclass
class Scales:
    """Volume/shape/orientation of G scale matrices.

    ``lam`` has shape (G,), ``shape`` (G, p) with unit row products, and
    ``orient`` (G, p, p) with orthonormal columns. Components shared under a
    structure hold identical values.
    """

    lam: np.ndarray
    shape: np.ndarray
    orient: np.ndarray

    @property
    def eigenvalues(self):
        return self.lam[:, None] * self.shape

    def matrices(self, floor=None):
        """Reconstruct the (G, p, p) scale matrices.

        If ``floor`` is given, eigenvalues below it are clipped before the
        product is formed, and the result is re-symmetrised.
        """
        ev = self.eigenvalues
        if floor is not None:
            ev = np.maximum(ev, floor)
        S = np.einsum("gij,gj,gkj->gik", self.orient, ev, self.orient)
        return 0.5 * (S + np.swapaxes(S, 1, 2))


def reconstruct(lam, shape, orient):
    """``lam * orient @ diag(shape) @ orient.T`` for a single component."""
    orient = np.asarray(orient, dtype=float)
    S = lam * (orient * np.asarray(shape, dtype=float)) @ orient.T
    return 0.5 * (S + S.T)


def _sort_eig(w, V):
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return w, V * signs


def eigen_sorted(S):
    """Eigenvalues in decreasing order and sign-normalised eigenvectors.

    Each eigenvector is flipped so that its largest-magnitude entry is
    positive. Equal eigenvalues keep the order returned by LAPACK, so the
    orientation of a degenerate eigenspace is not unique.
    """
    w, V = np.linalg.eigh(S)
    return _sort_eig(w, V)


def decompose(sigma):
    """Split an SPD matrix into ``(lam, shape, orient)``.

    ``lam`` is the geometric mean of the eigenvalues so that ``shape`` has a
    unit product.
    """
    w, V = eigen_sorted(np.asarray(sigma, dtype=float))
    if w[-1] <= 0:
        raise DegenerateFitError(f"matrix has non-positive eigenvalue {w[-1]:.3g}")
    lam = np.exp(np.mean(np.log(w)))
    return lam, w / lam, V


def scales_from_matrices(sigmas):
    parts = [decompose(S) for S in sigmas]
    return Scales(
        np.array([q[0] for q in parts]),
        np.array([q[1] for q in parts]),
        np.array([q[2] for q in parts]),
    )


def objective(scales, scatter):
    """Weighted-scatter objective F evaluated through the decomposition."""
    W, ng = scatter
    ev = scales.eigenvalues
    proj = np.einsum("gji,gjk,gki->gi", scales.orient, W, scales.orient)
    return float(np.sum(ng * np.log(ev).sum(axis=1)) + np.sum(proj / ev))


def matrix_objective(sigmas, scatter):
    """Same objective as :func:`objective`, from explicit matrices."""
    W, ng = scatter
    total = 0.0
    for S, Wg, n_g in zip(sigmas, W, ng):
        L = np.linalg.cholesky(S)
        total += n_g * 2.0 * np.sum(np.log(np.diag(L)))
        total += np.trace(np.linalg.solve(S, Wg))
    return float(total)


def _geo_mean(x, axis=-1):
    return np.exp(np.mean(np.log(x), axis=axis))


def _broadcast(value, G):
    return np.broadcast_to(value, (G,) + np.shape(value)).copy()


def _identity(G, p):
    return _broadcast(np.eye(p), G)


def _check_positive(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise DegenerateFitError("scale update produced a non-positive or non-finite eigenvalue")


def _vvv_volumes(W, ng):
    sign, logdet = np.linalg.slogdet(W / ng[:, None, None])
    p = W.shape[-1]
    lam = np.exp(logdet / p)
    trace_lam = np.trace(W, axis1=1, axis2=2) / (p * ng)
    lam = np.where(sign > 0, lam, trace_lam)
    _check_positive(lam)
    return lam


def _iterate(step, state, evaluate, tol, max_iter):
    f_old = evaluate(state)
    for _ in range(max_iter):
        state = step(state)
        f_new = evaluate(state)
        if abs(f_old - f_new) <= tol * max(1.0, abs(f_new)):
            break
        f_old = f_new
    return state


def _orientation_mm(D, W, B, steps=5, tol=1e-12):
    """Minimise ``sum_g tr(D' W_g D diag(B_g))`` over orthogonal D.

    Alternates two linear majorisers of the objective, one from the largest
    eigenvalue of each W_g and one from the largest entry of each B_g. Each
    surrogate is minimised by the polar factor of its gradient, so the
    objective never increases.
    """
    wmax = np.linalg.eigvalsh(W)[:, -1]
    spread = B.max(axis=1)[:, None] - B

    def f(D, WD):
        return float(np.sum(B * np.sum(D * WD, axis=1)))

    def polar(M):
        U, _, Vt = np.linalg.svd(M)
        return U @ Vt

    majorisers = (
        lambda D, WD: np.sum((wmax[:, None, None] * D - WD) * B[:, None, :], axis=0),
        lambda D, WD: np.sum(WD * spread[:, None, :], axis=0),
    )
    WD = W @ D
    f_cur = f(D, WD)
    for _ in range(steps):
        f_start = f_cur
        for gradient in majorisers:
            cand = polar(gradient(D, WD))
            WD_cand = W @ cand
            f_cand = f(cand, WD_cand)
            if f_cand <= f_cur:
                D, WD, f_cur = cand, WD_cand, f_cand
        if f_start - f_cur <= tol * max(1.0, abs(f_cur)):
            break
    return D


def _closed_form(code, W, ng):
    G, p, _ = W.shape
    n = ng.sum()
    ones = np.ones((G, p))
    if code == "EII":
        lam = np.trace(W.sum(axis=0)) / (n * p)
        return Scales(np.full(G, lam), ones, _identity(G, p))
    if code == "VII":
        lam = np.trace(W, axis1=1, axis2=2) / (p * ng)
        return Scales(lam, ones, _identity(G, p))
    if code == "EEI":
        d = np.diagonal(W.sum(axis=0)) / n
        _check_positive(d)
        lam = _geo_mean(d)
        return Scales(np.full(G, lam), _broadcast(d / lam, G), _identity(G, p))
    if code == "VVI":
        d = np.diagonal(W, axis1=1, axis2=2) / ng[:, None]
        _check_positive(d)
        lam = _geo_mean(d)
        return Scales(lam, d / lam[:, None], _identity(G, p))
    if code == "EVI":
        d = np.diagonal(W, axis1=1, axis2=2)
        _check_positive(d)
        c = _geo_mean(d)
        lam = c.sum() / n
        return Scales(np.full(G, lam), d / c[:, None], _identity(G, p))
    if code == "EEE":
        lam, shape, orient = decompose(W.sum(axis=0) / n)
        return Scales(np.full(G, lam), _broadcast(shape, G), _broadcast(orient, G))
    if code == "VVV":
        return scales_from_matrices(W / ng[:, None, None])
    if code == "EVV":
        parts = [eigen_sorted(Wg) for Wg in W]
        omega = np.array([w for w, _ in parts])
        _check_positive(omega)
        c = _geo_mean(omega)
        lam = c.sum() / n
        return Scales(np.full(G, lam), omega / c[:, None], np.array([V for _, V in parts]))
    if code == "EEV":
        parts = [eigen_sorted(Wg) for Wg in W]
        total = np.sum([w for w, _ in parts], axis=0)
        _check_positive(total)
        c = _geo_mean(total)
        return Scales(np.full(G, c / n), _broadcast(total / c, G), np.array([V for _, V in parts]))
    raise AssertionError(code)


def _update_vei(W, ng, prev, tol, max_iter):
    G, p, _ = W.shape
    diag = np.diagonal(W, axis1=1, axis2=2)

    def step(lam):
        b = np.sum(diag / lam[:, None], axis=0)
        _check_positive(b)
        b = b / _geo_mean(b)
        lam = np.sum(diag / b, axis=1) / (p * ng)
        _check_positive(lam)
        return lam, b

    def evaluate(state):
        lam, b = state
        return objective(Scales(lam, _broadcast(b, G), _identity(G, p)), (W, ng))

    lam0 = prev.lam.copy() if prev is not None else _vvv_volumes(W, ng)
    lam, b = _iterate(lambda s: step(s[0]), step(lam0), evaluate, tol, max_iter)
    return Scales(lam, _broadcast(b, G), _identity(G, p))


def _update_vee(W, ng, prev, tol, max_iter):
    G, p, _ = W.shape

    def step(lam):
        C = np.sum(W / lam[:, None, None], axis=0)
        sign, logdet = np.linalg.slogdet(C)
        if sign <= 0:
            raise DegenerateFitError("pooled scatter is singular")
        C = C / np.exp(logdet / p)
        lam = np.einsum("gij,ji->g", W, np.linalg.inv(C)) / (p * ng)
        _check_positive(lam)
        return lam, C

    def as_scales(state):
        lam, C = state
        _, shape, orient = decompose(C)
        return Scales(lam, _broadcast(shape, G), _broadcast(orient, G))

    lam0 = prev.lam.copy() if prev is not None else _vvv_volumes(W, ng)
    state = _iterate(lambda s: step(s[0]), step(lam0), lambda s: objective(as_scales(s), (W, ng)), tol, max_iter)
    return as_scales(state)


def _update_vev(W, ng, prev, tol, max_iter):
    G, p, _ = W.shape
    parts = [eigen_sorted(Wg) for Wg in W]
    omega = np.array([w for w, _ in parts])
    orient = np.array([V for _, V in parts])

    def step(lam):
        a = np.sum(omega / lam[:, None], axis=0)
        _check_positive(a)
        a = a / _geo_mean(a)
        lam = np.sum(omega / a, axis=1) / (p * ng)
        _check_positive(lam)
        return lam, a

    def evaluate(state):
        lam, a = state
        return objective(Scales(lam, _broadcast(a, G), orient), (W, ng))

    lam0 = prev.lam.copy() if prev is not None else _vvv_volumes(W, ng)
    lam, a = _iterate(lambda s: step(s[0]), step(lam0), evaluate, tol, max_iter)
    return Scales(lam, _broadcast(a, G), orient)


def _common_orientation_start(W, ng, prev):
    if prev is not None:
        return prev.orient[0].copy()
    return eigen_sorted(W.sum(axis=0) / ng.sum())[1]


def _update_eve(W, ng, prev, tol, max_iter):
    G, p, _ = W.shape
    n = ng.sum()

    def given_orientation(D):
        d = np.einsum("ji,gjk,ki->gi", D, W, D)
        _check_positive(d)
        c = _geo_mean(d)
        return c.sum() / n, d / c[:, None]

    def step(D):
        lam, shape = given_orientation(D)
        D = _orientation_mm(D, W, 1.0 / (lam * shape))
        return D

    def as_scales(D):
        lam, shape = given_orientation(D)
        return Scales(np.full(G, lam), shape, _broadcast(D, G))

    D = _iterate(step, _common_orientation_start(W, ng, prev), lambda D: objective(as_scales(D), (W, ng)), tol, max_iter)
    return as_scales(D)


def _update_vve(W, ng, prev, tol, max_iter):
    G, p, _ = W.shape

    def given_orientation(D):
        d = np.einsum("ji,gjk,ki->gi", D, W, D) / ng[:, None]
        _check_positive(d)
        return d

    def step(D):
        return _orientation_mm(D, W, 1.0 / given_orientation(D))

    def as_scales(D):
        d = given_orientation(D)
        lam = _geo_mean(d)
        return Scales(lam, d / lam[:, None], _broadcast(D, G))

    D = _iterate(step, _common_orientation_start(W, ng, prev), lambda D: objective(as_scales(D), (W, ng)), tol, max_iter)
    return as_scales(D)


_ITERATIVE = {
    "VEI": _update_vei,
    "VEE": _update_vee,
    "VEV": _update_vev,
    "EVE": _update_eve,
    "VVE": _update_vve,
}


def update_scales(code, scatter, prev=None, tol=1e-8, max_iter=20):
    """Constrained minimiser of the weighted-scatter objective.

    Parameters
    ----------
    code : str
        One of :data:`MODELS`.
    scatter : ScatterSet
        Weighted scatter matrices and effective group sizes.
    prev : Scales, optional
        Previous solution used to warm-start the iterative structures
        (VEI, VEE, VEV, EVE, VVE). When given, the returned objective is never
        larger than that of ``prev``. Ignored by closed-form structures.
    tol, max_iter
        Stopping rule of the inner alternation: relative objective change
        below ``tol`` or ``max_iter`` sweeps.

    Raises
    ------
    DegenerateFitError
        If the pooled scatter is rank deficient or an update leaves the cone
        of positive definite matrices.
    """
    check_model(code)
    W = np.asarray(scatter.W, dtype=float)
    ng = np.asarray(scatter.ng, dtype=float)
    total = np.linalg.eigvalsh(W.sum(axis=0))
    if not np.all(np.isfinite(total)) or total[0] <= 1e-12 * max(total[-1], 1e-300):
        raise DegenerateFitError("total weighted scatter is rank deficient")
    if code in _ITERATIVE:
        scales = _ITERATIVE[code](W, ng, prev, tol, max_iter)
    else:
        scales = _closed_form(code, W, ng)
    _check_positive(scales.eigenvalues)
    return scales
