"""JSON report and plain-text summary of a grid of fits."""

import math

import numpy as np

from .classification import agree, detect
from .selection import CRITERIA, NoSuccessfulFitError, best_model

SCHEMA = 1


def _num(x):
    """JSON-safe float: non-finite values become None."""
    x = float(x)
    return x if math.isfinite(x) else None


def _arr(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return _num(a)
    return [_arr(row) for row in a]


def fit_record(res):
    """Per-candidate entry of the report."""
    rec = {
        "model": res.model,
        "G": res.G,
        "status": res.status,
        "init": res.init,
        "restart": res.restart,
        "q": res.q,
        "converged": bool(res.converged),
        "iterations": res.n_iter,
    }
    if not res.ok:
        rec["reason"] = res.reason
        return rec
    psi = res.psi
    rec["loglik"] = _num(res.loglik)
    rec["gaussian_loglik"] = None if res.gaussian_loglik is None else _num(res.gaussian_loglik)
    rec["criteria"] = {k: _num(res.criteria[k]) for k in CRITERIA}
    rec["pi"] = _arr(psi.pi)
    rec["alpha"] = _arr(psi.alpha)
    rec["eta"] = _arr(psi.eta)
    rec["mu"] = _arr(psi.mu)
    rec["sigma"] = _arr(psi.sigma)
    sc = psi.scales
    rec["decomposition"] = [
        {"volume": _num(sc.lam[g]), "shape": _arr(sc.shape[g]),
         "orientation": _arr(sc.orient[g])}
        for g in range(res.G)
    ]
    return rec


def observation_records(res):
    det = detect(res.resp.z, res.resp.v)
    labelled = np.zeros(res.n, dtype=bool) if res.labels is None else res.labels >= 0
    return [
        {"z": _arr(z), "v": _arr(v), "map_group": int(g) + 1, "is_good": bool(ok),
         "labelled": bool(lab)}
        for z, v, g, ok, lab in zip(res.resp.z, res.resp.v, det.map_group, det.is_good, labelled)
    ]


def build_report(grid, n, p, variables=None, settings=None, truth=None,
                 labels=None, criterion="BIC"):
    """Assemble the report dictionary.

    Per-observation output and the agreement table refer to the model chosen
    by ``criterion``. Raises :class:`NoSuccessfulFitError` when every fit failed.
    """
    chosen = best_model(grid.results, criterion)
    best = {}
    for crit in CRITERIA:
        try:
            b = best_model(grid.results, crit)
            best[crit] = {"model": b.model, "G": b.G, "value": _num(b.criteria[crit])}
        except NoSuccessfulFitError:
            best[crit] = None
    det = detect(chosen.resp.z, chosen.resp.v)
    report = {
        "schema": SCHEMA,
        "n": int(n),
        "p": int(p),
        "variables": list(variables) if variables is not None else None,
        "settings": settings or {},
        "notes": list(grid.notes),
        "fits": [fit_record(r) for r in grid.results],
        "best": best,
        "selected": {
            "criterion": criterion,
            "model": chosen.model,
            "G": chosen.G,
            "n_bad": det.n_bad,
            "observations": observation_records(chosen),
        },
    }
    if truth is not None:
        report["selected"]["agreement"] = agree(det, truth, labels).to_dict()
    return report


def summary_text(report, grid, truth=None, labels=None):
    """Human-readable digest printed by the command-line tool."""
    lines = [f"n = {report['n']}, p = {report['p']}, candidates = {len(report['fits'])}"]
    lines.extend(report["notes"])
    failed = [f for f in report["fits"] if f["status"] != "ok"]
    if failed:
        lines.append(f"{len(failed)} fit(s) failed:")
        lines.extend(f"  {f['model']} G={f['G']}: {f['reason']}" for f in failed)
    lines.append("")
    lines.append("best model per criterion:")
    for crit, b in report["best"].items():
        if b is not None:
            lines.append(f"  {crit:<5} {b['model']} G={b['G']}  ({b['value']:.3f})")
    sel = report["selected"]
    rec = next(f for f in report["fits"] if f["model"] == sel["model"] and f["G"] == sel["G"])
    lines.append("")
    lines.append(f"selected by {sel['criterion']}: {sel['model']} G={sel['G']}, "
                 f"loglik = {rec['loglik']:.4f}, q = {rec['q']}, iterations = {rec['iterations']}")
    for g in range(sel["G"]):
        lines.append(f"  group {g + 1}: pi = {rec['pi'][g]:.4f}  alpha = {rec['alpha'][g]:.4f}  "
                     f"eta = {rec['eta'][g]:.3f}")
    lines.append(f"  bad points detected: {sel['n_bad']}")
    if truth is not None:
        chosen = next(r for r in grid.results if r.ok and r.model == sel["model"] and r.G == sel["G"])
        lines.append("")
        lines.append(agree(detect(chosen.resp.z, chosen.resp.v), truth, labels).to_text())
    return "\n".join(lines)
