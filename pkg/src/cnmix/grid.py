"""Fitting a grid of (structure, G) candidates, optionally in parallel.

Every candidate draws its random numbers from a stream derived from the root
seed and the candidate's position in the grid, so the results do not depend
on the number of workers.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .ecm import FitOptions, fit_single
from .initialization import initialize
from .structures import G1_EQUIVALENCE, MODELS, check_model

logger = logging.getLogger(__name__)

WORKERS_ENV = "CNMIX_WORKERS"


def default_workers():
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def candidates(models=None, G=(1, 2, 3)):
    """Expand the grid, collapsing structures that coincide when G = 1.

    Returns the ``(model, G)`` pairs in fitting order and a list of notes
    describing the collapsed equivalence classes.
    """
    models = list(MODELS) if models is None else [check_model(m) for m in models]
    pairs, notes = [], []
    for g in sorted(set(int(x) for x in G)):
        if g < 1:
            raise ValueError("G values must be positive")
        if g > 1:
            pairs.extend((m, g) for m in models)
            continue
        for members in G1_EQUIVALENCE.values():
            chosen = [m for m in models if m in members]
            if not chosen:
                continue
            pairs.append((chosen[0], 1))
            if len(chosen) > 1:
                notes.append(f"G=1: {', '.join(chosen)} are equivalent; fitted {chosen[0]} only")
    return pairs, notes


def _fit_task(task, X, strategy, options, labels, start_z, start_v, restarts, root_entropy):
    index, model, G = task
    best = None
    for restart in range(restarts + 1):
        seq = np.random.SeedSequence(root_entropy, spawn_key=(index, restart))
        rng = np.random.default_rng(seq)
        kind = strategy if restart == 0 else "random.soft"
        try:
            init = initialize(kind, X, model, G, rng, options, labels,
                              start_z if kind == "manual" else None, start_v)
        except ValueError as exc:
            logger.warning("%s G=%d: cannot initialise (%s)", model, G, exc)
            continue
        res = fit_single(X, model, G, init, options, labels)
        res.restart = restart
        if best is None or (res.ok and (not best.ok or res.loglik > best.loglik)):
            best = res
    return best


@dataclass
class GridResult:
    results: list
    notes: list = field(default_factory=list)

    @property
    def successful(self):
        return [r for r in self.results if r.ok]


def fit_grid(X, G=(1, 2, 3), models=None, init="mixt", options=None, labels=None,
             start_z=None, start_v=None, restarts=0, workers=None):
    """Fit every candidate of the grid.

    Parameters
    ----------
    X : ndarray, shape (n, p)
    G : iterable of int
    models : iterable of str, optional
        Structure codes; all fourteen by default.
    init : str
        Initialisation strategy for the first start of every candidate.
    restarts : int
        Additional ``random.soft`` starts per candidate; the start reaching the
        highest log-likelihood is kept.
    workers : int, optional
        Worker processes; defaults to :func:`default_workers`.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("data must be an (n, p) matrix with p > 1")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contain missing or non-finite values")
    options = options or FitOptions()
    pairs, notes = candidates(models, G)
    if init == "manual":
        if start_z is None:
            raise ValueError("manual initialisation needs start_z")
        pairs = [(m, g) for m, g in pairs if g == np.shape(start_z)[1]]
    root = options.seed if options.seed is not None else np.random.SeedSequence().entropy
    tasks = [(i, m, g) for i, (m, g) in enumerate(pairs)]
    run = partial(_fit_task, X=X, strategy=init, options=options, labels=labels,
                  start_z=start_z, start_v=start_v, restarts=restarts, root_entropy=root)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(tasks) <= 1:
        results = [run(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            results = list(pool.map(run, tasks))
    return GridResult(results, notes)
