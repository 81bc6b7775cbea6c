"""Command-line interface: ``cnmix fit``, ``cnmix simulate`` and ``cnmix density``.

Exit codes: 0 on success, 2 for configuration or input errors, 3 when every
candidate fit failed.
"""

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from . import __version__
from .ecm import FitOptions
from .grid import WORKERS_ENV, fit_grid
from .initialization import STRATEGIES
from .mvn import ContaminationParams, GaussianParams, log_dcn
from .report import build_report, summary_text
from .selection import CRITERIA, NoSuccessfulFitError
from .simulate import simulate_two_clusters
from .structures import MODELS

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 2, 3

logger = logging.getLogger("cnmix")


class ConfigError(Exception):
    pass


# ----------------------------------------------------------------- parsing

def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _g_list(text):
    """``1:4`` or ``1,2,3``."""
    if ":" in text:
        lo, hi = text.split(":", 1)
        try:
            out = list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad G range {text!r}")
    else:
        out = _ints(text)
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("G values must be positive integers")
    return out


def _models(text):
    if text.strip().lower() == "all":
        return list(MODELS)
    codes = [t.strip().upper() for t in text.split(",") if t.strip()]
    bad = [c for c in codes if c not in MODELS]
    if bad or not codes:
        raise argparse.ArgumentTypeError(f"unknown structure(s) {bad}; choose from {', '.join(MODELS)} or 'all'")
    return codes


def _alpha_min(text):
    if text.strip().lower() == "none":
        return None
    return _floats(text)


def read_table(path, label_col=None):
    """Numeric CSV with a header row; ``label_col`` (by name) is split off.

    Returns ``(X, variable_names, labels or None)``.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}")
    if len(rows) < 2:
        raise ConfigError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    keep = list(range(len(header)))
    truth = None
    if label_col is not None:
        if label_col not in header:
            raise ConfigError(f"{path}: no column named {label_col!r} (columns: {', '.join(header)})")
        j = header.index(label_col)
        keep.remove(j)
        truth = [r[j].strip() for r in rows[1:]]
    X = np.empty((len(rows) - 1, len(keep)))
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ConfigError(f"{path}, line {i}: expected {len(header)} fields, got {len(r)}")
        for k, j in enumerate(keep):
            try:
                X[i - 2, k] = float(r[j])
            except ValueError:
                raise ConfigError(f"{path}, line {i}, column {header[j]!r}: not a number: {r[j]!r}")
    if not np.all(np.isfinite(X)):
        raise ConfigError(f"{path}: missing or non-finite values are not supported")
    return X, [header[j] for j in keep], truth


def _read_matrix(path, what):
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {what} from {path}: {exc}")


def _labels(args, n, G_list):
    if args.ind_label is None and args.label is None:
        return None
    if args.ind_label is None or args.label is None or len(args.ind_label) != len(args.label):
        raise ConfigError("--ind-label and --label must be given together, with the same length")
    idx = np.asarray(args.ind_label) - 1
    if idx.min() < 0 or idx.max() >= n or len(set(idx.tolist())) != len(idx):
        raise ConfigError(f"--ind-label must hold distinct row numbers between 1 and {n}")
    lab = np.asarray(args.label)
    if lab.min() < 1 or lab.max() > min(G_list):
        raise ConfigError(f"--label values must lie between 1 and the smallest G ({min(G_list)})")
    labels = np.full(n, -1, dtype=int)
    labels[idx] = lab - 1
    return labels


# ---------------------------------------------------------------- commands

def cmd_fit(args):
    X, names, truth = read_table(args.data, args.group_col)
    n, p = X.shape
    if p < 2:
        raise ConfigError("the data need at least two numeric columns")
    labels = _labels(args, n, args.G)
    try:
        options = FitOptions(alphafix=args.alpha_fix, alphamin=args.alpha_min, etafix=args.eta_fix,
                             etamax=args.eta_max, iter_max=args.iter_max, threshold=args.threshold,
                             eps=args.eps, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc))
    start_z = _read_matrix(args.start_z, "start z") if args.start_z else None
    start_v = _read_matrix(args.start_v, "start v") if args.start_v else None
    if args.init == "manual" and start_z is None:
        raise ConfigError("--init manual needs --start-z")
    try:
        grid = fit_grid(X, G=args.G, models=args.models, init=args.init, options=options,
                        labels=labels, start_z=start_z, start_v=start_v,
                        restarts=args.restarts, workers=args.parallel)
    except ValueError as exc:
        raise ConfigError(str(exc))
    settings = {
        "models": args.models, "G": args.G, "init": args.init, "restarts": args.restarts,
        "alphafix": args.alpha_fix, "alphamin": args.alpha_min, "etafix": args.eta_fix,
        "etamax": args.eta_max, "iter_max": args.iter_max, "threshold": args.threshold,
        "eps": args.eps, "seed": args.seed,
    }
    try:
        report = build_report(grid, n, p, names, settings, truth, labels, args.criterion)
    except NoSuccessfulFitError as exc:
        for r in grid.results:
            print(f"{r.model} G={r.G}: {r.reason}", file=sys.stderr)
        print(f"error: {exc.__class__.__name__}: every candidate fit failed", file=sys.stderr)
        return EXIT_FAILED
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(report, fh, indent=1)
            fh.write("\n")
    if not args.quiet:
        print(summary_text(report, grid, truth, labels))
    return EXIT_OK


def simulated_csv(seed):
    X, truth = simulate_two_clusters(seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["X1", "X2", "group"])
    for row, g in zip(X, truth):
        w.writerow([repr(float(row[0])), repr(float(row[1])), int(g)])
    return buf.getvalue()


def cmd_simulate(args):
    text = simulated_csv(args.seed)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def load_params(path):
    """Read ``{"mu": [...], "sigma": [[...]], "alpha": a, "eta": e}``."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    missing = [k for k in ("mu", "sigma", "alpha", "eta") if k not in raw]
    if missing:
        raise ConfigError(f"{path}: missing field(s) {', '.join(missing)}")
    try:
        gauss = GaussianParams(np.asarray(raw["mu"], dtype=float), np.asarray(raw["sigma"], dtype=float))
        cont = ContaminationParams(float(raw["alpha"]), float(raw["eta"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed parameters ({exc})")
    return gauss, cont


def _parse_points(text):
    try:
        return np.array([[float(v) for v in row.split(",")] for row in text.split(";") if row.strip()])
    except ValueError:
        raise ConfigError(f"--x expects rows like '1,2;3,4', got {text!r}")


def cmd_density(args):
    gauss, cont = load_params(args.params)
    if (args.x is None) == (args.input is None):
        raise ConfigError("give exactly one of --x and --input")
    X = _parse_points(args.x) if args.x is not None else read_table(args.input)[0]
    if X.ndim != 2 or X.shape[1] != gauss.p:
        raise ConfigError(f"points must have {gauss.p} coordinates")
    out = np.atleast_1d(log_dcn(X, gauss, cont))
    if not args.log:
        out = np.exp(out)
    for val in out:
        print(repr(float(val)))
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="cnmix", formatter_class=fmt,
                                     description="Mixtures of multivariate contaminated normal distributions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", formatter_class=fmt, help="fit a grid of models to a CSV file")
    f.add_argument("data", help="CSV file with a header row")
    f.add_argument("--group-col", help="column holding known groups; excluded from the fit and "
                                       "cross-tabulated against the selected partition")
    f.add_argument("--models", type=_models, default=list(MODELS), metavar="CODES",
                   help="comma-separated structure codes or 'all'")
    f.add_argument("--G", type=_g_list, default=[1, 2, 3], help="component counts, e.g. 1:4 or 2,3")
    f.add_argument("--init", choices=STRATEGIES, default="mixt", help="initialisation strategy")
    f.add_argument("--restarts", type=int, default=0,
                   help="extra random.soft starts per candidate; the best log-likelihood is kept")
    f.add_argument("--start-z", help="headerless CSV of initial posteriors (manual init)")
    f.add_argument("--start-v", help="headerless CSV of initial good-point posteriors")
    f.add_argument("--alpha-fix", type=_floats, help="fixed good-point proportions (one value or one per group)")
    f.add_argument("--alpha-min", type=_alpha_min, default=0.5,
                   help="lower bound(s) for the good-point proportions, or 'none'")
    f.add_argument("--eta-fix", type=_floats, help="fixed contamination factors")
    f.add_argument("--eta-max", type=_floats, default=1000.0, help="upper bound(s) for the contamination factors")
    f.add_argument("--ind-label", type=_ints, help="1-based row numbers of labelled observations")
    f.add_argument("--label", type=_ints, help="1-based groups of the rows in --ind-label")
    f.add_argument("--iter-max", type=int, default=1000, help="maximum ECM iterations")
    f.add_argument("--threshold", type=float, default=1e-3, help="Aitken convergence threshold")
    f.add_argument("--eps", type=float, default=1e-100, help="floor for the scale-matrix eigenvalues")
    f.add_argument("--seed", type=int, help="root seed for every random start")
    f.add_argument("--parallel", type=int, metavar="WORKERS",
                   help=f"worker processes (default: ${WORKERS_ENV} or the available CPUs)")
    f.add_argument("--criterion", choices=CRITERIA, default="BIC",
                   help="criterion choosing the model whose partition is reported")
    f.add_argument("-o", "--output", help="write the JSON report here")
    f.add_argument("-q", "--quiet", action="store_true", help="do not print the summary")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", formatter_class=fmt,
                       help="two elongated normal clusters plus uniform noise, as CSV")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("-o", "--output", help="output CSV (default: stdout)")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("density", formatter_class=fmt, help="evaluate a contaminated normal density")
    d.add_argument("--params", required=True, help='JSON file {"mu", "sigma", "alpha", "eta"}')
    d.add_argument("--x", help="points as '1,2;3,4'")
    d.add_argument("--input", help="CSV file of points with a header row")
    d.add_argument("--log", action="store_true", help="print log-densities")
    d.set_defaults(func=cmd_density)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
