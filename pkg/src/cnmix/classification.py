"""MAP partitions, good/bad detection and agreement tables.

Component indices are 0-based in the Python API; the text and JSON renderings
of an :class:`AgreementTable` number groups from 1.
"""

from dataclasses import dataclass

import numpy as np


def map_assign(z):
    """Row-wise argmax of the posteriors; ties go to the lowest index."""
    return np.argmax(np.asarray(z), axis=1)


@dataclass
class DetectionTable:
    map_group: np.ndarray
    is_good: np.ndarray
    G: int

    @property
    def n_bad(self):
        return int(np.sum(~self.is_good))


def detect(z, v):
    """Assign each row to its MAP component, then call it good if its
    good-point posterior in that component exceeds 0.5 (ties are bad)."""
    z = np.asarray(z)
    v = np.asarray(v)
    if z.shape != v.shape:
        raise ValueError(f"z has shape {z.shape} but v has shape {v.shape}")
    group = map_assign(z)
    good = v[np.arange(len(group)), group] > 0.5
    return DetectionTable(group, good, z.shape[1])


@dataclass
class AgreementTable:
    """Counts of given groups (rows) against fitted groups plus a bad-points column."""

    row_labels: list
    counts: np.ndarray

    @property
    def G(self):
        return self.counts.shape[1] - 1

    @property
    def total(self):
        return int(self.counts.sum())

    def row(self, label):
        return self.counts[self.row_labels.index(label)]

    def column_labels(self):
        return [str(g + 1) for g in range(self.G)] + ["bad points"]

    def to_dict(self):
        return {
            "columns": self.column_labels(),
            "rows": {str(lab): [int(c) for c in row] for lab, row in zip(self.row_labels, self.counts)},
        }

    def to_text(self):
        cols = self.column_labels()
        first = max([len("given")] + [len(str(r)) for r in self.row_labels])
        widths = [max(len(c), len(str(int(self.counts[:, j].max(initial=0))))) for j, c in enumerate(cols)]
        lines = ["given".ljust(first) + "".join("  " + c.rjust(w) for c, w in zip(cols, widths))]
        for lab, row in zip(self.row_labels, self.counts):
            lines.append(str(lab).ljust(first) + "".join("  " + str(int(x)).rjust(w) for x, w in zip(row, widths)))
        return "\n".join(lines)

    def __str__(self):
        return self.to_text()


def agree(detection, given, labels=None):
    """Cross-tabulate a given partition against a fitted one.

    Parameters
    ----------
    detection : DetectionTable
    given : sequence
        Given group of every observation (any hashable values).
    labels : array of int, optional
        Labelled-row indicator as passed to the fit (-1 marks unlabelled rows).
        When present, only unlabelled rows are compared.
    """
    given = np.asarray(given, dtype=object)
    n = len(detection.map_group)
    if given.shape[0] != n:
        raise ValueError(f"given partition has length {given.shape[0]}, expected {n}")
    keep = np.ones(n, dtype=bool)
    if labels is not None:
        keep = np.asarray(labels) < 0
    return _table(given[keep], detection.map_group[keep], detection.is_good[keep], detection.G)


def _table(given, group, good, G):
    try:
        rows = sorted(set(given.tolist()))
    except TypeError:
        rows = list(dict.fromkeys(given.tolist()))
    counts = np.zeros((len(rows), G + 1), dtype=int)
    index = {lab: i for i, lab in enumerate(rows)}
    for lab, g, ok in zip(given.tolist(), group, good):
        counts[index[lab], g if ok else G] += 1
    return AgreementTable(rows, counts)
