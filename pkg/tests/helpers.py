"""Small constructors shared by the test modules."""

import csv
from pathlib import Path

import numpy as np

from polarkit.corpus import LabelMatrix, Subtask
from polarkit.ensemble import ProbMatrix

# Two rows in the task data format; the short ids are kept as given.
EXAMPLE_TEXTS = {
    "eng_9739": "Is detecting imperialism in the dnd chat.",
    "eng_891d": "Start by not listening to msnbc.",
}
EXAMPLE_LABELS = {
    Subtask.DETECT: {"eng_9739": (0,), "eng_891d": (1,)},
    Subtask.TYPE: {"eng_9739": (0, 0, 0, 0, 0), "eng_891d": (1, 0, 0, 0, 1)},
    Subtask.MANIFEST: {"eng_9739": (0, 0, 0, 0, 0, 0), "eng_891d": (1, 0, 0, 0, 1, 0)},
}


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def label_matrix(subtask, rows, ids=None, prefix="eng"):
    rows = np.asarray(rows, dtype=np.int8).reshape(len(rows), -1)
    ids = ids or [f"{prefix}_{k:04d}" for k in range(len(rows))]
    return LabelMatrix(Subtask.parse(subtask), tuple(ids), rows)


def prob_matrix(subtask, values, ids=None, source=""):
    values = np.asarray(values, dtype=float)
    values = values.reshape(len(values), -1)
    ids = ids or [f"eng_{k:04d}" for k in range(len(values))]
    return ProbMatrix(Subtask.parse(subtask), tuple(ids), values, source)


def planted_alpha_dev(seed=0):
    """Detection dev set whose only fully correct grid alpha is 0.7.

    Polarized rows have a = 0.74, b = 0: positive iff alpha >= 0.5 / 0.74 = 0.676.
    Non-polarized rows have a = 0.70, b = 0: positive iff alpha >= 0.714.
    Agreeing rows (a == b) are correct for every alpha.
    """
    rng = np.random.default_rng(seed)
    a, b, g = [], [], []
    for _ in range(15):
        a.append(0.74); b.append(0.0); g.append(1)
        a.append(0.70); b.append(0.0); g.append(0)
    for _ in range(30):
        v = float(rng.random())
        a.append(v); b.append(v); g.append(int(v >= 0.5))
    ids = [f"eng_{k:03d}" for k in range(len(g))]
    return (prob_matrix("detect", np.c_[a], ids, "a"), prob_matrix("detect", np.c_[b], ids, "b"),
            label_matrix("detect", np.c_[g], ids))
