"""Development splits: per-class stratification for the binary subtask and
greedy iterative stratification for the multi-label subtasks.

Iterative stratification (Sechidis, Tsoumakas & Vlahavas, 2011) keeps a
fractional demand ``c[l, j] = ratio_j * |rows with label l|`` per label and
subset, plus a capacity ``c[j] = ratio_j * n``.  Until every row is placed:

1. take the label with the fewest remaining positive rows (ties: lowest
   label index);
2. visit its remaining rows; place each in the subset with the largest
   demand for that label, ties broken by largest capacity, then by a
   seeded random draw;
3. decrement capacity and the demand of every label of the placed row.

Rows without any positive label are placed last, each into the subset
with the largest remaining capacity (ties: seeded draw); this also absorbs
the size drift of the label-driven phase.  Rows are visited in a seeded
permutation order.  All randomness uses numpy's PCG64 generator seeded
with ``SplitSpec.seed``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Dataset, LabelMatrix, NoGoldLabels, write_dataset

__all__ = [
    "SplitSpec",
    "SplitResult",
    "EmptyClassWarning",
    "stratified_split_binary",
    "iterative_stratified_split",
    "iterative_stratification",
    "random_split",
    "split_dataset",
    "split_jointly",
    "write_split",
    "max_proportion_deviation",
    "IterativeStratifiedSplit",
]


class EmptyClassWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, ...] = (0.85, 0.15)
    seed: int = 42

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.ratios)
        if len(ratios) < 2:
            raise ValueError("need at least two subsets")
        if any(not 0.0 < r < 1.0 for r in ratios):
            raise ValueError("each ratio must lie in (0, 1)")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise ValueError(f"ratios must sum to 1, got {sum(ratios)!r}")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "ratios", ratios)


@dataclass
class SplitResult:
    ids: tuple[str, ...]
    assignment: np.ndarray              # subset index per row, aligned with ids
    spec: SplitSpec
    proportions: list[list[float]] = field(default_factory=list)  # [subset][label]

    def subset_indices(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == j)

    def sizes(self) -> list[int]:
        return [int((self.assignment == j).sum()) for j in range(len(self.spec.ratios))]

    def as_mapping(self) -> dict[str, int]:
        return {i: int(a) for i, a in zip(self.ids, self.assignment)}

    def manifest(self, labels: Sequence[str] = ()) -> dict:
        return {
            "seed": self.spec.seed,
            "ratios": list(self.spec.ratios),
            "sizes": self.sizes(),
            "labels": list(labels),
            "positive_proportions": self.proportions,
        }


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    raw = [n * r for r in ratios]
    counts = [int(np.floor(x)) for x in raw]
    rest = n - sum(counts)
    # stable: larger fractional part first, then lower subset index
    order = sorted(range(len(ratios)), key=lambda j: (-(raw[j] - counts[j]), j))
    for j in order[:rest]:
        counts[j] += 1
    return counts


def _proportions(Y: np.ndarray, assignment: np.ndarray, k: int) -> list[list[float]]:
    out = []
    for j in range(k):
        rows = Y[assignment == j]
        out.append([float(v) for v in rows.mean(axis=0)] if len(rows) else [0.0] * Y.shape[1])
    return out


def _labels_of(d: Dataset) -> np.ndarray:
    if d.gold is None:
        raise NoGoldLabels("splitting needs gold labels")
    return np.asarray(d.gold.values, dtype=np.int64)


def stratified_split_binary(d: Dataset, spec: SplitSpec = SplitSpec()) -> SplitResult:
    """Split each class (0/1 of the single label) in the given ratios."""
    Y = _labels_of(d)
    if Y.shape[1] != 1:
        raise ValueError("binary stratification needs exactly one label column")
    assignment = _assign(Y, spec)
    return SplitResult(d.ids, assignment, spec, _proportions(Y, assignment, len(spec.ratios)))


def iterative_stratification(Y: np.ndarray, ratios: Sequence[float], seed: int) -> np.ndarray:
    """Assign each row of a binary label matrix to a subset; returns subset indices."""
    Y = np.asarray(Y, dtype=np.int64)
    n, L = Y.shape
    k = len(ratios)
    r = np.asarray(ratios, dtype=float)
    rng = _rng(seed)
    order = rng.permutation(n)
    # pseudo-label L marks rows without any positive label
    Yx = np.hstack([Y, (Y.sum(axis=1) == 0).astype(np.int64)[:, None]])
    demand = np.outer(Yx.sum(axis=0), r).astype(float)     # (L+1, k)
    capacity = n * r
    assignment = np.full(n, -1, dtype=np.int64)
    remaining = Yx.sum(axis=0).astype(np.int64)

    def place(row: int, label: int) -> None:
        if label == L:
            cand = np.flatnonzero(capacity == capacity.max())
        else:
            d = demand[label]
            cand = np.flatnonzero(d == d.max())
            if len(cand) > 1:
                cap = capacity[cand]
                cand = cand[cap == cap.max()]
        j = int(cand[0]) if len(cand) == 1 else int(cand[rng.integers(len(cand))])
        assignment[row] = j
        capacity[j] -= 1
        labels = np.flatnonzero(Yx[row])
        demand[labels, j] -= 1
        remaining[labels] -= 1

    while True:
        live = np.flatnonzero(remaining[:L] > 0)
        if len(live):
            label = int(live[np.argmin(remaining[live])])
        elif remaining[L] > 0:
            label = L
        else:
            break
        for row in order:
            if assignment[row] == -1 and Yx[row, label]:
                place(int(row), label)
    return assignment


def iterative_stratified_split(d: Dataset, spec: SplitSpec = SplitSpec()) -> SplitResult:
    Y = _labels_of(d)
    assignment = iterative_stratification(Y, spec.ratios, spec.seed)
    return SplitResult(d.ids, assignment, spec, _proportions(Y, assignment, len(spec.ratios)))


def random_split(d: Dataset, spec: SplitSpec = SplitSpec()) -> SplitResult:
    """Unstratified baseline: seeded permutation cut at the ratio boundaries."""
    n = len(d)
    perm = _rng(spec.seed).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    start = 0
    for j, count in enumerate(_largest_remainder(n, spec.ratios)):
        assignment[perm[start:start + count]] = j
        start += count
    Y = _labels_of(d) if d.gold is not None else np.zeros((n, 0))
    return SplitResult(d.ids, assignment, spec, _proportions(Y, assignment, len(spec.ratios)))


def _assign(Y: np.ndarray, spec: SplitSpec) -> np.ndarray:
    if Y.shape[1] == 1:
        return _binary_assignment(Y[:, 0], spec)
    return iterative_stratification(Y, spec.ratios, spec.seed)


def _assign_grouped(Y: np.ndarray, langs: Sequence[str] | None, spec: SplitSpec) -> np.ndarray:
    if langs is None:
        return _assign(Y, spec)
    assignment = np.full(len(Y), -1, dtype=np.int64)
    langs = np.asarray(langs)
    for lang in sorted(set(langs.tolist())):
        idx = np.flatnonzero(langs == lang)
        assignment[idx] = _assign(Y[idx], spec)
    return assignment


_PART_NAMES = ("train", "dev", "test")


def _parts(d: Dataset, result: SplitResult) -> list[Dataset]:
    k = len(result.spec.ratios)
    # beyond three subsets every extra part is held-out "dev" data
    names = _PART_NAMES if k <= 3 else ("train", *["dev"] * (k - 1))
    return [d.subset(result.subset_indices(j), partition=names[j]) for j in range(k)]


def split_dataset(d: Dataset, spec: SplitSpec = SplitSpec(), per_language: bool = True
                  ) -> tuple[SplitResult, list[Dataset]]:
    """Split with the subtask's method, per language by default.

    Detection data is split per class, multi-label data iteratively.
    Per-language mode splits every language separately with the same seed
    and keeps the original row order.
    """
    Y = _labels_of(d)
    assignment = _assign_grouped(Y, d.langs if per_language else None, spec)
    result = SplitResult(d.ids, assignment, spec, _proportions(Y, assignment, len(spec.ratios)))
    return result, _parts(d, result)


def split_jointly(datasets: Sequence[Dataset], spec: SplitSpec = SplitSpec(),
                  per_language: bool = True) -> list[tuple[SplitResult, list[Dataset]]]:
    """One assignment shared by several label views of the same posts.

    Rows are matched by id and the label matrices concatenated column-wise
    (zeros where a view lacks a post); the joint matrix is split with
    iterative stratification, so every subset holds the same posts in every
    view.  Returns ``(result, parts)`` per input dataset.
    """
    if not datasets:
        return []
    ids: list[str] = []
    lang_of: dict[str, str] = {}
    for d in datasets:
        _labels_of(d)
        for p in d.posts:
            if p.id not in lang_of:
                lang_of[p.id] = p.lang
                ids.append(p.id)
    index = {i: k for k, i in enumerate(ids)}
    Y = np.zeros((len(ids), sum(d.subtask.n_labels for d in datasets)), dtype=np.int64)
    col = 0
    for d in datasets:
        Y[[index[i] for i in d.ids], col:col + d.subtask.n_labels] = d.gold.values
        col += d.subtask.n_labels
    langs = [lang_of[i] for i in ids] if per_language else None
    joint = _assign_grouped(Y, langs, spec)
    out = []
    for d in datasets:
        assignment = joint[[index[i] for i in d.ids]]
        result = SplitResult(d.ids, assignment, spec,
                             _proportions(_labels_of(d), assignment, len(spec.ratios)))
        out.append((result, _parts(d, result)))
    return out


def max_proportion_deviation(Y: np.ndarray, assignment: np.ndarray, k: int) -> float:
    """Largest |subset positive rate - overall positive rate| over labels and subsets."""
    Y = np.asarray(Y, dtype=float)
    overall = Y.mean(axis=0)
    worst = 0.0
    for j in range(k):
        rows = Y[assignment == j]
        if len(rows):
            worst = max(worst, float(np.abs(rows.mean(axis=0) - overall).max()))
    return worst


def write_split(result: SplitResult, parts: Sequence[Dataset], out_dir: str | Path,
                stem: str = "split", format: str = "jsonl") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [part.partition for part in parts]
    if len(set(names)) != len(names):
        names = [str(j) for j in range(len(parts))]
    paths = []
    for name, part in zip(names, parts):
        path = out_dir / f"{stem}_{name}.{format}"
        write_dataset(part, path, format)
        paths.append(path)
    labels = parts[0].subtask.labels if parts else ()
    manifest = result.manifest(labels)
    manifest["files"] = [p.name for p in paths]
    (out_dir / f"{stem}_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


class IterativeStratifiedSplit:
    """Single shuffle-split over a binary label matrix, usable like sklearn splitters.

    ``split(X, y)`` yields one ``(train_index, test_index)`` pair.  With one
    label column the split is per-class stratification; otherwise the
    iterative algorithm.
    """

    def __init__(self, test_size: float = 0.15, random_state: int = 42):
        self.test_size = test_size
        self.random_state = random_state

    def get_n_splits(self, X=None, y=None, groups=None) -> int:
        return 1

    def split(self, X, y, groups=None):
        Y = np.asarray(y.values if isinstance(y, LabelMatrix) else y)
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1)
        spec = SplitSpec((1.0 - self.test_size, self.test_size), self.random_state)
        assignment = _assign(Y, spec)
        yield np.flatnonzero(assignment == 0), np.flatnonzero(assignment == 1)


def _binary_assignment(y: np.ndarray, spec: SplitSpec) -> np.ndarray:
    rng = _rng(spec.seed)
    assignment = np.full(len(y), -1, dtype=np.int64)
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if len(members) == 0:
            warnings.warn(f"class {cls} has no members", EmptyClassWarning, stacklevel=3)
            continue
        members = members[rng.permutation(len(members))]
        start = 0
        for j, count in enumerate(_largest_remainder(len(members), spec.ratios)):
            assignment[members[start:start + count]] = j
            start += count
    return assignment
