"""Weighted probability averaging over model outputs, alpha search and thresholding."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import LabelMatrix, MissingColumn, Subtask, _resolve_columns, infer_subtask
from .evaluation import IdMismatch, macro_f1

__all__ = [
    "DEFAULT_GRID",
    "ProbMatrix",
    "EnsembleConfig",
    "SubtaskMismatch",
    "combine",
    "combine_many",
    "grid_search_alpha",
    "apply_threshold",
    "WeightedProbabilityEnsemble",
    "write_prob_matrix",
    "load_prob_matrix",
]

DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(21))


class SubtaskMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ProbMatrix:
    subtask: Subtask
    ids: tuple[str, ...]
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.shape != (len(self.ids), self.subtask.n_labels):
            raise ValueError(f"probability matrix shape {values.shape} does not match "
                             f"({len(self.ids)}, {self.subtask.n_labels})")
        if values.size and not ((values >= 0) & (values <= 1)).all():
            raise ValueError("probabilities must lie in [0, 1]")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", values)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.subtask.labels

    def __len__(self) -> int:
        return len(self.ids)

    def align(self, ids: Sequence[str]) -> "ProbMatrix":
        index = {i: k for k, i in enumerate(self.ids)}
        if len(ids) != len(index) or any(i not in index for i in ids):
            raise IdMismatch("id sets differ")
        return ProbMatrix(self.subtask, tuple(ids), self.values[[index[i] for i in ids]], self.source)

    def replace_values(self, values) -> "ProbMatrix":
        return ProbMatrix(self.subtask, self.ids, values, self.source)


@dataclass(frozen=True)
class EnsembleConfig:
    alpha: float = 0.7
    threshold: float = 0.5
    label_thresholds: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        for t in (self.threshold, *(self.label_thresholds or ())):
            if not 0.0 < t < 1.0:
                raise ValueError("thresholds must be in (0, 1)")


def _check_pair(a: ProbMatrix, b: ProbMatrix) -> ProbMatrix:
    if a.subtask != b.subtask:
        raise SubtaskMismatch(f"{a.subtask.value} vs {b.subtask.value}")
    if a.ids == b.ids:
        return b
    if set(a.ids) != set(b.ids):
        raise IdMismatch("probability matrices cover different ids")
    return b.align(a.ids)


def combine(a: ProbMatrix, b: ProbMatrix, alpha: float = 0.7) -> ProbMatrix:
    """``alpha * a + (1 - alpha) * b`` element-wise; rows of ``b`` are aligned to ``a`` by id."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    b = _check_pair(a, b)
    if alpha == 1.0:
        values = a.values
    elif alpha == 0.0:
        values = b.values
    else:
        values = alpha * a.values + (1.0 - alpha) * b.values
    # rounding can push a convex combination a hair outside [min, max]
    lo = np.minimum(a.values, b.values)
    hi = np.maximum(a.values, b.values)
    values = np.clip(values, lo, hi)
    return ProbMatrix(a.subtask, a.ids, values, f"ensemble({a.source},{b.source};alpha={alpha!r})")


def combine_many(sources: Sequence[ProbMatrix], weights: Sequence[float]) -> ProbMatrix:
    """k-way weighted average; ``weights`` must be non-negative and sum to 1."""
    if len(sources) != len(weights) or not sources:
        raise ValueError("need one weight per source")
    w = np.asarray(weights, dtype=float)
    if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be non-negative and sum to 1")
    first = sources[0]
    aligned = [first] + [_check_pair(first, s) for s in sources[1:]]
    stack = np.stack([s.values for s in aligned])
    values = np.tensordot(w, stack, axes=1)
    values = np.clip(values, stack.min(axis=0), stack.max(axis=0))
    return ProbMatrix(first.subtask, first.ids, values, "ensemble(" + ",".join(s.source for s in aligned) + ")")


def apply_threshold(p: ProbMatrix, cfg: EnsembleConfig | float = 0.5) -> LabelMatrix:
    """1 where probability >= threshold (inclusive boundary)."""
    if not isinstance(cfg, EnsembleConfig):
        cfg = EnsembleConfig(threshold=float(cfg))
    if cfg.label_thresholds is not None:
        t = np.asarray(cfg.label_thresholds, dtype=float)
        if t.shape != (p.subtask.n_labels,):
            raise ValueError("need one threshold per label")
    else:
        t = cfg.threshold
    return LabelMatrix(p.subtask, p.ids, (p.values >= t).astype(np.int8))


def _score_alpha(a, b, gold, alpha, threshold, scheme):
    pred = apply_threshold(combine(a, b, alpha), threshold)
    return macro_f1(gold, pred, scheme)


def grid_search_alpha(a: ProbMatrix, b: ProbMatrix, gold: LabelMatrix,
                      grid: Sequence[float] = DEFAULT_GRID, threshold: float = 0.5,
                      scheme: str | None = None, n_jobs: int = 1) -> tuple[float, list[tuple[float, float]]]:
    """Pick the alpha maximizing macro-F1 of the thresholded combination.

    Returns ``(best_alpha, [(alpha, score), ...])`` with the table in grid
    order.  Ties go to the smallest alpha.
    """
    grid = [float(x) for x in grid]
    if not grid:
        raise ValueError("empty alpha grid")
    if any(not 0.0 <= x <= 1.0 for x in grid):
        raise ValueError("alpha grid values must lie in [0, 1]")
    b = _check_pair(a, b)
    gold = gold.align(a.ids) if gold.ids != a.ids else gold
    if n_jobs == 1:
        scores = [_score_alpha(a, b, gold, x, threshold, scheme) for x in grid]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            scores = list(pool.map(lambda x: _score_alpha(a, b, gold, x, threshold, scheme), grid))
    table = list(zip(grid, scores))
    best = max(scores)
    best_alpha = min(x for x, s in table if s == best)
    return best_alpha, table


class WeightedProbabilityEnsemble(BaseEstimator):
    """Two-source probability averaging with the mixing weight chosen on labeled data.

    Parameters
    ----------
    alpha : float, default=0.7
        Weight of the first source; used as-is when ``grid`` is None.
    grid : sequence of float or None, default=DEFAULT_GRID
        Candidate alphas searched in ``fit``.  ``None`` keeps ``alpha``.
    threshold : float, default=0.5
        Global decision threshold.
    label_thresholds : sequence of float or None
        Per-label thresholds overriding ``threshold`` (off by default).

    ``X`` everywhere is a pair ``(a, b)`` of :class:`ProbMatrix`.
    """

    def __init__(self, alpha=0.7, grid=DEFAULT_GRID, threshold=0.5, label_thresholds=None):
        self.alpha = alpha
        self.grid = grid
        self.threshold = threshold
        self.label_thresholds = label_thresholds

    def fit(self, X, y: LabelMatrix):
        a, b = X
        if self.grid is None:
            self.alpha_ = float(self.alpha)
            self.scores_ = [(self.alpha_, _score_alpha(a, b, y.align(a.ids), self.alpha_,
                                                       self.threshold, None))]
        else:
            self.alpha_, self.scores_ = grid_search_alpha(a, b, y, self.grid, self.threshold)
        return self

    def _config(self) -> EnsembleConfig:
        lt = tuple(self.label_thresholds) if self.label_thresholds is not None else None
        return EnsembleConfig(getattr(self, "alpha_", self.alpha), self.threshold, lt)

    def predict_proba(self, X) -> ProbMatrix:
        a, b = X
        return combine(a, b, self._config().alpha)

    def predict(self, X) -> LabelMatrix:
        return apply_threshold(self.predict_proba(X), self._config())

    def score(self, X, y) -> float:
        return macro_f1(y, self.predict(X).align(y.ids))


# ---------------------------------------------------------------------------
# file format: CSV/JSONL with id + one column per label, sidecar <path>.json

def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_prob_matrix(p: ProbMatrix, path: str | Path, format: str | None = None) -> None:
    """Write probabilities at 17 significant digits plus a JSON manifest sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = (format or ("jsonl" if path.suffix.lower() == ".jsonl" else "csv")).lower()
    header = ["id", *p.labels]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for k, i in enumerate(p.ids):
            writer.writerow([i, *("%.17g" % v for v in p.values[k])])
        path.write_text(buf.getvalue(), encoding="utf-8")
    else:
        lines = []
        for k, i in enumerate(p.ids):
            rec = {"id": i, **{lab: float("%.17g" % v) for lab, v in zip(p.labels, p.values[k])}}
            lines.append(json.dumps(rec, ensure_ascii=False))
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    manifest = {"source": p.source, "subtask": p.subtask.value, "labels": list(p.labels),
                "n_rows": len(p), "format": fmt}
    _sidecar(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_prob_matrix(path: str | Path, subtask: Subtask | str | None = None,
                     format: str | None = None) -> ProbMatrix:
    path = Path(path)
    source = ""
    side = _sidecar(path)
    if side.exists():
        manifest = json.loads(side.read_text(encoding="utf-8"))
        source = manifest.get("source", "")
        if subtask is None:
            subtask = manifest.get("subtask")
    fmt = (format or ("jsonl" if path.suffix.lower() == ".jsonl" else "csv")).lower()
    if fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            records = list(reader)
            columns = list(reader.fieldnames or [])
    else:
        with open(path, encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        columns = list(records[0]) if records else []
    if subtask is None:
        subtask = infer_subtask(columns)
    subtask = Subtask.parse(subtask)
    cols = _resolve_columns(columns, ["id", *subtask.labels])
    for name, col in cols.items():
        if col is None:
            raise MissingColumn(name)
    ids = [str(r[cols["id"]]) for r in records]
    values = np.array([[float(r[cols[lab]]) for lab in subtask.labels] for r in records],
                      dtype=np.float64).reshape(len(records), subtask.n_labels)
    return ProbMatrix(subtask, tuple(ids), values, source)
