"""Scoring and post-hoc analysis of multi-label predictions.

Confusion counts are computed per label column.  Two macro schemes exist:

``labelwise``
    mean of the per-label F1 of the positive class (Subtasks 2 and 3).
``binary_two_class``
    mean of the F1 of the positive *and* the negative class of every
    label column (Subtask 1, a single binary label).

Zero-division follows the usual shared-task scorer convention: an undefined
precision, recall or F1 becomes ``zero_division`` (0 by default) and the
label is flagged in ``EvalReport.undefined``.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import LabelMatrix, Post, Subtask

__all__ = [
    "SCHEMES",
    "EvalError",
    "ShapeMismatch",
    "IdMismatch",
    "EmptyIntersection",
    "UnknownId",
    "confusion_counts",
    "label_prf",
    "macro_f1",
    "default_scheme",
    "EvalReport",
    "evaluate",
    "pr_gap",
    "detect_collapse",
    "ConsistencyReport",
    "consistency_audit",
    "gate",
    "per_language_report",
    "write_reports_csv",
    "reports_to_dict",
]

SCHEMES = ("labelwise", "binary_two_class")
POOLED = "pooled"


class EvalError(ValueError):
    pass


class ShapeMismatch(EvalError):
    pass


class IdMismatch(EvalError):
    pass


class EmptyIntersection(EvalError):
    pass


class UnknownId(EvalError):
    pass


def _values(m) -> np.ndarray:
    v = m.values if isinstance(m, LabelMatrix) else np.asarray(m)
    if v.ndim == 1:
        v = v.reshape(-1, 1)
    return v


def _aligned(gold, pred) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(gold, LabelMatrix) and isinstance(pred, LabelMatrix):
        if gold.subtask != pred.subtask:
            raise ShapeMismatch(f"subtasks differ: {gold.subtask.value} vs {pred.subtask.value}")
        if gold.ids != pred.ids:
            if set(gold.ids) != set(pred.ids):
                raise IdMismatch("gold and prediction ids differ")
            pred = pred.align(gold.ids)
    g, p = _values(gold), _values(pred)
    if g.shape != p.shape:
        raise ShapeMismatch(f"gold {g.shape} vs pred {p.shape}")
    return g.astype(bool), p.astype(bool)


def confusion_counts(gold, pred) -> dict[str, np.ndarray]:
    g, p = _aligned(gold, pred)
    return {
        "tp": (g & p).sum(axis=0),
        "fp": (~g & p).sum(axis=0),
        "fn": (g & ~p).sum(axis=0),
        "tn": (~g & ~p).sum(axis=0),
    }


def _prf(tp, fp, fn, zero_division=0.0):
    tp, fp, fn = (np.asarray(a, dtype=float) for a in (tp, fp, fn))
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), zero_division)
        recall = np.where(tp + fn > 0, tp / (tp + fn), zero_division)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / np.where(denom > 0, denom, 1), 0.0)
    # F1 is only "defined" when both precision and recall are, and not both zero
    undefined = (tp + fp == 0) | (tp + fn == 0) | (denom == 0)
    if zero_division:
        f1 = np.where((tp + fp == 0) & (tp + fn == 0), zero_division, f1)
    return precision, recall, f1, undefined


def label_prf(gold, pred, zero_division: float = 0.0) -> dict[str, np.ndarray]:
    """Per-label precision, recall, F1 and support (positive class)."""
    c = confusion_counts(gold, pred)
    precision, recall, f1, undefined = _prf(c["tp"], c["fp"], c["fn"], zero_division)
    return {"precision": precision, "recall": recall, "f1": f1,
            "support": c["tp"] + c["fn"], "undefined": undefined, **c}


def default_scheme(subtask: Subtask | None, n_labels: int) -> str:
    if subtask is Subtask.DETECT or (subtask is None and n_labels == 1):
        return "binary_two_class"
    return "labelwise"


def macro_f1(gold, pred, scheme: str | None = None, zero_division: float = 0.0) -> float:
    if scheme is None:
        subtask = gold.subtask if isinstance(gold, LabelMatrix) else None
        scheme = default_scheme(subtask, _values(gold).shape[1])
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    c = confusion_counts(gold, pred)
    _, _, f1_pos, _ = _prf(c["tp"], c["fp"], c["fn"], zero_division)
    if scheme == "labelwise":
        return float(np.mean(f1_pos))
    # negative class: swap roles, tn becomes the true positives
    _, _, f1_neg, _ = _prf(c["tn"], c["fn"], c["fp"], zero_division)
    return float(np.mean(np.concatenate([f1_pos, f1_neg])))


@dataclass
class EvalReport:
    labels: tuple[str, ...]
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    undefined: np.ndarray
    macro_f1: float
    scheme: str
    n_rows: int
    collapse_floor: float = 0.05
    per_language: dict[str, "EvalReport"] = field(default_factory=dict)

    @property
    def pr_gap(self) -> np.ndarray:
        return self.recall - self.precision

    @property
    def collapsed(self) -> list[str]:
        return detect_collapse(self, self.collapse_floor)

    def rows(self, scope: str = POOLED) -> list[dict]:
        collapsed = set(self.collapsed)
        out = []
        for k, label in enumerate(self.labels):
            out.append({
                "scope": scope, "label": label, "n_rows": self.n_rows,
                "support": int(self.support[k]), "tp": int(self.tp[k]), "fp": int(self.fp[k]),
                "fn": int(self.fn[k]), "tn": int(self.tn[k]),
                "precision": float(self.precision[k]), "recall": float(self.recall[k]),
                "f1": float(self.f1[k]), "pr_gap": float(self.pr_gap[k]),
                "collapsed": label in collapsed, "undefined_f1": bool(self.undefined[k]),
            })
        return out

    def to_dict(self) -> dict:
        d = {
            "scheme": self.scheme,
            "macro_f1": self.macro_f1,
            "n_rows": self.n_rows,
            "collapse_floor": self.collapse_floor,
            "collapsed": self.collapsed,
            "labels": {r["label"]: {k: v for k, v in r.items() if k not in ("scope", "label", "n_rows")}
                       for r in self.rows()},
        }
        if self.per_language:
            d["per_language"] = {lang: rep.to_dict() for lang, rep in self.per_language.items()}
        return d


def evaluate(gold, pred, scheme: str | None = None, zero_division: float = 0.0,
             labels: Sequence[str] | None = None, collapse_floor: float = 0.05) -> EvalReport:
    """Full per-label report plus the macro-F1 for one gold/prediction pair."""
    prf = label_prf(gold, pred, zero_division)
    if labels is None:
        if isinstance(gold, LabelMatrix):
            labels = gold.labels
        else:
            labels = tuple(f"label_{k}" for k in range(len(prf["f1"])))
    if scheme is None:
        subtask = gold.subtask if isinstance(gold, LabelMatrix) else None
        scheme = default_scheme(subtask, len(labels))
    return EvalReport(
        labels=tuple(labels), tp=prf["tp"], fp=prf["fp"], fn=prf["fn"], tn=prf["tn"],
        precision=prf["precision"], recall=prf["recall"], f1=prf["f1"],
        support=prf["support"], undefined=prf["undefined"],
        macro_f1=macro_f1(gold, pred, scheme, zero_division), scheme=scheme,
        n_rows=int(_values(gold).shape[0]), collapse_floor=collapse_floor,
    )


def pr_gap(report: EvalReport) -> dict[str, float]:
    """Recall minus precision per label; positive means recall-dominant."""
    return {label: float(g) for label, g in zip(report.labels, report.pr_gap)}


def detect_collapse(report: EvalReport, f1_floor: float = 0.05) -> list[str]:
    """Labels with gold support but an F1 below ``f1_floor``."""
    return [label for label, f1, s in zip(report.labels, report.f1, report.support)
            if s > 0 and f1 < f1_floor]


# ---------------------------------------------------------------------------
# cross-task consistency

@dataclass
class ConsistencyReport:
    n_audited: int
    type_audited: int
    type_violations: int
    manifest_audited: int
    manifest_violations: int
    offending_ids: list[str]

    @property
    def violations(self) -> int:
        return len(self.offending_ids)

    @property
    def rate(self) -> float:
        return self.violations / self.n_audited if self.n_audited else 0.0

    @property
    def type_rate(self) -> float:
        return self.type_violations / self.type_audited if self.type_audited else 0.0

    @property
    def manifest_rate(self) -> float:
        return self.manifest_violations / self.manifest_audited if self.manifest_audited else 0.0

    def to_dict(self) -> dict:
        return {
            "n_audited": self.n_audited, "violations": self.violations, "rate": self.rate,
            "type": {"audited": self.type_audited, "violations": self.type_violations,
                     "rate": self.type_rate},
            "manifest": {"audited": self.manifest_audited,
                         "violations": self.manifest_violations, "rate": self.manifest_rate},
            "offending_ids": self.offending_ids,
        }


def _violating(detect: dict[str, int], fine) -> tuple[list[str], int]:
    fine_values = _values(fine)
    out = []
    audited = 0
    for k, post_id in enumerate(fine.ids):
        if post_id not in detect:
            continue
        audited += 1
        if detect[post_id] == 0 and fine_values[k].any():
            out.append(post_id)
    return out, audited


def consistency_audit(pred1: LabelMatrix, pred2: LabelMatrix,
                      pred3: LabelMatrix | None = None) -> ConsistencyReport:
    """Count posts predicted non-polarized but given fine-grained labels.

    Each fine-grained matrix is audited on its id intersection with
    ``pred1``; the overall rate is over the union of audited ids.
    """
    if pred1.subtask is not Subtask.DETECT:
        raise EvalError("first argument must hold detection predictions")
    detect = {i: int(v) for i, v in zip(pred1.ids, _values(pred1)[:, 0])}
    bad2, n2 = _violating(detect, pred2)
    if n2 == 0:
        raise EmptyIntersection("no ids shared between detection and fine-grained predictions")
    audited = {i for i in pred2.ids if i in detect}
    bad3, n3 = [], 0
    if pred3 is not None:
        bad3, n3 = _violating(detect, pred3)
        audited |= {i for i in pred3.ids if i in detect}
    offending = [i for i in pred1.ids if i in set(bad2) | set(bad3)]
    return ConsistencyReport(len(audited), n2, len(bad2), n3, len(bad3), offending)


def gate(pred1: LabelMatrix, fine):
    """Zero fine-grained rows whose detection prediction is 0.

    ``fine`` may be a :class:`LabelMatrix` or a probability matrix (anything
    with ``ids``, ``values`` and a ``replace_values`` method).
    """
    detect = {i: int(v) for i, v in zip(pred1.ids, _values(pred1)[:, 0])}
    missing = [i for i in fine.ids if i not in detect]
    if missing:
        raise IdMismatch(f"{len(missing)} fine-grained ids lack a detection prediction, "
                         f"e.g. {missing[0]!r}")
    keep = np.array([detect[i] for i in fine.ids], dtype=bool)
    values = np.array(fine.values, copy=True)
    values[~keep] = 0
    if isinstance(fine, LabelMatrix):
        return LabelMatrix(fine.subtask, fine.ids, values)
    return fine.replace_values(values)


# ---------------------------------------------------------------------------
# per-language reports

def per_language_report(gold: LabelMatrix, pred: LabelMatrix,
                        posts: Sequence[Post] | Mapping[str, str],
                        scheme: str | None = None, zero_division: float = 0.0,
                        collapse_floor: float = 0.05) -> dict[str, EvalReport]:
    """One report per language plus ``"pooled"`` (scored on pooled counts)."""
    if isinstance(posts, Mapping):
        lang_of = dict(posts)
    else:
        lang_of = {p.id: p.lang for p in posts}
    g, p = _aligned(gold, pred)
    if scheme is None:
        scheme = default_scheme(gold.subtask, len(gold.labels))
    unknown = [i for i in gold.ids if i not in lang_of]
    if unknown:
        raise UnknownId(f"no language for id {unknown[0]!r}")
    langs = np.array([lang_of[i] for i in gold.ids])
    out: dict[str, EvalReport] = {}
    for lang in sorted(set(lang_of.values())):
        mask = langs == lang
        if not mask.any():
            warnings.warn(f"language {lang!r} has no rows; omitted", stacklevel=2)
            continue
        out[lang] = evaluate(g[mask].astype(np.int8), p[mask].astype(np.int8), scheme,
                             zero_division, gold.labels, collapse_floor)
    out[POOLED] = evaluate(gold, pred, scheme, zero_division, collapse_floor=collapse_floor)
    return out


REPORT_COLUMNS = ("scope", "label", "n_rows", "support", "tp", "fp", "fn", "tn",
                  "precision", "recall", "f1", "pr_gap", "collapsed", "undefined_f1")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_reports_csv(reports: Mapping[str, EvalReport], path: str | Path) -> None:
    """Write per-label rows for every scope, followed by one ``__macro__`` row per scope.

    Columns: scope (language code or ``pooled``), label, n_rows, support,
    tp, fp, fn, tn, precision, recall, f1, pr_gap (recall - precision),
    collapsed (0/1), undefined_f1 (0/1).  The macro row carries the scope's
    macro-F1 in the ``f1`` column and leaves the count columns empty.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for scope, rep in reports.items():
        for row in rep.rows(scope):
            writer.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    for scope, rep in reports.items():
        macro = {c: "" for c in REPORT_COLUMNS}
        macro.update(scope=scope, label="__macro__", n_rows=str(rep.n_rows), f1=repr(rep.macro_f1))
        writer.writerow([macro[c] for c in REPORT_COLUMNS])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def reports_to_dict(reports: Mapping[str, EvalReport]) -> dict:
    return {scope: rep.to_dict() for scope, rep in reports.items()}


def write_json(obj, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                          encoding="utf-8")
