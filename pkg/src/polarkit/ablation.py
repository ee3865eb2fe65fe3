"""Loss ablation: identical training runs that differ only in the objective.

The result table has one row per language plus an ``Avg`` row (mean of
the per-language macro-F1), one column per requested loss and, when both
``bce`` and ``wbce`` are requested, a ``delta`` column ``wbce - bce``.
Scores are averaged over seeds.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Dataset, LabelMatrix
from .evaluation import evaluate, per_language_report
from .features import FeatureSpace
from .losses import LOSS_KINDS
from .trainer import TrainConfig, train

__all__ = ["AblationRun", "AblationResult", "run_loss_ablation", "AVG_ROW"]

AVG_ROW = "Avg"


@dataclass(frozen=True)
class AblationRun:
    loss: str
    seed: int
    macro_f1: float                  # pooled over the validation set
    per_language: dict[str, float]
    recall: tuple[float, ...]        # per label, pooled
    best_epoch: int


@dataclass
class AblationResult:
    losses: tuple[str, ...]
    seeds: tuple[int, ...]
    languages: tuple[str, ...]
    runs: list[list[AblationRun]] = field(default_factory=list)   # [column][seed]

    def column(self, k: int) -> dict[str, float]:
        """Seed-averaged per-language macro-F1 plus ``Avg`` for column ``k``."""
        runs = self.runs[k]
        col = {lang: float(np.mean([r.per_language[lang] for r in runs])) for lang in self.languages}
        col[AVG_ROW] = float(np.mean([col[lang] for lang in self.languages]))
        return col

    def mean_macro_f1(self, k: int) -> float:
        return float(np.mean([r.macro_f1 for r in self.runs[k]]))

    def mean_recall(self, k: int) -> float:
        return float(np.mean([np.mean(r.recall) for r in self.runs[k]]))

    @property
    def has_delta(self) -> bool:
        return "bce" in self.losses and "wbce" in self.losses

    def table(self) -> tuple[list[str], list[list[str]]]:
        header = ["lang", *self.losses]
        cols = [self.column(k) for k in range(len(self.losses))]
        if self.has_delta:
            header.append("delta")
            base = cols[self.losses.index("bce")]
            wbce = cols[self.losses.index("wbce")]
        rows = []
        for lang in (*self.languages, AVG_ROW):
            row = [lang, *(f"{c[lang]:.4f}" for c in cols)]
            if self.has_delta:
                row.append(f"{wbce[lang] - base[lang]:+.4f}")
            rows.append(row)
        return header, rows

    def to_csv(self) -> str:
        header, rows = self.table()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    def to_dict(self) -> dict:
        return {
            "losses": list(self.losses),
            "seeds": list(self.seeds),
            "columns": [
                {"loss": loss, "mean_macro_f1": self.mean_macro_f1(k),
                 "mean_recall": self.mean_recall(k), "per_language": self.column(k),
                 "runs": [{"seed": r.seed, "macro_f1": r.macro_f1, "best_epoch": r.best_epoch,
                           "recall": list(r.recall)} for r in self.runs[k]]}
                for k, loss in enumerate(self.losses)
            ],
        }


def run_loss_ablation(train_set: Dataset, val_set: Dataset, losses: Sequence[str] = LOSS_KINDS,
                      seeds: Sequence[int] = (42,), cfg: TrainConfig | None = None,
                      fs: FeatureSpace | None = None) -> AblationResult:
    """Train one model per (loss, seed) with otherwise identical settings.

    Parameters
    ----------
    train_set, val_set : Dataset
        Labeled data of the same subtask.
    losses : sequence of {"bce", "focal", "wbce"}
        Columns of the table, in order; repeats are trained again.
    seeds : sequence of int
        Each seed overrides ``cfg.seed``.
    """
    if not losses:
        raise ValueError("no losses requested")
    unknown = [x for x in losses if x not in LOSS_KINDS]
    if unknown:
        raise ValueError(f"unknown loss {unknown[0]!r}")
    if val_set.gold is None or train_set.gold is None:
        raise ValueError("loss ablation needs labeled train and validation data")
    cfg = cfg or TrainConfig()
    languages = tuple(sorted(set(val_set.langs)))
    result = AblationResult(tuple(losses), tuple(int(s) for s in seeds), languages)
    for loss in losses:
        runs = []
        for seed in seeds:
            run_cfg = replace(cfg, loss=loss, seed=int(seed), mode="independent")
            model, _ = train(train_set, val_set, run_cfg, fs)
            pred = LabelMatrix(val_set.subtask, val_set.ids, model.predict(val_set.texts))
            reports = per_language_report(val_set.gold, pred, val_set.posts)
            pooled = evaluate(val_set.gold, pred)
            runs.append(AblationRun(loss, int(seed), pooled.macro_f1,
                                    {lang: reports[lang].macro_f1 for lang in languages},
                                    tuple(float(r) for r in pooled.recall), int(model.best_epoch_)))
        result.runs.append(runs)
    return result
