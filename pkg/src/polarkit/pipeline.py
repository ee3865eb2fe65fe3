"""End-to-end pipeline: split, train, predict, tune-alpha, ensemble, evaluate,
audit and report.

Every intermediate artifact is written below ``paths.out``::

    config.yaml                      resolved configuration
    splits/<subtask>/                train/dev split (only without paths.dev)
    models/<subtask>/<name>.json     one model per feature space
    probs/<subtask>/<split>_<name>   per-model probabilities
    alpha/alpha_table.csv, alpha.json
    predictions/<subtask>/<split>    ensemble labels (+ _probs, _gated)
    reports/<subtask>/<system>       per-label / per-language reports
    reports/audit.json               cross-task consistency before/after gating
    reports/<subtask>/*.svg          charts
    summary.json, summary.md

Outputs contain no timestamps or absolute state, so rerunning with the
same configuration reproduces them byte for byte.  A failing stage raises
:class:`StageError` naming it; files written so far are kept.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import logging
import warnings
from pathlib import Path
from typing import Mapping

import numpy as np

from . import config as config_mod
from .corpus import Dataset, LabelMatrix, Subtask, load_dataset, write_label_matrix
from .ensemble import (EnsembleConfig, ProbMatrix, apply_threshold, combine, grid_search_alpha,
                       write_prob_matrix)
from .evaluation import (POOLED, EmptyIntersection, consistency_audit, gate, per_language_report,
                         reports_to_dict, write_json, write_reports_csv)
from .stratify import split_jointly, write_split
from .svg import bar_chart, write_svg
from .trainer import predict_proba, save_model, train

__all__ = ["STAGES", "StageError", "run_pipeline", "render_charts"]

log = logging.getLogger(__name__)

STAGES = ("split", "train", "predict", "tune-alpha", "ensemble", "evaluate", "audit", "report")
ENSEMBLE = "ensemble"


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


@contextlib.contextmanager
def _stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


def _path(template: str | None, sub: Subtask) -> Path | None:
    if template is None:
        return None
    return Path(template.replace("{subtask}", sub.value))


def _subtasks(cfg: Mapping) -> list[Subtask]:
    if cfg["subtask"] is not None:
        return [Subtask.parse(cfg["subtask"])]
    chosen = {Subtask.parse(s) for s in cfg["pipeline"]["subtasks"]}
    return [s for s in Subtask if s in chosen]


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _check_paths(cfg: Mapping, subtasks) -> None:
    if cfg["paths"]["train"] is None:
        raise config_mod.ConfigError("paths.train is required")
    if len(cfg["features"]) != 2:
        raise config_mod.ConfigError("the ensemble needs exactly two feature spaces")
    for key in ("train", "dev", "test"):
        for sub in subtasks:
            p = _path(cfg["paths"][key], sub)
            if p is not None and not p.is_file():
                raise FileNotFoundError(f"paths.{key}: {p} does not exist")


def _split_stage(cfg, subtasks, out: Path) -> dict[Subtask, dict[str, Dataset | None]]:
    data: dict[Subtask, dict[str, Dataset | None]] = {}
    for sub in subtasks:
        data[sub] = {
            "train": load_dataset(_path(cfg["paths"]["train"], sub), sub, partition="train"),
            "dev": None, "test": None,
        }
        for key in ("dev", "test"):
            p = _path(cfg["paths"][key], sub)
            if p is not None:
                data[sub][key] = load_dataset(p, sub, partition=key)
    if cfg["paths"]["dev"] is None:
        spec = config_mod.split_spec(cfg)
        if len(spec.ratios) > 3:
            raise ValueError("split.ratios: at most three subsets (train, dev, test)")
        if len(spec.ratios) == 3 and cfg["paths"]["test"] is not None:
            raise ValueError("split.ratios has a test share but paths.test is also set")
        splits = split_jointly([data[s]["train"] for s in subtasks], spec,
                               cfg["split"]["per_language"])
        for sub, (result, parts) in zip(subtasks, splits):
            write_split(result, parts, out / "splits" / sub.value, stem="split", format="jsonl")
            data[sub]["train"], data[sub]["dev"] = parts[0], parts[1]
            if len(parts) == 3:
                data[sub]["test"] = parts[2]
    return data


def _tune_stage(cfg, subtasks, probs, data, names, out: Path) -> dict[Subtask, float]:
    ens = cfg["ensemble"]
    if not ens["tune"]:
        return {s: float(ens["alpha"]) for s in subtasks}
    grid = config_mod.grid(cfg)
    a, b = names
    tables = {}
    for sub in subtasks:
        _, table = grid_search_alpha(probs[sub, a, "dev"], probs[sub, b, "dev"],
                                     data[sub]["dev"].gold, grid, float(ens["threshold"]))
        tables[sub] = [score for _, score in table]
    mean = [float(np.mean([tables[s][k] for s in subtasks])) for k in range(len(grid))]
    if ens["per_subtask"]:
        alphas = {s: grid[int(np.argmax(tables[s]))] for s in subtasks}
    else:
        shared = grid[int(np.argmax(mean))]       # argmax: first (smallest) alpha on ties
        alphas = {s: shared for s in subtasks}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha", *(s.value for s in subtasks), "mean"])
    for k, alpha in enumerate(grid):
        writer.writerow([repr(alpha), *(repr(tables[s][k]) for s in subtasks), repr(mean[k])])
    _write_text(out / "alpha" / "alpha_table.csv", buf.getvalue())
    write_json({"shared": not ens["per_subtask"], "grid": list(grid),
                "alpha": {s.value: alphas[s] for s in subtasks}}, out / "alpha" / "alpha.json")
    return alphas


def _brief(audit: dict) -> dict:
    return {k: audit[k] for k in ("violations", "n_audited", "rate")}


def _write_reports(reports, base: Path) -> dict:
    as_dict = reports_to_dict(reports)
    write_reports_csv(reports, base.with_suffix(".csv"))
    write_json(as_dict, base.with_suffix(".json"))
    return as_dict


def _reports(d: Dataset, pred: LabelMatrix, floor: float):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")        # languages absent from a small split
        return per_language_report(d.gold, pred.align(d.ids), d.posts, collapse_floor=floor)


def render_charts(title: str, systems: Mapping[str, Mapping], out_dir: str | Path,
                  stem: str = "") -> list[Path]:
    """Write per-label F1, PR-gap and per-language macro-F1 bar charts.

    ``systems`` maps a system name to a report dictionary as produced by
    :func:`polarkit.evaluation.reports_to_dict` (scope -> report).
    """
    out_dir = Path(out_dir)
    names = list(systems)
    if not names:
        return []
    pooled = {n: systems[n][POOLED] for n in names}
    labels = list(pooled[names[0]]["labels"])
    langs = sorted({scope for n in names for scope in systems[n] if scope != POOLED})
    prefix = f"{stem}_" if stem else ""
    charts = {
        "f1": bar_chart(f"{title}: per-label F1", labels,
                        {n: [pooled[n]["labels"][lab]["f1"] for lab in labels] for n in names},
                        (0.0, 1.0), "F1"),
        "pr_gap": bar_chart(f"{title}: recall - precision", labels,
                            {n: [pooled[n]["labels"][lab]["pr_gap"] for lab in labels] for n in names},
                            (-1.0, 1.0), "PR-gap"),
        "languages": bar_chart(f"{title}: macro-F1 per language", [*langs, POOLED],
                               {n: [systems[n].get(lang, {}).get("macro_f1", 0.0)
                                    for lang in [*langs, POOLED]] for n in names},
                               (0.0, 1.0), "macro-F1"),
    }
    paths = []
    for kind, svg in charts.items():
        path = out_dir / f"{prefix}{kind}.svg"
        write_svg(svg, path)
        paths.append(path)
    return paths


def _summary_md(summary: dict) -> str:
    lines = ["# Pipeline summary", ""]
    for sub, info in summary["subtasks"].items():
        lines.append(f"## {sub}")
        lines.append("")
        lines.append(f"- alpha: {info['alpha']}")
        if "eval_split" in info:
            lines.append(f"- evaluated on: {info['eval_split']}")
            lines.append("")
            lines.append("| system | macro-F1 |")
            lines.append("|---|---|")
            for system, score in info["macro_f1"].items():
                lines.append(f"| {system} | {score:.4f} |")
            if info.get("collapsed"):
                lines.append("")
                lines.append(f"- collapsed labels (ensemble): {', '.join(info['collapsed'])}")
        lines.append("")
    for split, audit in summary.get("audit", {}).items():
        lines.append(f"## consistency ({split})")
        lines.append("")
        lines.append(f"- violations before gating: {audit['before']['violations']} "
                     f"of {audit['before']['n_audited']}")
        if "after" in audit:
            lines.append(f"- violations after gating: {audit['after']['violations']}")
        lines.append("")
    return "\n".join(lines)


def run_pipeline(cfg: Mapping) -> dict:
    """Run every stage for the configured subtasks; returns the summary dict."""
    subtasks = _subtasks(cfg)
    _check_paths(cfg, subtasks)
    out = Path(cfg["paths"]["out"])
    fmt = cfg["format"]
    ext = "." + fmt
    spaces = config_mod.feature_spaces(cfg)
    names = list(spaces)
    tcfg = config_mod.train_config(cfg)
    threshold = float(cfg["ensemble"]["threshold"])
    _write_text(out / "config.yaml", config_mod.dump(cfg))

    with _stage("split"):
        data = _split_stage(cfg, subtasks, out)
    splits = ["dev"] + (["test"] if data[subtasks[0]]["test"] is not None else [])

    # preconditions of later stages, checked before any training
    if cfg["ensemble"]["tune"]:
        for sub in subtasks:
            if data[sub]["dev"].gold is None:
                raise StageError("tune-alpha", f"precondition: the {sub.value} dev set has no "
                                 "gold labels, which alpha tuning needs")

    models = {}
    with _stage("train"):
        if tcfg.mode == "mtl":
            for name, fs in spaces.items():
                val = ({s: data[s]["dev"] for s in subtasks}
                       if all(data[s]["dev"].gold is not None for s in subtasks) else None)
                model, _ = train({s: data[s]["train"] for s in subtasks}, val, tcfg, fs)
                save_model(model, out / "models" / f"mtl_{name}.json", source=name)
                for sub in subtasks:
                    models[sub, name] = model
        else:
            for sub in subtasks:
                dev = data[sub]["dev"]
                for name, fs in spaces.items():
                    val = dev if dev.gold is not None else None
                    model, _ = train(data[sub]["train"], val, tcfg, fs)
                    save_model(model, out / "models" / sub.value / f"{name}.json", source=name)
                    models[sub, name] = model

    probs: dict[tuple, ProbMatrix] = {}
    with _stage("predict"):
        for sub in subtasks:
            for split in splits:
                for name in names:
                    p = predict_proba(models[sub, name], data[sub][split].posts, sub, source=name)
                    write_prob_matrix(p, out / "probs" / sub.value / f"{split}_{name}{ext}", fmt)
                    probs[sub, name, split] = p

    with _stage("tune-alpha"):
        alphas = _tune_stage(cfg, subtasks, probs, data, names, out)

    labels: dict[tuple, LabelMatrix] = {}
    with _stage("ensemble"):
        for sub in subtasks:
            ens_cfg = EnsembleConfig(alphas[sub], threshold)
            for split in splits:
                p = combine(probs[sub, names[0], split], probs[sub, names[1], split], alphas[sub])
                write_prob_matrix(p, out / "predictions" / sub.value / f"{split}_probs{ext}", fmt)
                labels[sub, ENSEMBLE, split] = apply_threshold(p, ens_cfg)
                write_label_matrix(labels[sub, ENSEMBLE, split],
                                   out / "predictions" / sub.value / f"{split}{ext}", fmt)
                for name in names:
                    labels[sub, name, split] = apply_threshold(probs[sub, name, split], threshold)

    summary: dict = {"subtasks": {}, "alpha": {s.value: alphas[s] for s in subtasks}}
    eval_split = next((s for s in reversed(splits) if data[subtasks[0]][s].gold is not None), None)
    floor = float(cfg["report"]["collapse_floor"])
    all_reports: dict[Subtask, dict[str, dict]] = {}
    with _stage("evaluate"):
        for sub in subtasks:
            info: dict = {"alpha": alphas[sub]}
            summary["subtasks"][sub.value] = info
            d = data[sub][eval_split] if eval_split else None
            if d is None or d.gold is None:
                continue
            info["eval_split"] = eval_split
            info["macro_f1"] = {}
            all_reports[sub] = {}
            for system in (*names, ENSEMBLE):
                reports = _reports(d, labels[sub, system, eval_split], floor)
                all_reports[sub][system] = _write_reports(reports, out / "reports" / sub.value / system)
                info["macro_f1"][system] = reports[POOLED].macro_f1
            info["collapsed"] = all_reports[sub][ENSEMBLE][POOLED]["collapsed"]

    fine = [s for s in subtasks if s is not Subtask.DETECT]
    with _stage("audit"):
        if Subtask.DETECT in subtasks and fine:
            audits = {}
            for split in splits:
                pred1 = labels[Subtask.DETECT, ENSEMBLE, split]
                fine_preds = [labels[s, ENSEMBLE, split] for s in fine]
                try:
                    before = consistency_audit(pred1, *fine_preds[:2])
                except EmptyIntersection:
                    log.warning("detection and fine-grained %s predictions share no ids", split)
                    continue
                entry = {"before": before.to_dict()}
                if cfg["report"]["gate"]:
                    gated = [gate(pred1, m) for m in fine_preds]
                    for sub, g in zip(fine, gated):
                        labels[sub, "gated", split] = g
                        write_label_matrix(
                            g, out / "predictions" / sub.value / f"{split}_gated{ext}", fmt)
                    entry["after"] = consistency_audit(pred1, *gated[:2]).to_dict()
                audits[split] = entry
            write_json(audits, out / "reports" / "audit.json")
            summary["audit"] = {split: {when: _brief(a) for when, a in entry.items()}
                                for split, entry in audits.items()}
            for sub in fine:
                if sub not in all_reports or (sub, "gated", eval_split) not in labels:
                    continue
                reports = _reports(data[sub][eval_split], labels[sub, "gated", eval_split], floor)
                _write_reports(reports, out / "reports" / sub.value / "ensemble_gated")
                summary["subtasks"][sub.value]["macro_f1"]["ensemble_gated"] = reports[POOLED].macro_f1

    with _stage("report"):
        if cfg["report"]["charts"]:
            for sub, systems in all_reports.items():
                render_charts(sub.value, systems, out / "reports" / sub.value)
        write_json(summary, out / "summary.json")
        _write_text(out / "summary.md", _summary_md(summary))
    return summary
