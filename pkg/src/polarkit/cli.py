"""``polarkit`` command-line interface.

Every command accepts ``--config FILE`` (default ``$POLARKIT_CONFIG``), the
common flags ``--seed``, ``--subtask`` and ``--format``, and one
``--section.key VALUE`` override per configuration key.

Exit codes: 0 success, 2 usage error, 3 data error, 4 pipeline-stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import config as config_mod
from .ablation import run_loss_ablation
from .corpus import (CorpusError, Dataset, MalformedLabel, Subtask, dataset_stats, load_dataset,
                     load_label_matrix, reference_counts, validate_against_reference,
                     write_label_matrix)
from .ensemble import (EnsembleConfig, apply_threshold, combine, grid_search_alpha,
                       load_prob_matrix, write_prob_matrix)
from .evaluation import (POOLED, EvalError, consistency_audit, gate, per_language_report,
                         reports_to_dict, write_json, write_reports_csv)
from .pipeline import StageError, render_charts, run_pipeline
from .stratify import split_dataset, write_split
from .trainer import load_model, predict_proba, save_model, train

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_DATA", "EXIT_STAGE"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_STAGE = 0, 2, 3, 4
_COMMON = ("seed", "subtask", "format")
_PREFIX = "override:"

log = logging.getLogger("polarkit")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parser

def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    group = parent.add_argument_group("common options")
    group.add_argument("--config", metavar="FILE",
                       help=f"YAML configuration file (default: ${config_mod.ENV_VAR})")
    group.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                       help="random seed for splitting and training (config key: seed)")
    group.add_argument("--subtask", default=argparse.SUPPRESS,
                       choices=[s.value for s in Subtask] + ["1", "2", "3"],
                       help="subtask; inferred from label columns when omitted")
    group.add_argument("--format", default=argparse.SUPPRESS, choices=["csv", "jsonl"],
                       help="format of written label/probability files")
    group.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    overrides = parent.add_argument_group(
        "configuration overrides", "each value is parsed as YAML, e.g. --train.epochs 5")
    for key, default in config_mod.flatten(config_mod.DEFAULTS):
        if key in _COMMON:
            continue
        overrides.add_argument(f"--{key}", dest=_PREFIX + key, metavar="V",
                               default=argparse.SUPPRESS, help=f"(default: {default!r})".replace("%", "%%"))
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarkit", allow_abbrev=False,
                                     description="Multilingual polarization detection toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    parent = _common_parent()

    def add(name, help, func):
        p = sub.add_parser(name, help=help, description=help, parents=[parent], allow_abbrev=False)
        p.set_defaults(func=func)
        return p

    p = add("stats", "per-language label statistics", cmd_stats)
    p.add_argument("data", nargs="+", help="one or more labeled files (merged when several)")
    p.add_argument("--out", help="directory for stats.csv/stats.json (CSV to stdout if omitted)")
    p.add_argument("--reference", choices=["train", "dev", "test", "total", "merged"],
                   help="check per-language row counts against the reference table")

    p = add("split", "stratified train/dev split", cmd_split)
    p.add_argument("data")
    p.add_argument("--out", required=True, help="output directory")

    p = add("train", "train one linear model", cmd_train)
    p.add_argument("train")
    p.add_argument("--dev", help="labeled validation file (enables early stopping)")
    p.add_argument("--model", required=True, help="output model file (.json)")
    p.add_argument("--features", default=None, help="feature-space name from the config (default: first)")

    p = add("predict", "write probabilities for a data file", cmd_predict)
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", required=True, help="probability file")
    p.add_argument("--labels-out", help="also write thresholded labels here")

    p = add("tune-alpha", "grid-search the ensemble weight on labeled data", cmd_tune_alpha)
    p.add_argument("probs_a")
    p.add_argument("probs_b")
    p.add_argument("gold")
    p.add_argument("--out", required=True, help="directory for alpha_table.csv/alpha.json")

    p = add("ensemble", "combine two probability files and threshold", cmd_ensemble)
    p.add_argument("probs_a")
    p.add_argument("probs_b")
    p.add_argument("--out", required=True, help="label file (submission schema)")
    p.add_argument("--probs-out", help="also write the combined probabilities")
    p.add_argument("--alpha-file", help="alpha.json written by tune-alpha")

    p = add("evaluate", "per-label and per-language scores", cmd_evaluate)
    p.add_argument("gold", help="labeled data file (provides languages)")
    p.add_argument("pred", help="predicted label file")
    p.add_argument("--out", help="directory for report.csv/report.json")

    p = add("audit", "cross-task consistency of predictions", cmd_audit)
    p.add_argument("pred1", help="detection predictions")
    p.add_argument("fine", nargs="+", help="target-type and/or manifestation predictions")
    p.add_argument("--out", help="JSON report")

    p = add("gate", "zero fine-grained labels of non-polarized posts", cmd_gate)
    p.add_argument("pred1", help="detection predictions")
    p.add_argument("fine", help="fine-grained labels or probabilities")
    p.add_argument("--out", required=True)

    p = add("ablate-loss", "compare training objectives", cmd_ablate_loss)
    p.add_argument("train")
    p.add_argument("--dev", help="labeled validation file (split from train if omitted)")
    p.add_argument("--out", required=True, help="comparison table (.csv); details go to <out>.json")
    p.add_argument("--losses", nargs="+", choices=["bce", "focal", "wbce"],
                   help="shorthand for --ablate.losses")

    p = add("report", "SVG charts from evaluation reports", cmd_report)
    p.add_argument("reports", nargs="+", help="report.json files written by evaluate")
    p.add_argument("--names", nargs="+", help="system names (default: file stems)")
    p.add_argument("--title", default="report")
    p.add_argument("--out", required=True, help="output directory")

    add("pipeline", "run split, train, predict, tune-alpha, ensemble, evaluate, audit and report",
        cmd_pipeline)
    return parser


def _config(args) -> dict:
    overrides = {}
    for key, value in vars(args).items():
        if key.startswith(_PREFIX):
            overrides[key[len(_PREFIX):]] = config_mod.parse_value(value)
    for key in _COMMON:
        if key in vars(args):
            overrides[key] = getattr(args, key)
    return config_mod.load_config(args.config, overrides)


def _subtask(cfg, fallback=None) -> Subtask | None:
    if cfg["subtask"] is not None:
        return Subtask.parse(cfg["subtask"])
    return fallback


def _out_format(args) -> str | None:
    # explicit --format wins, otherwise the file extension decides
    return args.format if "format" in vars(args) else None


# ---------------------------------------------------------------------------
# commands

def cmd_stats(args, cfg) -> int:
    sub = _subtask(cfg)
    parts = [load_dataset(p, sub, partition="train") for p in args.data]
    d = parts[0] if len(parts) == 1 else Dataset.concat(parts, partition="merged")
    report = dataset_stats(d)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / "stats.csv")
        report.to_json(out / "stats.json")
    else:
        header = ["lang", "label", "n_rows", "n_positive", "positive_rate"]
        print(",".join(header))
        for row in report.to_rows():
            print(",".join(repr(row[h]) if h == "positive_rate" else str(row[h]) for h in header))
    print(f"# {d.subtask.value}: {report.total} rows, {len(report.languages)} languages, "
          f"{d.dropped} dropped")
    for label, s in report.summary.items():
        print(f"# {label}: min={s['min']:.4f} median={s['median']:.4f} max={s['max']:.4f} "
              f"pooled={s['pooled']:.4f}")
    if args.reference:
        mismatches = validate_against_reference(d, reference_counts(args.reference))
        for m in mismatches:
            print(f"# mismatch {m.key}: expected {m.expected}, observed {m.observed}",
                  file=sys.stderr)
        if mismatches:
            return EXIT_DATA
    return EXIT_OK


def cmd_split(args, cfg) -> int:
    d = load_dataset(args.data, _subtask(cfg))
    result, parts = split_dataset(d, config_mod.split_spec(cfg), cfg["split"]["per_language"])
    paths = write_split(result, parts, args.out, stem="split", format="jsonl")
    for path, part in zip(paths, parts):
        print(f"{path}: {len(part)} rows")
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    spaces = config_mod.feature_spaces(cfg)
    name = args.features or next(iter(spaces))
    if name not in spaces:
        raise UsageError(f"unknown feature space {name!r}; known: {', '.join(spaces)}")
    fs = spaces[name]
    tcfg = config_mod.train_config(cfg)
    if tcfg.mode == "mtl":
        subs = ([Subtask.parse(cfg["subtask"])] if cfg["subtask"] is not None
                else [Subtask.parse(s) for s in cfg["pipeline"]["subtasks"]])
        tr = {s: load_dataset(args.train, s) for s in subs}
        dv = {s: load_dataset(args.dev, s, partition="dev") for s in subs} if args.dev else None
    else:
        tr = load_dataset(args.train, _subtask(cfg))
        dv = load_dataset(args.dev, tr.subtask, partition="dev") if args.dev else None
    model, history = train(tr, dv, tcfg, fs)
    save_model(model, args.model, source=name)
    last = history[model.best_epoch_ - 1] if history else {}
    score = last.get("val_score", last.get("val_macro_f1"))
    msg = f"best epoch {model.best_epoch_} of {len(history)}"
    if score is not None:
        msg += f", validation macro-F1 {score:.4f}"
    print(f"{args.model}: {msg}")
    return EXIT_OK


def cmd_predict(args, cfg) -> int:
    model = load_model(args.model)
    sub = _subtask(cfg, Subtask.parse(model.subtask) if getattr(model, "subtask", None) else None)
    if sub is None:
        raise UsageError("multi-task model: pass --subtask")
    d = load_dataset(args.data, sub, partition="test")
    p = predict_proba(model, d.posts, sub, source=getattr(model, "source_", "") or Path(args.model).stem)
    write_prob_matrix(p, args.out, _out_format(args))
    if args.labels_out:
        labels = apply_threshold(p, float(cfg["ensemble"]["threshold"]))
        write_label_matrix(labels, args.labels_out, _out_format(args))
    print(f"{args.out}: {len(p)} rows")
    return EXIT_OK


def cmd_tune_alpha(args, cfg) -> int:
    a = load_prob_matrix(args.probs_a, _subtask(cfg))
    b = load_prob_matrix(args.probs_b, a.subtask)
    gold = load_label_matrix(args.gold, a.subtask)
    best, table = grid_search_alpha(a, b, gold, config_mod.grid(cfg),
                                    float(cfg["ensemble"]["threshold"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "alpha_table.csv").write_text(
        "alpha,macro_f1\n" + "".join(f"{x!r},{s!r}\n" for x, s in table), encoding="utf-8")
    write_json({"alpha": best, "subtask": a.subtask.value, "sources": [a.source, b.source],
                "table": [[x, s] for x, s in table]}, out / "alpha.json")
    print(f"best alpha {best} (macro-F1 {dict(table)[best]:.4f})")
    return EXIT_OK


def cmd_ensemble(args, cfg) -> int:
    a = load_prob_matrix(args.probs_a, _subtask(cfg))
    b = load_prob_matrix(args.probs_b, a.subtask)
    alpha = float(cfg["ensemble"]["alpha"])
    if args.alpha_file:
        doc = json.loads(Path(args.alpha_file).read_text(encoding="utf-8"))
        alpha = doc["alpha"] if not isinstance(doc["alpha"], dict) else doc["alpha"][a.subtask.value]
    p = combine(a, b, float(alpha))
    labels = apply_threshold(p, EnsembleConfig(float(alpha), float(cfg["ensemble"]["threshold"])))
    write_label_matrix(labels, args.out, _out_format(args))
    if args.probs_out:
        write_prob_matrix(p, args.probs_out, _out_format(args))
    print(f"{args.out}: {len(labels)} rows, alpha {alpha}")
    return EXIT_OK


def cmd_evaluate(args, cfg) -> int:
    pred = load_label_matrix(args.pred, _subtask(cfg))
    d = load_dataset(args.gold, pred.subtask, partition="dev")
    if d.gold is None:
        raise CorpusError(f"{args.gold}: no gold labels")
    reports = per_language_report(d.gold, pred, d.posts,
                                  collapse_floor=float(cfg["report"]["collapse_floor"]))
    if args.out:
        out = Path(args.out)
        write_reports_csv(reports, out / "report.csv")
        write_json(reports_to_dict(reports), out / "report.json")
    for scope, rep in reports.items():
        extra = f"  collapsed: {', '.join(rep.collapsed)}" if rep.collapsed else ""
        print(f"{scope}\tmacro-F1 {rep.macro_f1:.4f}\tn={rep.n_rows}{extra}")
    return EXIT_OK


def cmd_audit(args, cfg) -> int:
    if len(args.fine) > 2:
        raise UsageError("audit takes at most two fine-grained prediction files")
    pred1 = load_label_matrix(args.pred1, Subtask.DETECT)
    fine = [load_label_matrix(p) for p in args.fine]
    report = consistency_audit(pred1, *fine)
    if args.out:
        write_json(report.to_dict(), args.out)
    print(f"violations {report.violations} of {report.n_audited} ({report.rate:.4f}); "
          f"type {report.type_violations}/{report.type_audited}, "
          f"manifestation {report.manifest_violations}/{report.manifest_audited}")
    return EXIT_OK


def cmd_gate(args, cfg) -> int:
    pred1 = load_label_matrix(args.pred1, Subtask.DETECT)
    try:
        fine = load_label_matrix(args.fine, _subtask(cfg))
        gated = gate(pred1, fine)
        write_label_matrix(gated, args.out, _out_format(args))
    except MalformedLabel:
        fine = load_prob_matrix(args.fine, _subtask(cfg))
        gated = gate(pred1, fine)
        write_prob_matrix(gated, args.out, _out_format(args))
    changed = int((fine.values != gated.values).any(axis=1).sum())
    print(f"{args.out}: {len(gated)} rows, {changed} zeroed")
    return EXIT_OK


def cmd_ablate_loss(args, cfg) -> int:
    losses = args.losses or cfg["ablate"]["losses"]
    tr = load_dataset(args.train, _subtask(cfg))
    if args.dev:
        dv = load_dataset(args.dev, tr.subtask, partition="dev")
    else:
        _, (tr, dv) = split_dataset(tr, config_mod.split_spec(cfg), cfg["split"]["per_language"])
    spaces = config_mod.feature_spaces(cfg)
    result = run_loss_ablation(tr, dv, losses, cfg["ablate"]["seeds"],
                               config_mod.train_config(cfg), next(iter(spaces.values())))
    out = Path(args.out)
    result.write_csv(out)
    write_json(result.to_dict(), out.with_name(out.name + ".json"))
    sys.stdout.write(result.to_csv())
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    names = args.names or [Path(p).stem for p in args.reports]
    if len(names) != len(args.reports):
        raise UsageError("need one name per report")
    if len(set(names)) != len(names):
        raise UsageError("report names must be distinct; pass --names")
    systems = {}
    for name, path in zip(names, args.reports):
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if POOLED not in doc:
            raise CorpusError(f"{path}: not a report written by evaluate")
        systems[name] = doc
    for path in render_charts(args.title, systems, args.out):
        print(path)
    return EXIT_OK


def cmd_pipeline(args, cfg) -> int:
    summary = run_pipeline(cfg)
    for sub, info in summary["subtasks"].items():
        scores = ", ".join(f"{k} {v:.4f}" for k, v in info.get("macro_f1", {}).items())
        print(f"{sub}: alpha {info['alpha']}" + (f"; macro-F1 {scores}" if scores else ""))
    print(f"outputs in {cfg['paths']['out']}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except (UsageError, config_mod.ConfigError) as exc:
        print(f"polarkit {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"polarkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (CorpusError, EvalError, OSError, ValueError, KeyError) as exc:
        print(f"polarkit {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
