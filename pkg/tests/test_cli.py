import csv
import json
import statistics

import numpy as np
import pytest

import oracles
from helpers import write_csv
from polarkit import config as C
from polarkit.cli import EXIT_DATA, EXIT_OK, EXIT_STAGE, EXIT_USAGE, build_parser, main
from polarkit.corpus import Subtask, load_dataset
from polarkit.synthetic import bundled_corpus_path, planted_corpus, write_wide

QUICK = ["--train.epochs", "6", "--features.a.n_features", "16384",
         "--features.b.n_features", "16384", "-q"]


@pytest.fixture(autouse=True)
def _no_env_config(monkeypatch):
    monkeypatch.delenv(C.ENV_VAR, raising=False)


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _detect_file(tmp_path, langs=("eng", "spa")):
    rows, k = [], 0
    for lang in langs:
        for j in range(8):
            rows.append([f"{lang}_{k:03d}", f"text {k}", int(j < 3 if lang == "eng" else j < 6)])
            k += 1
    return write_csv(tmp_path / "detect.csv", ["id", "text", "Polarization"], rows)


# --- parser -------------------------------------------------------------------------

def test_help_lists_every_flag(capsys):
    for cmd in ("stats", "train", "pipeline", "ablate-loss"):
        code, out, _ = _run([cmd, "--help"], capsys)
        assert code == EXIT_OK
        for key, _ in C.flatten(C.DEFAULTS):
            assert f"--{key}" in out
        for flag in ("--config", "--seed", "--subtask", "--format"):
            assert flag in out


def test_every_command_registered():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {"stats", "split", "train", "predict", "tune-alpha", "ensemble",
                                "evaluate", "audit", "gate", "ablate-loss", "report", "pipeline"}


def test_unknown_flag_is_usage_error(tmp_path, capsys):
    path = _detect_file(tmp_path)
    assert _run(["stats", path, "--no-such-flag"], capsys)[0] == EXIT_USAGE
    # no abbreviations either
    assert _run(["stats", path, "--su", "detect"], capsys)[0] == EXIT_USAGE


def test_bad_override_value_is_usage_error(tmp_path, capsys):
    path = _detect_file(tmp_path)
    code, _, err = _run(["stats", path, "--train.epochs", "many"], capsys)
    assert code == EXIT_USAGE and "train.epochs" in err


def test_config_from_environment(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("train: {epochs: -3}\n")
    monkeypatch.setenv(C.ENV_VAR, str(cfg))
    code, _, err = _run(["stats", _detect_file(tmp_path)], capsys)
    assert code == EXIT_USAGE and "epochs" in err


# --- stats ------------------------------------------------------------------------------

def test_stats_one_row_per_language(tmp_path, capsys):
    code, out, _ = _run(["stats", _detect_file(tmp_path)], capsys)
    assert code == EXIT_OK
    rows = [l for l in out.splitlines() if l and not l.startswith("#")]
    assert rows[0] == "lang,label,n_rows,n_positive,positive_rate"
    assert [r.split(",")[0] for r in rows[1:]] == ["eng", "spa"]
    assert rows[1].split(",")[2:4] == ["8", "3"]


def test_stats_merged_summary_line(tmp_path, capsys):
    a = _detect_file(tmp_path / "a", ("eng", "spa"))
    b = write_csv(tmp_path / "b.csv", ["id", "text", "Polarization"],
                  [["deu_1", "x", 1], ["deu_2", "y", 0], ["eng_900", "z", 1]])
    code, out, _ = _run(["stats", a, b], capsys)
    assert code == EXIT_OK
    # recompute per-language rates straight from the files
    counts = {}
    for path in (a, b):
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                n, p = counts.get(row["id"][:3], (0, 0))
                counts[row["id"][:3]] = (n + 1, p + int(row["Polarization"]))
    rates = [p / n for n, p in counts.values()]
    line = next(l for l in out.splitlines() if l.startswith("# Polarization:"))
    assert (f"min={min(rates):.4f} median={statistics.median(rates):.4f} "
            f"max={max(rates):.4f}") in line


def test_stats_unknown_language_names_code(tmp_path, capsys):
    path = write_csv(tmp_path / "bad.csv", ["id", "text", "Polarization"],
                     [["eng_1", "a", 1], ["xyz_2", "b", 0]])
    code, _, err = _run(["stats", path], capsys)
    assert code == EXIT_DATA and "xyz" in err


def test_stats_missing_file_is_data_error(tmp_path, capsys):
    assert _run(["stats", tmp_path / "nope.csv"], capsys)[0] == EXIT_DATA


def test_stats_writes_files(tmp_path, capsys):
    code, _, _ = _run(["stats", _detect_file(tmp_path), "--out", tmp_path / "s"], capsys)
    assert code == EXIT_OK
    assert (tmp_path / "s" / "stats.csv").is_file()
    assert json.loads((tmp_path / "s" / "stats.json").read_text())


# --- individual commands chained --------------------------------------------------

@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    """split -> train (two feature spaces) -> predict for the target-type subtask."""
    base = tmp_path_factory.mktemp("chain")
    data = base / "corpus.jsonl"
    write_wide(planted_corpus(160, seed=2, langs=("eng", "spa")), data)
    common = ["--subtask", "type", *QUICK]
    assert main(["split", str(data), "--out", str(base / "split"), *common]) == 0
    tr, dv = base / "split" / "split_train.jsonl", base / "split" / "split_dev.jsonl"
    for name in ("a", "b"):
        assert main(["train", str(tr), "--dev", str(dv), "--model", str(base / f"{name}.json"),
                     "--features", name, *common]) == 0
        assert main(["predict", str(base / f"{name}.json"), str(dv),
                     "--out", str(base / f"p_{name}.csv"), *common]) == 0
    return base, dv


def test_split_outputs(chain):
    base, dv = chain
    manifest = json.loads((base / "split" / "split_manifest.json").read_text())
    assert sum(manifest["sizes"]) == 160
    assert len(load_dataset(dv, Subtask.TYPE)) == manifest["sizes"][1]


def test_chain_tune_ensemble_evaluate(chain, capsys):
    base, dv = chain
    common = ["--subtask", "type", "-q"]
    gold = base / "gold.csv"
    d = load_dataset(dv, Subtask.TYPE)
    write_csv(gold, ["id", *Subtask.TYPE.labels], [[i, *r] for i, r in zip(d.ids, d.gold.values)])
    assert _run(["tune-alpha", base / "p_a.csv", base / "p_b.csv", gold,
                 "--out", base / "tune", *common], capsys)[0] == 0
    alpha = json.loads((base / "tune" / "alpha.json").read_text())["alpha"]
    code, out, _ = _run(["ensemble", base / "p_a.csv", base / "p_b.csv", "--out", base / "ens.csv",
                         "--alpha-file", base / "tune" / "alpha.json", *common], capsys)
    assert code == 0 and f"alpha {alpha}" in out
    code, out, _ = _run(["evaluate", dv, base / "ens.csv", "--out", base / "rep", *common], capsys)
    assert code == 0
    with open(base / "ens.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["id", *Subtask.TYPE.labels]
    pred = {r[0]: [int(v) for v in r[1:]] for r in rows[1:]}
    expected = oracles.macro_f1(d.gold.values.tolist(), [pred[i] for i in d.ids], "labelwise")
    rep = json.loads((base / "rep" / "report.json").read_text())
    assert rep["pooled"]["macro_f1"] == pytest.approx(expected, abs=1e-12)
    assert expected > 0.9
    assert _run(["report", base / "rep" / "report.json", "--out", base / "charts"], capsys)[0] == 0
    assert list((base / "charts").glob("*.svg"))


def test_chain_rerun_identical(chain, capsys):
    base, dv = chain
    argv = ["predict", base / "a.json", dv, "--out", base / "again.csv", "--subtask", "type", "-q"]
    assert _run(argv, capsys)[0] == 0
    assert (base / "again.csv").read_bytes() == (base / "p_a.csv").read_bytes()


def test_audit_and_gate_commands(tmp_path, capsys):
    ids = ["eng_1", "eng_2", "eng_3"]
    p1 = write_csv(tmp_path / "p1.csv", ["id", "Polarization"], [[i, v] for i, v in zip(ids, [0, 1, 0])])
    p2 = write_csv(tmp_path / "p2.csv", ["id", *Subtask.TYPE.labels],
                   [["eng_1", 1, 0, 0, 0, 0], ["eng_2", 1, 0, 0, 0, 0], ["eng_3", 0, 0, 0, 0, 0]])
    code, out, _ = _run(["audit", p1, p2, "--out", tmp_path / "audit.json"], capsys)
    assert code == 0 and out.startswith("violations 1 of 3")
    code, out, _ = _run(["gate", p1, p2, "--out", tmp_path / "g.csv"], capsys)
    assert code == 0 and "1 zeroed" in out
    code, out, _ = _run(["audit", p1, tmp_path / "g.csv"], capsys)
    assert out.startswith("violations 0 of 3")
    # probabilities are gated too
    probs = write_csv(tmp_path / "pp.csv", ["id", *Subtask.TYPE.labels],
                      [[i, 0.9, 0.1, 0.2, 0.3, 0.4] for i in ids])
    assert _run(["gate", p1, probs, "--out", tmp_path / "gp.csv"], capsys)[0] == 0
    with open(tmp_path / "gp.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    assert [float(v) for v in rows[0][1:]] == [0.0] * 5
    assert float(rows[1][1]) == 0.9


def test_ablate_loss_command(tmp_path, capsys):
    data = tmp_path / "c.jsonl"
    write_wide(planted_corpus(120, seed=1, langs=("eng", "spa")), data)
    out = tmp_path / "abl.csv"
    code, stdout, _ = _run(["ablate-loss", data, "--out", out, "--losses", "bce", "wbce",
                            "--subtask", "type", *QUICK], capsys)
    assert code == 0
    header = out.read_text().splitlines()[0]
    assert header == "lang,bce,wbce,delta"
    assert stdout == out.read_text()
    assert json.loads((tmp_path / "abl.csv.json").read_text())["losses"] == ["bce", "wbce"]


# --- pipeline -----------------------------------------------------------------------

def test_pipeline_missing_dev_gold_names_stage(tmp_path, capsys):
    dev = tmp_path / "dev.csv"
    write_csv(dev, ["id", "text"], [["eng_1", "a b"], ["eng_2", "c d"]])
    code, _, err = _run(["pipeline", "--paths.train", bundled_corpus_path(), "--paths.dev", dev,
                         "--paths.out", tmp_path / "o", "--subtask", "detect", *QUICK], capsys)
    assert code == EXIT_STAGE and "tune-alpha" in err
    # the resolved config was written before the failure and is kept
    assert (tmp_path / "o" / "config.yaml").is_file()


def test_pipeline_requires_train_path(tmp_path, capsys):
    code, _, err = _run(["pipeline", "--paths.out", tmp_path / "o", *QUICK], capsys)
    assert code == EXIT_USAGE and "paths.train" in err


def test_pipeline_fixed_alpha_without_dev_gold(tmp_path, capsys):
    dev = tmp_path / "dev.csv"
    write_csv(dev, ["id", "text"], [["eng_1", "a b"], ["eng_2", "c d"]])
    code, out, _ = _run(["pipeline", "--paths.train", bundled_corpus_path(), "--paths.dev", dev,
                         "--paths.out", tmp_path / "o", "--subtask", "detect",
                         "--ensemble.tune", "false", *QUICK], capsys)
    assert code == EXIT_OK and "alpha 0.7" in out
    with open(tmp_path / "o" / "predictions" / "detect" / "dev.csv", newline="") as fh:
        assert [r[0] for r in csv.reader(fh)] == ["id", "eng_1", "eng_2"]


def test_pipeline_small_run_artifacts(tmp_path, capsys):
    out = tmp_path / "o"
    code, _, _ = _run(["pipeline", "--paths.train", bundled_corpus_path(), "--paths.out", out,
                       *QUICK], capsys)
    assert code == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["subtasks"]) == {"detect", "type", "manifest"}
    for sub in ("detect", "type", "manifest"):
        assert (out / "models" / sub / "a.json").is_file()
        assert (out / "probs" / sub / "dev_b.csv").is_file()
        assert (out / "predictions" / sub / "dev.csv").is_file()
    assert (out / "alpha" / "alpha_table.csv").is_file()
    audit = json.loads((out / "reports" / "audit.json").read_text())
    assert audit["dev"]["after"]["violations"] == 0
    assert summary["audit"]["dev"]["after"]["violations"] == 0
    # ensemble labels agree with thresholding the stored combined probabilities
    with open(out / "predictions" / "type" / "dev_probs.csv", newline="") as fh:
        probs = np.array([[float(v) for v in r[1:]] for r in list(csv.reader(fh))[1:]])
    with open(out / "predictions" / "type" / "dev.csv", newline="") as fh:
        labels = np.array([[int(v) for v in r[1:]] for r in list(csv.reader(fh))[1:]])
    assert np.array_equal(labels, (probs >= 0.5).astype(int))
