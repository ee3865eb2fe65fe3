import re
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import EXAMPLE_LABELS, EXAMPLE_TEXTS, write_csv  # noqa: E402
from polarkit.corpus import Subtask  # noqa: E402


@pytest.fixture
def example_files(tmp_path):
    """Per subtask: (input file with "--" labels, output labels, text plus labels)."""
    out = {}
    for sub in Subtask:
        labels = list(sub.labels)
        inp = write_csv(tmp_path / f"{sub.value}_input.csv", ["id", "text", *labels],
                        [[i, t, *["--"] * len(labels)] for i, t in EXAMPLE_TEXTS.items()])
        outp = write_csv(tmp_path / f"{sub.value}_output.csv", ["id", *labels],
                         [[i, *EXAMPLE_LABELS[sub][i]] for i in EXAMPLE_TEXTS])
        full = write_csv(tmp_path / f"{sub.value}_train.csv", ["id", "text", *labels],
                         [[i, t, *EXAMPLE_LABELS[sub][i]] for i, t in EXAMPLE_TEXTS.items()])
        out[sub] = (inp, outp, full)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that was run."""
    outcomes = {}
    for kind in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(kind, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", getattr(rep, "nodeid", ""))
            if m:
                n = int(m.group(1))
                # a failing setup/teardown outranks a passing call
                if outcomes.get(n) in (None, "passed"):
                    outcomes[n] = kind
    if not outcomes:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for n in sorted(outcomes):
        status = "PASS" if outcomes[n] == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {n:>2}: {CRITERIA.get(n, '')}")
