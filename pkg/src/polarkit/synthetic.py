"""Seeded synthetic corpora with planted trigger words.

Every label owns a trigger token built from characters that never occur in
filler text, so its character n-grams are unique to it.  A post carries
the triggers of its positive labels plus random filler words.  Labels are
hierarchically coherent: fine-grained labels are only ever positive on
polarized posts.

``planted_corpus`` produces the easy, linearly separable corpus used for
end-to-end runs; ``imbalanced_corpus`` produces a noisy multi-label
corpus with low positive rates for loss comparisons.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import MANIFEST_EXCLUDED, Dataset, LabelMatrix, Post, Subtask

__all__ = [
    "ALL_LABELS",
    "trigger_token",
    "planted_corpus",
    "imbalanced_corpus",
    "write_wide",
    "bundled_corpus_path",
]

ALL_LABELS = tuple(lab for s in Subtask for lab in s.labels)
_FILLER_ALPHABET = "abcdefghijklmnop"


def trigger_token(label: str) -> str:
    """Deterministic 5-character trigger for a label name.

    Label ``k`` owns the uppercase letters ``2k`` and ``2k + 1``, so no
    character n-gram is shared between two triggers or with filler text.
    """
    k = ALL_LABELS.index(label)
    a, b = chr(ord("A") + 2 * k), chr(ord("A") + 2 * k + 1)
    return a + b + a + a + b


def _filler(rng: np.random.Generator, n_words: int, vocab: Sequence[str]) -> list[str]:
    return [vocab[i] for i in rng.integers(len(vocab), size=n_words)]


def _vocab(rng: np.random.Generator, size: int = 400) -> list[str]:
    letters = np.array(list(_FILLER_ALPHABET))
    words = set()
    while len(words) < size:
        words.add("".join(letters[rng.integers(len(letters), size=rng.integers(3, 8))]))
    return sorted(words)


def _compose(rng, vocab, triggers: list[str], n_filler: tuple[int, int]) -> str:
    words = _filler(rng, int(rng.integers(*n_filler)), vocab) + triggers
    return " ".join(words[i] for i in rng.permutation(len(words)))


def _to_datasets(ids, langs, texts, Y, partition: str) -> dict[Subtask, Dataset]:
    posts = tuple(Post(i, l, t) for i, l, t in zip(ids, langs, texts))
    out = {}
    col = 0
    for sub in Subtask:
        block = Y[:, col:col + sub.n_labels]
        col += sub.n_labels
        keep = [k for k, p in enumerate(posts)
                if not (sub is Subtask.MANIFEST and p.lang in MANIFEST_EXCLUDED)]
        sub_posts = tuple(posts[k] for k in keep)
        gold = LabelMatrix(sub, tuple(p.id for p in sub_posts), block[keep].astype(np.int8))
        out[sub] = Dataset(sub, sub_posts, gold, partition)
    return out


def _ids(rng, langs: Sequence[str], n: int) -> tuple[list[str], list[str]]:
    lang_of = [langs[k % len(langs)] for k in range(n)]
    seen: set[str] = set()
    ids = []
    for lang in lang_of:
        while True:
            candidate = f"{lang}_{int(rng.integers(16 ** 12)):012x}"
            if candidate not in seen:
                break
        seen.add(candidate)
        ids.append(candidate)
    return ids, lang_of


def planted_corpus(n: int = 200, langs: Sequence[str] = ("eng", "spa", "deu"), seed: int = 0,
                   polar_rate: float = 0.5, fine_rate: float = 0.35,
                   n_filler: tuple[int, int] = (4, 10), partition: str = "train"
                   ) -> dict[Subtask, Dataset]:
    """Linearly separable corpus covering all three subtasks.

    A polarized post gets the detection trigger and, for every fine label
    drawn positive (rate ``fine_rate``), that label's trigger.  Every
    polarized post has at least one target type.

    Returns
    -------
    dict mapping :class:`Subtask` to :class:`Dataset`, sharing post ids.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    vocab = _vocab(rng)
    ids, lang_of = _ids(rng, langs, n)
    n_type = Subtask.TYPE.n_labels
    Y = np.zeros((n, len(ALL_LABELS)), dtype=np.int8)
    texts = []
    for k in range(n):
        if rng.random() < polar_rate:
            Y[k, 0] = 1
            fine = (rng.random(len(ALL_LABELS) - 1) < fine_rate).astype(np.int8)
            if not fine[:n_type].any():
                fine[int(rng.integers(n_type))] = 1
            Y[k, 1:] = fine
        triggers = [trigger_token(ALL_LABELS[j]) for j in np.flatnonzero(Y[k])]
        texts.append(_compose(rng, vocab, triggers, n_filler))
    return _to_datasets(ids, lang_of, texts, Y, partition)


def imbalanced_corpus(n: int = 2000, rates: Sequence[float] = (0.01, 0.02, 0.03, 0.04, 0.05),
                      seed: int = 0, trigger_prob: float = 0.8, leak_prob: float = 0.005,
                      langs: Sequence[str] = ("eng", "spa", "deu"),
                      n_filler: tuple[int, int] = (6, 14), partition: str = "train") -> Dataset:
    """Noisy multi-label target-type corpus with low positive rates.

    Label ``j`` is positive with probability ``rates[j]``.  A positive
    post shows the label's trigger with probability ``trigger_prob``; any
    post shows it spuriously with probability ``leak_prob``.
    """
    sub = Subtask.TYPE
    if len(rates) != sub.n_labels:
        raise ValueError(f"need {sub.n_labels} rates")
    rng = np.random.Generator(np.random.PCG64(seed))
    vocab = _vocab(rng)
    ids, lang_of = _ids(rng, langs, n)
    Y = (rng.random((n, sub.n_labels)) < np.asarray(rates)).astype(np.int8)
    shown = (Y.astype(bool) & (rng.random(Y.shape) < trigger_prob)) | (rng.random(Y.shape) < leak_prob)
    texts = [_compose(rng, vocab, [trigger_token(sub.labels[j]) for j in np.flatnonzero(shown[k])],
                      n_filler) for k in range(n)]
    posts = tuple(Post(i, l, t) for i, l, t in zip(ids, lang_of, texts))
    return Dataset(sub, posts, LabelMatrix(sub, tuple(ids), Y), partition)


def write_wide(datasets: dict[Subtask, Dataset], path: str | Path) -> None:
    """Write one JSONL file holding the union of posts and all label columns.

    Labels of a subtask that does not cover a post are written as ``"--"``.
    """
    base = datasets[Subtask.DETECT]
    rows = {p.id: {"id": p.id, "lang": p.lang, "text": p.text} for p in base.posts}
    for sub in Subtask:
        d = datasets[sub]
        index = {i: k for k, i in enumerate(d.ids)}
        for pid, rec in rows.items():
            k = index.get(pid)
            for j, lab in enumerate(sub.labels):
                rec[lab] = int(d.gold.values[k, j]) if k is not None else "--"
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows.values()),
                          encoding="utf-8")


def bundled_corpus_path() -> Path:
    """Path of the packaged 200-row planted corpus (seed 0)."""
    return Path(str(resources.files("polarkit") / "data" / "synthetic_200.jsonl"))
