import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from helpers import label_matrix
from polarkit.corpus import Dataset, Post, Subtask
from polarkit.stratify import (EmptyClassWarning, IterativeStratifiedSplit, SplitSpec,
                               iterative_stratification, iterative_stratified_split,
                               random_split, split_dataset, split_jointly,
                               stratified_split_binary, write_split)
from polarkit.synthetic import planted_corpus


def _dataset(sub, Y, langs=None):
    Y = np.asarray(Y)
    langs = langs or ["eng"] * len(Y)
    posts = tuple(Post(f"{l}_{k:04d}", l, f"post {k}") for k, l in enumerate(langs))
    return Dataset(Subtask.parse(sub), posts, label_matrix(sub, Y, ids=[p.id for p in posts]))


@pytest.mark.parametrize("seed", [0, 1, 7, 42, 2025])
def test_binary_hundred_posts_forty_positive(seed):
    y = np.zeros((100, 1), dtype=int)
    y[:40] = 1
    res = stratified_split_binary(_dataset("detect", y), SplitSpec((0.85, 0.15), seed))
    pos = y[:, 0] == 1
    assert int((res.assignment[pos] == 0).sum()) == 34
    assert int((res.assignment[pos] == 1).sum()) == 6
    assert res.sizes() == [85, 15]


def test_binary_single_class_is_exact_random_split():
    d = _dataset("detect", np.zeros((20, 1), dtype=int))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = stratified_split_binary(d, SplitSpec((0.85, 0.15), 3))
    assert res.sizes() == [17, 3]
    assert any(issubclass(w.category, EmptyClassWarning) for w in caught)


@settings(max_examples=60, deadline=None)
@given(y=arrays(np.int8, st.integers(2, 60), elements=st.integers(0, 1)),
       seed=st.integers(0, 10_000))
def test_binary_counts_within_one_per_class(y, seed):
    d = _dataset("detect", y.reshape(-1, 1))
    spec = SplitSpec((0.7, 0.2, 0.1), seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyClassWarning)
        res = stratified_split_binary(d, spec)
    for cls in (0, 1):
        members = y == cls
        for j, r in enumerate(spec.ratios):
            assert abs(int((res.assignment[members] == j).sum()) - r * members.sum()) < 1.0
    assert (res.assignment >= 0).all()


def test_hand_traced_rare_label():
    """20 rows, label C on rows 0-2 and 4-6, rare label R on rows 3 and 11.

    R is processed first with demand [1.7, 0.3]: its first row goes to
    subset 0 (demand becomes [0.7, 0.3]) and so does the second.  C then
    has demand [5.1, 0.9]: five rows go to subset 0 and the sixth visited
    row to subset 1 (demand [0.1, 0.9]).  The 12 label-less rows fill the
    remaining capacity [10, 2].
    """
    Y = np.zeros((20, 2), dtype=int)
    Y[[0, 1, 2, 4, 5, 6], 0] = 1
    Y[[3, 11], 1] = 1
    seed = 5
    a = iterative_stratification(Y, (0.85, 0.15), seed)
    assert a[3] == 0 and a[11] == 0
    c_rows = [0, 1, 2, 4, 5, 6]
    visit = [r for r in np.random.Generator(np.random.PCG64(seed)).permutation(20) if r in c_rows]
    assert [int(a[r]) for r in visit] == [0, 0, 0, 0, 0, 1]
    assert np.bincount(a).tolist() == [17, 3]


def test_one_label_per_row_matches_ratios():
    Y = np.zeros((60, 3), dtype=int)
    Y[:30, 0] = 1
    Y[30:50, 1] = 1
    Y[50:, 2] = 1
    for seed in range(10):
        a = iterative_stratification(Y, (0.85, 0.15), seed)
        for lab in range(3):
            rows = Y[:, lab] == 1
            assert abs(int((a[rows] == 0).sum()) - 0.85 * rows.sum()) <= 1.0


@settings(max_examples=60, deadline=None)
@given(Y=arrays(np.int8, st.tuples(st.integers(1, 80), st.integers(1, 6)),
                elements=st.integers(0, 1)),
       seed=st.integers(0, 2 ** 32 - 1))
def test_iterative_partition_and_determinism(Y, seed):
    ratios = (0.85, 0.15)
    a = iterative_stratification(Y, ratios, seed)
    assert a.shape == (len(Y),)
    assert set(a.tolist()) <= {0, 1}
    assert np.array_equal(a, iterative_stratification(Y, ratios, seed))


def test_iterative_sizes_exact_with_label_less_rows(rng):
    Y = (rng.random((1000, 6)) < [0.3, 0.2, 0.1, 0.05, 0.03, 0.01]).astype(int)
    for seed in range(5):
        assert np.bincount(iterative_stratification(Y, (0.85, 0.15), seed)).tolist() == [850, 150]


def test_seeds_change_the_split(rng):
    Y = (rng.random((200, 4)) < 0.3).astype(int)
    assert not np.array_equal(iterative_stratification(Y, (0.8, 0.2), 1),
                              iterative_stratification(Y, (0.8, 0.2), 2))


def test_split_result_helpers():
    d = _dataset("type", np.eye(20, 5, dtype=int))
    res = iterative_stratified_split(d, SplitSpec((0.85, 0.15), 4))
    idx = [set(res.subset_indices(j).tolist()) for j in (0, 1)]
    assert idx[0].isdisjoint(idx[1]) and idx[0] | idx[1] == set(range(20))
    assert res.as_mapping()[d.ids[0]] in (0, 1)
    assert len(res.proportions) == 2 and len(res.proportions[0]) == 5


def test_random_split_sizes():
    d = _dataset("type", np.zeros((101, 5), dtype=int))
    assert random_split(d, SplitSpec((0.85, 0.15), 9)).sizes() == [86, 15]


def test_split_spec_validation():
    for bad in [(1.0,), (0.5, 0.4), (0.0, 1.0), (1.2, -0.2)]:
        with pytest.raises(ValueError):
            SplitSpec(bad)
    with pytest.raises(ValueError):
        SplitSpec((0.5, 0.5), -1)


def test_per_language_split_keeps_languages_apart():
    langs = ["eng"] * 40 + ["spa"] * 16
    y = np.array([1, 0] * 28).reshape(-1, 1)
    d = _dataset("detect", y, langs)
    res, parts = split_dataset(d, SplitSpec((0.75, 0.25), 1))
    train, dev = parts
    assert sum(p.lang == "eng" for p in dev.posts) == 10
    assert sum(p.lang == "spa" for p in dev.posts) == 4
    assert train.partition == "train" and dev.partition == "dev"
    # original row order is preserved inside each part
    assert list(train.ids) == sorted(train.ids, key=d.ids.index)


def test_joint_split_shares_posts_across_subtasks():
    data = planted_corpus(120, seed=3, langs=("eng", "ita", "spa"))
    subs = [data[s] for s in Subtask]
    out = split_jointly(subs, SplitSpec((0.85, 0.15), 42))
    dev_ids = [set(parts[1].ids) for _, parts in out]
    assert dev_ids[0] == dev_ids[1]
    # manifestation data lacks Italian posts, otherwise the same dev set
    assert dev_ids[2] == {i for i in dev_ids[0] if not i.startswith("ita_")}
    for (res, parts), d in zip(out, subs):
        assert sum(len(p) for p in parts) == len(d)


def test_sklearn_style_splitter():
    Y = np.eye(40, 5, dtype=int)
    train, test = next(IterativeStratifiedSplit(0.25, 3).split(np.zeros((40, 1)), Y))
    assert len(train) + len(test) == 40 and not set(train) & set(test)
    assert IterativeStratifiedSplit().get_n_splits() == 1


def test_write_split_manifest(tmp_path):
    d = _dataset("type", np.eye(20, 5, dtype=int))
    res, parts = split_dataset(d, SplitSpec((0.85, 0.15), 2), per_language=False)
    paths = write_split(res, parts, tmp_path)
    manifest = json.loads((tmp_path / "split_manifest.json").read_text())
    assert manifest["seed"] == 2 and manifest["sizes"] == res.sizes()
    assert manifest["files"] == [p.name for p in paths]
    assert manifest["labels"] == list(Subtask.TYPE.labels)
