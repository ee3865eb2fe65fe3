import math

import numpy as np
import pytest
from sklearn.utils import murmurhash3_32

import oracles
from polarkit.features import CharNgramHasher, FeatureSpace, featurize
from polarkit.schedule import lr_multiplier, warmup_steps


def _bucket(ngram, n_features):
    return abs(murmurhash3_32(ngram, seed=0)) % n_features


def test_ab_unigrams_and_bigrams():
    fs = FeatureSpace((1, 2), 2 ** 18)
    x = featurize("ab", fs)
    grams = oracles.char_ngrams("ab", 1, 2)
    assert sorted(grams) == ["a", "ab", "b"]
    expected = sorted({_bucket(g, fs.n_features) for g in grams})
    assert x.indices.tolist() == expected
    assert np.allclose(x.data, 1 / math.sqrt(3), atol=1e-15)
    assert math.isclose(float(np.sqrt(x.multiply(x).sum())), 1.0, abs_tol=1e-12)


def test_repeated_character_single_dimension():
    x = featurize("aaaa", FeatureSpace((1, 1)))
    assert x.nnz == 1
    assert x.data[0] == pytest.approx(1.0, abs=1e-15)
    assert x.indices[0] == _bucket("a", 2 ** 18)


def test_counts_match_hand_enumeration(rng):
    fs = FeatureSpace((1, 3), 2 ** 20)
    text = "abcab xyz"
    counts = {}
    for g in oracles.char_ngrams(text, 1, 3):
        b = _bucket(g, fs.n_features)
        counts[b] = counts.get(b, 0) + 1
    norm = math.sqrt(sum(v * v for v in counts.values()))
    x = featurize(text, fs)
    got = dict(zip(x.indices.tolist(), x.data.tolist()))
    assert got.keys() == counts.keys()
    for b, v in counts.items():
        assert got[b] == pytest.approx(v / norm, abs=1e-15)


def test_signed_hashing_uses_hash_sign():
    fs = FeatureSpace((1, 1), 2 ** 18, signed=True)
    x = featurize("abcdefgh", fs)
    for ch in "abcdefgh":
        h = murmurhash3_32(ch, seed=0)
        k = list(x.indices).index(abs(h) % fs.n_features)
        assert np.sign(x.data[k]) == (1 if h >= 0 else -1)


def test_identical_strings_identical_vectors():
    a = featurize("Start by not listening to msnbc.")
    b = featurize("Start by not listening to msnbc.")
    assert (a != b).nnz == 0


def test_truncation_to_max_chars():
    fs = FeatureSpace((1, 2), 2 ** 16, max_chars=5)
    long = "abcde" + "zzzzzzzz"
    assert (featurize(long, fs) != featurize("abcde", fs)).nnz == 0


def test_unicode_code_points():
    fs = FeatureSpace((1, 1), 2 ** 18)
    x = featurize("\U0001F600\U0001F600", fs)
    assert x.nnz == 1


def test_transform_shape_and_validation():
    h = CharNgramHasher((2, 3), 2 ** 10)
    X = h.fit_transform(["one", "two", "three"])
    assert X.shape == (3, 2 ** 10)
    assert np.allclose(np.sqrt(X.multiply(X).sum(axis=1)).A.ravel(), 1.0)
    with pytest.raises(TypeError):
        h.transform("single string")
    with pytest.raises(ValueError):
        featurize("")


@pytest.mark.parametrize("kwargs", [dict(ngram_range=(3, 2)), dict(n_features=1000),
                                    dict(max_chars=0), dict(ngram_range=(0, 2))])
def test_bad_feature_space(kwargs):
    with pytest.raises(ValueError):
        FeatureSpace(**kwargs)


def test_feature_space_round_trip():
    fs = FeatureSpace((2, 5), 2 ** 16, True, 128)
    assert FeatureSpace.from_dict(fs.to_dict()) == fs


# --- schedule -----------------------------------------------------------------

def test_schedule_worked_values():
    assert lr_multiplier(0, 100, 0.1) == 0.0
    assert lr_multiplier(10, 100, 0.1) == 1.0
    assert lr_multiplier(55, 100, 0.1) == pytest.approx((100 - 55) / (100 - 10))
    assert lr_multiplier(55, 100, 0.1) == 0.5
    assert lr_multiplier(100, 100, 0.1) == 0.0


def test_warmup_length_is_ceiling():
    assert warmup_steps(100, 0.1) == 10
    assert warmup_steps(30, 0.1) == 3
    assert warmup_steps(95, 0.1) == 10
    assert warmup_steps(7, 0.0) == 0


def test_schedule_shape():
    total = 57
    values = [lr_multiplier(s, total, 0.2) for s in range(total + 1)]
    warm = warmup_steps(total, 0.2)
    assert all(0.0 <= v <= 1.0 for v in values)
    assert np.all(np.diff(values[:warm + 1]) > 0)
    assert np.all(np.diff(values[warm:]) < 0)
    assert values[warm] == 1.0


def test_no_warmup_starts_at_one():
    assert lr_multiplier(0, 10, 0.0) == 1.0


def test_schedule_rejects_bad_steps():
    with pytest.raises(ValueError):
        lr_multiplier(11, 10)
    with pytest.raises(ValueError):
        lr_multiplier(0, 10, 1.0)
