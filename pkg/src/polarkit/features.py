"""Hashed character n-gram features.

A script-agnostic stand-in for subword tokenization: texts are cut to
``max_chars`` code points, split into character n-grams, hashed into
``n_features`` buckets with MurmurHash3 and L2-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.feature_extraction.text import HashingVectorizer

__all__ = ["FeatureSpace", "CharNgramHasher", "featurize"]

MAX_CHARS = 256


@dataclass(frozen=True)
class FeatureSpace:
    ngram_range: tuple[int, int] = (1, 4)
    n_features: int = 2 ** 18
    signed: bool = False
    max_chars: int = MAX_CHARS

    def __post_init__(self):
        lo, hi = self.ngram_range
        object.__setattr__(self, "ngram_range", (int(lo), int(hi)))
        if not 1 <= lo <= hi:
            raise ValueError(f"bad n-gram range {self.ngram_range}")
        n = int(self.n_features)
        if n < 1 or n & (n - 1):
            raise ValueError("n_features must be a power of two")
        if self.max_chars < 1:
            raise ValueError("max_chars must be positive")

    def to_dict(self) -> dict:
        return {"ngram_range": list(self.ngram_range), "n_features": self.n_features,
                "signed": self.signed, "max_chars": self.max_chars}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpace":
        return cls(tuple(d["ngram_range"]), int(d["n_features"]), bool(d["signed"]),
                   int(d.get("max_chars", MAX_CHARS)))


class CharNgramHasher(TransformerMixin, BaseEstimator):
    """Stateless transformer: iterable of strings -> CSR matrix (n_texts, n_features).

    Parameters
    ----------
    ngram_range : tuple (min_n, max_n), default=(1, 4)
        Range of character n-gram lengths, in code points.
    n_features : int, default=2**18
        Number of hash buckets; must be a power of two.
    signed : bool, default=False
        Use a hash-derived sign per n-gram to reduce collision bias.
    max_chars : int, default=256
        Texts are truncated to this many code points first.
    """

    def __init__(self, ngram_range=(1, 4), n_features=2 ** 18, signed=False, max_chars=MAX_CHARS):
        self.ngram_range = ngram_range
        self.n_features = n_features
        self.signed = signed
        self.max_chars = max_chars

    @property
    def feature_space(self) -> FeatureSpace:
        return FeatureSpace(tuple(self.ngram_range), self.n_features, self.signed, self.max_chars)

    def _vectorizer(self) -> HashingVectorizer:
        fs = self.feature_space
        return HashingVectorizer(
            analyzer="char",
            ngram_range=fs.ngram_range,
            n_features=fs.n_features,
            alternate_sign=fs.signed,
            lowercase=False,
            norm="l2",
            preprocessor=_Truncate(fs.max_chars),
            dtype=np.float64,
        )

    def fit(self, X=None, y=None):
        self.feature_space  # validates parameters
        self.n_features_out_ = int(self.n_features)
        return self

    def transform(self, X) -> sp.csr_matrix:
        if isinstance(X, str):
            raise TypeError("expected an iterable of strings, got a single string")
        texts = list(X)
        if any(not isinstance(t, str) for t in texts):
            raise TypeError("all inputs must be strings")
        out = self._vectorizer().transform(texts).tocsr()
        out.sort_indices()
        return out

    def __sklearn_is_fitted__(self):
        return True


class _Truncate:
    def __init__(self, n: int):
        self.n = n

    def __call__(self, text: str) -> str:
        return text[: self.n]


def featurize(text: str, fs: FeatureSpace | None = None) -> sp.csr_matrix:
    """Feature vector (1 x n_features, L2-normalized) for a single text."""
    if not text:
        raise ValueError("text must be non-empty")
    fs = fs or FeatureSpace()
    return CharNgramHasher(fs.ngram_range, fs.n_features, fs.signed, fs.max_chars).transform([text])
