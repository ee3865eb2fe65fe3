"""Linear binary-relevance classifiers over hashed character n-grams.

``BinaryRelevanceClassifier`` is one logistic unit per label trained with
mini-batch gradient descent under a linear warmup/decay schedule, with
per-epoch validation macro-F1, early stopping and best-epoch snapshotting.

``SharedMultiTaskClassifier`` couples several subtasks through one shared
linear projection of the features followed by a linear head per subtask.
Rows lacking a subtask's labels are masked out of that subtask's loss.

Randomness comes from numpy's PCG64 generator.  Stream ``[seed, 0]``
shuffles batches, stream ``[seed, 1]`` initializes parameters; given the
same seed, data and configuration, training is bitwise reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import Dataset, LabelMatrix, Post, Subtask
from .ensemble import ProbMatrix
from .evaluation import default_scheme, macro_f1
from .features import CharNgramHasher, FeatureSpace
from .losses import LOSS_KINDS, LossConfig, compute_pos_weights, elementwise_loss, sigmoid
from .schedule import lr_multiplier

__all__ = [
    "SEEDS",
    "TrainConfig",
    "TrainingError",
    "EmptyTrainingSet",
    "NonAlignedMTLBundle",
    "BinaryRelevanceClassifier",
    "SharedMultiTaskClassifier",
    "train",
    "predict_proba",
    "save_model",
    "load_model",
]

SEEDS = (42, 2025, 3072)
MODEL_FORMAT = "polarkit-linear"


class TrainingError(ValueError):
    pass


class EmptyTrainingSet(TrainingError):
    pass


class NonAlignedMTLBundle(TrainingError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float | None = None      # None: the estimator's own default
    epochs: int = 20
    batch_size: int = 32
    warmup_ratio: float = 0.1
    patience: int = 2
    seed: int = 42
    loss: str = "wbce"
    gamma: float = 2.0
    mode: str = "independent"
    shuffle: bool = True
    projection_dim: int = 64
    task_weights: Mapping[str, float] | None = None

    def __post_init__(self):
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ValueError("warmup_ratio must be in [0, 1)")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.mode not in ("independent", "mtl"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def estimator_params(self) -> dict:
        params = {"epochs": self.epochs, "batch_size": self.batch_size,
                  "warmup_ratio": self.warmup_ratio, "patience": self.patience,
                  "random_state": self.seed, "loss": self.loss, "gamma": self.gamma,
                  "shuffle": self.shuffle}
        if self.learning_rate is not None:
            params["learning_rate"] = self.learning_rate
        return params


def _fingerprint(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    seed = int(seed)
    return (np.random.Generator(np.random.PCG64([seed, 0])),
            np.random.Generator(np.random.PCG64([seed, 1])))


class _HashedTextMixin:
    """Shared feature handling: accept raw strings or a ready feature matrix."""

    def _hasher(self) -> CharNgramHasher:
        return CharNgramHasher(tuple(self.ngram_range), self.n_features, self.signed, self.max_chars)

    @property
    def feature_space(self) -> FeatureSpace:
        return self._hasher().feature_space

    def _features(self, X) -> sp.csr_matrix:
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=np.float64)
        elif isinstance(X, np.ndarray) and X.dtype.kind == "f":
            X = sp.csr_matrix(X)
        else:
            X = self._hasher().transform(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def _loss_config(self, Y: np.ndarray, pos_weight) -> LossConfig:
        if self.loss == "wbce":
            w = compute_pos_weights(Y) if pos_weight is None else np.asarray(pos_weight, float)
            return LossConfig("wbce", self.gamma, tuple(w))
        return LossConfig(self.loss, self.gamma)

    def _n_steps(self, n_rows: int) -> int:
        return self.epochs * math.ceil(n_rows / self.batch_size)


class BinaryRelevanceClassifier(_HashedTextMixin, ClassifierMixin, BaseEstimator):
    """Independent logistic units, one per label, on hashed character n-grams.

    Parameters
    ----------
    ngram_range, n_features, signed, max_chars
        Feature space; see :class:`polarkit.features.CharNgramHasher`.
    loss : {"wbce", "bce", "focal"}, default="wbce"
        Training objective.  ``wbce`` weights positives by
        ``N_neg / max(N_pos, 1)`` from the training labels unless
        ``pos_weight`` is given.
    gamma : float, default=2.0
        Focal-loss focusing parameter.
    pos_weight : array-like of shape (n_labels,) or None
        Explicit positive weights for ``wbce``.
    learning_rate, epochs, batch_size, warmup_ratio
        Plain mini-batch gradient descent with linear warmup/decay.  The
        loss is a mean over all (row, label) elements of unit-norm inputs,
        hence the large default step of 50.
    patience : int, default=2
        Stop after this many epochs without a validation improvement
        (at least one).  Needs ``eval_set`` in :meth:`fit`.
    threshold : float, default=0.5
        Decision threshold used by :meth:`predict` and validation.
    shuffle : bool, default=True
        Reshuffle rows every epoch.
    random_state : int, default=42

    Attributes
    ----------
    coef_ : ndarray of shape (n_labels, n_features)
    intercept_ : ndarray of shape (n_labels,)
    pos_weight_ : ndarray or None
    history_ : list of dict
        Per-epoch ``train_loss`` and ``val_macro_f1``.
    best_epoch_ : int
    """

    def __init__(self, ngram_range=(1, 4), n_features=2 ** 18, signed=False, max_chars=256,
                 loss="wbce", gamma=2.0, pos_weight=None, learning_rate=50.0, epochs=20,
                 batch_size=32, warmup_ratio=0.1, patience=2, threshold=0.5, shuffle=True,
                 random_state=42, subtask=None):
        self.ngram_range = ngram_range
        self.n_features = n_features
        self.signed = signed
        self.max_chars = max_chars
        self.loss = loss
        self.gamma = gamma
        self.pos_weight = pos_weight
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.warmup_ratio = warmup_ratio
        self.patience = patience
        self.threshold = threshold
        self.shuffle = shuffle
        self.random_state = random_state
        self.subtask = subtask

    def _scheme(self, n_labels: int) -> str:
        sub = Subtask.parse(self.subtask) if self.subtask is not None else None
        return default_scheme(sub, n_labels)

    def fit(self, X, y, eval_set=None):
        Y = _label_array(y)
        X = self._features(X)
        if X.shape[0] == 0:
            raise EmptyTrainingSet("no training rows")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"{X.shape[0]} rows of features but {Y.shape[0]} label rows")
        n, L = Y.shape
        cfg = self._loss_config(Y, self.pos_weight)
        self.pos_weight_ = np.asarray(cfg.weights) if cfg.weights is not None else None
        Xv = Yv = None
        if eval_set is not None:
            Xv, Yv = self._features(eval_set[0]), _label_array(eval_set[1])
        scheme = self._scheme(L)

        W = np.zeros((self.n_features, L))     # transposed coef_, row per feature
        b = np.zeros(L)
        shuffle_rng, _ = _rngs(self.random_state)
        total = self._n_steps(n)
        step = 0
        history = []
        best = (-np.inf, W.copy(), b.copy(), 0)
        wait = 0
        for epoch in range(1, self.epochs + 1):
            order = shuffle_rng.permutation(n) if self.shuffle else np.arange(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                Xb = X[idx]
                Z = Xb @ W + b
                _, G = elementwise_loss(Y[idx], Z, cfg)
                G = np.asarray(G) / Z.size
                lr = self.learning_rate * lr_multiplier(step, total, self.warmup_ratio)
                step += 1
                if lr == 0.0:
                    continue
                cols = np.unique(Xb.indices)
                W[cols] -= lr * (Xb[:, cols].T @ G)
                b -= lr * G.sum(axis=0)
            record = {"epoch": epoch, "lr": lr,
                      "train_loss": _mean_loss(Y, X @ W + b, cfg)}
            if Xv is not None:
                pred = (sigmoid(Xv @ W + b) >= self.threshold).astype(np.int8)
                score = macro_f1(Yv, pred, scheme)
                record["val_macro_f1"] = score
                if score > best[0]:
                    best = (score, W.copy(), b.copy(), epoch)
                    wait = 0
                else:
                    wait += 1
            history.append(record)
            if Xv is not None and wait >= max(self.patience, 1):
                break
        if Xv is not None:
            _, W, b, self.best_epoch_ = best
        else:
            self.best_epoch_ = len(history)
        self.coef_ = np.ascontiguousarray(W.T)
        self.intercept_ = b
        self.n_labels_ = L
        self.history_ = history
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        return np.asarray(self._features(X) @ self.coef_.T) + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= self.threshold).astype(np.int8)

    def score(self, X, y, sample_weight=None) -> float:
        Y = _label_array(y)
        return macro_f1(Y, self.predict(X), self._scheme(Y.shape[1]))


class SharedMultiTaskClassifier(_HashedTextMixin, BaseEstimator):
    """Shared linear projection with one linear head per task.

    ``logits_t = (X @ P) @ A_t + b_t``.  The projection ``P`` starts at zero
    and heads ``A_t`` at small Gaussian values, so untouched feature rows of
    ``P`` stay exactly zero.  The objective is ``sum_t w_t * mean_t(loss)``
    where each mean runs over the (row, label) elements present for task
    ``t`` in the batch.

    ``fit`` takes ``Y`` as a mapping task name -> array of shape
    (n_rows, n_labels_t) with ``-1`` marking rows without that task.
    """

    def __init__(self, ngram_range=(1, 4), n_features=2 ** 16, signed=False, max_chars=256,
                 projection_dim=64, task_weights=None, loss="wbce", gamma=2.0,
                 learning_rate=3.0, epochs=20, batch_size=32, warmup_ratio=0.1, patience=2,
                 threshold=0.5, shuffle=True, random_state=42):
        self.ngram_range = ngram_range
        self.n_features = n_features
        self.signed = signed
        self.max_chars = max_chars
        self.projection_dim = projection_dim
        self.task_weights = task_weights
        self.loss = loss
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.warmup_ratio = warmup_ratio
        self.patience = patience
        self.threshold = threshold
        self.shuffle = shuffle
        self.random_state = random_state

    def _weights(self, tasks: Sequence[str]) -> dict[str, float]:
        w = dict(self.task_weights or {})
        unknown = set(w) - set(tasks)
        if unknown:
            raise NonAlignedMTLBundle(f"weights given for unknown tasks {sorted(unknown)}")
        return {t: float(w.get(t, 1.0)) for t in tasks}

    def _init_params(self, tasks, n_labels):
        _, init_rng = _rngs(self.random_state)
        k = self.projection_dim
        scale = 1.0 / math.sqrt(k)
        heads = {}
        # canonical subtasks always consume their draw, so a task's head does
        # not depend on which other tasks are present
        for sub in Subtask:
            draw = init_rng.normal(0.0, scale, size=(k, sub.n_labels))
            if sub.value in n_labels:
                if n_labels[sub.value] != sub.n_labels:
                    raise NonAlignedMTLBundle(f"task {sub.value!r} needs {sub.n_labels} label columns")
                heads[sub.value] = draw
        for t in tasks:
            if t not in heads:
                heads[t] = init_rng.normal(0.0, scale, size=(k, n_labels[t]))
        P = np.zeros((self.n_features, k))
        return P, heads, {t: np.zeros(n_labels[t]) for t in tasks}

    def fit(self, X, Y: Mapping[str, np.ndarray], eval_set=None):
        X = self._features(X)
        n = X.shape[0]
        if n == 0:
            raise EmptyTrainingSet("no training rows")
        tasks = list(Y)
        Y = {t: np.asarray(Y[t]).reshape(n, -1) for t in tasks}
        for t in tasks:
            if Y[t].shape[0] != n:
                raise NonAlignedMTLBundle(f"task {t!r} has {Y[t].shape[0]} rows, expected {n}")
        weights = self._weights(tasks)
        masks = {t: (Y[t] >= 0).all(axis=1) for t in tasks}
        cfgs = {}
        for t in tasks:
            present = Y[t][masks[t]]
            if present.shape[0] == 0:
                raise EmptyTrainingSet(f"task {t!r} has no labeled rows")
            cfgs[t] = self._loss_config(present, None)
        Yc = {t: np.where(Y[t] < 0, 0, Y[t]) for t in tasks}
        val = None
        if eval_set is not None:
            Xv = self._features(eval_set[0])
            Yv = {t: np.asarray(eval_set[1][t]).reshape(Xv.shape[0], -1) for t in eval_set[1]}
            if set(Yv) != set(tasks):
                raise NonAlignedMTLBundle("validation tasks differ from training tasks")
            val = (Xv, Yv)

        P, A, bias = self._init_params(tasks, {t: Y[t].shape[1] for t in tasks})
        shuffle_rng, _ = _rngs(self.random_state)
        total = self._n_steps(n)
        step = 0
        history = []
        best = None
        best_score = -np.inf
        wait = 0
        for epoch in range(1, self.epochs + 1):
            order = shuffle_rng.permutation(n) if self.shuffle else np.arange(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                Xb = X[idx]
                H = np.asarray(Xb @ P)
                dH = np.zeros_like(H)
                grads = {}
                for t in tasks:
                    m = masks[t][idx]
                    count = int(m.sum()) * Y[t].shape[1]
                    if count == 0 or weights[t] == 0.0:
                        grads[t] = None
                        continue
                    Z = H @ A[t] + bias[t]
                    _, G = elementwise_loss(Yc[t][idx], Z, cfgs[t])
                    G = np.where(m[:, None], G, 0.0) * (weights[t] / count)
                    grads[t] = (H.T @ G, G.sum(axis=0))
                    dH += G @ A[t].T
                lr = self.learning_rate * lr_multiplier(step, total, self.warmup_ratio)
                step += 1
                if lr == 0.0:
                    continue
                cols = np.unique(Xb.indices)
                P[cols] -= lr * (Xb[:, cols].T @ dH)
                for t, g in grads.items():
                    if g is not None:
                        A[t] -= lr * g[0]
                        bias[t] -= lr * g[1]
            H_all = np.asarray(X @ P)
            record = {"epoch": epoch, "lr": lr, "train_loss": {
                t: _mean_loss(Yc[t][masks[t]], (H_all @ A[t] + bias[t])[masks[t]], cfgs[t])
                for t in tasks}}
            if val is not None:
                scores = self._val_scores(val, P, A, bias)
                record["val_macro_f1"] = scores
                active = [scores[t] for t in tasks if weights[t] > 0] or list(scores.values())
                score = float(np.mean(active))
                record["val_score"] = score
                if score > best_score:
                    best_score = score
                    best = (P.copy(), {t: a.copy() for t, a in A.items()},
                            {t: c.copy() for t, c in bias.items()}, epoch)
                    wait = 0
                else:
                    wait += 1
            history.append(record)
            if val is not None and wait >= max(self.patience, 1):
                break
        if best is not None:
            P, A, bias, self.best_epoch_ = best
        else:
            self.best_epoch_ = len(history)
        self.projection_ = P
        self.heads_ = A
        self.intercepts_ = bias
        self.tasks_ = tasks
        self.task_weights_ = weights
        self.history_ = history
        return self

    def _val_scores(self, val, P, A, bias) -> dict[str, float]:
        Xv, Yv = val
        H = np.asarray(Xv @ P)
        out = {}
        for t, y in Yv.items():
            m = (y >= 0).all(axis=1)
            if not m.any():
                out[t] = 0.0
                continue
            pred = (sigmoid(H[m] @ A[t] + bias[t]) >= self.threshold).astype(np.int8)
            out[t] = macro_f1(y[m], pred, default_scheme(_maybe_subtask(t), y.shape[1]))
        return out

    def decision_function(self, X, task) -> np.ndarray:
        check_is_fitted(self, "projection_")
        task = _task_key(task)
        H = np.asarray(self._features(X) @ self.projection_)
        return H @ self.heads_[task] + self.intercepts_[task]

    def predict_proba(self, X, task) -> np.ndarray:
        return sigmoid(self.decision_function(X, task))

    def predict(self, X, task) -> np.ndarray:
        return (self.predict_proba(X, task) >= self.threshold).astype(np.int8)


_TASK_ORDER = {s.value: k for k, s in enumerate(Subtask)}


def _task_key(task) -> str:
    return task.value if isinstance(task, Subtask) else str(task)


def _maybe_subtask(task: str) -> Subtask | None:
    try:
        return Subtask.parse(task)
    except ValueError:
        return None


def _label_array(y) -> np.ndarray:
    Y = y.values if isinstance(y, LabelMatrix) else np.asarray(y)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    return Y.astype(np.float64)


def _mean_loss(Y, Z, cfg) -> float:
    if np.size(Z) == 0:
        return 0.0
    loss, _ = elementwise_loss(Y, Z, cfg)
    return float(np.sum(loss) / np.size(Z))


# ---------------------------------------------------------------------------
# dataset-level API

def _estimator(cfg: TrainConfig, fs: FeatureSpace, subtask: Subtask) -> BinaryRelevanceClassifier:
    return BinaryRelevanceClassifier(
        ngram_range=fs.ngram_range, n_features=fs.n_features, signed=fs.signed,
        max_chars=fs.max_chars, subtask=subtask.value, **cfg.estimator_params())


def _join_bundle(bundle: Mapping, ids_order: Sequence[str] | None = None):
    tasks = [Subtask.parse(t) for t in bundle]
    order = sorted(tasks, key=lambda s: _TASK_ORDER[s.value])
    texts: dict[str, str] = {}
    ids: list[str] = []
    for sub in order:
        d = bundle[sub] if sub in bundle else bundle[sub.value]
        if d.subtask != sub:
            raise NonAlignedMTLBundle(f"dataset for {sub.value} holds {d.subtask.value} labels")
        if d.gold is None:
            raise NonAlignedMTLBundle(f"{sub.value} dataset has no gold labels")
        for p in d.posts:
            if p.id in texts:
                if texts[p.id] != p.text:
                    raise NonAlignedMTLBundle(f"post {p.id!r} has different text across tasks")
            else:
                texts[p.id] = p.text
                ids.append(p.id)
    index = {i: k for k, i in enumerate(ids)}
    Y = {}
    for sub in order:
        d = bundle[sub] if sub in bundle else bundle[sub.value]
        arr = -np.ones((len(ids), sub.n_labels))
        rows = [index[i] for i in d.ids]
        arr[rows] = d.gold.values
        Y[sub.value] = arr
    return ids, [texts[i] for i in ids], Y


def train(train: Dataset | Mapping, val: Dataset | Mapping | None, cfg: TrainConfig,
          fs: FeatureSpace | None = None):
    """Train on datasets; returns ``(model, history)``.

    In ``independent`` mode ``train``/``val`` are single :class:`Dataset`
    objects.  In ``mtl`` mode they are mappings subtask -> Dataset, joined
    by post id.
    """
    fs = fs or FeatureSpace()
    if cfg.mode == "independent":
        if not isinstance(train, Dataset):
            raise TypeError("independent mode trains on a single Dataset")
        if len(train) == 0:
            raise EmptyTrainingSet("no training rows")
        if train.gold is None:
            raise TrainingError("training data has no gold labels")
        model = _estimator(cfg, fs, train.subtask)
        eval_set = None
        if val is not None:
            if val.subtask != train.subtask:
                raise TrainingError("validation subtask differs from training subtask")
            if val.gold is None:
                raise TrainingError("validation data has no gold labels")
            eval_set = (val.texts, val.gold.values)
        model.fit(train.texts, train.gold.values, eval_set=eval_set)
        return model, model.history_

    if isinstance(train, Dataset):
        train = {train.subtask: train}
        val = {val.subtask: val} if isinstance(val, Dataset) else val
    if not train or any(len(d) == 0 for d in train.values()):
        raise EmptyTrainingSet("empty dataset in MTL bundle")
    _, texts, Y = _join_bundle(train)
    model = SharedMultiTaskClassifier(
        ngram_range=fs.ngram_range, n_features=fs.n_features, signed=fs.signed,
        max_chars=fs.max_chars, projection_dim=cfg.projection_dim,
        task_weights=dict(cfg.task_weights) if cfg.task_weights else None,
        **cfg.estimator_params())
    eval_set = None
    if val is not None:
        if {Subtask.parse(t) for t in val} != {Subtask.parse(t) for t in train}:
            raise NonAlignedMTLBundle("validation bundle covers different subtasks")
        _, vtexts, vY = _join_bundle(val)
        eval_set = (vtexts, vY)
    model.fit(texts, Y, eval_set=eval_set)
    return model, model.history_


def predict_proba(model, posts: Sequence[Post], subtask: Subtask | str | None = None,
                  source: str = "") -> ProbMatrix:
    """Probabilities for ``posts`` in input order, as a :class:`ProbMatrix`."""
    texts = [p.text for p in posts]
    ids = tuple(p.id for p in posts)
    if isinstance(model, SharedMultiTaskClassifier):
        if subtask is None:
            if len(model.tasks_) != 1:
                raise ValueError("multi-task model: choose a subtask")
            subtask = model.tasks_[0]
        subtask = Subtask.parse(subtask)
        values = model.predict_proba(texts, subtask.value) if texts else np.zeros((0, subtask.n_labels))
    else:
        subtask = Subtask.parse(subtask or model.subtask)
        values = model.predict_proba(texts) if texts else np.zeros((0, subtask.n_labels))
    return ProbMatrix(subtask, ids, values, source)


# ---------------------------------------------------------------------------
# serialization: one JSON file, sparse storage of nonzero weight rows

def _sparse_rows(M: np.ndarray) -> dict:
    rows = np.flatnonzero(np.any(M != 0, axis=1))
    return {"shape": list(M.shape), "rows": rows.tolist(), "values": M[rows].tolist()}


def _dense_rows(d: dict) -> np.ndarray:
    M = np.zeros(tuple(d["shape"]))
    if d["rows"]:
        M[d["rows"]] = np.asarray(d["values"], dtype=np.float64)
    return M


def _json_params(model) -> dict:
    params = model.get_params()
    if params.get("pos_weight") is not None:
        params["pos_weight"] = [float(v) for v in params["pos_weight"]]
    params["ngram_range"] = list(params["ngram_range"])
    return params


def save_model(model, path: str | Path, source: str = "") -> None:
    params = _json_params(model)
    doc = {"format": MODEL_FORMAT, "version": 1, "source": source,
           "feature_space": model.feature_space.to_dict(), "params": params,
           "fingerprint": _fingerprint(params), "best_epoch": model.best_epoch_,
           "history": model.history_}
    if isinstance(model, SharedMultiTaskClassifier):
        doc["kind"] = "mtl"
        doc["tasks"] = model.tasks_
        # W^T stored feature-major so only touched feature rows are written
        doc["projection"] = _sparse_rows(model.projection_)
        doc["heads"] = {t: model.heads_[t].tolist() for t in model.tasks_}
        doc["intercepts"] = {t: model.intercepts_[t].tolist() for t in model.tasks_}
    else:
        doc["kind"] = "br"
        doc["subtask"] = model.subtask
        doc["labels"] = list(Subtask.parse(model.subtask).labels) if model.subtask else None
        doc["coef_t"] = _sparse_rows(model.coef_.T)
        doc["intercept"] = model.intercept_.tolist()
        doc["pos_weight"] = model.pos_weight_.tolist() if model.pos_weight_ is not None else None
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a polarkit model file")
    params = dict(doc["params"])
    params["ngram_range"] = tuple(params["ngram_range"])
    if doc["kind"] == "mtl":
        model = SharedMultiTaskClassifier(**params)
        model.tasks_ = list(doc["tasks"])
        model.projection_ = _dense_rows(doc["projection"])
        model.heads_ = {t: np.asarray(v, dtype=np.float64) for t, v in doc["heads"].items()}
        model.intercepts_ = {t: np.asarray(v, dtype=np.float64) for t, v in doc["intercepts"].items()}
    else:
        model = BinaryRelevanceClassifier(**params)
        model.coef_ = np.ascontiguousarray(_dense_rows(doc["coef_t"]).T)
        model.intercept_ = np.asarray(doc["intercept"], dtype=np.float64)
        model.n_labels_ = model.coef_.shape[0]
        pw = doc.get("pos_weight")
        model.pos_weight_ = np.asarray(pw) if pw is not None else None
    model.best_epoch_ = doc["best_epoch"]
    model.history_ = doc["history"]
    model.source_ = doc.get("source", "")
    return model
