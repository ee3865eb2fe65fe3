"""Imbalance-aware losses on logits, with analytic gradients.

All element-wise functions broadcast over numpy arrays and also accept
Python scalars.  Losses are evaluated through ``softplus`` so that nothing
goes through ``log(sigmoid(z))`` directly:

    -log(sigmoid(z))     = softplus(-z)
    -log(1 - sigmoid(z)) = softplus(z)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .corpus import LabelMatrix

__all__ = [
    "LOSS_KINDS",
    "LossConfig",
    "ShapeMismatch",
    "sigmoid",
    "softplus",
    "bce",
    "wbce",
    "focal",
    "compute_pos_weights",
    "pos_weights_from_counts",
    "elementwise_loss",
    "batch_loss",
]

LOSS_KINDS = ("bce", "wbce", "focal")


class ShapeMismatch(ValueError):
    pass


def sigmoid(z):
    """Logistic function, saturating cleanly to 0/1 for large |z|."""
    return expit(z)


def softplus(z):
    return np.logaddexp(0.0, z)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def wbce(y, z, w=1.0, symmetric=False):
    """Weighted binary cross-entropy and its derivative w.r.t. the logit.

    Only the positive term is scaled by ``w``::

        loss = -[w * y * log(s) + (1 - y) * log(1 - s)],   s = sigmoid(z)
        dloss/dz = -w * sigmoid(-z)  if y == 1
                 =      sigmoid(z)   if y == 0

    ``symmetric=True`` scales the negative term by ``w`` as well (some
    frameworks do this); it is off by default.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    w_neg = w if symmetric else 1.0
    loss = w * y * softplus(-z) + w_neg * (1.0 - y) * softplus(z)
    grad = -w * y * sigmoid(-z) + w_neg * (1.0 - y) * sigmoid(z)
    return _out(loss), _out(grad)


def bce(y, z):
    return wbce(y, z, 1.0)


def focal(y, z, gamma=2.0):
    """Binary focal loss ``-(1 - p_t)**gamma * log(p_t)`` and its logit derivative.

    With ``s = 2y - 1`` and ``q = p_t = sigmoid(s*z)``::

        dloss/dz = s * (1 - q)**gamma * (gamma * q * log(q) - (1 - q))

    ``gamma = 0`` gives plain BCE.
    """
    if np.any(np.asarray(gamma) < 0):
        raise ValueError("gamma must be non-negative")
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    sign = 2.0 * y - 1.0
    nll = softplus(-sign * z)          # -log(q)
    q = sigmoid(sign * z)
    one_minus_q = sigmoid(-sign * z)
    mod = one_minus_q ** gamma
    loss = mod * nll
    grad = sign * mod * (gamma * q * -nll - one_minus_q)
    return _out(loss), _out(grad)


def pos_weights_from_counts(n_pos, n_neg) -> np.ndarray:
    n_pos = np.asarray(n_pos, dtype=float)
    n_neg = np.asarray(n_neg, dtype=float)
    return n_neg / np.maximum(n_pos, 1.0)


def compute_pos_weights(gold: LabelMatrix | np.ndarray) -> np.ndarray:
    """Per-label positive weight ``N_neg / max(N_pos, 1)`` from a label matrix."""
    values = gold.values if isinstance(gold, LabelMatrix) else np.asarray(gold)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if values.shape[0] == 0:
        raise ValueError("cannot derive weights from an empty label matrix")
    n_pos = values.sum(axis=0)
    return pos_weights_from_counts(n_pos, values.shape[0] - n_pos)


@dataclass(frozen=True)
class LossConfig:
    kind: str = "wbce"
    gamma: float = 2.0
    weights: tuple[float, ...] | None = None
    symmetric: bool = False

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.kind == "wbce" and self.weights is None:
            raise ValueError("wbce needs per-label weights")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if (w < 0).any() or not np.isfinite(w).all():
                raise ValueError("weights must be finite and non-negative")
            object.__setattr__(self, "weights", tuple(float(v) for v in w))


def elementwise_loss(y, z, cfg: LossConfig):
    """Per-element loss and gradient arrays for a label/logit matrix pair."""
    if cfg.kind == "bce":
        return wbce(y, z, 1.0)
    if cfg.kind == "focal":
        return focal(y, z, cfg.gamma)
    w = np.asarray(cfg.weights, dtype=float)
    return wbce(y, z, w, symmetric=cfg.symmetric)


def batch_loss(gold, logits, cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Mean loss over all (row, label) elements and the gradient w.r.t. ``logits``.

    The gradient is already divided by the element count, so it is the exact
    derivative of the returned mean.
    """
    y = gold.values if isinstance(gold, LabelMatrix) else np.asarray(gold)
    z = np.asarray(logits, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if z.ndim == 1:
        z = z.reshape(-1, 1)
    if y.shape != z.shape:
        raise ShapeMismatch(f"gold {y.shape} vs logits {z.shape}")
    if cfg.weights is not None and cfg.kind == "wbce" and len(cfg.weights) != z.shape[1]:
        raise ShapeMismatch(f"{len(cfg.weights)} weights for {z.shape[1]} labels")
    loss, grad = elementwise_loss(y, z, cfg)
    n = z.size
    return float(np.sum(loss) / n), np.asarray(grad) / n
