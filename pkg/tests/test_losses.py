import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from polarkit.losses import (LossConfig, ShapeMismatch, batch_loss, bce, compute_pos_weights,
                             elementwise_loss, focal, pos_weights_from_counts, sigmoid, softplus,
                             wbce)

LN2 = math.log(2.0)


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(1.0) == pytest.approx(float(oracles.sigmoid(1)), abs=1e-16)
    assert sigmoid(1.0) == pytest.approx(0.7310585786300049, abs=1e-16)
    assert abs(sigmoid(40.0) - 1.0) <= 1e-15
    assert 0.0 <= sigmoid(-40.0) < 1e-15


def test_sigmoid_no_overflow_warnings():
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        z = np.array([-1000.0, -40.0, 0.0, 40.0, 1000.0])
        s = sigmoid(z)
        sp = softplus(z)
    assert np.all(np.isfinite(s)) and np.all(np.isfinite(sp))
    assert sp[-1] == 1000.0 and sp[0] == 0.0


@pytest.mark.parametrize("y, z, w, expected", [
    (1, 0.0, 1.0, LN2),
    (1, 0.0, 2.0, 2 * LN2),
    (0, 0.0, 7.0, LN2),
])
def test_wbce_worked_values(y, z, w, expected):
    loss, _ = wbce(y, z, w)
    assert loss == pytest.approx(expected, abs=1e-12)


def test_wbce_gradient_branches():
    for z in (-3.0, 0.0, 0.3, 5.0):
        assert wbce(1, z, 3.0)[1] == pytest.approx(3.0 * (sigmoid(z) - 1.0), abs=1e-15)
        assert wbce(0, z, 3.0)[1] == pytest.approx(sigmoid(z), abs=1e-15)


def test_symmetric_variant_scales_negative_branch():
    assert wbce(0, 0.0, 7.0, symmetric=True)[0] == pytest.approx(7 * LN2)
    assert wbce(0, 0.0, 7.0)[0] == pytest.approx(LN2)


@pytest.mark.parametrize("y, z, w", [(1, 0.3, 3.0), (0, -2.0, 5.0), (1, 30.0, 2.0), (0, -30.0, 1.0)])
def test_wbce_matches_high_precision_oracle(y, z, w):
    loss, grad = wbce(y, z, w)
    ref = oracles.wbce(y, z, w)
    dref = oracles.derivative(lambda t: oracles.wbce(y, t, w), z)
    assert loss == pytest.approx(float(ref), rel=1e-12, abs=1e-300)
    assert grad == pytest.approx(float(dref), rel=1e-10)


@pytest.mark.parametrize("y, z, gamma", [(0, -0.7, 2.0), (1, 0.4, 0.5), (1, -3.0, 3.7), (0, 30.0, 2.0)])
def test_focal_matches_high_precision_oracle(y, z, gamma):
    loss, grad = focal(y, z, gamma)
    ref = oracles.focal(y, z, gamma)
    dref = oracles.derivative(lambda t: oracles.focal(y, t, gamma), z)
    assert loss == pytest.approx(float(ref), rel=1e-12)
    assert grad == pytest.approx(float(dref), rel=1e-10)


def test_central_difference_at_worked_points():
    h = 1e-6
    g = wbce(1, 0.3, 3.0)[1]
    fd = (wbce(1, 0.3 + h, 3.0)[0] - wbce(1, 0.3 - h, 3.0)[0]) / (2 * h)
    assert abs(g - fd) / abs(g) < 1e-7
    g = focal(0, -0.7, 2.0)[1]
    fd = (focal(0, -0.7 + h, 2.0)[0] - focal(0, -0.7 - h, 2.0)[0]) / (2 * h)
    assert abs(g - fd) / abs(g) < 1e-7


def test_focal_damps_easy_positives_faster_than_bce():
    for z in (2.0, 5.0, 10.0):
        assert focal(1, z, 2.0)[0] < bce(1, z)[0]
    ratio = [focal(1, z, 2.0)[0] / bce(1, z)[0] for z in (2.0, 5.0, 10.0)]
    assert ratio[0] > ratio[1] > ratio[2]


def test_focal_rejects_negative_gamma():
    with pytest.raises(ValueError):
        focal(1, 0.0, -1.0)


@settings(max_examples=200, deadline=None)
@given(y=st.sampled_from([0, 1]), z=st.floats(-60, 60), gamma=st.floats(0, 5))
def test_reductions_property(y, z, gamma):
    b = bce(y, z)
    f0 = focal(y, z, 0.0)
    w1 = wbce(y, z, 1.0)
    assert abs(f0[0] - b[0]) <= 1e-12 and abs(f0[1] - b[1]) <= 1e-12
    assert w1 == b
    # focal never exceeds bce, and both are finite and non-negative
    f = focal(y, z, gamma)
    assert 0.0 <= f[0] <= b[0] + 1e-15
    assert np.isfinite(f[1])


# --- weights ---------------------------------------------------------------------

@pytest.mark.parametrize("n_pos, n_neg, w", [(5000, 5000, 1.0), (0, 100, 100.0), (1, 9, 9.0),
                                             (1075, 8925, 8925 / 1075)])
def test_pos_weights_from_counts(n_pos, n_neg, w):
    assert pos_weights_from_counts(n_pos, n_neg) == pytest.approx(w, abs=1e-12)


def test_pos_weights_counted_fixture():
    Y = np.array([[1, 0, 0], [0, 0, 1], [0, 0, 1], [1, 0, 0], [0, 0, 0]])
    # column counts: pos (2, 0, 2), neg (3, 5, 3)
    assert compute_pos_weights(Y).tolist() == [1.5, 5.0, 1.5]


def test_pos_weight_at_minimum_language_rate():
    y = np.zeros(10_000, dtype=np.int8)
    y[np.random.default_rng(0).choice(10_000, 1075, replace=False)] = 1
    assert int(y.sum()) == 1075
    w = compute_pos_weights(y.reshape(-1, 1))[0]
    assert abs(w - 8.3023) < 1e-4


def test_pos_weights_additive_over_concatenation():
    a = np.array([[1], [0], [0]])
    b = np.array([[0], [0], [1], [0]])
    both = compute_pos_weights(np.vstack([a, b]))[0]
    assert both == pos_weights_from_counts(1 + 1, 2 + 3)


def test_pos_weights_reject_empty():
    with pytest.raises(ValueError):
        compute_pos_weights(np.zeros((0, 3)))


# --- batch reduction -------------------------------------------------------------------

def test_batch_loss_all_zero_logits_balanced():
    Y = np.array([[1, 0], [0, 1]])
    mean, grad = batch_loss(Y, np.zeros((2, 2)), LossConfig("bce"))
    assert mean == pytest.approx(LN2, abs=1e-12)
    assert grad.shape == (2, 2)


@pytest.mark.parametrize("kind", ["bce", "wbce", "focal"])
def test_batch_loss_brute_force(rng, kind):
    Y = (rng.random((5, 3)) < 0.4).astype(int)
    Z = rng.normal(0, 3, (5, 3))
    w = (2.0, 0.5, 7.0)
    cfg = LossConfig(kind, gamma=1.5, weights=w if kind == "wbce" else None)
    mean, grad = batch_loss(Y, Z, cfg)
    total = 0.0
    for i in range(5):
        for c in range(3):
            if kind == "wbce":
                total += float(oracles.wbce(Y[i, c], Z[i, c], w[c]))
            elif kind == "focal":
                total += float(oracles.focal(Y[i, c], Z[i, c], 1.5))
            else:
                total += float(oracles.wbce(Y[i, c], Z[i, c], 1.0))
    assert mean == pytest.approx(total / 15, rel=1e-12)
    # gradient of the mean, checked by finite differences
    h = 1e-6
    for i, c in [(0, 0), (2, 1), (4, 2)]:
        Zp, Zm = Z.copy(), Z.copy()
        Zp[i, c] += h
        Zm[i, c] -= h
        fd = (batch_loss(Y, Zp, cfg)[0] - batch_loss(Y, Zm, cfg)[0]) / (2 * h)
        assert grad[i, c] == pytest.approx(fd, rel=1e-5, abs=1e-11)


def test_batch_loss_shape_errors():
    with pytest.raises(ShapeMismatch):
        batch_loss(np.zeros((2, 3)), np.zeros((2, 2)), LossConfig("bce"))
    with pytest.raises(ShapeMismatch):
        batch_loss(np.zeros((2, 3)), np.zeros((2, 3)), LossConfig("wbce", weights=(1.0, 2.0)))


def test_loss_config_requires_weights_for_wbce():
    with pytest.raises(ValueError):
        LossConfig("wbce")
    with pytest.raises(ValueError):
        LossConfig("hinge")


def test_elementwise_loss_weights_per_column():
    Y = np.ones((1, 2))
    loss, _ = elementwise_loss(Y, np.zeros((1, 2)), LossConfig("wbce", weights=(1.0, 3.0)))
    assert loss[0].tolist() == pytest.approx([LN2, 3 * LN2])
