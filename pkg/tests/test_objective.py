import math

import numpy as np
import pytest

from dicot.core import autodiff as ad
from dicot.exceptions import ConfigError, NumericsError, ShapeError
from dicot.schemas import LossConfig, PositiveMode
from dicot.services import objective_service as obj

HAND_LOSS = (math.log(1 + math.e) + math.log(1 + math.e ** 2)) / 2  # 1.7201...


def _naive_loss(Z, tau, target_row):
    B, k, _ = Z.shape
    total = 0.0
    for i in range(B):
        for j in range(k):
            logits = np.array([Z[i, j] @ Z[i, p] / tau for p in range(k)])
            top = logits.max()
            lse = top + math.log(np.exp(logits - top).sum())
            total += lse - logits[target_row[j]]
    return total / (B * k)


def test_similarity_hand_example():
    Z = np.array([[[1.0], [2.0]]])
    np.testing.assert_array_equal(obj.similarity(Z, 1.0)[0], [[1, 2], [2, 4]])
    np.testing.assert_array_equal(obj.similarity(Z, 0.5)[0], [[2, 4], [4, 8]])


def test_similarity_of_zeros():
    assert not obj.similarity(np.zeros((2, 3, 4)), 0.07).any()


def test_similarity_rejects_bad_tau():
    with pytest.raises(ConfigError):
        obj.similarity(np.zeros((1, 2, 2)), 0.0)


def test_similarity_is_symmetric(rng):
    S = obj.similarity(rng.normal(size=(3, 5, 4)), 0.3)
    np.testing.assert_allclose(S, S.transpose(0, 2, 1), rtol=0, atol=1e-12)


@pytest.mark.parametrize(
    "mode,expected",
    [
        (PositiveMode.preceding, (0, 0, 1, 2)),
        (PositiveMode.next, (1, 2, 3, 3)),
    ],
)
def test_targets_k4(mode, expected):
    assert obj.targets(4, mode).rows == (expected,)


def test_targets_smallest_k():
    assert obj.targets(2, PositiveMode.preceding).rows == ((0, 0),)


def test_bidirectional_targets_carry_both_rows():
    assert obj.targets(3, PositiveMode.bidirectional).rows == ((0, 0, 1), (1, 2, 2))


def test_shuffled_targets():
    with pytest.raises(ConfigError):
        obj.targets(5, PositiveMode.shuffled)
    rng = np.random.default_rng(0)
    for _ in range(50):
        (row,) = obj.targets(6, PositiveMode.shuffled, rng).rows
        assert all(0 <= p < 6 for p in row)
        # exactly one anchor (the first of the random order) targets itself
        assert sum(p == j for j, p in enumerate(row)) == 1


def test_targets_reject_k1():
    with pytest.raises(ConfigError):
        obj.targets(1, PositiveMode.preceding)


def test_loss_hand_example():
    Z = np.array([[[1.0], [2.0]]])
    target = obj.targets(2, PositiveMode.preceding)
    assert obj.dicot_loss(obj.similarity(Z, 1.0), target) == pytest.approx(HAND_LOSS, rel=1e-12)
    assert HAND_LOSS == pytest.approx(1.7201, abs=1e-4)


@pytest.mark.parametrize("k", [2, 5, 9])
def test_uniform_logits_give_log_k(k):
    S = np.zeros((3, k, k))
    assert obj.dicot_loss(S, obj.targets(k, PositiveMode.preceding)) == pytest.approx(math.log(k), rel=1e-12)


def test_loss_matches_naive_loop():
    rng = np.random.default_rng(11)
    for _ in range(100):
        B, k, F = rng.integers(1, 9), rng.integers(2, 11), rng.integers(1, 17)
        Z = rng.normal(size=(B, k, F))
        tau = float(rng.uniform(0.05, 2.0))
        target = obj.targets(int(k), PositiveMode.preceding)
        fast = obj.dicot_loss(obj.similarity(Z, tau), target)
        assert fast == pytest.approx(_naive_loss(Z, tau, target.rows[0]), rel=1e-12)


def test_bidirectional_is_mean_of_directions(rng):
    S = obj.similarity(rng.normal(size=(4, 6, 3)), 0.2)
    pre = obj.dicot_loss(S, obj.targets(6, PositiveMode.preceding))
    nxt = obj.dicot_loss(S, obj.targets(6, PositiveMode.next))
    both = obj.dicot_loss(S, obj.targets(6, PositiveMode.bidirectional))
    assert both == pytest.approx((pre + nxt) / 2, rel=1e-12, abs=1e-12)


def test_row_shift_invariance(rng):
    S = rng.normal(size=(2, 5, 5))
    target = obj.targets(5, PositiveMode.preceding)
    shifted = S + rng.normal(size=(2, 5, 1)) * 10
    assert obj.dicot_loss(shifted, target) == pytest.approx(obj.dicot_loss(S, target), rel=1e-12)


def test_loss_rejects_non_finite():
    S = np.zeros((1, 3, 3))
    S[0, 1, 2] = np.inf
    with pytest.raises(NumericsError):
        obj.dicot_loss(S, obj.targets(3, PositiveMode.preceding))


def test_loss_rejects_k_mismatch():
    with pytest.raises(ShapeError):
        obj.dicot_loss(np.zeros((1, 3, 3)), obj.targets(4, PositiveMode.preceding))


def test_grad_softmax_minus_onehot():
    # B*k = 1 is not a valid shape, so use k=2 with one anchor of interest and rescale
    S = np.array([[[0.0, math.log(7 / 3)], [0.0, 0.0]]])
    grad = obj.dicot_loss_grad(S, obj.targets(2, PositiveMode.preceding)) * 2
    np.testing.assert_allclose(grad[0, 0], [-0.7, 0.7], atol=1e-12)


def test_grad_rows_sum_to_zero_with_sign_structure(rng):
    S = rng.normal(size=(3, 5, 5))
    target = obj.targets(5, PositiveMode.preceding)
    grad = obj.dicot_loss_grad(S, target)
    np.testing.assert_allclose(grad.sum(axis=2), 0.0, atol=1e-15)
    for j, p in enumerate(target.rows[0]):
        assert np.all(grad[:, j, p] < 0)
        others = np.delete(grad[:, j, :], p, axis=1)
        assert np.all(others > 0)


def test_grad_matches_finite_differences(rng):
    S = rng.normal(size=(3, 5, 5))
    target = obj.targets(5, PositiveMode.bidirectional)
    analytic = obj.dicot_loss_grad(S, target)
    step = 1e-6
    numeric = np.zeros_like(S)
    for idx in np.ndindex(S.shape):
        plus, minus = S.copy(), S.copy()
        plus[idx] += step
        minus[idx] -= step
        numeric[idx] = (obj.dicot_loss(plus, target) - obj.dicot_loss(minus, target)) / (2 * step)
    assert np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))) < 1e-8


def test_loss_node_matches_array_path(rng):
    Z = rng.normal(size=(2, 4, 3))
    for mode in (PositiveMode.preceding, PositiveMode.next, PositiveMode.bidirectional):
        target = obj.targets(4, mode)
        node = obj.dicot_loss_node(ad.Tensor(Z), target, 0.5).item()
        assert node == pytest.approx(obj.dicot_loss(obj.similarity(Z, 0.5), target), rel=1e-12)


def test_loss_node_gradient_wrt_embeddings(rng):
    Z = rng.normal(size=(2, 3, 4))
    target = obj.targets(3, PositiveMode.preceding)
    assert ad.grad_check(lambda t: obj.dicot_loss_node(t, target, 0.7), Z) < 1e-6


def test_loss_from_config_shuffled_uses_rng(rng):
    Z = ad.Tensor(rng.normal(size=(2, 5, 3)))
    cfg = LossConfig(tau=0.5, positive_mode=PositiveMode.shuffled)
    a = obj.loss_from_config(Z, cfg, np.random.default_rng(3)).item()
    b = obj.loss_from_config(Z, cfg, np.random.default_rng(3)).item()
    assert a == b
    with pytest.raises(ConfigError):
        obj.loss_from_config(Z, cfg)


def test_tau_must_be_positive():
    with pytest.raises(ValueError):
        LossConfig(tau=0)


def test_row_argmax_is_temperature_invariant(rng):
    Z = rng.normal(size=(2, 6, 3))
    np.testing.assert_array_equal(
        obj.similarity(Z, 0.07).argmax(axis=2), obj.similarity(Z, 3.0).argmax(axis=2)
    )
