"""Loss functions against frozen hand-computed oracle values."""

import numpy as np
import pytest

from attrid import autodiff as ad
from attrid import losses as L
from attrid.autodiff import ContractViolationError, SeededRng, Tensor
from attrid.losses import LossWeights

# frozen oracle constants (full float64 precision)
LN4 = 1.3862943611198906
LN2_X2 = 1.3862943611198906
LN2_X3 = 2.0794415416798357
SOFTMAX_200_CLASS1 = 0.2395447662218845   # -ln(e^2 / (e^2 + 2))
SIGMOID_CE_3_1 = 0.04858735157374196      # ln(1 + e^-3)
SIGMOID_CE_5_0 = 5.006715348489118        # ln(1 + e^5)


# ---------------------------------------------------------------------------
# identity loss

def test_identity_loss_uniform():
    p = Tensor(np.full((3, 4), 0.25))
    assert abs(L.identity_loss(p, [1, 2, 4]).item() - LN4) < 1e-9


def test_identity_loss_softmax_hand_oracle():
    p = ad.softmax_rows(Tensor([[2.0, 0.0, 0.0]]))
    assert abs(L.identity_loss(p, [1]).item() - SOFTMAX_200_CLASS1) < 1e-9


def test_identity_loss_perfect_prediction():
    p = Tensor([[1.0 - 1e-12, 1e-12]])
    assert abs(L.identity_loss(p, [1]).item()) < 1e-9


def test_identity_loss_rejects_out_of_range_labels():
    p = Tensor(np.full((2, 3), 1.0 / 3.0))
    with pytest.raises(ContractViolationError):
        L.identity_loss(p, [0, 1])
    with pytest.raises(ContractViolationError):
        L.identity_loss(p, [1, 4])


def test_identity_loss_softmax_shift_invariance():
    rng = SeededRng(9)
    for _ in range(10):
        logits = rng.normal((4, 6))
        labels = rng.integers(1, 7, (4,))
        a = L.identity_loss(ad.softmax_rows(Tensor(logits)), labels).item()
        b = L.identity_loss(ad.softmax_rows(Tensor(logits + 13.5)), labels).item()
        assert abs(a - b) < 1e-9


def test_identity_loss_survives_saturated_probabilities():
    # clamping keeps the loss finite even on an exact zero probability
    p = Tensor([[1.0, 0.0]])
    assert np.isfinite(L.identity_loss(p, [2]).item())


# ---------------------------------------------------------------------------
# sigmoid cross entropy (attribute and latent-embedding variants)

def test_attribute_loss_zero_logits_m2():
    logits = Tensor(np.zeros((3, 2)))
    targets = SeededRng(0).bernoulli(0.5, (3, 2))
    assert abs(L.attribute_loss(logits, targets).item() - LN2_X2) < 1e-9


def test_attribute_loss_zero_logits_m3():
    logits = Tensor(np.zeros((5, 3)))
    targets = SeededRng(1).bernoulli(0.5, (5, 3))
    assert abs(L.attribute_loss(logits, targets).item() - LN2_X3) < 1e-9


def test_attribute_loss_hand_oracle():
    assert abs(L.attribute_loss(Tensor([[3.0]]), [[1.0]]).item() - SIGMOID_CE_3_1) < 1e-9


def test_attribute_loss_sums_classes_means_batch():
    # two identical rows keep the value; an extra attribute column adds ln 2
    one = L.attribute_loss(Tensor(np.zeros((1, 2))), [[0.0, 1.0]]).item()
    two = L.attribute_loss(Tensor(np.zeros((2, 2))), [[0.0, 1.0], [0.0, 1.0]]).item()
    wide = L.attribute_loss(Tensor(np.zeros((1, 3))), [[0.0, 1.0, 1.0]]).item()
    assert abs(one - two) < 1e-12
    assert abs(wide - one - np.log(2.0)) < 1e-9


def test_attribute_loss_rejects_bad_targets():
    with pytest.raises(ContractViolationError):
        L.attribute_loss(Tensor([[0.0]]), [[1.5]])
    with pytest.raises(ad.InvalidShapeError):
        L.attribute_loss(Tensor([[0.0, 0.0]]), [[1.0]])


def test_attribute_loss_soft_target_fixed_point():
    # when targets equal sigmoid(logits) exactly, the gradient on logits is zero
    rng = SeededRng(4)
    for _ in range(10):
        logits = Tensor(rng.normal((3, 4)), requires_grad=True)
        targets = ad.sigmoid(logits).values.copy()
        ad.backward(L.attribute_loss(logits, targets))
        assert np.max(np.abs(logits.grad)) < 1e-9
        logits.zero_grad()


def test_iia_attribute_loss_matches_attribute_loss():
    rng = SeededRng(6)
    e = rng.normal((4, 5))
    t = rng.bernoulli(0.5, (4, 5))
    assert L.iia_attribute_loss(Tensor(e), t).item() == L.attribute_loss(Tensor(e), t).item()


def test_iia_attribute_loss_hand_oracle():
    assert abs(L.iia_attribute_loss(Tensor([[5.0]]), [[0.0]]).item() - SIGMOID_CE_5_0) < 1e-9


# ---------------------------------------------------------------------------
# MSE losses

def test_reconstruction_loss_identical_inputs():
    x = Tensor(SeededRng(2).normal((3, 4)))
    assert L.reconstruction_loss(x, Tensor(x.values.copy())).item() == 0.0


def test_reconstruction_loss_hand_oracle():
    x = Tensor([[1.0, 2.0]])
    rec = Tensor([[0.0, 0.0]])
    assert abs(L.reconstruction_loss(x, rec).item() - 2.5) < 1e-12
    assert abs(L.reconstruction_loss(x, rec, reduction="sum").item() - 5.0) < 1e-12


def test_reconstruction_loss_symmetry():
    rng = SeededRng(8)
    a = Tensor(rng.normal((2, 3)))
    b = Tensor(rng.normal((2, 3)))
    assert L.reconstruction_loss(a, b).item() == L.reconstruction_loss(b, a).item()


def test_transfer_loss_hand_oracle():
    e = Tensor([[0.0, 0.0]])
    logits = Tensor([[3.0, 4.0]])
    assert abs(L.transfer_loss(e, logits).item() - 12.5) < 1e-12


def test_transfer_loss_zero_when_aligned():
    e = Tensor(SeededRng(3).normal((4, 6)))
    assert L.transfer_loss(e, Tensor(e.values.copy())).item() == 0.0


def test_transfer_loss_permutation_invariance():
    rng = SeededRng(5)
    e = rng.normal((3, 4))
    logits = rng.normal((3, 4))
    perm = SeededRng(0).permutation(4)
    a = L.transfer_loss(Tensor(e), Tensor(logits)).item()
    b = L.transfer_loss(Tensor(e[:, perm]), Tensor(logits[:, perm])).item()
    assert abs(a - b) < 1e-12


def test_mse_unknown_reduction():
    with pytest.raises(ValueError):
        L.reconstruction_loss(Tensor([[1.0]]), Tensor([[0.0]]), reduction="max")


# ---------------------------------------------------------------------------
# weighted totals

def test_total_iia_loss_composition():
    w = LossWeights(lambda1=10.0, lambda2=10.0)
    total = L.total_iia_loss(Tensor(0.5), Tensor(0.1), Tensor(0.2), w)
    assert abs(total.item() - 3.5) < 1e-12


def test_total_iia_loss_zero_weights():
    w = LossWeights(lambda1=0.0, lambda2=0.0)
    assert L.total_iia_loss(Tensor(0.7), Tensor(0.3), Tensor(0.9), w).item() == 0.7
    assert L.total_iia_loss(Tensor(0.0), Tensor(0.0), Tensor(0.0),
                            LossWeights()).item() == 0.0


def test_total_iia_loss_rejects_negative_components():
    with pytest.raises(ContractViolationError):
        L.total_iia_loss(Tensor(-0.1), Tensor(0.0), Tensor(0.0), LossWeights())


def test_total_attribute_loss_composition():
    w = LossWeights(lambda1=10.0, lambda2=10.0)
    assert abs(L.total_attribute_loss(Tensor(1.0), Tensor(0.1), w).item() - 2.0) < 1e-12
    assert L.total_attribute_loss(Tensor(0.8), Tensor(5.0),
                                  LossWeights(lambda2=0.0)).item() == 0.8
    assert L.total_attribute_loss(Tensor(0.8), Tensor(0.0), w).item() == 0.8


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(lambda1=-1.0)


def test_all_losses_nonnegative_on_random_inputs():
    rng = SeededRng(12)
    for _ in range(25):
        logits = Tensor(rng.normal((3, 4), scale=3.0))
        targets = rng.bernoulli(0.5, (3, 4))
        p = ad.softmax_rows(Tensor(rng.normal((3, 5), scale=3.0)))
        labels = rng.integers(1, 6, (3,))
        assert L.identity_loss(p, labels).item() >= 0.0
        assert L.attribute_loss(logits, targets).item() >= 0.0
        a = Tensor(rng.normal((3, 4)))
        b = Tensor(rng.normal((3, 4)))
        assert L.transfer_loss(a, b).item() >= 0.0
