"""Loss function: analytic anchors, an independent oracle, and invariants."""

import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from segnet import LossConfig, ParameterError, weighted_bce_loss


def _report(capsys, num: int, ok: bool, detail: str) -> None:
    # bypass capture so the verdict line lands in plain `pytest -v` output
    with capsys.disabled():
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  ({detail})")


def _single_positive_2x2(pred_value: float):
    pred = torch.full((1, 2, 2), pred_value, dtype=torch.float64)
    labels = torch.zeros((1, 2, 2), dtype=torch.float64)
    labels[0, 0, 0] = 1.0
    return pred, labels


def test_criterion_10_loss_exactness(capsys):
    # one class, 2x2, one positive, flat 0.5 prediction: 20*ln2 + 3*ln2
    pred, labels = _single_positive_2x2(0.5)
    l20 = float(weighted_bce_loss(pred, labels, LossConfig(weights=(20.0,))))
    l40 = float(weighted_bce_loss(pred, labels, LossConfig(weights=(40.0,))))
    l60 = float(weighted_bce_loss(pred, labels, LossConfig(weights=(60.0,))))
    err_analytic = abs(l20 - 23.0 * math.log(2.0))
    err_doubled = abs(l40 - 43.0 * math.log(2.0))
    # linear in the weight: equal steps in w give equal steps in loss
    err_linear = abs((l60 - l40) - (l40 - l20))
    ok = err_analytic <= 1e-6 and err_doubled <= 1e-9 and err_linear <= 1e-9
    _report(capsys, 10, ok, f"23*ln2 err {err_analytic:.1e}, 43*ln2 err "
                    f"{err_doubled:.1e}, linearity err {err_linear:.1e}")
    assert err_analytic <= 1e-6
    assert err_doubled <= 1e-9
    assert err_linear <= 1e-9


def test_matches_independent_oracle():
    rng = np.random.default_rng(10)
    pred = rng.uniform(0.01, 0.99, size=(3, 5, 4))
    labels = (rng.uniform(size=(3, 5, 4)) < 0.3).astype(np.float64)
    cfg = LossConfig(weights=(20.0, 7.0, 1.5))

    total = 0.0
    for k in range(3):
        for i in range(5):
            for j in range(4):
                p, y = pred[k, i, j], labels[k, i, j]
                total -= cfg.weights[k] * y * math.log(p) + (1 - y) * math.log(1 - p)
    total /= 3.0

    got = float(weighted_bce_loss(torch.from_numpy(pred), torch.from_numpy(labels), cfg))
    assert abs(got - total) <= 1e-12 * max(1.0, abs(total))


def test_perfect_prediction_bound():
    rng = np.random.default_rng(11)
    labels = (rng.uniform(size=(3, 8, 8)) < 0.4).astype(np.float64)
    pred = torch.from_numpy(labels.copy())
    loss = float(weighted_bce_loss(pred, torch.from_numpy(labels)))
    assert loss >= 0.0
    assert loss / labels.size < 1e-5  # clamp residue only


def test_batch_dimension_sums_like_flat():
    rng = np.random.default_rng(12)
    pred = rng.uniform(0.01, 0.99, size=(2, 3, 4, 4))
    labels = (rng.uniform(size=(2, 3, 4, 4)) < 0.5).astype(np.float64)
    batched = float(weighted_bce_loss(torch.from_numpy(pred), torch.from_numpy(labels)))
    split = sum(
        float(weighted_bce_loss(torch.from_numpy(pred[b]), torch.from_numpy(labels[b])))
        for b in range(2))
    assert abs(batched - split) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_loss_nonnegative(seed):
    rng = np.random.default_rng(seed)
    pred = rng.uniform(size=(3, 6, 6))
    labels = (rng.uniform(size=(3, 6, 6)) < rng.uniform()).astype(np.float64)
    loss = float(weighted_bce_loss(torch.from_numpy(pred), torch.from_numpy(labels)))
    assert loss >= 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_loss_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    pred = rng.uniform(0.01, 0.99, size=(3, 6, 6))
    labels = (rng.uniform(size=(3, 6, 6)) < 0.4).astype(np.float64)
    perm = rng.permutation(36)
    pp = pred.reshape(3, 36)[:, perm].reshape(3, 6, 6)
    lp = labels.reshape(3, 36)[:, perm].reshape(3, 6, 6)
    a = float(weighted_bce_loss(torch.from_numpy(pred), torch.from_numpy(labels)))
    b = float(weighted_bce_loss(torch.from_numpy(pp), torch.from_numpy(lp)))
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


def test_zero_only_at_clamped_perfect():
    labels = torch.tensor([[[1.0, 0.0], [0.0, 0.0]]], dtype=torch.float64)
    perfect = float(weighted_bce_loss(labels.clone(), labels, LossConfig(weights=(20.0,))))
    nudged = labels.clone()
    nudged[0, 0, 0] = 0.6
    worse = float(weighted_bce_loss(nudged, labels, LossConfig(weights=(20.0,))))
    assert perfect < worse


def test_rejects_bad_inputs():
    good = torch.full((3, 2, 2), 0.5, dtype=torch.float64)
    binary = torch.zeros((3, 2, 2), dtype=torch.float64)
    with pytest.raises(ParameterError):
        weighted_bce_loss(good, torch.zeros((3, 2, 3), dtype=torch.float64))
    with pytest.raises(ParameterError):
        weighted_bce_loss(good, binary, LossConfig(weights=(20.0,)))
    soft = binary.clone()
    soft[0, 0, 0] = 0.5
    with pytest.raises(ParameterError):
        weighted_bce_loss(good, soft)
    with pytest.raises(ParameterError):
        weighted_bce_loss(good[None, None], binary[None, None])


def test_config_validation():
    with pytest.raises(ParameterError):
        LossConfig(weights=(20.0, -1.0, 20.0))
    with pytest.raises(ParameterError):
        LossConfig(weights=())
    with pytest.raises(ParameterError):
        LossConfig(eps=0.5)
