import numpy as np
import pytest
import torch

from waternet_toy.loss import combined_loss, fcode_role, targets_from_fcodes


def test_playa_weight_is_negative_class():
    role = fcode_role(0.0)
    assert role.kind == "negative"


def test_swamp_weight_is_masked():
    assert fcode_role(0.5).kind == "masked"


def test_ephemeral_weight_scales_positives():
    role = fcode_role(7.5)
    assert role.kind == "positive"
    assert role.scale == 7.5


def test_weight_one_is_positive():
    assert fcode_role(1.0).kind == "positive"


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        fcode_role(-0.1)


def test_targets_from_fcode_grid():
    grid = torch.tensor([[0, 1, 2, 3]])
    weights = {1: 0.0, 2: 0.5, 3: 7.5}
    truth, pix = targets_from_fcodes(grid, weights)
    assert truth.tolist() == [[0.0, 0.0, 0.0, 1.0]]
    assert pix.tolist() == [[1.0, 1.0, 0.0, 7.5]]


# ---------------------------------------------------------------------------
# combined loss
# ---------------------------------------------------------------------------


def _random_case(rng, masked_fraction=0.25):
    pred = torch.tensor(rng.uniform(0.05, 0.95, (8, 8)), dtype=torch.float64, requires_grad=True)
    truth = torch.tensor((rng.rand(8, 8) < 0.4).astype(float), dtype=torch.float64)
    weights = torch.tensor(
        np.where(rng.rand(8, 8) < masked_fraction, 0.0, rng.choice([1.0, 2.0, 7.5], (8, 8))),
        dtype=torch.float64,
    )
    return pred, truth, weights


def test_perfect_prediction_has_near_zero_loss():
    truth = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
    pred = truth.clamp(1e-7, 1 - 1e-7)
    weights = torch.ones_like(truth)
    loss = combined_loss(pred, truth, weights)
    assert float(loss) == pytest.approx(0.0, abs=1e-5)


def test_all_masked_gives_zero_loss_and_zero_gradient():
    rng = np.random.RandomState(0)
    pred, truth, _ = _random_case(rng)
    weights = torch.zeros_like(truth)
    loss = combined_loss(pred, truth, weights)
    assert float(loss.detach()) == 0.0
    loss.backward()
    assert torch.count_nonzero(pred.grad) == 0


def test_gradient_matches_central_finite_differences():
    rng = np.random.RandomState(1)
    for trial in range(5):
        pred, truth, weights = _random_case(rng)
        loss = combined_loss(pred, truth, weights)
        loss.backward()
        grad = pred.grad.clone()

        h = 1e-6
        flat = pred.detach().clone().reshape(-1)
        worst = 0.0
        for i in range(flat.numel()):
            up = flat.clone()
            up[i] += h
            down = flat.clone()
            down[i] -= h
            fd = (
                float(combined_loss(up.reshape(8, 8), truth, weights))
                - float(combined_loss(down.reshape(8, 8), truth, weights))
            ) / (2 * h)
            g = float(grad.reshape(-1)[i])
            if weights.reshape(-1)[i] == 0:
                assert g == 0.0  # masked pixels: exactly zero gradient
                assert abs(fd) < 1e-9
            else:
                scale = max(abs(g), abs(fd), 1e-8)
                worst = max(worst, abs(g - fd) / scale)
        assert worst < 1e-4, f"trial {trial}: rel err {worst}"


def test_loss_is_permutation_equivariant():
    rng = np.random.RandomState(2)
    pred, truth, weights = _random_case(rng)
    base = float(combined_loss(pred.detach(), truth, weights))
    perm = torch.randperm(64)
    shuffled = float(
        combined_loss(
            pred.detach().reshape(-1)[perm].reshape(8, 8),
            truth.reshape(-1)[perm].reshape(8, 8),
            weights.reshape(-1)[perm].reshape(8, 8),
        )
    )
    assert shuffled == pytest.approx(base, rel=1e-12)


def test_degrading_a_correct_pixel_never_helps():
    rng = np.random.RandomState(3)
    for _ in range(50):
        pred, truth, weights = _random_case(rng)
        pred = pred.detach()
        base = float(combined_loss(pred, truth, weights))
        idx = rng.randint(64)
        r, c = divmod(idx, 8)
        if weights[r, c] == 0:
            continue
        worse = pred.clone()
        # Move the prediction toward the wrong side.
        worse[r, c] = 0.02 if truth[r, c] == 1 else 0.98
        if truth[r, c] == 1 and pred[r, c] < worse[r, c]:
            continue  # already worse than the degraded value
        if truth[r, c] == 0 and pred[r, c] > worse[r, c]:
            continue
        assert float(combined_loss(worse, truth, weights)) >= base - 1e-12


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape mismatch"):
        combined_loss(torch.rand(2, 2), torch.rand(2, 3), torch.rand(2, 2))


def test_tanimoto_weight_switch():
    rng = np.random.RandomState(4)
    pred, truth, weights = _random_case(rng, masked_fraction=0.0)
    weighted = combined_loss(pred.detach(), truth, weights, weight_tanimoto=True)
    unweighted = combined_loss(pred.detach(), truth, weights, weight_tanimoto=False)
    assert float(weighted) != float(unweighted)
