"""Waterway-type weighting and the combined BCE + Tanimoto loss.

Per-pixel weights come from the waterway-type table: weight 0 marks
non-waterway types, weights strictly between 0 and 1 are masked out of
the loss entirely (zero contribution, zero gradient), and weights >= 1
scale the pixel's contribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

BCE_WEIGHT = 0.3
TANIMOTO_WEIGHT = 0.7
_EPS = 1e-7


@dataclass(frozen=True)
class FcodeRole:
    kind: str  # "negative" | "masked" | "positive"
    scale: float = 0.0


def fcode_role(weight: float) -> FcodeRole:
    """Interpret a waterway-type training weight."""
    if weight < 0:
        raise ValueError(f"weight must be nonnegative, got {weight}")
    if weight == 0:
        return FcodeRole("negative")
    if weight < 1:
        return FcodeRole("masked")
    return FcodeRole("positive", scale=float(weight))


def targets_from_fcodes(
    fcode_grid: torch.Tensor, weights: dict[int, float]
) -> tuple[torch.Tensor, torch.Tensor]:
    """(truth, pixel_weight) tensors from an integer waterway-type grid.

    Codes absent from the table count as plain background (weight 1).
    """
    truth = torch.zeros(fcode_grid.shape, dtype=torch.float64)
    pix = torch.ones(fcode_grid.shape, dtype=torch.float64)
    for code, weight in weights.items():
        role = fcode_role(weight)
        hit = fcode_grid == code
        if role.kind == "masked":
            pix[hit] = 0.0
        elif role.kind == "positive":
            truth[hit] = 1.0
            pix[hit] = role.scale
    return truth, pix


def combined_loss(
    pred: torch.Tensor,
    truth: torch.Tensor,
    pixel_weights: torch.Tensor,
    bce_weight: float = BCE_WEIGHT,
    tanimoto_weight: float = TANIMOTO_WEIGHT,
    weight_tanimoto: bool = True,
) -> torch.Tensor:
    """bce_weight * weighted BCE + tanimoto_weight * weighted Tanimoto loss.

    ``pred`` holds probabilities in (0, 1). Masked pixels (weight 0)
    contribute nothing to either term. ``weight_tanimoto`` switches the
    Tanimoto term between fully weighted pixels and mask-only weighting.
    """
    if pred.shape != truth.shape or pred.shape != pixel_weights.shape:
        raise ValueError(
            f"shape mismatch: pred {tuple(pred.shape)}, truth {tuple(truth.shape)}, "
            f"weights {tuple(pixel_weights.shape)}"
        )
    w = pixel_weights
    p = pred.clamp(_EPS, 1.0 - _EPS)
    t = truth

    w_total = w.sum()
    bce_terms = -(t * torch.log(p) + (1.0 - t) * torch.log(1.0 - p))
    if w_total > 0:
        bce = (w * bce_terms).sum() / w_total
    else:
        bce = (w * bce_terms).sum()  # identically zero, keeps the graph alive

    tw = w if weight_tanimoto else (w > 0).to(pred.dtype)
    numerator = (tw * p * t).sum()
    denominator = (tw * (p * p + t * t - p * t)).sum()
    if denominator > 0:
        tanimoto = 1.0 - numerator / denominator
    else:
        tanimoto = denominator * 0.0

    return bce_weight * bce + tanimoto_weight * tanimoto
