"""Training loop: SGD with momentum and weight decay, a validation-F1
batch-size scheduler, and checkpointing."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from .data import augment, make_dataset
from .loss import combined_loss
from .model import ModelSpec, WaterNetToy, build_model

LEARNING_RATE = 0.01
MOMENTUM = 0.9
WEIGHT_DECAY = 0.0001
STALE_LIMIT = 15
BATCH_GROWTH_FACTOR = 2  # batch grows by twice the original size


@dataclass(frozen=True)
class SchedulerState:
    original_batch: int
    current_batch: int = 0
    stale_iterations: int = 0
    best_val_f1: float = 0.0

    def __post_init__(self):
        if self.current_batch == 0:
            object.__setattr__(self, "current_batch", self.original_batch)


def scheduler_step(state: SchedulerState, val_f1: float) -> SchedulerState:
    """Grow the batch by twice the original size after 15 stale scores."""
    if val_f1 > state.best_val_f1:
        return replace(state, best_val_f1=val_f1, stale_iterations=0)
    stale = state.stale_iterations + 1
    if stale >= STALE_LIMIT:
        return replace(
            state,
            stale_iterations=0,
            current_batch=state.current_batch + BATCH_GROWTH_FACTOR * state.original_batch,
        )
    return replace(state, stale_iterations=stale)


def f1_from_probabilities(pred: torch.Tensor, truth: torch.Tensor, threshold: float = 0.5) -> float:
    hard = pred >= threshold
    positive = truth >= 0.5
    tp = int((hard & positive).sum())
    fp = int((hard & ~positive).sum())
    fn = int((~hard & positive).sum())
    if tp == 0:
        return 0.0
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    return 2 * p * r / (p + r)


@dataclass
class TrainResult:
    model: WaterNetToy
    initial_loss: float
    final_loss: float
    val_f1: float
    scheduler: SchedulerState
    batch_history: list[int]


def _to_batch(samples) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    xs = torch.from_numpy(np.stack([s[0] for s in samples]))
    ts = torch.from_numpy(np.stack([s[1] for s in samples]))
    ws = torch.from_numpy(np.stack([s[2] for s in samples]))
    return xs, ts, ws


def train(
    spec: ModelSpec = ModelSpec(),
    steps: int = 200,
    n_train: int = 16,
    n_val: int = 8,
    batch_size: int = 16,
    image_size: int = 64,
    seed: int = 0,
    augment_samples: bool = True,
) -> TrainResult:
    """Train on synthetic line drawings; deterministic for a fixed seed."""
    torch.manual_seed(seed)
    rng = np.random.RandomState(seed)
    model = build_model(spec)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=LEARNING_RATE, momentum=MOMENTUM, weight_decay=WEIGHT_DECAY
    )

    train_set = make_dataset(n_train, rng, image_size)
    val_x, val_t, val_w = _to_batch(make_dataset(n_val, rng, image_size))

    scheduler = SchedulerState(original_batch=batch_size)
    batch_history = [scheduler.current_batch]
    initial_loss = None
    loss_value = 0.0

    for step in range(steps):
        take = min(scheduler.current_batch, n_train)
        picks = rng.choice(n_train, size=take, replace=False)
        samples = [train_set[i] for i in picks]
        if augment_samples:
            samples = [augment(s, rng) for s in samples]
        x, t, w = _to_batch(samples)

        optimizer.zero_grad()
        pred = model(x)
        loss = combined_loss(pred, t, w)
        loss.backward()
        optimizer.step()

        loss_value = float(loss.detach())
        if initial_loss is None:
            initial_loss = loss_value

        model.eval()
        with torch.no_grad():
            val_f1 = f1_from_probabilities(model(val_x), val_t)
        model.train()
        scheduler = scheduler_step(scheduler, val_f1)
        batch_history.append(scheduler.current_batch)

    model.eval()
    with torch.no_grad():
        final_f1 = f1_from_probabilities(model(val_x), val_t)
    return TrainResult(
        model=model,
        initial_loss=float(initial_loss),
        final_loss=loss_value,
        val_f1=final_f1,
        scheduler=scheduler,
        batch_history=batch_history,
    )


def save_checkpoint(model: WaterNetToy, path: str | Path) -> None:
    torch.save(
        {
            "spec": {
                "input_channels": model.spec.input_channels,
                "base_width": model.spec.base_width,
                "encoder_count": model.spec.encoder_count,
                "decoder_count": model.spec.decoder_count,
            },
            "state_dict": model.state_dict(),
        },
        str(path),
    )


def load_checkpoint(path: str | Path) -> WaterNetToy:
    payload = torch.load(str(path), map_location="cpu", weights_only=True)
    model = build_model(ModelSpec(**payload["spec"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
