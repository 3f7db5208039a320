"""Synthetic line-drawing samples and training-time augmentation.

A sample is (inputs, truth, pixel_weights): inputs are the 10 feature
channels at full resolution, truth/weights sit at the model's half
resolution output grid.
"""

from __future__ import annotations

import numpy as np

DROP_FRACTION = 0.2


def _draw_lines(rng: np.random.RandomState, size: int) -> np.ndarray:
    """A few random walks from the top edge to the bottom: thin line art."""
    mask = np.zeros((size, size), dtype=bool)
    for _ in range(rng.randint(2, 5)):
        col = rng.randint(2, size - 2)
        for row in range(rng.randint(0, size // 3), size):
            mask[row, col] = True
            col = int(np.clip(col + rng.choice([-1, 0, 0, 1]), 1, size - 2))
    return mask


def make_sample(rng: np.random.RandomState, size: int = 64) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One synthetic sample with the line signal spread over the channels."""
    lines = _draw_lines(rng, size)
    signal = lines.astype(np.float32)
    noise = rng.randn(10, size, size).astype(np.float32) * 0.25
    x = noise
    # Optical channels see dark water, the index channels see it bright.
    x[0] += 0.4 - 1.2 * signal
    x[1] += 0.3 - 0.8 * signal
    x[2] += 0.2 - 0.5 * signal
    x[3] += 0.2 - 0.4 * signal
    x[4] += -0.3 + 0.6 * signal
    x[5] += -0.2 + 1.4 * signal
    # Terrain channels: lines sit in little valleys.
    x[6] += 0.5 - 0.5 * signal
    x[9] += 0.3 * signal

    half = size // 2
    truth = lines.reshape(half, 2, half, 2).any(axis=(1, 3)).astype(np.float32)
    weights = np.ones_like(truth)
    return x, truth[None], weights[None]


def make_dataset(
    n: int, rng: np.random.RandomState, size: int = 64
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    return [make_sample(rng, size) for _ in range(n)]


def augment(
    sample: tuple[np.ndarray, np.ndarray, np.ndarray],
    rng: np.random.RandomState,
    drop_fraction: float = DROP_FRACTION,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random flips, 90-degree rotations, and cell dropout.

    Geometric transforms apply to inputs and labels alike; dropout zeroes
    every channel of a uniformly chosen fraction of input cells and
    leaves the labels untouched. ``drop_fraction=0`` plus the identity
    draw reproduces the sample exactly (test mode).
    """
    x, truth, weights = sample
    flip_h, flip_v = rng.rand() < 0.5, rng.rand() < 0.5
    quarter_turns = rng.randint(0, 4)

    def geometric(a: np.ndarray) -> np.ndarray:
        if flip_h:
            a = a[:, :, ::-1]
        if flip_v:
            a = a[:, ::-1, :]
        if quarter_turns:
            a = np.rot90(a, k=quarter_turns, axes=(1, 2))
        return a

    x = geometric(x)
    truth = geometric(truth)
    weights = geometric(weights)

    if drop_fraction > 0:
        keep = rng.rand(*x.shape[1:]) >= drop_fraction
        x = x * keep[None].astype(x.dtype)

    return np.ascontiguousarray(x), np.ascontiguousarray(truth), np.ascontiguousarray(weights)
