"""waternet-toy: toy-scale waterway segmentation model and training loop."""

from .loss import combined_loss, fcode_role
from .model import ModelSpec, WaterNetToy, build_model, expected_shapes
from .train import SchedulerState, scheduler_step, train

__all__ = [
    "ModelSpec",
    "SchedulerState",
    "WaterNetToy",
    "build_model",
    "combined_loss",
    "expected_shapes",
    "fcode_role",
    "scheduler_step",
    "train",
]
