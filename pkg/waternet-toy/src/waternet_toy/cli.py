"""Train on synthetic data and run inference over a prepared feature
stack, emitting a probability GeoTIFF the raster pipeline can ingest."""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import torch

from hydrotrace import RasterGrid, load_raster, save_raster
from hydrotrace.features import CHANNEL_NAMES

from .model import ModelSpec
from .train import load_checkpoint, save_checkpoint, train


def _train_command(args) -> int:
    spec = ModelSpec(base_width=args.width)
    result = train(
        spec=spec,
        steps=args.steps,
        seed=args.seed,
        image_size=args.image_size,
    )
    save_checkpoint(result.model, args.out)
    print(
        f"trained {args.steps} steps: loss {result.initial_loss:.4f} -> {result.final_loss:.4f}, "
        f"val f1 {result.val_f1:.3f}; checkpoint at {args.out}"
    )
    return 0


def _infer_command(args) -> int:
    model = load_checkpoint(args.ckpt)
    stack_dir = Path(args.stack)
    grids = [load_raster(stack_dir / f"{name}.tif") for name in CHANNEL_NAMES]
    base = grids[0]

    factor = model.spec.downsample_factor
    rows = base.rows - base.rows % factor
    cols = base.cols - base.cols % factor
    if rows == 0 or cols == 0:
        raise SystemExit(f"stack too small: needs at least {factor}x{factor} cells")
    x = np.stack([g.values[:rows, :cols].astype(np.float32) for g in grids])

    with torch.no_grad():
        prob = model(torch.from_numpy(x[None]))[0, 0].numpy()

    # The output sits at half resolution: double the cell size.
    out_grid = RasterGrid(
        prob.astype(np.float32),
        origin_lon=base.origin_lon,
        origin_lat=base.origin_lat,
        cell_size=base.cell_size * 2,
    )
    save_raster(out_grid, args.out)
    print(f"wrote {args.out} ({out_grid.rows}x{out_grid.cols} probability grid)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="waternet-toy", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="train on synthetic line drawings")
    train_p.add_argument("--out", required=True, help="checkpoint path")
    train_p.add_argument("--steps", type=int, default=200)
    train_p.add_argument("--width", type=int, default=16)
    train_p.add_argument("--image-size", type=int, default=64)
    train_p.add_argument("--seed", type=int, default=0)
    train_p.set_defaults(func=_train_command)

    infer_p = sub.add_parser("infer", help="run a checkpoint over a feature stack directory")
    infer_p.add_argument("--ckpt", required=True)
    infer_p.add_argument("--stack", required=True, help="directory of the 10 channel GeoTIFFs")
    infer_p.add_argument("--out", required=True, help="output probability GeoTIFF")
    infer_p.set_defaults(func=_infer_command)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
