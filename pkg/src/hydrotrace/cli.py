"""Command line entry points for the raster-to-vector pipeline."""

from __future__ import annotations

import sys

import click

from . import pipeline


@click.group()
def main():
    """Connect, thin, vectorize and score waterway probability rasters."""


@main.command("prepare-features")
@click.option("--nrgb", nargs=4, required=True, type=click.Path(exists=True), help="NIR, red, green, blue byte rasters.")
@click.option("--dem", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def prepare_features(nrgb, dem, out_dir):
    """Derive the 10 model input channels."""
    written = pipeline.prepare_features_stage(list(nrgb), dem, out_dir)
    click.echo(f"wrote {len(written)} channels to {out_dir}")


def _config_from_flags(**overrides) -> pipeline.PipelineConfig:
    return pipeline.load_config(overrides.pop("config", None), overrides)


@main.command()
@click.option("--prob", required=True, type=click.Path(exists=True))
@click.option("--dem", required=True, type=click.Path(exists=True))
@click.option("--basin", required=True, type=click.Path(exists=True))
@click.option("--reference", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--ref-mask-out", type=click.Path(), default=None)
@click.option("--b", "slope_coefficient_b", type=float, default=None)
@click.option("--prob-floor", "prob_floor", type=float, default=None)
@click.option("--prob-ceil", "prob_ceil", type=float, default=None)
@click.option("--max-iters", "max_iterations", type=int, default=None)
@click.option("--base-cost", "base_cost", type=float, default=None)
@click.option("--buffer-degrees", "buffer_degrees", type=float, default=None)
def connect(prob, dem, basin, reference, out_path, ref_mask_out, **flags):
    """Attach disconnected waterway components to the reference network."""
    config = _config_from_flags(**flags)
    result = pipeline.connect_stage(prob, dem, basin, reference, out_path, config, ref_mask_out)
    click.echo(
        f"connected; pruned={len(result.pruned_component_ids)} "
        f"unreachable={len(result.unreachable_component_ids)} "
        f"added_cells={len(result.added_path_cells)}"
    )


@main.command()
@click.option("--connected", required=True, type=click.Path(exists=True))
@click.option("--dem", required=True, type=click.Path(exists=True))
@click.option("--reference-mask", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def thin(connected, dem, reference_mask, out_path):
    """Thin the connected mask to a one-cell-wide skeleton."""
    pipeline.thin_stage(connected, dem, reference_mask, out_path)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--skeleton", required=True, type=click.Path(exists=True))
@click.option("--dem", required=True, type=click.Path(exists=True))
@click.option("--reference", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def vectorize(skeleton, dem, reference, out_path):
    """Convert the skeleton into an ordered, acyclic vector network."""
    net = pipeline.vectorize_stage(skeleton, dem, reference, out_path)
    click.echo(f"wrote {out_path} ({len(net.segments)} segments)")


@main.command()
@click.option("--pred", required=True, type=click.Path(exists=True))
@click.option("--truth", required=True, type=click.Path(exists=True))
@click.option("--fcodes", type=click.Path(exists=True), default=None)
@click.option("--masked-list", type=click.Path(exists=True), default=None,
              help="Text file with one masked fcode integer per line.")
@click.option("--out", "out_path", required=True, type=click.Path())
def evaluate(pred, truth, fcodes, masked_list, out_path):
    """Score a prediction raster against a truth raster."""
    masked = None
    if masked_list:
        with open(masked_list) as fh:
            masked = {int(line.strip()) for line in fh if line.strip()}
    report = pipeline.evaluate_stage(pred, truth, out_path, fcodes, masked)
    click.echo(f"p={report.p:.4f} r={report.r:.4f} f1={report.f1:.4f}")


@main.command()
@click.option("--network", required=True, type=click.Path(exists=True))
@click.option("--lakes", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def stats(network, lakes, out_path):
    """Sum waterway kilometers per origin and stream order."""
    lengths = pipeline.stats_stage(network, lakes, out_path)
    click.echo(f"wrote {out_path} ({len(lengths)} buckets)")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--workers", "worker_count", type=int, default=None)
def run(config_path, manifest, out_dir, worker_count):
    """Run the full pipeline over every basin in a manifest."""
    overrides = {"worker_count": worker_count} if worker_count else {}
    config = pipeline.load_config(config_path, overrides)
    report = pipeline.run_pipeline(config, manifest, out_dir)
    click.echo(f"basins ok={report['ok']} failed={report['failed']}")
    if report["failed"]:
        sys.exit(1)


if __name__ == "__main__":
    main()
