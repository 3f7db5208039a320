"""Per-basin stage orchestration: prepare -> connect -> thin -> vectorize
-> stats, with isolated failures and a machine-readable run report.

Basin outputs are deterministic: a manifest processed with any worker
count yields byte-identical per-basin artifacts.
"""

from __future__ import annotations

import json
import multiprocessing
import time
import traceback
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import connect as connect_mod
from . import features as features_mod
from . import metrics as metrics_mod
from . import raster_io, thin as thin_mod, vector as vector_mod
from . import geometry
from .errors import HydroTraceError
from .grid import RasterGrid


@dataclass
class PipelineConfig:
    buffer_degrees: float = 0.005
    prob_floor: float = 0.1
    prob_ceil: float = 0.5
    slope_coefficient_b: float = 1.0
    rounding_threshold: float = 0.5
    max_iterations: int = 6
    base_cost: float = 64.0
    masked_fcodes: list[int] = field(default_factory=lambda: sorted(metrics_mod.default_masked_codes()))
    worker_count: int = 1

    def __post_init__(self):
        numeric = [
            self.buffer_degrees,
            self.prob_ceil,
            self.slope_coefficient_b,
            self.rounding_threshold,
            self.base_cost,
        ]
        if any(v <= 0 for v in numeric) or self.prob_floor < 0:
            raise ValueError("config numeric fields must be positive")
        if self.max_iterations < 0 or self.worker_count < 1:
            raise ValueError("max_iterations must be >= 0 and worker_count >= 1")
        if not (self.prob_floor < self.rounding_threshold <= self.prob_ceil):
            raise ValueError("need prob_floor < rounding_threshold <= prob_ceil")

    def edge_params(self) -> connect_mod.EdgeWeightParams:
        return connect_mod.EdgeWeightParams(
            prob_floor=self.prob_floor,
            prob_ceil=self.prob_ceil,
            slope_coefficient=self.slope_coefficient_b,
        )

    def schedule(self) -> connect_mod.SearchSchedule:
        return connect_mod.SearchSchedule(
            base_cost=self.base_cost, max_iterations=self.max_iterations
        )


def load_config(path: str | Path | None, overrides: dict | None = None) -> PipelineConfig:
    """Flat ``key = value`` config file; '#' starts a comment."""
    values: dict = {}
    if path is not None:
        for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
            key, _, text = line.partition("=")
            values[key.strip()] = text.strip()
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    kwargs: dict = {}
    for f in fields(PipelineConfig):
        if f.name not in values:
            continue
        raw = values.pop(f.name)
        if f.name == "masked_fcodes":
            if isinstance(raw, str):
                raw = [int(x) for x in raw.replace(",", " ").split()]
            kwargs[f.name] = list(raw)
        elif f.name in ("max_iterations", "worker_count"):
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = float(raw)
    if values:
        raise ValueError(f"unknown config keys: {sorted(values)}")
    return PipelineConfig(**kwargs)


def prepare_features_stage(nrgb_paths: list[str], dem_path: str, out_dir: str | Path) -> list[Path]:
    """Write the 10 input channels as single-band GeoTIFFs."""
    grids = [raster_io.load_raster(p) for p in nrgb_paths]
    dem = raster_io.load_raster(dem_path)
    stack = features_mod.compute_feature_stack(*grids, dem)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, channel in zip(features_mod.CHANNEL_NAMES, stack.channels):
        path = out_dir / f"{name}.tif"
        raster_io.save_raster(channel, path)
        written.append(path)
    return written


def connect_stage(
    prob_path: str,
    dem_path: str,
    basin_path: str,
    reference_path: str,
    out_path: str | Path,
    config: PipelineConfig,
    ref_mask_out: str | Path | None = None,
) -> connect_mod.ConnectionResult:
    probability = raster_io.load_raster(prob_path)
    elevation = raster_io.load_raster(dem_path)
    basin = geometry.load_polygons(basin_path)[0]
    reference_lines = [line for _, line in geometry.load_lines(reference_path)]
    tile = connect_mod.build_basin_tile(
        probability, elevation, basin, reference_lines, config.buffer_degrees
    )
    result = connect_mod.connect_components(
        tile, config.edge_params(), config.schedule(), config.rounding_threshold
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    raster_io.save_raster(result.connected_mask, out_path)
    sidecar = out_path.with_suffix(".stats.json")
    with open(sidecar, "w") as fh:
        json.dump(result.stats(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    if ref_mask_out is not None:
        raster_io.save_raster(tile.reference_mask, ref_mask_out)
    # The clipped DEM rides along for the later stages.
    raster_io.save_raster(tile.elevation, out_path.parent / (out_path.stem + "_dem.tif"))
    return result


def thin_stage(connected_path: str, dem_path: str, ref_mask_path: str, out_path: str | Path) -> RasterGrid:
    connected = raster_io.load_raster(connected_path)
    dem = raster_io.load_raster(dem_path)
    ref_mask = raster_io.load_raster(ref_mask_path)
    skeleton = thin_mod.thin(connected, dem, ref_mask)
    raster_io.save_raster(skeleton, out_path)
    return skeleton


def vectorize_stage(
    skeleton_path: str, dem_path: str, reference_path: str, out_path: str | Path
) -> vector_mod.WaterNetwork:
    skeleton = raster_io.load_raster(skeleton_path)
    dem = raster_io.load_raster(dem_path)
    reference_net = vector_mod.reference_from_geojson(reference_path)
    ref_lines = [line for _, line in geometry.load_lines(reference_path)]
    ref_mask = skeleton.with_values(geometry.burn_lines(ref_lines, skeleton))
    net = vector_mod.build_network(skeleton, dem, reference_net, ref_mask)
    geometry.write_geojson(vector_mod.network_to_geojson(net), out_path)
    return net


def stats_stage(network_path: str, lakes_path: str | None, out_path: str | Path) -> dict:
    net = vector_mod.network_from_geojson(geometry.read_geojson(network_path))
    lakes = geometry.load_polygons(lakes_path) if lakes_path else []
    stats = metrics_mod.length_stats(net, lakes)
    Path(out_path).write_text(metrics_mod.length_stats_csv(stats))
    return {f"{origin}:{order}": km for (origin, order), km in sorted(stats.items())}


def evaluate_stage(
    pred_path: str,
    truth_path: str,
    out_path: str | Path,
    fcodes_path: str | None = None,
    masked_codes: set[int] | None = None,
) -> metrics_mod.EvalReport:
    pred = raster_io.load_raster(pred_path)
    truth = raster_io.load_raster(truth_path)
    fcodes = raster_io.load_raster(fcodes_path) if fcodes_path else None
    report = metrics_mod.evaluate(pred, truth, fcodes, masked_codes)
    with open(out_path, "w") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return report


def _run_basin(args: tuple[dict, dict, str]) -> dict:
    """One basin end to end; exceptions become a failed report entry."""
    entry, config_dict, out_root = args
    config = PipelineConfig(**config_dict)
    basin_id = str(entry.get("id", "basin"))
    report: dict = {"id": basin_id, "status": "ok", "timings": {}}
    work = Path(out_root) / basin_id
    work.mkdir(parents=True, exist_ok=True)
    try:
        for key in ("probability", "dem", "basin", "reference"):
            if key not in entry:
                raise HydroTraceError(f"missing input: manifest entry lacks '{key}'")
            if not Path(entry[key]).exists():
                raise HydroTraceError(f"missing input: {entry[key]}")

        if entry.get("nrgb"):
            t0 = time.perf_counter()
            prepare_features_stage(entry["nrgb"], entry["dem"], work / "features")
            report["timings"]["prepare"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        connected = connect_stage(
            entry["probability"],
            entry["dem"],
            entry["basin"],
            entry["reference"],
            work / "connected.tif",
            config,
            ref_mask_out=work / "reference_mask.tif",
        )
        report["timings"]["connect"] = time.perf_counter() - t0
        report["pruned_components"] = len(connected.pruned_component_ids)
        report["unreachable_components"] = len(connected.unreachable_component_ids)
        report["added_cells"] = len(connected.added_path_cells)

        t0 = time.perf_counter()
        thin_stage(
            work / "connected.tif",
            work / "connected_dem.tif",
            work / "reference_mask.tif",
            work / "skeleton.tif",
        )
        report["timings"]["thin"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        net = vectorize_stage(
            work / "skeleton.tif",
            work / "connected_dem.tif",
            entry["reference"],
            work / "network.geojson",
        )
        report["timings"]["vectorize"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        lengths = stats_stage(work / "network.geojson", entry.get("lakes"), work / "lengths.csv")
        report["timings"]["stats"] = time.perf_counter() - t0
        report["lengths_by_order"] = lengths
        report["segments"] = len(net.segments)
        report["total_added_km"] = round(
            sum(km for key, km in lengths.items() if key.startswith("model:")), 9
        )

        if entry.get("truth"):
            t0 = time.perf_counter()
            eval_report = evaluate_stage(
                entry["probability"],
                entry["truth"],
                work / "evaluation.json",
                entry.get("fcodes"),
                set(config.masked_fcodes),
            )
            report["timings"]["evaluate"] = time.perf_counter() - t0
            report["f1"] = eval_report.f1
    except Exception as exc:  # isolate this basin's failure
        report["status"] = f"failed: {exc}"
        report["traceback"] = traceback.format_exc()
    return report


def run_pipeline(config: PipelineConfig, manifest_path: str | Path, out_dir: str | Path) -> dict:
    """Run every basin in the manifest; one basin's failure does not
    abort the others. Returns the aggregate run report."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    basins = manifest["basins"] if isinstance(manifest, dict) else manifest
    if not isinstance(basins, list):
        raise ValueError("manifest must be a list of basins or {'basins': [...]}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_dict = {f.name: getattr(config, f.name) for f in fields(PipelineConfig)}
    jobs = [(entry, config_dict, str(out_dir)) for entry in basins]

    if config.worker_count > 1 and len(jobs) > 1:
        with multiprocessing.get_context("spawn").Pool(config.worker_count) as pool:
            entries = pool.map(_run_basin, jobs)
    else:
        entries = [_run_basin(job) for job in jobs]

    entries.sort(key=lambda e: e["id"])
    report = {
        "config": config_dict,
        "basins": entries,
        "ok": sum(1 for e in entries if e["status"] == "ok"),
        "failed": sum(1 for e in entries if e["status"] != "ok"),
    }
    with open(out_dir / "run_report.json", "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return report
