import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from hydrotrace import load_raster
from hydrotrace.cli import main as cli_main
from hydrotrace.pipeline import PipelineConfig, load_config, run_pipeline
from hydrotrace.vector import network_from_geojson

from synthbasin import write_basin, write_manifest


@pytest.fixture(scope="module")
def basin_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("basin")
    entry = write_basin(root / "inputs", size=96, seed=3, with_nrgb=True, with_lakes=True, with_truth=True)
    manifest = write_manifest(root / "manifest.json", [entry])
    return root, entry, manifest


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_config_defaults_match_contract():
    cfg = PipelineConfig()
    assert cfg.buffer_degrees == 0.005
    assert cfg.prob_floor == 0.1
    assert cfg.prob_ceil == 0.5
    assert cfg.slope_coefficient_b == 1.0
    assert cfg.rounding_threshold == 0.5
    assert cfg.max_iterations == 6
    assert cfg.base_cost == 64.0


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("prob_floor = 0.2\nmax_iterations = 3  # fewer rounds\n")
    cfg = load_config(path, {"base_cost": 16})
    assert cfg.prob_floor == 0.2
    assert cfg.max_iterations == 3
    assert cfg.base_cost == 16.0


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("not_a_key = 1\n")
    with pytest.raises(ValueError, match="unknown config keys"):
        load_config(path)


def test_config_validates_thresholds():
    with pytest.raises(ValueError):
        PipelineConfig(prob_floor=0.6, rounding_threshold=0.5)
    with pytest.raises(ValueError):
        PipelineConfig(worker_count=0)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def test_single_basin_run(basin_dir, tmp_path):
    root, entry, manifest = basin_dir
    report = run_pipeline(PipelineConfig(), manifest, tmp_path / "run")
    assert report["failed"] == 0
    basin = report["basins"][0]
    assert basin["status"] == "ok"
    assert basin["total_added_km"] > 0
    assert basin["unreachable_components"] == 0

    # Stage outputs reload cleanly through the public interfaces.
    work = tmp_path / "run" / entry["id"]
    skeleton = load_raster(work / "skeleton.tif")
    connected = load_raster(work / "connected.tif")
    assert skeleton.values.sum() <= connected.values.sum()
    net = network_from_geojson(json.loads((work / "network.geojson").read_text()))
    assert all(s.strahler >= 1 for s in net.segments)
    csv_lines = (work / "lengths.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "origin,strahler,total_km"
    assert len(csv_lines) > 1


def test_failures_are_isolated(tmp_path):
    good = write_basin(tmp_path / "good", size=64, seed=5, basin_id="good")
    broken = dict(good)
    broken["id"] = "broken"
    broken["probability"] = str(tmp_path / "nope.tif")
    manifest = write_manifest(tmp_path / "manifest.json", [broken, good])
    report = run_pipeline(PipelineConfig(), manifest, tmp_path / "run")
    by_id = {b["id"]: b for b in report["basins"]}
    assert by_id["good"]["status"] == "ok"
    assert by_id["broken"]["status"].startswith("failed: missing input")
    assert report["failed"] == 1


def _tree_bytes(root: Path) -> dict:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.name != "run_report.json":
            out[str(path.relative_to(root))] = path.read_bytes()
    return out


def test_outputs_identical_across_worker_counts(tmp_path):
    entries = [
        write_basin(tmp_path / f"in{i}", size=64, seed=10 + i, basin_id=f"b{i}")
        for i in range(3)
    ]
    manifest = write_manifest(tmp_path / "manifest.json", entries)
    run_pipeline(PipelineConfig(worker_count=1), manifest, tmp_path / "serial")
    run_pipeline(PipelineConfig(worker_count=4), manifest, tmp_path / "parallel")
    serial = _tree_bytes(tmp_path / "serial")
    parallel = _tree_bytes(tmp_path / "parallel")
    assert serial.keys() == parallel.keys()
    for name in serial:
        assert serial[name] == parallel[name], f"{name} differs between worker counts"


# ---------------------------------------------------------------------------
# CLI surfaces
# ---------------------------------------------------------------------------


def test_cli_stage_chain(basin_dir, tmp_path):
    root, entry, manifest = basin_dir
    runner = CliRunner()
    out = tmp_path

    res = runner.invoke(
        cli_main,
        ["prepare-features", "--nrgb", *entry["nrgb"], "--dem", entry["dem"], "--out", str(out / "stack")],
    )
    assert res.exit_code == 0, res.output
    assert len(list((out / "stack").glob("*.tif"))) == 10

    res = runner.invoke(
        cli_main,
        [
            "connect",
            "--prob", entry["probability"],
            "--dem", entry["dem"],
            "--basin", entry["basin"],
            "--reference", entry["reference"],
            "--out", str(out / "connected.tif"),
            "--ref-mask-out", str(out / "refmask.tif"),
        ],
    )
    assert res.exit_code == 0, res.output
    assert (out / "connected.stats.json").exists()

    res = runner.invoke(
        cli_main,
        [
            "thin",
            "--connected", str(out / "connected.tif"),
            "--dem", str(out / "connected_dem.tif"),
            "--reference-mask", str(out / "refmask.tif"),
            "--out", str(out / "skeleton.tif"),
        ],
    )
    assert res.exit_code == 0, res.output

    res = runner.invoke(
        cli_main,
        [
            "vectorize",
            "--skeleton", str(out / "skeleton.tif"),
            "--dem", str(out / "connected_dem.tif"),
            "--reference", entry["reference"],
            "--out", str(out / "network.geojson"),
        ],
    )
    assert res.exit_code == 0, res.output

    res = runner.invoke(
        cli_main,
        ["stats", "--network", str(out / "network.geojson"), "--lakes", entry["lakes"], "--out", str(out / "lengths.csv")],
    )
    assert res.exit_code == 0, res.output
    assert (out / "lengths.csv").read_text().startswith("origin,strahler,total_km")

    res = runner.invoke(
        cli_main,
        ["evaluate", "--pred", entry["truth"], "--truth", entry["truth"], "--out", str(out / "report.json")],
    )
    assert res.exit_code == 0, res.output
    scores = json.loads((out / "report.json").read_text())
    assert scores["f1"] == 1.0


def test_cli_run_exits_nonzero_on_failure(tmp_path):
    entry = write_basin(tmp_path / "in", size=64, seed=20, basin_id="x")
    entry["dem"] = str(tmp_path / "missing.tif")
    manifest = write_manifest(tmp_path / "manifest.json", [entry])
    runner = CliRunner()
    res = runner.invoke(cli_main, ["run", "--manifest", str(manifest), "--out-dir", str(tmp_path / "run")])
    assert res.exit_code == 1
