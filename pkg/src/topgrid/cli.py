"""Command-line entry points: run, synth, bench.

`topgrid synth <name> --out DIR` materializes a synthetic scenario as
frame sequences, calibrations, ground truth and a ready-to-run config;
`topgrid run --config FILE` executes the pipeline over such a tree;
`topgrid bench --config FILE` measures throughput against a decode-only
baseline.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import analytics, pipeline, synthgen, viz
from .config import (
    ConfigError,
    MetricsRecord,
    RunConfig,
    RunView,
    load_run_config,
    serialize_calibration,
)
from .imaging import BinaryMask, ColorImage, DepthImage
from .netpbm import (
    decode_color,
    decode_depth,
    encode_color,
    encode_depth,
    encode_mask,
)

__all__ = ["main", "run_pipeline", "run_bench", "run_synth"]


def _read_frame(view: RunView, index: int):
    data = view.frame_path(index).read_bytes()
    if view.view.kind == "rgb":
        return decode_color(data)
    return decode_depth(data, max_range=view.max_range)


def _read_background(view: RunView):
    data = view.background_path.read_bytes()
    if view.view.kind == "rgb":
        return decode_color(data)
    return decode_depth(data, max_range=view.max_range)


def _init_backgrounds(cfg: RunConfig) -> list[pipeline.BackgroundModel]:
    models = []
    for rv in cfg.views:
        if cfg.background_mode == "user":
            models.append(pipeline.user_background(_read_background(rv)))
        else:
            models.append(pipeline.running_mean_background(cfg.background_window))
    return models


def _process_frame(cfg: RunConfig, backgrounds, prev_frames, curr_frames):
    kinds = {rv.view.kind for rv in cfg.views}
    if kinds == {"rgb"}:
        return pipeline.process_rgb_frames(
            [rv.view for rv in cfg.views],
            curr_frames,
            prev_frames,
            backgrounds,
            cfg.grid,
            min_votes=cfg.min_votes,
            workers=cfg.parallelism,
        )
    if kinds == {"depth"}:
        if len(cfg.views) != 1:
            raise ConfigError("multiple depth views are not supported in one run")
        return pipeline.process_depth_frame(
            cfg.views[0].view, prev_frames[0], curr_frames[0], backgrounds[0], cfg.grid
        )
    raise ConfigError("a run must be all-rgb or a single depth view")


def run_pipeline(cfg: RunConfig, verbose: bool = True) -> int:
    """Execute a full run: per-frame occupancy, heatmap and flow rasters
    plus one metrics line per frame."""
    counts = {rv.count for rv in cfg.views}
    if len(counts) > 1 and verbose:
        print(
            f"warning: view stream lengths differ {sorted(counts)}; "
            f"pairing frames by index up to the shortest",
            file=sys.stderr,
        )
    frame_count = cfg.frame_count

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = cfg.metrics_path
    if metrics_path is None:
        metrics_path = out.parent / (out.name + ".metrics.log")
    metrics_path.parent.mkdir(parents=True, exist_ok=True)

    backgrounds = _init_backgrounds(cfg)
    cumulative = analytics.CumulativeGrid(
        cfg.grid,
        mode="full" if cfg.cumulative_mode == "full" else "sliding",
        t_span=cfg.t_span if cfg.cumulative_mode == "sliding" else None,
    )

    prev_frames = [_read_frame(rv, 0) for rv in cfg.views]
    if cfg.background_mode == "running-mean":
        backgrounds = [
            pipeline.update_background(m, f) for m, f in zip(backgrounds, prev_frames)
        ]
    prev_occupancy = BinaryMask(np.zeros(cfg.grid.shape, dtype=bool))

    started = time.perf_counter()
    with open(metrics_path, "w") as metrics:
        for t in range(1, frame_count):
            try:
                curr_frames = [_read_frame(rv, t) for rv in cfg.views]
                if cfg.background_mode == "running-mean":
                    backgrounds = [
                        pipeline.update_background(m, f)
                        for m, f in zip(backgrounds, curr_frames)
                    ]
                result = _process_frame(cfg, backgrounds, prev_frames, curr_frames)

                analytics.update_cumulative(cumulative, result.occupancy)
                flow = analytics.topview_flow(
                    prev_occupancy, result.occupancy, cfg.topview_flow
                )
                report = analytics.saturation_query(
                    cumulative, cfg.s_min, cfg.min_cluster
                )

                (out / f"occ_{t:06d}.pgm").write_bytes(encode_mask(result.occupancy))
                (out / f"cum_{t:06d}.ppm").write_bytes(
                    encode_color(viz.heatmap_image(cumulative.values))
                )
                (out / f"flow_{t:06d}.ppm").write_bytes(
                    encode_color(viz.flowmap_image(flow))
                )
            except Exception as exc:
                raise RuntimeError(f"frame {t}: {exc}") from exc

            elapsed = time.perf_counter() - started
            record = MetricsRecord(
                frame=t,
                stage_ms=result.timings_ms,
                cells=result.occupancy.count(),
                fps=t / elapsed if elapsed > 0 else 0.0,
                clusters=len(report.clusters),
            )
            metrics.write(record.line() + "\n")

            prev_frames = curr_frames
            prev_occupancy = result.occupancy
    if verbose:
        print(f"processed {frame_count - 1} frames into {out}")
    return 0


def run_synth(name_or_file: str, out_dir: Path, seed: int | None = None, verbose: bool = True) -> int:
    """Materialize a scenario: frames, calibrations, truth and config."""
    try:
        scenario = synthgen.scenario_by_name(name_or_file)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    if seed is not None:
        scenario = dataclasses.replace(scenario, seed=seed)
    grid = synthgen.grid_for(scenario)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    truth_dir = out_dir / "truth"
    truth_dir.mkdir(exist_ok=True)
    for t in range(scenario.frame_count):
        mask = synthgen.ground_truth_footprint(scenario, grid, t)
        (truth_dir / f"truth_{t:06d}.pgm").write_bytes(encode_mask(mask))

    view_lines = []
    for idx, rig in enumerate(scenario.cameras):
        cam_dir = out_dir / f"cam{idx}"
        cam_dir.mkdir(exist_ok=True)
        calib = rig.homography if rig.kind == "rgb" else rig.pinhole
        (cam_dir / "calib.txt").write_text(serialize_calibration(calib))

        bg = synthgen.render_background(scenario, rig)
        if rig.kind == "rgb":
            (cam_dir / "bg.ppm").write_bytes(encode_color(bg))
        else:
            (cam_dir / "bg.pgm").write_bytes(encode_depth(bg))
        for t in range(scenario.frame_count):
            frame = synthgen.render_frame(scenario, rig, t)
            if rig.kind == "rgb":
                (cam_dir / f"frame_{t:06d}.ppm").write_bytes(encode_color(frame))
            else:
                (cam_dir / f"frame_{t:06d}.pgm").write_bytes(encode_depth(frame))

        ext = "ppm" if rig.kind == "rgb" else "pgm"
        lines = [
            f"[view.{idx}]",
            f"kind = {rig.kind}",
            f"calibration = cam{idx}/calib.txt",
            f"frames = cam{idx}/frame_%06d.{ext}",
            f"count = {scenario.frame_count}",
            f"background = cam{idx}/bg.{ext}",
            f"theta_max_deg = {scenario.theta_max_deg}",
        ]
        if rig.kind == "rgb":
            lines += ["min_area = 60", "canny_sigma = 1.0"]
        else:
            lines += [
                "min_area = 25",
                f"max_range = {scenario.max_range}",
                "height_axis = y",
            ]
        view_lines.append("\n".join(lines))

    run_lines = ["[run]", "output = out", "parallelism = 1"]
    if scenario.min_votes is not None:
        run_lines.append(f"min_votes = {scenario.min_votes}")
    config_text = "\n".join(
        [
            "# generated by topgrid synth",
            "[grid]",
            f"origin_x = {grid.origin_x}",
            f"origin_y = {grid.origin_y}",
            f"cell_size = {grid.cell_size}",
            f"cols = {grid.cols}",
            f"rows = {grid.rows}",
            "",
            "[background]",
            "mode = user",
            "",
            "[cumulative]",
            "mode = sliding",
            "t_span = 100",
            "",
        ]
        + run_lines
        + [""]
        + view_lines
    )
    (out_dir / "config.ini").write_text(config_text + "\n")
    if verbose:
        print(
            f"scenario {scenario.name!r}: {len(scenario.cameras)} cameras, "
            f"{scenario.frame_count} frames -> {out_dir}"
        )
    return 0


def run_bench(cfg: RunConfig, warmup: int, measure: int, repeats: int = 3):
    """Measure pipeline and decode-only throughput.

    Returns a report dict; the "realtime" flag records whether the
    median pipeline fps clears the 10 fps bar.
    """
    if measure < 1:
        raise ValueError("measure must be >= 1")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    frame_count = cfg.frame_count
    if warmup + measure > frame_count - 1:
        raise ValueError(
            f"sequence has {frame_count - 1} processable frames, "
            f"need warmup+measure = {warmup + measure}"
        )

    pipeline_fps = []
    noop_fps = []
    stage_totals: dict[str, float] = {}
    stage_frames = 0

    for _ in range(repeats):
        backgrounds = _init_backgrounds(cfg)
        prev = [_read_frame(rv, warmup) for rv in cfg.views]
        if cfg.background_mode == "running-mean":
            for i in range(warmup + 1):
                frames = [_read_frame(rv, i) for rv in cfg.views]
                backgrounds = [
                    pipeline.update_background(m, f)
                    for m, f in zip(backgrounds, frames)
                ]
            prev = [_read_frame(rv, warmup) for rv in cfg.views]
        start = time.perf_counter()
        for t in range(warmup + 1, warmup + measure + 1):
            curr = [_read_frame(rv, t) for rv in cfg.views]
            result = _process_frame(cfg, backgrounds, prev, curr)
            for stage, ms in result.timings_ms.items():
                stage_totals[stage] = stage_totals.get(stage, 0.0) + ms
            stage_frames += 1
            prev = curr
        pipeline_fps.append(measure / (time.perf_counter() - start))

        start = time.perf_counter()
        for t in range(warmup + 1, warmup + measure + 1):
            for rv in cfg.views:
                _read_frame(rv, t)
        noop_fps.append(measure / (time.perf_counter() - start))

    fps = statistics.median(pipeline_fps)
    noop = statistics.median(noop_fps)
    return {
        "pipeline_fps": fps,
        "noop_fps": noop,
        "stage_mean_ms": {
            stage: total / stage_frames for stage, total in sorted(stage_totals.items())
        },
        "realtime": fps >= 10.0,
        "repeats": repeats,
        "warmup": warmup,
        "measure": measure,
    }


def _format_bench_report(report: dict) -> str:
    lines = [
        "throughput report (baseline = decode-only, no processing)",
        f"  warmup frames:   {report['warmup']}",
        f"  measured frames: {report['measure']} x {report['repeats']} repeats (median)",
        f"  pipeline fps:    {report['pipeline_fps']:.3f}",
        f"  no-op fps:       {report['noop_fps']:.3f}",
        f"  realtime (>= 10 fps): {report['realtime']}",
        "  per-stage mean milliseconds:",
    ]
    for stage, ms in report["stage_mean_ms"].items():
        lines.append(f"    {stage:16s} {ms:9.3f}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="topgrid",
        description="Pedestrian top-view occupancy grids from multi-camera footage.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="process a configured sequence")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--out", type=Path, default=None, help="override output directory")

    p_synth = sub.add_parser("synth", help="materialize a synthetic scenario")
    p_synth.add_argument("scenario", help="scenario name")
    p_synth.add_argument("--out", required=True, type=Path)
    p_synth.add_argument("--seed", type=int, default=None)

    p_bench = sub.add_parser("bench", help="measure throughput")
    p_bench.add_argument("--config", required=True, type=Path)
    p_bench.add_argument("--warmup", type=int, default=5)
    p_bench.add_argument("--measure", type=int, default=30)

    args = parser.parse_args(argv)

    try:
        if args.command == "synth":
            return run_synth(args.scenario, args.out, seed=args.seed)

        cfg = load_run_config(args.config)
        threads = os.environ.get("TOPGRID_THREADS", "").strip()
        if threads:
            cfg = dataclasses.replace(cfg, parallelism=max(1, int(threads)))
        if args.command == "run":
            if args.out is not None:
                cfg = dataclasses.replace(cfg, output_dir=args.out)
            return run_pipeline(cfg)
        if args.command == "bench":
            report = run_bench(cfg, args.warmup, args.measure)
            print(_format_bench_report(report))
            return 0
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
