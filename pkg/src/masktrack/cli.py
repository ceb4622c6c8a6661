"""Command-line front end.

Subcommands: synth, collect, filter, stats, eval, serve, verify.
Exit codes: 0 success, 1 operational failure (the error code is printed to
stderr), 2 usage errors. With --json, stdout carries exactly one JSON
document; logs always go to stderr (-v info, -vv debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import PipelineConfig
from .errors import FlowUnavailableError, MaskTrackError
from .flow import directory_flow_lookup
from .metrics import dataset_stats, eval_manifest, render_eval_table, render_stats_table
from .pipeline import collect_clip, filter_tracks
from .segmenter import OracleSegmenter, RemoteConfig, RemoteSegmenter
from .store import (
    COLLECTED_MANIFEST,
    load_manifest,
    manifest_lock,
    save_manifest,
    verify_manifest,
)
from .synthworld import generate_clip, load_scene, materialize_scene, read_pgm

log = logging.getLogger("masktrack")


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text!r} is outside [0, 1]")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return value


def _dims(text: str) -> tuple:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"{text!r} is not HxW")
    try:
        h, w = int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not HxW")
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("dims must be positive")
    return h, w


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="masktrack", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug (stderr)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic clip to disk")
    p.add_argument("--out", required=True, help="clip directory to create")
    p.add_argument("--dims", type=_dims, default=(64, 64), help="HxW, default 64x64")
    p.add_argument("--frames", type=_positive_int, default=10)
    p.add_argument("--shapes", type=_positive_int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip-id", default=None, help="defaults to the directory name")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("collect", help="run the collection pipeline over a clip")
    p.add_argument("--clip", required=True, help="clip directory")
    p.add_argument("--segmenter", default="synthetic", help="synthetic | remote:URL")
    p.add_argument("--flow", default="exact", help="exact | files:DIR")
    p.add_argument("--points", type=_positive_int, default=8, dest="points")
    p.add_argument("--gamma", type=_unit_interval, default=0.9)
    p.add_argument("--grid", type=_positive_int, default=32)
    p.add_argument("--alpha", type=_unit_interval, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resample-period", type=_positive_int, default=1)
    p.add_argument("--max-candidates", type=_positive_int, default=3)
    p.add_argument("--dedup-iou", type=_unit_interval, default=0.9)
    p.add_argument("--kmeans-k", type=_positive_int, default=10)
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--baseline-grid", action="store_true",
                   help="comparison mode: re-seed every frame, link by unwarped IoU")
    p.add_argument("--out", default=None, help=f"manifest path, default CLIP/{COLLECTED_MANIFEST}")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("filter", help="apply the gamma quality filter to a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--gamma", type=_unit_interval, required=True)
    p.add_argument("--out", default=None, help="defaults to rewriting the input")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("stats", help="dataset statistics over one or more manifests")
    p.add_argument("--manifest", required=True, nargs="+")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="score a predicted manifest against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mode", choices=("per-track", "vos"), default="per-track")
    p.add_argument("--tolerance", type=float, default=None, help="boundary tolerance in pixels")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data", default=None, help="data directory (MUG_DATA overrides)")
    p.add_argument("--segmenter", default="synthetic", help="synthetic | remote:URL")
    p.add_argument("--ui-origin", default=None, help="CORS origin of the review UI")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("verify", help="re-check a manifest's schema and step IoUs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--clip", default=None, help="clip directory for flows, default: manifest's directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def _usage(message: str) -> int:
    print(f"usage error: {message}", file=sys.stderr)
    return 2


def _load_clip_context(clip_dir: Path):
    scene = load_scene(clip_dir) if (clip_dir / "scene.json").exists() else None
    if scene is not None:
        return scene, scene.frame_names(), (scene.height, scene.width)
    frames = sorted(p.name for p in clip_dir.glob("frame_*.pgm"))
    if not frames:
        raise FileNotFoundError(f"no frames in {clip_dir}")
    dims = read_pgm(clip_dir / frames[0]).shape
    return None, frames, dims


def cmd_synth(args) -> int:
    scene = generate_clip(
        dims=args.dims, frame_count=args.frames, shape_count=args.shapes, seed=args.seed
    )
    out = materialize_scene(scene, args.out, clip_id=args.clip_id)
    log.info("materialized scene with %d regions", len(scene.region_ids()))
    if args.json:
        print(json.dumps({
            "clip_dir": str(out),
            "frames": scene.frame_count,
            "shapes": len(scene.shapes),
            "regions": scene.region_ids(),
        }))
    else:
        print(f"wrote {out}: {scene.frame_count} frames, {len(scene.region_ids())} regions")
    return 0


def cmd_collect(args) -> int:
    clip_dir = Path(args.clip)
    if not clip_dir.is_dir():
        raise FileNotFoundError(f"clip directory {clip_dir} does not exist")
    scene, frames, dims = _load_clip_context(clip_dir)

    if args.flow == "exact":
        if scene is None:
            raise FlowUnavailableError("--flow exact needs a synthetic clip (scene.json)")
        flow_lookup = lambda a, b: scene.flow(b)
        flow_source = "exact"
    elif args.flow.startswith("files:"):
        flow_lookup = directory_flow_lookup(args.flow[len("files:"):])
        flow_source = "files"
    else:
        return _usage(f"--flow must be 'exact' or 'files:DIR', got {args.flow!r}")

    if args.segmenter == "synthetic":
        if scene is None:
            raise FlowUnavailableError("--segmenter synthetic needs a synthetic clip (scene.json)")
        segmenter = OracleSegmenter(scene)
    elif args.segmenter.startswith("remote:"):
        segmenter = RemoteSegmenter(RemoteConfig(args.segmenter[len("remote:"):], dims))
    else:
        return _usage(f"--segmenter must be 'synthetic' or 'remote:URL', got {args.segmenter!r}")

    config = PipelineConfig(
        points_per_target=args.points,
        grid_per_side=args.grid,
        gamma=args.gamma,
        alpha=args.alpha,
        resample_period=args.resample_period,
        max_candidates=args.max_candidates,
        seed=args.seed,
        dedup_iou=args.dedup_iou,
        kmeans_k=args.kmeans_k,
    )
    manifest = collect_clip(
        frames,
        dims,
        flow_lookup,
        segmenter,
        config,
        clip_id=clip_dir.name,
        threads=args.threads,
        flow_source=flow_source,
        baseline_grid=args.baseline_grid,
    )
    out = Path(args.out) if args.out else clip_dir / COLLECTED_MANIFEST
    with manifest_lock(out):
        save_manifest(manifest, out)
    full = sum(1 for t in manifest["tracks"] if len(t["frames"]) == len(frames))
    if args.json:
        print(json.dumps({
            "manifest": str(out),
            "config": manifest["config"],
            "tracks": len(manifest["tracks"]),
            "full_length": full,
        }))
    else:
        c = manifest["config"]
        print(f"wrote {out}")
        print(
            "config: "
            f"gamma={c['gamma']} points={c['points_per_target']} grid={c['grid_per_side']} "
            f"alpha={c['alpha']} seed={c['seed']} kmeans_k={c['kmeans_k']}"
        )
        print(f"tracks: {len(manifest['tracks'])} ({full} full length)")
    return 0


def cmd_filter(args) -> int:
    manifest = load_manifest(args.manifest)
    filtered = filter_tracks(manifest, args.gamma)
    out = Path(args.out) if args.out else Path(args.manifest)
    with manifest_lock(out):
        save_manifest(filtered, out)
    kept = sum(1 for t in filtered["tracks"] if t["status"] != "rejected")
    rejected = len(filtered["tracks"]) - kept
    if args.json:
        print(json.dumps({"manifest": str(out), "gamma": args.gamma, "kept": kept, "rejected": rejected}))
    else:
        print(f"gamma={args.gamma}: kept {kept}, rejected {rejected} -> {out}")
    return 0


def cmd_stats(args) -> int:
    manifests = [load_manifest(p) for p in args.manifest]
    stats = dataset_stats(manifests)
    if args.json:
        print(json.dumps(stats))
    else:
        print(render_stats_table(stats))
    return 0


def cmd_eval(args) -> int:
    report = eval_manifest(
        load_manifest(args.pred),
        load_manifest(args.gt),
        mode=args.mode,
        tolerance=args.tolerance,
    )
    for warning in report["warnings"]:
        log.warning("%s", warning)
    if args.json:
        print(json.dumps(report))
    else:
        print(render_eval_table(report))
    return 0


def cmd_verify(args) -> int:
    manifest = load_manifest(args.manifest)
    clip_dir = Path(args.clip) if args.clip else Path(args.manifest).resolve().parent
    source = manifest["flow_source"]
    if source == "exact":
        scene = load_scene(clip_dir)
        flow_lookup = lambda a, b: scene.flow(b)
    elif source == "files":
        flow_lookup = directory_flow_lookup(clip_dir)
    else:
        flow_lookup = None
    problems = verify_manifest(manifest, flow_lookup)
    if args.json:
        print(json.dumps({"ok": not problems, "problems": problems}))
    else:
        for problem in problems:
            print(problem)
        if not problems:
            print("ok")
    return 1 if problems else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    data = os.environ.get("MUG_DATA") or args.data
    if not data:
        return _usage("serve needs --data DIR or the MUG_DATA environment variable")
    app = create_app(data, segmenter=args.segmenter, ui_origin=args.ui_origin)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MaskTrackError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IO: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
