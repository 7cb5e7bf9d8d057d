"""Command-line front end.

Subcommands: ``tile`` (synthesize one directional tile), ``fill`` (complete
a missing rectangle), ``expand`` (run a JSON plan of tiling steps), and
``check-weights`` (validate a weight file). Each job writes its outputs
into ``--out``: merged.png, tile.png (tile jobs), trace.csv, manifest.json,
and optional ckpt_<iteration>.png snapshots.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import torch

from . import __version__
from .engine import (HoleSpec, TileRequest, fill_hole, plan_from_json,
                     run_plan, tile)
from .errors import DeeptileError
from .features import LAYERS
from .gram import LossConfig
from .image import load_image, save_image
from .optim import OptimConfig, OptimTrace, TraceRecord
from .weights import load_weights, random_weights

# Preset -> the settings it pins (explicit flags still win).
PROFILES = {
    "paper": {"iterations": 100000, "lr": 0.0005},
    "desk": {"iterations": 1000, "lr": 0.01, "crop": 64},
}

DESK_MIN = 64


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _hole_spec(text: str) -> HoleSpec:
    try:
        top, left, height, width = (int(part) for part in text.split(","))
        return HoleSpec(top=top, left=left, height=height, width=width)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected --hole T,L,H,W with integer fields, got {text!r}: {exc}")


def _alpha_value(text: str):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a number or 'auto', got {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(
            f"alpha must be in (0, 1) or 'auto', got {text}")
    return value


def _csv_list(text: str) -> list:
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_common(parser: argparse.ArgumentParser, needs_input: bool) -> None:
    if needs_input:
        parser.add_argument("--input", required=True, help="exemplar/canvas PNG")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--weights", help="portable weight file")
    group.add_argument("--random-weights", type=int, metavar="SEED",
                       help="use random He-initialized weights from SEED")
    parser.add_argument("--iterations", type=int, default=None,
                        help="optimization steps (default 100000)")
    parser.add_argument("--lr", type=float, default=None,
                        help="Adam learning rate (default 0.0005)")
    parser.add_argument("--seed", type=int, default=0,
                        help="noise seed (default 0)")
    parser.add_argument("--layers", type=_csv_list,
                        default=list(LAYERS),
                        help="comma-separated loss layers "
                             "(default layer1,pool1,pool2,pool3,pool4)")
    parser.add_argument("--layer-weights", type=_csv_list, default=None,
                        help="comma-separated loss weights (default 0.2 each)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--log-every", type=int, default=100,
                        help="trace row interval (default 100)")
    parser.add_argument("--checkpoint-every", type=int, default=None,
                        help="write ckpt_<iter>.png every N iterations")
    parser.add_argument("--profile", choices=sorted(PROFILES),
                        help="preset: paper (100000 iters, lr 0.0005) or "
                             "desk (1000 iters, lr 0.01, 64x64 crop)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: all cores; "
                             "1 for bit-exact determinism)")


def build_parser() -> _Parser:
    parser = _Parser(prog="deeptile", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version",
                        version=f"deeptile {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p_tile = sub.add_parser("tile",
                            help="synthesize one directional tile")
    _add_common(p_tile, needs_input=True)
    p_tile.add_argument("--direction", required=True,
                        choices=["up", "down", "left", "right"])
    p_tile.add_argument("--factor-w", type=float, default=1.0)
    p_tile.add_argument("--factor-h", type=float, default=1.0)
    p_tile.add_argument("--seam-removal", action="store_true",
                        help="initialize the tile with the attenuated "
                             "exemplar mirror instead of plain noise")
    p_tile.add_argument("--alpha", type=_alpha_value, default="auto",
                        help="seam attenuation in (0,1), or 'auto'")

    p_fill = sub.add_parser("fill",
                            help="re-synthesize a missing rectangle")
    _add_common(p_fill, needs_input=True)
    p_fill.add_argument("--hole", type=_hole_spec, required=True,
                        metavar="T,L,H,W")

    p_expand = sub.add_parser("expand",
                              help="run a JSON plan of tiling steps")
    _add_common(p_expand, needs_input=True)
    p_expand.add_argument("--plan", required=True,
                          help="JSON array of tiling steps")

    p_check = sub.add_parser("check-weights",
                             help="validate a portable weight file")
    p_check.add_argument("--weights", required=True)
    return parser


def _resolve_optim(args) -> OptimConfig:
    profile = PROFILES.get(args.profile, {})
    iterations = args.iterations if args.iterations is not None \
        else profile.get("iterations", 100000)
    lr = args.lr if args.lr is not None else profile.get("lr", 0.0005)
    return OptimConfig(iterations=iterations, learning_rate=lr,
                       checkpoint_every=args.checkpoint_every,
                       log_every=args.log_every, seed=args.seed)


def _resolve_loss(args) -> LossConfig:
    layers = tuple(args.layers)
    if args.layer_weights is None:
        weights = tuple(1.0 / len(layers) for _ in layers)
    else:
        weights = tuple(float(w) for w in args.layer_weights)
    return LossConfig(layers=layers, weights=weights)


def _resolve_weights(args, parser):
    if args.weights is None and args.random_weights is None:
        parser.error("one of --weights or --random-weights is required")
    if args.weights is not None:
        return load_weights(args.weights), {"path": str(args.weights),
                                            "sha256": _sha256(args.weights)}
    return random_weights(args.random_weights), \
        {"random_seed": args.random_weights}


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _load_input(args):
    img = load_image(args.input)
    if args.profile == "desk":
        h, w = img.shape[:2]
        if h < DESK_MIN or w < DESK_MIN:
            raise DeeptileError(
                f"desk profile requires input of at least {DESK_MIN}x"
                f"{DESK_MIN}, got {h}x{w}")
        img = img[:DESK_MIN, :DESK_MIN].copy()
    return img


def _checkpoint_writer(out_dir: Path):
    def write(iteration: int, image) -> None:
        save_image(image, out_dir / f"ckpt_{iteration}.png")
    return write


def _write_manifest(out_dir: Path, command: str, config: dict, inputs: dict,
                    trace: OptimTrace, started: str) -> None:
    manifest = {
        "command": command,
        "config": config,
        "finished": datetime.now(timezone.utc).isoformat(),
        "final_loss": trace.final_loss if trace.records else None,
        "initial_loss": trace.initial_loss if trace.records else None,
        "inputs": inputs,
        "started": started,
        "version": __version__,
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _merge_traces(traces, steps) -> OptimTrace:
    # One CSV for a whole plan: iteration numbers continue across steps.
    merged = OptimTrace()
    offset = 0
    for trace, iterations in zip(traces, steps):
        for rec in trace.records:
            merged.append(TraceRecord(iteration=rec.iteration + offset,
                                      total_loss=rec.total_loss,
                                      layer_losses=rec.layer_losses,
                                      ms=rec.ms))
        offset += iterations
    return merged


def _run_job(args, parser) -> int:
    try:
        opt_cfg = _resolve_optim(args)
        loss_cfg = _resolve_loss(args)
    except ValueError as exc:
        parser.error(str(exc))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        torch.set_num_threads(args.threads)

    weights, weights_info = _resolve_weights(args, parser)
    img = _load_input(args)
    inputs = {"input": {"path": str(args.input), "sha256": _sha256(args.input)},
              "weights": weights_info}
    config = {
        "checkpoint_every": opt_cfg.checkpoint_every,
        "iterations": opt_cfg.iterations,
        "layer_weights": list(loss_cfg.weights),
        "layers": list(loss_cfg.layers),
        "learning_rate": opt_cfg.learning_rate,
        "log_every": opt_cfg.log_every,
        "out": str(out_dir),
        "profile": args.profile,
        "seed": args.seed,
        "threads": args.threads,
    }
    cb = _checkpoint_writer(out_dir) if opt_cfg.checkpoint_every else None

    if args.command == "tile":
        req = TileRequest(direction=args.direction, factor_w=args.factor_w,
                          factor_h=args.factor_h,
                          seam_removal=args.seam_removal, alpha=args.alpha,
                          seed=args.seed)
        config.update({"alpha": req.alpha, "direction": req.direction,
                       "factor_h": req.factor_h, "factor_w": req.factor_w,
                       "seam_removal": req.seam_removal})
        tile_img, merged, trace = tile(img, req, weights, loss_cfg, opt_cfg,
                                       checkpoint_cb=cb)
        save_image(merged.image, out_dir / "merged.png")
        save_image(tile_img, out_dir / "tile.png")
    elif args.command == "fill":
        hole = args.hole
        config.update({"hole": [hole.top, hole.left, hole.height, hole.width]})
        filled, trace = fill_hole(img, hole, weights, loss_cfg, opt_cfg,
                                  seed=args.seed, checkpoint_cb=cb)
        save_image(filled, out_dir / "merged.png")
    else:  # expand
        with open(args.plan) as f:
            plan = plan_from_json(f.read())
        config.update({"plan": str(args.plan),
                       "steps": [dict(vars(step)) for step in plan]})
        canvas, traces = run_plan(img, plan, weights, loss_cfg, opt_cfg,
                                  checkpoint_cb=cb)
        trace = _merge_traces(traces, [opt_cfg.iterations] * len(plan))
        save_image(canvas, out_dir / "merged.png")

    trace.write_csv(out_dir / "trace.csv")
    _write_manifest(out_dir, args.command, config, inputs, trace, started)
    return 0


def _check_weights(args) -> int:
    weights = load_weights(args.weights)
    for name in sorted(weights.convs):
        params = weights.convs[name]
        print(f"{name}: kernel {tuple(params.kernel.shape)}, "
              f"bias {tuple(params.bias.shape)}, "
              f"kernel range [{params.kernel.min():.6g}, "
              f"{params.kernel.max():.6g}]")
    print(f"OK: {args.weights} holds all 12 layers")
    return 0


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "check-weights":
            return _check_weights(args)
        return _run_job(args, parser)
    except SystemExit as exc:
        return 0 if exc.code is None else int(exc.code)
    except (DeeptileError, ValueError, OSError) as exc:
        print(f"deeptile: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
