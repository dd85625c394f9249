"""``siedd`` command line: encode, decode, metrics, info, bench."""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

from . import bench as bench_mod
from .codec import decode, encode, info
from .config import PRESETS, get_preset
from .metrics import evaluate
from .quant import METHODS
from .trainer import default_workers
from .video_io import load_frames

log = logging.getLogger("siedd")


def _resolution(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _frames(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text)
    if not m or int(m.group(1)) > int(m.group(2)):
        raise argparse.ArgumentTypeError(f"expected a..b with a <= b, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="siedd", description="Coordinate-network video codec.")
    ap.add_argument("-q", "--quiet", action="store_true", help="suppress progress lines on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="encode a directory of PNG frames")
    e.add_argument("--input", required=True, type=Path)
    e.add_argument("--output", required=True, type=Path)
    e.add_argument("--preset", choices=sorted(PRESETS), default="M")
    e.add_argument("--group-size", type=int)
    e.add_argument("--samples", type=int)
    e.add_argument("--iters-stage1", type=int)
    e.add_argument("--iters-stage2", type=int)
    e.add_argument("--patch", type=int)
    e.add_argument("--bits", type=int)
    e.add_argument("--quant", choices=METHODS)
    e.add_argument("--lr", type=float)
    e.add_argument("--workers", type=int, default=default_workers())
    e.add_argument("--seed", type=int)
    e.add_argument("--encoder-init", type=Path)
    e.add_argument("--pattern", default="%05d.png")
    e.add_argument("--fps", type=float, default=30.0)
    e.add_argument("--report", type=Path, help="write the JSON summary here")
    e.add_argument("--prequant", action="store_true", help="also report pre-quantization quality")

    d = sub.add_parser("decode", help="decode a .siedd file to PNG frames")
    d.add_argument("--input", required=True, type=Path)
    d.add_argument("--output", required=True, type=Path)
    d.add_argument("--resolution", type=_resolution)
    d.add_argument("--frames", type=_frames)
    d.add_argument("--workers", type=int, default=default_workers())
    d.add_argument("--chunks", type=int)
    d.add_argument("--pattern", default="%05d.png")

    m = sub.add_parser("metrics", help="compare two frame directories")
    m.add_argument("reference", type=Path)
    m.add_argument("distorted", type=Path)
    m.add_argument("--pattern", default="%05d.png")
    m.add_argument("--file", type=Path, help=".siedd file whose size gives bpp")
    m.add_argument("--report", type=Path)

    i = sub.add_parser("info", help="print a .siedd header")
    i.add_argument("file", type=Path)

    b = sub.add_parser("bench", help="ablation sweeps on a frame directory")
    b.add_argument("--input", type=Path, help="PNG directory (default: synthetic toy clip)")
    b.add_argument("--sweep", required=True, choices=sorted(bench_mod.SWEEPS))
    b.add_argument("--output", required=True, type=Path, help="results directory")
    b.add_argument("--preset", choices=sorted(PRESETS), default="toy")
    b.add_argument("--values", help="comma-separated sweep points overriding the defaults")
    b.add_argument("--iters-stage1", type=int)
    b.add_argument("--iters-stage2", type=int)
    b.add_argument("--workers", type=int, default=default_workers())
    b.add_argument("--seed", type=int)
    return ap


def cmd_encode(args) -> int:
    preset = get_preset(
        args.preset,
        model__patch=args.patch,
        train__group_size=args.group_size,
        train__samples=args.samples,
        train__stage1_iters=args.iters_stage1,
        train__stage2_iters=args.iters_stage2,
        train__lr=args.lr,
        train__workers=args.workers,
        train__seed=args.seed,
        quant__bits=args.bits,
        quant__method=args.quant,
    )
    video = load_frames(args.input, args.pattern, fps=args.fps)
    res = encode(video, preset, args.output, encoder_init=args.encoder_init, report_prequant=args.prequant)
    for line in res.report.lines():
        print(line)
    if res.prequant_report is not None:
        print(f"prequant_mean_psnr={res.prequant_report.mean_psnr:.4f}")
    if args.report:
        res.report.write(args.report)
    return 0


def cmd_decode(args) -> int:
    res = decode(args.input, args.output, args.resolution, args.frames, args.chunks, args.workers, args.pattern)
    h, w = res.frames.shape[1:3]
    print(f"frames={len(res.frame_indices)} resolution={h}x{w} decode_fps={res.fps:.3f}")
    return 0


def cmd_metrics(args) -> int:
    ref = load_frames(args.reference, args.pattern)
    dist = load_frames(args.distorted, args.pattern)
    rep = evaluate(dist.frames, ref.frames)
    if args.file:
        from .bitstream import deserialize

        rep.bpp = deserialize(args.file)[1].bpp
    for line in rep.lines():
        print(line)
    if args.report:
        rep.write(args.report)
    return 0


def cmd_info(args) -> int:
    print(info(args.file))
    return 0


def cmd_bench(args) -> int:
    values = None
    if args.values:
        values = [float(v) if "/" not in v else _fraction(v) for v in args.values.split(",")]
    rows = bench_mod.run_sweep(
        args.sweep, args.output, input_dir=args.input, preset=args.preset, values=values,
        stage1_iters=args.iters_stage1, stage2_iters=args.iters_stage2, workers=args.workers,
        seed=args.seed,
    )
    print(bench_mod.format_table(args.sweep, rows))
    return 0


def _fraction(text: str) -> float:
    num, den = text.split("/")
    return float(num) / float(den)


COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "metrics": cmd_metrics,
    "info": cmd_info,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError) as e:
        print(f"siedd {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
