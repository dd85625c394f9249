"""Ablation sweeps: sampling rate, stage-1 iterations, group size, bit width."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .codec import encode
from .config import get_preset
from .coords import make_grid
from .video_io import VideoFrames, load_frames, synth_video

log = logging.getLogger("siedd.bench")

# the pinned desk-scale corpus
TOY_CORPUS = dict(kind="moving-gradient", height=96, width=96, n_frames=16, seed=42)

SWEEPS = {
    "sampling": [1 / 128, 1 / 256, 1 / 512, 1 / 1024, 1 / 2048],
    "iters": [500, 2000, 5000],
    "group-size": [10, 20, 30],
    "bits": [4, 5, 6, 7, 8],
}
TOY_SWEEPS = {"group-size": [4, 8, 16]}


def toy_video() -> VideoFrames:
    return synth_video(**TOY_CORPUS)


def _overrides(sweep: str, value: float, video: VideoFrames, patch: int) -> dict:
    if sweep == "sampling":
        cells = make_grid(video.height, video.width, patch).coords.shape[0]
        return {"train__samples": max(1, int(cells * value))}
    if sweep == "iters":
        return {"train__stage1_iters": int(value)}
    if sweep == "group-size":
        return {"train__group_size": int(value)}
    if sweep == "bits":
        return {"quant__bits": int(value)}
    raise ValueError(f"unknown sweep {sweep!r}")


def run_sweep(
    sweep: str,
    out_dir: str | Path,
    input_dir: str | Path | None = None,
    preset: str = "toy",
    values: list[float] | None = None,
    stage1_iters: int | None = None,
    stage2_iters: int | None = None,
    workers: int = 1,
    seed: int | None = None,
    video: VideoFrames | None = None,
) -> list[dict]:
    """Encode once per sweep point; writes ``<sweep>_<k>.json`` per point and returns the rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if video is None:
        video = load_frames(input_dir) if input_dir else toy_video()
    if values is None:
        values = (TOY_SWEEPS if preset == "toy" else {}).get(sweep, SWEEPS[sweep])
    base = dict(
        train__stage1_iters=stage1_iters, train__stage2_iters=stage2_iters,
        train__workers=workers, train__seed=seed,
    )
    patch = get_preset(preset).model.patch
    rows = []
    for k, value in enumerate(values):
        over = {**base, **_overrides(sweep, value, video, patch)}
        p = get_preset(preset, **over)
        res = encode(video, p, out_dir / f"{sweep}_{k}.siedd", with_ssim=True)
        row = {
            "sweep": sweep,
            "value": value,
            "psnr": res.report.mean_psnr,
            "ssim": res.report.mean_ssim,
            "bpp": res.report.bpp,
            "encode_seconds": res.report.encode_seconds,
            "file_bytes": res.file_bytes,
            "samples": p.train.samples,
            "stage1_iters": p.train.stage1_iters,
            "group_size": p.train.group_size,
            "bits": p.quant.bits,
            "encoder_checksum_before": res.encoder_checksum_before,
            "encoder_checksum_after": res.encoder_checksum_after,
        }
        (out_dir / f"{sweep}_{k}.json").write_text(json.dumps(row, indent=2, sort_keys=True) + "\n")
        log.info("sweep=%s value=%s psnr=%.3f bpp=%.4f t=%.1fs", sweep, value, row["psnr"], row["bpp"],
                 row["encode_seconds"])
        rows.append(row)
    return rows


def format_table(sweep: str, rows: list[dict]) -> str:
    head = f"{sweep:>12} {'PSNR':>8} {'SSIM':>7} {'bpp':>9} {'enc s':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        v = r["value"]
        label = f"1/{round(1 / v)}" if sweep == "sampling" else f"{v:g}"
        lines.append(f"{label:>12} {r['psnr']:8.2f} {r['ssim']:7.4f} {r['bpp']:9.4f} {r['encode_seconds']:8.1f}")
    return "\n".join(lines)
