"""End-to-end encode and decode."""

from __future__ import annotations

import logging
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bitstream
from .config import Preset
from .coords import make_grid
from .metrics import RdReport, bpp, evaluate
from .model import (
    SieddModel,
    StateError,
    VideoMeta,
    build_model,
    decode_frames,
    encoder_checksum,
)
from .nn import ConfigError
from .quant import apply_quantized, quantize_model
from .trainer import select_anchors, train_all_groups, train_stage1
from .video_io import VideoFrames, load_frames, write_frames

log = logging.getLogger("siedd.codec")

LARGE_FRAME_PIXELS = 8_000_000


class EncodeError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class EncodeResult:
    report: RdReport
    model: SieddModel  # as decoded from the file (trunks dequantized)
    file_bytes: int
    stage1_trace: list[float] = field(default_factory=list)
    stage2_traces: list[list[float]] = field(default_factory=list)
    encoder_checksum_before: str = ""
    encoder_checksum_after: str = ""
    prequant_report: RdReport | None = None
    trained: SieddModel | None = None  # before quantization; keeps the stage-1 anchor decoder


@dataclass
class DecodeResult:
    frames: np.ndarray
    fps: float
    info: bitstream.ContainerInfo
    frame_indices: list[int]


def stored_train_settings(preset: Preset) -> dict:
    """Training settings recorded in the file; scheduling knobs are left out so
    the bytes do not depend on how many workers ran."""
    d = preset.train.to_dict()
    for k in ("workers", "log_every"):
        d.pop(k)
    return d


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except EncodeError:
        raise
    except Exception as e:  # noqa: BLE001 - tagged and re-raised
        raise EncodeError(name, str(e)) from e


def encode(
    video: VideoFrames | str | Path,
    preset: Preset,
    out_file: str | Path,
    encoder_init: str | Path | None = None,
    report_prequant: bool = False,
    with_ssim: bool = True,
) -> EncodeResult:
    """Train, quantize and write ``out_file``; the report describes the file's quality."""
    out_file = Path(out_file)
    t0 = time.perf_counter()
    if not isinstance(video, VideoFrames):
        video = _stage("load", load_frames, video)
    frames = video.frames
    cfg, tcfg, qcfg = preset.model, preset.train, preset.quant
    meta = VideoMeta(video.height, video.width, video.n_frames, float(video.fps))
    grid = _stage("grid", make_grid, meta.height, meta.width, cfg.patch)

    stage1_trace: list[float] = []
    if encoder_init is None:
        anchors = _stage("anchors", select_anchors, meta.n_frames, tcfg.anchors(meta.n_frames))
        model = _stage("build", build_model, cfg, meta, anchors, tcfg.seed)
        stage1_trace = _stage("stage1", train_stage1, model, frames[anchors], grid, tcfg)
    else:
        prior, _ = _stage("encoder-init", bitstream.deserialize, encoder_init)
        if prior.config.pos_encoding != cfg.pos_encoding or prior.config.dim != cfg.dim:
            raise EncodeError("encoder-init", "encoder shape does not match the requested model config")
        if prior.config.enc_hidden_layers != cfg.enc_hidden_layers or prior.config.omega != cfg.omega:
            raise EncodeError("encoder-init", "encoder depth/omega does not match the requested model config")
        model = SieddModel(cfg, meta, prior.encoder)

    before = encoder_checksum(model)
    stage2_traces = _stage("stage2", train_all_groups, model, frames, grid, tcfg)
    after = encoder_checksum(model)
    if before != after:
        raise EncodeError("stage2", "encoder parameters changed during stage 2")

    pre_report = None
    if report_prequant:
        pre_report = evaluate(decode_frames(model, grid), frames, with_ssim)

    payloads = _stage("quantize", quantize_model, model, qcfg)
    try:
        size = bitstream.serialize(model, payloads, stored_train_settings(preset), qcfg, out_file)
    except Exception as e:  # noqa: BLE001
        out_file.unlink(missing_ok=True)
        raise EncodeError("serialize", str(e)) from e
    shipped = apply_quantized(model, payloads)
    elapsed = time.perf_counter() - t0

    recon = decode_frames(shipped, grid)
    report = evaluate(recon, frames, with_ssim)
    report.bpp = bpp(size * 8, meta.n_frames, meta.height, meta.width)
    report.encode_seconds = elapsed
    log.info("encoded %s: %d bytes, bpp=%.5f, psnr=%.3f", out_file, size, report.bpp, report.mean_psnr)
    return EncodeResult(report, shipped, size, stage1_trace, stage2_traces, before, after, pre_report, model)


def default_chunks(height: int, width: int) -> int:
    return 32 if height * width > LARGE_FRAME_PIXELS else 8


def _valid_sizes(n: int, p: int) -> str:
    lo = (n // p) * p
    return f"{lo} or {lo + p}" if lo else f"{p}"


_DECODE_JOB: dict = {}


def _decode_group(gi: int) -> np.ndarray:
    job = _DECODE_JOB
    model: SieddModel = job["model"]
    frames = [f for f in job["wanted"] if f in model.groups[gi].frames]
    sub = replace(model, groups=[model.groups[gi]])
    return decode_frames(sub, job["grid"], frames, job["chunks"])


def decode_model(
    model: SieddModel,
    resolution: tuple[int, int] | None = None,
    frame_range: tuple[int, int] | None = None,
    chunks: int | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, float, list[int]]:
    """Returns ``(frames, fps, frame_indices)``; fps counts forward time only."""
    h, w = resolution or (model.meta.height, model.meta.width)
    p = model.config.patch
    if h % p or w % p:
        raise ConfigError(
            f"resolution {h}x{w} is not divisible by patch {p}; "
            f"try height {_valid_sizes(h, p)} and width {_valid_sizes(w, p)}"
        )
    n = model.meta.n_frames
    first, last = frame_range or (0, n - 1)
    if not 0 <= first <= last < n:
        raise ConfigError(f"frame range {first}..{last} outside 0..{n - 1}")
    wanted = list(range(first, last + 1))
    grid = make_grid(h, w, p)
    chunks = chunks or default_chunks(h, w)
    t0 = time.perf_counter()
    groups = [gi for gi, g in enumerate(model.groups) if set(g.frames) & set(wanted)]
    if workers <= 1 or len(groups) <= 1:
        out = decode_frames(model, grid, wanted, chunks)
    else:
        _DECODE_JOB.update(model=model, grid=grid, wanted=wanted, chunks=chunks)
        try:
            with ProcessPoolExecutor(min(workers, len(groups)), mp_context=mp.get_context("fork")) as pool:
                parts = list(pool.map(_decode_group, groups))
        finally:
            _DECODE_JOB.clear()
        out = np.concatenate(parts)
    elapsed = time.perf_counter() - t0
    return out, len(wanted) / elapsed if elapsed > 0 else float("inf"), wanted


def decode(
    file: str | Path,
    out_dir: str | Path | None = None,
    resolution: tuple[int, int] | None = None,
    frame_range: tuple[int, int] | None = None,
    chunks: int | None = None,
    workers: int = 1,
    pattern: str = "%05d.png",
) -> DecodeResult:
    model, info = bitstream.deserialize(file)
    if not model.groups:
        raise StateError("file contains no frame groups")
    frames, fps, idx = decode_model(model, resolution, frame_range, chunks, workers)
    if out_dir is not None:
        write_frames(frames, out_dir, pattern, start=idx[0])
    return DecodeResult(frames, fps, info, idx)


def info(file: str | Path) -> str:
    """Human-readable dump of a file's header and section sizes."""
    _, ci = bitstream.deserialize(file)
    h = ci.header
    m, mc, q = h["meta"], h["model"], h["quant"]
    lines = [
        f"file: {file}",
        f"format version: {h['version']}",
        f"video: {m['width']}x{m['height']} frames={m['n_frames']} fps={m['fps']}",
        "model: " + " ".join(f"{k}={v}" for k, v in sorted(mc.items())),
        "quant: " + " ".join(f"{k}={v}" for k, v in sorted(q.items())),
        "train: " + " ".join(f"{k}={v}" for k, v in sorted(h["train"].items())),
        f"train digest: {h['train_digest']}",
        f"groups: {len(h['groups'])} (heads per group: {[c for _, c in h['groups']]})",
        f"file bytes: {ci.file_bytes}",
        f"payload bytes (before XZ): {ci.payload_bytes}",
    ]
    lines += [f"  section {k}: {v} bytes" for k, v in ci.sections.items()]
    lines.append(f"bpp: {ci.bpp:.6f}")
    return "\n".join(lines)
