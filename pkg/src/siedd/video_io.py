"""PNG frame ingestion/emission and the synthetic test corpus."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .nn import DTYPE, ConfigError


class IngestError(ValueError):
    pass


@dataclass
class VideoFrames:
    frames: np.ndarray  # (N, H, W, 3) float32 in [0, 1]
    fps: float = 30.0
    paths: list[Path] = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


def _pattern_regex(pattern: str) -> re.Pattern:
    m = re.search(r"%(0?)(\d*)d", pattern)
    if m is None:
        raise ConfigError(f"frame pattern {pattern!r} needs a %d field")
    head, tail = pattern[: m.start()], pattern[m.end() :]
    return re.compile("^" + re.escape(head) + r"(\d+)" + re.escape(tail) + "$")


def load_frames(
    directory: str | Path, pattern: str = "%05d.png", frame_range: tuple[int, int] | None = None,
    fps: float = 30.0,
) -> VideoFrames:
    """Read numbered 8-bit RGB PNGs, sorted numerically, scaled by 1/255.

    ``frame_range`` is an inclusive ``(first, last)`` over positions in the
    sorted sequence.
    """
    directory = Path(directory)
    rx = _pattern_regex(pattern)
    found = []
    for p in directory.iterdir():
        m = rx.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    if not found:
        raise IngestError(f"no files matching {pattern!r} in {directory}")
    found.sort()
    numbers = [n for n, _ in found]
    missing = sorted(set(range(numbers[0], numbers[-1] + 1)) - set(numbers))
    if missing:
        raise IngestError(f"missing frame indices {missing[:10]} in {directory}")
    paths = [p for _, p in found]
    if frame_range is not None:
        first, last = frame_range
        if not 0 <= first <= last < len(paths):
            raise IngestError(f"frame range {first}..{last} outside 0..{len(paths) - 1}")
        paths = paths[first : last + 1]

    arrays, sizes = [], {}
    for p in paths:
        with Image.open(p) as im:
            if im.mode != "RGB":
                raise IngestError(f"{p}: expected 8-bit RGB, got mode {im.mode}")
            a = np.asarray(im, dtype=np.uint8)
        sizes.setdefault(a.shape[:2], p)
        arrays.append(a)
    if len(sizes) > 1:
        listing = ", ".join(f"{w}x{h} ({p.name})" for (h, w), p in sizes.items())
        raise IngestError(f"inconsistent frame sizes: {listing}")
    frames = np.stack(arrays).astype(DTYPE) / DTYPE(255.0)
    return VideoFrames(frames, fps, paths)


def to_uint8(frames: np.ndarray) -> np.ndarray:
    """Round half up after clamping to [0, 1]."""
    v = np.clip(np.asarray(frames, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def write_frames(
    frames: np.ndarray, directory: str | Path, pattern: str = "%05d.png", start: int = 0
) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for k, img in enumerate(to_uint8(frames)):
        path = directory / (pattern % (start + k))
        Image.fromarray(img, mode="RGB").save(path)
        out.append(path)
    return out


SYNTH_KINDS = ("constant", "moving-gradient", "checker-pan", "noise")


def synth_video(
    kind: str, height: int, width: int, n_frames: int, seed: int = 0,
    color: tuple[float, float, float] = (0.5, 0.5, 0.5), period: int = 8, fps: float = 30.0,
) -> VideoFrames:
    """Deterministic analytic test videos.

    With ``u = j / W``, ``v = i / H`` and ``s = t / N`` for pixel row ``i``,
    column ``j`` and frame ``t``:

    * ``constant``: every pixel equals ``color``.
    * ``moving-gradient``: smooth color ramps drifting over time,
      ``R = 0.5 + 0.4 sin(2 pi (u + s) + phi)``,
      ``G = 0.5 + 0.4 cos(2 pi (v - s) + phi)``,
      ``B = 0.5 + 0.3 sin(pi (u + v) + 2 pi s)``, with a phase ``phi`` drawn
      from ``seed``.
    * ``checker-pan``: binary checkerboard of square size ``period / 2`` that
      shifts one pixel right per frame, so it repeats every ``period`` pixels
      along both axes and every ``period`` frames.
    * ``noise``: i.i.d. uniform pixels.
    """
    if height <= 0 or width <= 0 or n_frames <= 0:
        raise ConfigError("video dimensions must be positive")
    rng = np.random.default_rng(seed)
    t = np.arange(n_frames, dtype=np.float64)[:, None, None]
    i = np.arange(height, dtype=np.float64)[None, :, None]
    j = np.arange(width, dtype=np.float64)[None, None, :]
    shape = (n_frames, height, width)
    if kind == "constant":
        out = np.broadcast_to(np.asarray(color, np.float64), (*shape, 3))
    elif kind == "moving-gradient":
        phi = rng.uniform(0.0, 2.0 * np.pi)
        u, v, s = j / width, i / height, t / n_frames
        r = 0.5 + 0.4 * np.sin(2 * np.pi * (u + s) + phi)
        g = 0.5 + 0.4 * np.cos(2 * np.pi * (v - s) + phi)
        b = 0.5 + 0.3 * np.sin(np.pi * (u + v) + 2 * np.pi * s)
        out = np.stack(np.broadcast_arrays(r, g, b), axis=-1)
    elif kind == "checker-pan":
        if period < 2 or period % 2:
            raise ConfigError("checker period must be an even number >= 2")
        half = period // 2
        cell = ((j - t) // half + i // half) % 2
        out = np.repeat(np.broadcast_to(cell, shape)[..., None], 3, axis=-1)
    elif kind == "noise":
        out = rng.random((*shape, 3))
    else:
        raise ConfigError(f"unknown synthetic video kind {kind!r}; choose from {SYNTH_KINDS}")
    return VideoFrames(np.ascontiguousarray(out, dtype=DTYPE), fps)
