"""PSNR, SSIM and bits-per-pixel for rate-distortion reports."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .nn import ConfigError

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
LUMA = np.array([0.299, 0.587, 0.114])


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """PSNR in dB; identical inputs return the 100 dB cap."""
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse))


def luma(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, np.float64)
    return img @ LUMA if img.ndim == 3 else img


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    rows = np.lib.stride_tricks.sliding_window_view(img, k, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=1) @ g


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian windows of the luma."""
    x, y = luma(a), luma(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise ConfigError(f"SSIM needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}")
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    g = gaussian_window()
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def bpp(file_bits: int, n_frames: int, height: int, width: int) -> float:
    if n_frames <= 0 or height <= 0 or width <= 0:
        raise ConfigError("bpp needs positive dimensions")
    return file_bits / (n_frames * height * width)


@dataclass
class RdReport:
    psnr: list[float] = field(default_factory=list)
    ssim: list[float] = field(default_factory=list)
    bpp: float | None = None
    encode_seconds: float | None = None
    decode_fps: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr)) if self.psnr else float("nan")

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim)) if self.ssim else float("nan")

    def summary(self) -> dict:
        d = asdict(self)
        d.update(mean_psnr=self.mean_psnr, mean_ssim=self.mean_ssim, n_frames=len(self.psnr))
        return d

    def lines(self) -> list[str]:
        out = []
        for i, p in enumerate(self.psnr):
            line = f"frame={i} psnr={p:.4f}"
            if i < len(self.ssim):
                line += f" ssim={self.ssim[i]:.6f}"
            out.append(line)
        tail = f"mean_psnr={self.mean_psnr:.4f} mean_ssim={self.mean_ssim:.6f}"
        if self.bpp is not None:
            tail += f" bpp={self.bpp:.6f}"
        if self.encode_seconds is not None:
            tail += f" encode_s={self.encode_seconds:.2f}"
        if self.decode_fps is not None:
            tail += f" decode_fps={self.decode_fps:.3f}"
        return out + [tail]

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def evaluate(recon: np.ndarray, source: np.ndarray, with_ssim: bool = True) -> RdReport:
    if recon.shape != source.shape:
        raise ValueError(f"reconstruction {recon.shape} vs source {source.shape}")
    rep = RdReport()
    for r, s in zip(recon, source):
        rep.psnr.append(psnr(r, s))
        if with_ssim:
            rep.ssim.append(ssim(r, s))
    return rep
