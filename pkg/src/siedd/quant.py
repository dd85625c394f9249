"""Group-wise post-training weight quantization (round-to-nearest and HQQ).

A tensor is flattened row-major and cut into contiguous groups of
``group_size`` values; the tail group is padded with its last value. Each group
stores a float32 ``scale`` and ``zero`` and reconstructs ``w = zero + scale * code``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import DTYPE, ConfigError

METHODS = ("hqq", "uniform", "none")


class QuantFormatError(ValueError):
    pass


@dataclass(frozen=True)
class QuantConfig:
    bits: int = 6
    group_size: int = 64
    method: str = "hqq"
    hqq_iters: int = 20
    hqq_p: float = 0.7
    hqq_beta: float = 10.0
    hqq_kappa: float = 1.01

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown quantization method {self.method!r}")
        if not 2 <= self.bits <= 8:
            raise ConfigError(f"bits must be in 2..8, got {self.bits}")
        if self.group_size <= 0:
            raise ConfigError("group size must be positive")
        if not 0.0 < self.hqq_p <= 1.0:
            raise ConfigError("hqq_p must lie in (0, 1]")


@dataclass
class QuantizedTensor:
    codes: np.ndarray  # (n_groups, group_size) uint8, padded
    scales: np.ndarray  # (n_groups,) float32
    zeros: np.ndarray  # (n_groups,) float32
    shape: tuple[int, ...]
    bits: int
    method: str

    @property
    def group_size(self) -> int:
        return self.codes.shape[1]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def _groups(w: np.ndarray, group_size: int) -> np.ndarray:
    flat = np.asarray(w, dtype=DTYPE).ravel()
    if flat.size == 0:
        raise ConfigError("cannot quantize an empty tensor")
    pad = (-flat.size) % group_size
    if pad:
        flat = np.concatenate([flat, np.full(pad, flat[-1], DTYPE)])
    return flat.reshape(-1, group_size)


def _encode(g: np.ndarray, scale: np.ndarray, zero: np.ndarray, bits: int) -> np.ndarray:
    q = np.round((g.astype(np.float64) - zero[:, None]) / scale[:, None])
    return np.clip(q, 0, 2**bits - 1).astype(np.uint8)


def _decode(codes: np.ndarray, scale: np.ndarray, zero: np.ndarray) -> np.ndarray:
    return zero[:, None] + scale[:, None] * codes.astype(DTYPE)


def quantize_uniform(w: np.ndarray, cfg: QuantConfig) -> QuantizedTensor:
    """Min/max round-to-nearest per group.

    A constant group gets ``scale = 1`` and all-zero codes, so it is stored
    exactly in ``zero``.
    """
    g = _groups(w, cfg.group_size)
    lo, hi = g.min(axis=1), g.max(axis=1)
    levels = 2**cfg.bits - 1
    span = hi.astype(np.float64) - lo.astype(np.float64)
    scale = np.where(span > 0, span / levels, 1.0).astype(DTYPE)
    zero = lo.astype(DTYPE)
    codes = _encode(g, scale, zero, cfg.bits)
    return QuantizedTensor(codes, scale, zero, tuple(np.shape(w)), cfg.bits, "uniform")


def shrink_lp(x: np.ndarray, beta: float, p: float) -> np.ndarray:
    """Generalized soft-threshold, the proximal step of ``|x|^p`` at weight ``1/beta``."""
    ax = np.abs(x)
    return np.sign(x) * np.maximum(ax - (1.0 / beta) * np.power(ax + 1e-8, p - 1.0), 0.0)


def group_errors(g: np.ndarray, codes: np.ndarray, scale: np.ndarray, zero: np.ndarray) -> np.ndarray:
    """Mean absolute reconstruction error per group (the objective HQQ descends)."""
    return np.abs(g.astype(np.float64) - _decode(codes, scale, zero)).mean(axis=1)


def hqq_quantize(w: np.ndarray, cfg: QuantConfig, trace: list[float] | None = None) -> QuantizedTensor:
    """Half-quadratic zero-point refinement on top of :func:`quantize_uniform`.

    Scales stay fixed. Each round splits the residual into a sparse part by
    lp shrinkage, re-fits each group's zero to the remainder, and re-rounds the
    codes. A group only adopts a new zero if its error decreases, so the
    objective is non-increasing; iteration stops once no group improves.
    """
    init = quantize_uniform(w, cfg)
    g = _groups(w, cfg.group_size).astype(np.float64)
    scale = init.scales.astype(np.float64)
    zero, codes = init.zeros.copy(), init.codes
    best = group_errors(g, codes, init.scales, zero)
    if trace is not None:
        trace.append(float(best.sum()))
    beta = cfg.hqq_beta
    for _ in range(cfg.hqq_iters):
        recon = _decode(codes, init.scales, zero).astype(np.float64)
        e = shrink_lp(g - recon, beta, cfg.hqq_p)
        cand_zero = np.mean(g - e - scale[:, None] * codes, axis=1).astype(DTYPE)
        cand_codes = _encode(g, init.scales, cand_zero, cfg.bits)
        err = group_errors(g, cand_codes, init.scales, cand_zero)
        better = err < best
        beta *= cfg.hqq_kappa
        if not better.any():
            break
        zero = np.where(better, cand_zero, zero)
        codes = np.where(better[:, None], cand_codes, codes)
        best = np.where(better, err, best)
        if trace is not None:
            trace.append(float(best.sum()))
    return QuantizedTensor(codes, init.scales, zero, init.shape, cfg.bits, "hqq")


def quantize(w: np.ndarray, cfg: QuantConfig) -> QuantizedTensor:
    if cfg.method == "hqq":
        return hqq_quantize(w, cfg)
    if cfg.method == "uniform":
        return quantize_uniform(w, cfg)
    raise ConfigError("method 'none' does not produce quantized tensors")


def dequantize(q: QuantizedTensor) -> np.ndarray:
    if q.codes.size and int(q.codes.max()) > 2**q.bits - 1:
        raise QuantFormatError(f"code {int(q.codes.max())} exceeds {q.bits}-bit range")
    flat = _decode(q.codes, q.scales, q.zeros).ravel()[: q.size]
    return np.ascontiguousarray(flat.reshape(q.shape), dtype=DTYPE)


def pack_codes(codes: np.ndarray, bits: int) -> bytes:
    """Pack b-bit values little-endian within bytes (first value in the low bits)."""
    v = np.asarray(codes, dtype=np.uint8).ravel()
    bitmat = ((v[:, None] >> np.arange(bits, dtype=np.uint8)) & 1).astype(np.uint8)
    return np.packbits(bitmat.ravel(), bitorder="little").tobytes()


def unpack_codes(data: bytes, bits: int, n: int) -> np.ndarray:
    need = (n * bits + 7) // 8
    if len(data) < need:
        raise QuantFormatError(f"packed codes truncated: {len(data)} < {need} bytes")
    flat = np.unpackbits(np.frombuffer(data, np.uint8), bitorder="little")[: n * bits]
    weights = (1 << np.arange(bits, dtype=np.uint16)).astype(np.uint16)
    return (flat.reshape(n, bits).astype(np.uint16) @ weights).astype(np.uint8)


def quantize_model(model, cfg: QuantConfig) -> dict[tuple[int, int], QuantizedTensor]:
    """Quantize every decoder-trunk weight matrix, keyed by ``(group, layer)``.

    The encoder, all biases and the per-frame heads stay full precision.
    """
    if cfg.method == "none":
        return {}
    return {
        (gi, li): quantize(layer.weight, cfg)
        for gi, g in enumerate(model.groups)
        for li, layer in enumerate(g.trunk.layers)
    }


def apply_quantized(model, payloads: dict[tuple[int, int], QuantizedTensor]):
    """Copy of ``model`` with trunk weights replaced by their dequantized values."""
    import copy

    out = copy.deepcopy(model)
    for (gi, li), q in payloads.items():
        out.groups[gi].trunk.layers[li].weight = dequantize(q)
    return out
