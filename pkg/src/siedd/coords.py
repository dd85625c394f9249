"""Coordinate grids, frozen frequency encoding and the epoch-shuffled sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import DTYPE, ConfigError, ShapeError


@dataclass(frozen=True)
class CoordGrid:
    """Centers of the ``patch x patch`` cells of an ``height x width`` image.

    Row-major: y varies slowest, x fastest. Coordinates are ``(x, y)`` in (-1, 1).
    """

    height: int
    width: int
    patch: int
    coords: np.ndarray

    @property
    def rows(self) -> int:
        return self.height // self.patch

    @property
    def cols(self) -> int:
        return self.width // self.patch

    def __len__(self) -> int:
        return self.coords.shape[0]


def axis_centers(n: int) -> np.ndarray:
    # c = (2i + 1)/n - 1
    return (2.0 * np.arange(n, dtype=np.float64) + 1.0) / n - 1.0


def make_grid(height: int, width: int, patch: int = 1) -> CoordGrid:
    if height <= 0 or width <= 0 or patch <= 0:
        raise ConfigError(f"grid needs positive sizes, got {height}x{width} patch {patch}")
    if height % patch or width % patch:
        raise ConfigError(f"patch {patch} does not divide {height}x{width}")
    rows, cols = height // patch, width // patch
    y, x = np.meshgrid(axis_centers(rows), axis_centers(cols), indexing="ij")
    coords = np.stack([x.ravel(), y.ravel()], axis=1).astype(DTYPE)
    coords.setflags(write=False)
    return CoordGrid(height, width, patch, coords)


@dataclass(frozen=True)
class PosEncoding:
    """NeRF-style encoding ``[c, sin(2^k pi c), cos(2^k pi c)]`` for k < n_freqs.

    Feature order: the raw ``(x, y)`` first when ``include_input``, then for
    each component, for each frequency, the ``sin, cos`` pair.
    """

    n_freqs: int = 16
    include_input: bool = True

    def __post_init__(self):
        if self.n_freqs < 0:
            raise ConfigError("n_freqs must be non-negative")
        if self.out_dim == 0:
            raise ConfigError("encoding with no frequencies and no raw input is empty")

    @property
    def out_dim(self) -> int:
        return 2 * 2 * self.n_freqs + (2 if self.include_input else 0)


def pos_encode(enc: PosEncoding, coords: np.ndarray) -> np.ndarray:
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ShapeError(f"expected (n, 2) coordinates, got {coords.shape}")
    c = coords.astype(np.float64)
    parts = [c] if enc.include_input else []
    if enc.n_freqs:
        freqs = np.pi * 2.0 ** np.arange(enc.n_freqs)
        for comp in range(2):
            arg = c[:, comp : comp + 1] * freqs  # (n, L)
            pair = np.stack([np.sin(arg), np.cos(arg)], axis=2)  # (n, L, 2)
            parts.append(pair.reshape(len(c), -1))
    return np.ascontiguousarray(np.concatenate(parts, axis=1), dtype=DTYPE)


class EpochSampler:
    """Walks a fresh random permutation of ``[0, n_points)`` each epoch.

    Batches never straddle an epoch boundary, so the last batch of an epoch may
    be short. The permutation for epoch ``e`` depends only on ``(seed, e)``.
    """

    def __init__(self, n_points: int, batch_size: int, seed: int = 0):
        if batch_size <= 0:
            raise ConfigError("batch size must be positive")
        if n_points <= 0:
            raise ConfigError("sampler needs at least one point")
        self.n_points = n_points
        self.batch_size = batch_size
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        self.epoch = 0
        self.cursor = 0
        self.permutation = self._shuffle(0)

    def _shuffle(self, epoch: int) -> np.ndarray:
        return np.random.default_rng([self.seed, epoch]).permutation(self.n_points)

    def next_batch(self) -> np.ndarray:
        if self.cursor >= self.n_points:
            self.epoch += 1
            self.permutation = self._shuffle(self.epoch)
            self.cursor = 0
        batch = self.permutation[self.cursor : self.cursor + self.batch_size]
        self.cursor += len(batch)
        return batch


def default_sample_count(height: int, width: int) -> int:
    return max(1, (height * width) // 1024)
