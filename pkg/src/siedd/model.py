"""The SIEDD network: frozen encoding, shared encoder, per-group decoders."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .coords import CoordGrid, PosEncoding, pos_encode
from .nn import (
    DTYPE,
    BatchLinearLayer,
    ConfigError,
    Mlp,
    batch_linear_forward,
    mlp_forward,
    siren_init,
    siren_init_heads,
)

# rows per forward tile; fixed so evaluation is independent of chunking
TILE_ROWS = 1024


class StateError(RuntimeError):
    """Operation requested in the wrong pipeline state."""


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 768
    enc_hidden_layers: int = 1
    dec_hidden_layers: int = 3
    omega: float = 30.0
    patch: int = 1
    n_freqs: int = 16
    include_input: bool = True

    def __post_init__(self):
        if self.dim <= 0:
            raise ConfigError("model dim must be positive")
        if self.enc_hidden_layers < 1 or self.dec_hidden_layers < 1:
            raise ConfigError("encoder and decoder need at least one hidden layer")
        if self.omega <= 0 or self.patch < 1:
            raise ConfigError("omega must be positive and patch >= 1")

    @property
    def pos_encoding(self) -> PosEncoding:
        return PosEncoding(self.n_freqs, self.include_input)

    @property
    def out_channels(self) -> int:
        return 3 * self.patch * self.patch


@dataclass(frozen=True)
class VideoMeta:
    height: int
    width: int
    n_frames: int
    fps: float = 30.0


@dataclass
class GroupDecoder:
    """Sine trunk shared by a frame group plus one linear head per frame."""

    trunk: Mlp
    heads: BatchLinearLayer
    frames: list[int]

    def __post_init__(self):
        if self.heads.n_heads != len(self.frames):
            raise ConfigError(f"{self.heads.n_heads} heads for {len(self.frames)} frames")

    def params(self) -> list[np.ndarray]:
        return self.trunk.params() + [self.heads.weight, self.heads.bias]

    def copy(self) -> "GroupDecoder":
        return GroupDecoder(self.trunk.copy(), self.heads.copy(), list(self.frames))


@dataclass
class SieddModel:
    config: ModelConfig
    meta: VideoMeta
    encoder: Mlp
    anchor: GroupDecoder | None = None
    groups: list[GroupDecoder] = field(default_factory=list)

    @property
    def pos_encoding(self) -> PosEncoding:
        return self.config.pos_encoding

    def frame_groups(self, group_size: int) -> list[list[int]]:
        return frame_groups(self.meta.n_frames, group_size)

    def group_of_frame(self, frame: int) -> tuple[int, int]:
        for gi, g in enumerate(self.groups):
            if frame in g.frames:
                return gi, g.frames.index(frame)
        raise IndexError(f"frame {frame} is not covered by any group")


def frame_groups(n_frames: int, group_size: int) -> list[list[int]]:
    if group_size <= 0:
        raise ConfigError("group size must be positive")
    return [list(range(s, min(s + group_size, n_frames))) for s in range(0, n_frames, group_size)]


def new_encoder(cfg: ModelConfig, seed: int) -> Mlp:
    dims = [cfg.pos_encoding.out_dim] + [cfg.dim] * (cfg.enc_hidden_layers + 1)
    return siren_init(Mlp.zeros(dims, cfg.omega, linear_last=False), seed, first=True, stream=0)


def new_decoder(cfg: ModelConfig, frames: list[int], seed: int, stream: int) -> GroupDecoder:
    trunk = Mlp.zeros([cfg.dim] * (cfg.dec_hidden_layers + 1), cfg.omega, linear_last=False)
    siren_init(trunk, seed, first=False, stream=2 * stream + 1)
    heads = BatchLinearLayer.zeros(len(frames), cfg.dim, cfg.out_channels)
    siren_init_heads(heads, cfg.omega, seed, stream=2 * stream + 2)
    return GroupDecoder(trunk, heads, list(frames))


def build_model(cfg: ModelConfig, meta: VideoMeta, anchors: list[int], seed: int) -> SieddModel:
    """Stage-1 model: encoder plus one decoder whose heads cover ``anchors``."""
    if not anchors:
        raise ConfigError("stage 1 needs at least one anchor frame")
    encoder = new_encoder(cfg, seed)
    return SieddModel(cfg, meta, encoder, anchor=new_decoder(cfg, anchors, seed, stream=0))


def encoder_checksum(model: SieddModel) -> str:
    h = hashlib.sha256()
    for p in model.encoder.params():
        h.update(np.ascontiguousarray(p).tobytes())
    return h.hexdigest()


def _tiled(fn, x: np.ndarray, out_shape_tail: tuple[int, ...]) -> np.ndarray:
    out = np.empty((x.shape[0], *out_shape_tail), DTYPE)
    for s in range(0, x.shape[0], TILE_ROWS):
        out[s : s + TILE_ROWS] = fn(x[s : s + TILE_ROWS])
    return out


def encode_features(model: SieddModel, coords: np.ndarray) -> np.ndarray:
    """Encoder latents for ``coords``, evaluated in fixed-size row tiles."""
    enc = model.pos_encoding

    def run(c):
        return mlp_forward(model.encoder, pos_encode(enc, c))

    return _tiled(run, coords, (model.config.dim,))


def decode_features(decoder: GroupDecoder, feats: np.ndarray) -> np.ndarray:
    """Trunk + heads on encoder latents; ``(n, n_heads, 3 p^2)``."""

    def run(z):
        return batch_linear_forward(decoder.heads, mlp_forward(decoder.trunk, z))

    return _tiled(run, feats, (decoder.heads.n_heads, decoder.heads.out_dim))


def get_decoder(model: SieddModel, group_index: int) -> GroupDecoder:
    """``group_index == -1`` selects the stage-1 anchor decoder."""
    if group_index == -1:
        if model.anchor is None:
            raise StateError("model has no anchor decoder")
        return model.anchor
    if not 0 <= group_index < len(model.groups):
        raise IndexError(f"group {group_index} out of range (model has {len(model.groups)})")
    return model.groups[group_index]


def forward_group(
    model: SieddModel, group_index: int, grid: CoordGrid, coord_indices: np.ndarray | None = None
) -> np.ndarray:
    """Raw (unclamped) predictions ``(batch, n_heads, 3 p^2)`` for one group."""
    if grid.patch != model.config.patch:
        raise ConfigError(f"grid patch {grid.patch} != model patch {model.config.patch}")
    decoder = get_decoder(model, group_index)
    coords = grid.coords if coord_indices is None else grid.coords[coord_indices]
    return decode_features(decoder, encode_features(model, coords))


def patch_targets(frames: np.ndarray, patch: int) -> np.ndarray:
    """``(n, H, W, 3)`` frames to ``(cells, n, 3 p^2)`` training targets.

    Patch vector layout is ``(dy, dx, channel)`` row-major, the inverse of
    :func:`assemble_frames`.
    """
    n, h, w, _ = frames.shape
    p = patch
    t = frames.reshape(n, h // p, p, w // p, p, 3).transpose(1, 3, 0, 2, 4, 5)
    return np.ascontiguousarray(t.reshape((h // p) * (w // p), n, 3 * p * p), dtype=DTYPE)


def assemble_frames(predictions: np.ndarray, grid: CoordGrid, clamp: bool = True) -> np.ndarray:
    """Scatter ``(cells, n_frames, 3 p^2)`` predictions into ``(n, H, W, 3)`` images."""
    p = grid.patch
    if predictions.ndim != 3 or predictions.shape[0] != len(grid) or predictions.shape[2] != 3 * p * p:
        raise ValueError(
            f"predictions {predictions.shape} do not cover a {grid.rows}x{grid.cols} grid with patch {p}"
        )
    n = predictions.shape[1]
    img = predictions.reshape(grid.rows, grid.cols, n, p, p, 3).transpose(2, 0, 3, 1, 4, 5)
    img = img.reshape(n, grid.height, grid.width, 3)
    if clamp:
        img = np.clip(img, 0.0, 1.0)
    return np.ascontiguousarray(img, dtype=DTYPE)


def nearest_anchor(frame: int, anchors: list[int]) -> int:
    """Position in ``anchors`` of the closest anchor; ties go to the lower frame."""
    best = min(range(len(anchors)), key=lambda k: (abs(anchors[k] - frame), anchors[k]))
    return best


def init_group_from_anchor(model: SieddModel, frames: list[int]) -> GroupDecoder:
    """Copy the anchor trunk, and for each frame the head of its nearest anchor."""
    if model.anchor is None:
        raise StateError("stage 1 has not produced anchor decoders")
    anchor = model.anchor
    picks = [nearest_anchor(f, anchor.frames) for f in frames]
    heads = BatchLinearLayer(anchor.heads.weight[picks].copy(), anchor.heads.bias[picks].copy())
    return GroupDecoder(anchor.trunk.copy(), heads, list(frames))


def decode_frames(
    model: SieddModel, grid: CoordGrid, frames: list[int] | None = None, chunks: int = 8
) -> np.ndarray:
    """Reconstruct ``frames`` (default: all) on ``grid``; clamped ``(n, H, W, 3)``.

    Coordinates are processed in ``chunks`` passes; results do not depend on it.
    """
    if not model.groups:
        raise StateError("model has no trained frame groups")
    wanted = list(range(model.meta.n_frames)) if frames is None else list(frames)
    out = np.empty((len(wanted), grid.height, grid.width, 3), DTYPE)
    bounds = chunk_bounds(len(grid), chunks)
    for gi, g in enumerate(model.groups):
        local = [(k, g.frames.index(f)) for k, f in enumerate(wanted) if f in g.frames]
        if not local:
            continue
        preds = np.empty((len(grid), g.heads.n_heads, g.heads.out_dim), DTYPE)
        for s, e in bounds:
            feats = encode_features(model, grid.coords[s:e])
            preds[s:e] = decode_features(g, feats)
        imgs = assemble_frames(preds, grid)
        for k, h in local:
            out[k] = imgs[h]
    return out


def chunk_bounds(n: int, chunks: int) -> list[tuple[int, int]]:
    """Split ``[0, n)`` into at most ``chunks`` pieces aligned to the tile size."""
    chunks = max(1, chunks)
    tiles = -(-n // TILE_ROWS)
    per = -(-tiles // chunks)
    step = per * TILE_ROWS
    return [(s, min(s + step, n)) for s in range(0, n, step)]
