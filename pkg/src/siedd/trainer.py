"""Two-stage training: shared encoder on anchor frames, then frozen-encoder groups."""

from __future__ import annotations

import logging
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .coords import CoordGrid, EpochSampler, default_sample_count, pos_encode
from .model import (
    GroupDecoder,
    SieddModel,
    encode_features,
    frame_groups,
    init_group_from_anchor,
    new_decoder,
    patch_targets,
)
from .nn import (
    ConfigError,
    GradTape,
    batch_linear_backward,
    batch_linear_forward,
    mlp_backward,
    mlp_forward,
)
from .optim import NonFiniteError, ScheduleFreeAdamW

log = logging.getLogger("siedd.train")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    group_size: int = 20
    n_anchors: int | None = None  # None -> group_size
    samples: int | None = None  # None -> default_sample_count of the grid
    stage1_iters: int = 20000
    stage2_iters: int = 20000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0
    workers: int = 1
    log_every: int = 500

    def __post_init__(self):
        if self.group_size <= 0:
            raise ConfigError("group size must be positive")
        if self.samples is not None and self.samples <= 0:
            raise ConfigError("sample count must be positive")
        if self.lr <= 0 or self.stage1_iters < 0 or self.stage2_iters < 0:
            raise ConfigError("learning rate must be positive and iteration counts non-negative")

    def anchors(self, n_frames: int) -> int:
        return min(self.n_anchors or self.group_size, n_frames)

    def sample_count(self, grid: CoordGrid) -> int:
        return self.samples or default_sample_count(grid.rows, grid.cols)

    def to_dict(self) -> dict:
        return asdict(self)


def select_anchors(n_frames: int, n_anchors: int) -> list[int]:
    if not 1 <= n_anchors <= n_frames:
        raise ConfigError(f"need 1 <= anchors ({n_anchors}) <= frames ({n_frames})")
    return [(k * n_frames) // n_anchors for k in range(n_anchors)]


def l2_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. ``pred``."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(np.square(diff, dtype=np.float64)))
    return loss, (2.0 / diff.size) * diff


def _optimizer(params, cfg: TrainConfig) -> ScheduleFreeAdamW:
    return ScheduleFreeAdamW(
        params, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps, weight_decay=cfg.weight_decay
    )


def _check(loss: float, stage: int, group: int, it: int) -> None:
    if not np.isfinite(loss):
        raise TrainingError(f"stage {stage} group {group}: non-finite loss at iteration {it}")


def _log(stage: int, group: int, it: int, loss: float, cfg: TrainConfig, last: int) -> None:
    if cfg.log_every and (it % cfg.log_every == 0 or it == last):
        log.info("stage=%d group=%d iter=%d loss=%.6g", stage, group, it, loss)


def train_stage1(
    model: SieddModel, frames: np.ndarray, grid: CoordGrid, cfg: TrainConfig
) -> list[float]:
    """Fit encoder and anchor decoder jointly to the anchor ``frames`` (n, H, W, 3).

    Every step uses one coordinate batch shared by all anchor frames.
    Returns the per-iteration loss trace; parameters are updated in place.
    """
    decoder = model.anchor
    if decoder is None:
        raise TrainingError("model was not built for stage 1")
    targets = patch_targets(frames, grid.patch)
    feats = pos_encode(model.pos_encoding, grid.coords)
    sampler = EpochSampler(len(grid), cfg.sample_count(grid), seed=cfg.seed)
    params = model.encoder.params() + decoder.params()
    opt = _optimizer(params, cfg)
    enc_tape, trunk_tape = GradTape(model.encoder), GradTape(decoder.trunk)
    trace: list[float] = []
    for it in range(1, cfg.stage1_iters + 1):
        idx = sampler.next_batch()
        latent = mlp_forward(model.encoder, feats[idx], enc_tape)
        z = mlp_forward(decoder.trunk, latent, trunk_tape)
        pred = batch_linear_forward(decoder.heads, z)
        loss, d_pred = l2_loss(pred, targets[idx])
        _check(loss, 1, -1, it)
        d_hw, d_hb, d_z = batch_linear_backward(decoder.heads, z, d_pred)
        g_trunk, d_latent = mlp_backward(trunk_tape, d_z)
        g_enc, _ = mlp_backward(enc_tape, d_latent)
        try:
            opt.step(g_enc + g_trunk + [d_hw, d_hb])
        except NonFiniteError as e:
            raise TrainingError(f"stage 1: {e}") from e
        trace.append(loss)
        _log(1, -1, it, loss, cfg, cfg.stage1_iters)
    opt.finalize()
    return trace


def train_stage2_group(
    features: np.ndarray,
    targets: np.ndarray,
    decoder: GroupDecoder,
    cfg: TrainConfig,
    group_index: int,
    eval_every: int = 0,
    eval_fn=None,
) -> list[float]:
    """Train ``decoder`` in place on frozen encoder ``features`` (cells, d).

    ``targets`` is ``(cells, n_heads, 3 p^2)``. The encoder is never touched:
    only its cached latents are read. ``eval_fn(decoder, it)`` is called every
    ``eval_every`` steps on the averaged weights and may return True to stop.
    """
    batch = cfg.samples or max(1, len(features) // 1024)
    sampler = EpochSampler(len(features), batch, seed=group_seed(cfg.seed, group_index))
    params = decoder.params()
    opt = _optimizer(params, cfg)
    tape = GradTape(decoder.trunk)
    trace: list[float] = []
    for it in range(1, cfg.stage2_iters + 1):
        idx = sampler.next_batch()
        z = mlp_forward(decoder.trunk, features[idx], tape)
        pred = batch_linear_forward(decoder.heads, z)
        loss, d_pred = l2_loss(pred, targets[idx])
        _check(loss, 2, group_index, it)
        d_hw, d_hb, d_z = batch_linear_backward(decoder.heads, z, d_pred)
        g_trunk, _ = mlp_backward(tape, d_z)
        try:
            opt.step(g_trunk + [d_hw, d_hb])
        except NonFiniteError as e:
            raise TrainingError(f"stage 2 group {group_index}: {e}") from e
        trace.append(loss)
        _log(2, group_index, it, loss, cfg, cfg.stage2_iters)
        if eval_every and eval_fn is not None and it % eval_every == 0:
            y = [p.copy() for p in params]
            opt.finalize()
            stop = eval_fn(decoder, it)
            if stop:
                return trace
            for p, saved in zip(params, y):
                p[...] = saved
    opt.finalize()
    return trace


def group_seed(seed: int, group_index: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 2, group_index]).generate_state(1)[0])


# Worker-side state, inherited through fork; never mutated after the pool starts.
_JOB: dict = {}


def _train_one(gi: int) -> tuple[int, GroupDecoder, list[float]]:
    job = _JOB
    frames = job["groups"][gi]
    model: SieddModel = job["model"]
    cfg: TrainConfig = job["cfg"]
    if model.anchor is not None:
        decoder = init_group_from_anchor(model, frames)
    else:
        decoder = new_decoder(model.config, frames, cfg.seed, stream=gi + 1)
    targets = job["targets"][:, frames[0] : frames[-1] + 1]
    trace = train_stage2_group(job["features"], targets, decoder, cfg, gi)
    return gi, decoder, trace


def train_all_groups(
    model: SieddModel, frames: np.ndarray, grid: CoordGrid, cfg: TrainConfig
) -> list[list[float]]:
    """Train every frame group against the frozen encoder; fills ``model.groups``.

    Results do not depend on ``cfg.workers`` or completion order: each group's
    sampler is seeded from ``(cfg.seed, group_index)`` and groups are collected
    by index.
    """
    groups = frame_groups(model.meta.n_frames, cfg.group_size)
    cfg = _with_samples(cfg, grid)
    _JOB.clear()
    _JOB.update(
        model=model,
        cfg=cfg,
        groups=groups,
        features=encode_features(model, grid.coords),
        targets=patch_targets(frames, grid.patch),
    )
    results: dict[int, tuple[GroupDecoder, list[float]]] = {}
    try:
        if cfg.workers <= 1 or len(groups) == 1:
            for gi in range(len(groups)):
                _, dec, trace = _train_one(gi)
                results[gi] = (dec, trace)
        else:
            ctx = mp.get_context("fork")
            with ProcessPoolExecutor(max_workers=min(cfg.workers, len(groups)), mp_context=ctx) as pool:
                futures = {gi: pool.submit(_train_one, gi) for gi in range(len(groups))}
                for gi, fut in futures.items():
                    try:
                        _, dec, trace = fut.result()
                    except Exception as e:  # noqa: BLE001 - re-raised with group id
                        raise TrainingError(f"stage 2 group {gi} failed: {e}") from e
                    results[gi] = (dec, trace)
    finally:
        _JOB.clear()
    model.groups = [results[gi][0] for gi in range(len(groups))]
    return [results[gi][1] for gi in range(len(groups))]


def _with_samples(cfg: TrainConfig, grid: CoordGrid) -> TrainConfig:
    return replace(cfg, samples=cfg.sample_count(grid))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("SIEDD_WORKERS", "1")))
    except ValueError:
        return 1
