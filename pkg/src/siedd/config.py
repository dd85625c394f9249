"""Named presets bundling model, training and quantization settings."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .model import ModelConfig
from .nn import ConfigError
from .quant import QuantConfig
from .trainer import TrainConfig


@dataclass(frozen=True)
class Preset:
    model: ModelConfig
    train: TrainConfig
    quant: QuantConfig


PRESETS: dict[str, Preset] = {
    "S": Preset(ModelConfig(dim=512), TrainConfig(), QuantConfig()),
    "M": Preset(ModelConfig(dim=768), TrainConfig(), QuantConfig()),
    "L": Preset(ModelConfig(dim=1024), TrainConfig(), QuantConfig()),
    # desk-scale: runs the whole pipeline on a 96x96 clip in about a minute
    "toy": Preset(
        ModelConfig(dim=128, n_freqs=8),
        TrainConfig(group_size=4, stage1_iters=2000, stage2_iters=2000, lr=2e-4, samples=144),
        QuantConfig(),
    ),
}


def get_preset(name: str, **overrides) -> Preset:
    """Look up a preset and apply ``section__field=value`` overrides (``None`` skipped)."""
    try:
        p = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    sections = {"model": {}, "train": {}, "quant": {}}
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, fld = key.partition("__")
        if section not in sections or not fld:
            raise ConfigError(f"bad override {key!r}")
        sections[section][fld] = value
    return Preset(
        replace(p.model, **sections["model"]),
        replace(p.train, **sections["train"]),
        replace(p.quant, **sections["quant"]),
    )
