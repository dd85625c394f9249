"""Coordinate-network video codec with a shared encoder and per-group decoders."""

from .codec import decode, encode, info
from .config import PRESETS, Preset, get_preset

__all__ = ["PRESETS", "Preset", "decode", "encode", "get_preset", "info"]
