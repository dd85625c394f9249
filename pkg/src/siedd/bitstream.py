"""The ``.siedd`` container. Byte layout is documented in docs/format.md."""

from __future__ import annotations

import hashlib
import json
import lzma
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .huffman import FormatError, HuffmanTable, huffman_decode, huffman_encode
from .metrics import bpp
from .model import GroupDecoder, ModelConfig, SieddModel, VideoMeta
from .nn import DTYPE, BatchLinearLayer, LinearLayer, Mlp
from .quant import QuantConfig, QuantFormatError, QuantizedTensor, dequantize, pack_codes, unpack_codes

MAGIC = b"SIED"
VERSION = 1
PREFIX = struct.Struct("<4sH32s")

CODING_PACKED = 0
CODING_HUFFMAN = 1


class VersionError(FormatError):
    pass


@dataclass
class ContainerInfo:
    """Everything in a file except the network weights."""

    header: dict
    file_bytes: int
    payload_bytes: int
    sections: dict[str, int] = field(default_factory=dict)

    @property
    def meta(self) -> VideoMeta:
        return VideoMeta(**self.header["meta"])

    @property
    def bpp(self) -> float:
        m = self.meta
        return bpp(self.file_bytes * 8, m.n_frames, m.height, m.width)


def _f32(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def _encode_codes(q: QuantizedTensor) -> bytes:
    """Huffman-code the codes, or bit-pack them if that is smaller."""
    table, data, n_bits = huffman_encode(q.codes.ravel(), alphabet_size=2**q.bits)
    packed = pack_codes(q.codes, q.bits)
    if len(data) + len(table.to_bytes()) + 12 < len(packed):
        return (
            struct.pack("<B", CODING_HUFFMAN) + table.to_bytes()
            + struct.pack("<QI", n_bits, len(data)) + data
        )
    return struct.pack("<BI", CODING_PACKED, len(packed)) + packed


def header_dict(model: SieddModel, train: dict, quant: QuantConfig) -> dict:
    train_json = json.dumps(train, sort_keys=True)
    return {
        "version": VERSION,
        "meta": asdict(model.meta),
        "model": asdict(model.config),
        "train": train,
        "train_digest": hashlib.sha256(train_json.encode()).hexdigest(),
        "quant": asdict(quant),
        "anchors": list(model.anchor.frames) if model.anchor else [],
        "groups": [[g.frames[0], len(g.frames)] for g in model.groups],
    }


def serialize_payload(
    model: SieddModel, payloads: dict[tuple[int, int], QuantizedTensor], train: dict, quant: QuantConfig
) -> tuple[bytes, dict[str, int]]:
    sizes: dict[str, int] = {}
    header = json.dumps(header_dict(model, train, quant), sort_keys=True, separators=(",", ":")).encode()
    parts = [struct.pack("<I", len(header)), header]
    sizes["header"] = 4 + len(header)
    enc = b"".join(_f32(l.weight) + _f32(l.bias) for l in model.encoder.layers)
    parts.append(enc)
    sizes["encoder"] = len(enc)
    trunk_total = heads_total = 0
    for gi, g in enumerate(model.groups):
        for li, layer in enumerate(g.trunk.layers):
            q = payloads.get((gi, li))
            chunk = _f32(layer.bias)
            if q is None:
                chunk += _f32(layer.weight)
            else:
                chunk += _f32(q.scales) + _f32(q.zeros) + _encode_codes(q)
            parts.append(chunk)
            trunk_total += len(chunk)
        heads = _f32(g.heads.weight) + _f32(g.heads.bias)
        parts.append(heads)
        heads_total += len(heads)
    sizes["trunks"] = trunk_total
    sizes["heads"] = heads_total
    return b"".join(parts), sizes


def to_bytes(model, payloads, train: dict, quant: QuantConfig) -> bytes:
    payload, _ = serialize_payload(model, payloads, train, quant)
    digest = hashlib.sha256(payload).digest()
    body = lzma.compress(payload, format=lzma.FORMAT_XZ, preset=9)
    return PREFIX.pack(MAGIC, VERSION, digest) + body


def serialize(model, payloads, train: dict, quant: QuantConfig, path: str | Path) -> int:
    """Write the file atomically; returns its size in bytes."""
    path = Path(path)
    data = to_bytes(model, payloads, train, quant)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".part")
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except OSError as e:
        raise OSError(f"writing {path}: {e}") from e
    return len(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise FormatError(f"payload truncated at byte {self.pos} (need {n} more)")
        out = self.data[self.pos : self.pos + n].tobytes()
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def f32(self, *shape: int) -> np.ndarray:
        n = int(np.prod(shape))
        return np.frombuffer(self.take(4 * n), dtype="<f4").astype(DTYPE).reshape(shape)


def _read_codes(r: _Reader, bits: int, n: int) -> np.ndarray:
    (mode,) = r.unpack("<B")
    if mode == CODING_HUFFMAN:
        table = HuffmanTable.from_bytes(r.take(2**bits))
        n_bits, n_bytes = r.unpack("<QI")
        if n_bytes != (n_bits + 7) // 8:
            raise FormatError("Huffman byte count disagrees with bit count")
        return huffman_decode(table, r.take(n_bytes), n_bits, n).astype(np.uint8)
    if mode == CODING_PACKED:
        (n_bytes,) = r.unpack("<I")
        if n_bytes != (n * bits + 7) // 8:
            raise FormatError("packed code length mismatch")
        return unpack_codes(r.take(n_bytes), bits, n)
    raise FormatError(f"unknown code section type {mode}")


def open_payload(data: bytes) -> bytes:
    if len(data) < PREFIX.size:
        raise FormatError(f"file too short ({len(data)} bytes) for a SIEDD header")
    magic, version, digest = PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionError(f"unsupported format version {version} (this build reads version {VERSION})")
    try:
        payload = lzma.decompress(data[PREFIX.size :], format=lzma.FORMAT_XZ)
    except lzma.LZMAError as e:
        raise FormatError(f"corrupt XZ stream: {e}") from e
    if hashlib.sha256(payload).digest() != digest:
        raise FormatError("checksum mismatch: payload does not match stored SHA-256")
    return payload


def _parse(payload: bytes) -> tuple[dict, SieddModel, dict[str, int]]:
    r = _Reader(payload)
    (hlen,) = r.unpack("<I")
    try:
        header = json.loads(r.take(hlen).decode())
        cfg = ModelConfig(**header["model"])
        meta = VideoMeta(**header["meta"])
        qcfg = QuantConfig(**header["quant"])
        groups = [(int(a), int(b)) for a, b in header["groups"]]
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"malformed header: {e}") from e
    if header.get("version") != VERSION:
        raise VersionError(f"header version {header.get('version')} != {VERSION}")
    sizes = {"header": r.pos}

    start = r.pos
    dims = [cfg.pos_encoding.out_dim] + [cfg.dim] * (cfg.enc_hidden_layers + 1)
    layers = [LinearLayer(r.f32(b, a).copy(), r.f32(b).copy()) for a, b in zip(dims, dims[1:])]
    encoder = Mlp(layers, cfg.omega, linear_last=False)
    sizes["encoder"] = r.pos - start

    quantized = qcfg.method != "none"
    d, out_ch = cfg.dim, cfg.out_channels
    decoders, trunk_bytes, head_bytes = [], 0, 0
    for first, count in groups:
        start = r.pos
        trunk_layers = []
        for _ in range(cfg.dec_hidden_layers):
            bias = r.f32(d).copy()
            if quantized:
                n_groups = -(-d * d // qcfg.group_size)
                scales, zeros = r.f32(n_groups), r.f32(n_groups)
                codes = _read_codes(r, qcfg.bits, n_groups * qcfg.group_size)
                q = QuantizedTensor(
                    codes.reshape(n_groups, qcfg.group_size), scales, zeros, (d, d), qcfg.bits, qcfg.method
                )
                try:
                    weight = dequantize(q)
                except QuantFormatError as e:
                    raise FormatError(str(e)) from e
            else:
                weight = r.f32(d, d).copy()
            trunk_layers.append(LinearLayer(weight, bias))
        trunk_bytes += r.pos - start
        start = r.pos
        heads = BatchLinearLayer(r.f32(count, out_ch, d).copy(), r.f32(count, out_ch).copy())
        head_bytes += r.pos - start
        decoders.append(GroupDecoder(Mlp(trunk_layers, cfg.omega, linear_last=False), heads,
                                     list(range(first, first + count))))
    if r.pos != len(payload):
        raise FormatError(f"{len(payload) - r.pos} trailing bytes after last section")
    sizes.update(trunks=trunk_bytes, heads=head_bytes)
    if sum(len(g.frames) for g in decoders) != meta.n_frames:
        raise FormatError("frame groups do not cover the video")
    return header, SieddModel(cfg, meta, encoder, groups=decoders), sizes


def read_bytes(data: bytes) -> tuple[SieddModel, ContainerInfo]:
    payload = open_payload(data)
    header, model, sizes = _parse(payload)
    return model, ContainerInfo(header, len(data), len(payload), sizes)


def deserialize(path: str | Path) -> tuple[SieddModel, ContainerInfo]:
    """Load a ``.siedd`` file into a ready-to-decode model (trunks dequantized)."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise OSError(f"reading {path}: {e}") from e
    return read_bytes(data)
