"""Canonical Huffman coding over small integer alphabets.

Bit strings are MSB-first: the first code bit is the high bit of the first byte.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

MAX_CODE_LEN = 16


class FormatError(ValueError):
    """Malformed or corrupted coded data."""


@dataclass(frozen=True)
class HuffmanTable:
    lengths: tuple[int, ...]  # code length per symbol, 0 = unused

    @property
    def alphabet_size(self) -> int:
        return len(self.lengths)

    def codes(self) -> np.ndarray:
        """Canonical code values: assigned in ``(length, symbol)`` order."""
        codes = np.zeros(len(self.lengths), np.uint32)
        code, prev = 0, 0
        for sym in sorted((s for s, l in enumerate(self.lengths) if l), key=lambda s: (self.lengths[s], s)):
            code <<= self.lengths[sym] - prev
            codes[sym] = code
            prev = self.lengths[sym]
            code += 1
        return codes

    def kraft_sum(self) -> float:
        return sum(2.0**-l for l in self.lengths if l)

    def to_bytes(self) -> bytes:
        return bytes(self.lengths)

    @classmethod
    def from_bytes(cls, data: bytes) -> "HuffmanTable":
        table = cls(tuple(data))
        if any(l > MAX_CODE_LEN for l in table.lengths):
            raise FormatError("Huffman code length exceeds limit")
        used = [l for l in table.lengths if l]
        if not used:
            raise FormatError("Huffman table has no symbols")
        # a complete code, or the lone 1-bit code of a single-symbol alphabet
        complete = table.kraft_sum() == 1.0 if len(used) > 1 else used == [1]
        if not complete:
            raise FormatError("Huffman table is not a complete prefix code")
        return table


def code_lengths(freqs: np.ndarray, limit: int = MAX_CODE_LEN) -> list[int]:
    """Huffman code lengths for ``freqs`` (zero frequency -> unused symbol).

    If the tree is deeper than ``limit``, frequencies are halved (floored at 1)
    and the tree rebuilt until it fits.
    """
    freqs = np.asarray(freqs, dtype=np.int64).copy()
    used = np.flatnonzero(freqs)
    if used.size == 0:
        raise FormatError("cannot build a Huffman table from no symbols")
    lengths = [0] * len(freqs)
    if used.size == 1:
        lengths[int(used[0])] = 1
        return lengths
    while True:
        heap = [(int(freqs[s]), i, (int(s),)) for i, s in enumerate(used)]
        heapq.heapify(heap)
        depth = {int(s): 0 for s in used}
        counter = len(heap)
        while len(heap) > 1:
            fa, _, a = heapq.heappop(heap)
            fb, _, b = heapq.heappop(heap)
            for s in a + b:
                depth[s] += 1
            heapq.heappush(heap, (fa + fb, counter, a + b))
            counter += 1
        if max(depth.values()) <= limit:
            break
        freqs[used] = np.maximum(freqs[used] >> 1, 1)
    for s, d in depth.items():
        lengths[s] = d
    return lengths


def huffman_encode(symbols, alphabet_size: int | None = None) -> tuple[HuffmanTable, bytes, int]:
    """Returns ``(table, packed_bits, n_bits)``."""
    sym = np.asarray(symbols, dtype=np.int64).ravel()
    if sym.size == 0:
        raise FormatError("cannot Huffman-encode an empty sequence")
    if sym.min() < 0:
        raise FormatError("symbols must be non-negative")
    size = alphabet_size or int(sym.max()) + 1
    if sym.max() >= size:
        raise FormatError(f"symbol {int(sym.max())} outside alphabet of {size}")
    table = HuffmanTable(tuple(code_lengths(np.bincount(sym, minlength=size))))
    codes = table.codes().astype(np.int64)
    lens = np.asarray(table.lengths, np.int64)
    chunks = []
    for s in range(0, sym.size, 1 << 20):
        part = sym[s : s + (1 << 20)]
        l = lens[part]
        c = codes[part]
        ends = np.cumsum(l)
        starts = ends - l
        owner = np.repeat(np.arange(part.size), l)
        k = np.arange(int(ends[-1])) - starts[owner]
        chunks.append(((c[owner] >> (l[owner] - 1 - k)) & 1).astype(np.uint8))
    bits = np.concatenate(chunks)
    return table, np.packbits(bits).tobytes(), int(bits.size)


def huffman_decode(table: HuffmanTable, data: bytes, n_bits: int, n: int) -> np.ndarray:
    """Decode exactly ``n`` symbols that must consume exactly ``n_bits`` bits."""
    if n == 0:
        if n_bits:
            raise FormatError("bits present for an empty sequence")
        return np.zeros(0, np.int64)
    if len(data) * 8 < n_bits:
        raise FormatError(f"bitstream truncated: {len(data) * 8} < {n_bits} bits")
    width = max(table.lengths)
    lut_sym = np.full(1 << width, -1, np.int64)
    lut_len = np.zeros(1 << width, np.int64)
    for s, (c, l) in enumerate(zip(table.codes(), table.lengths)):
        if l:
            lo = int(c) << (width - l)
            lut_sym[lo : lo + (1 << (width - l))] = s
            lut_len[lo : lo + (1 << (width - l))] = l
    bits = np.unpackbits(np.frombuffer(data, np.uint8))[:n_bits].astype(np.int64)
    bits = np.concatenate([bits, np.zeros(width, np.int64)])
    windows = np.zeros(n_bits, np.int64)
    for k in range(width):
        windows |= bits[k : k + n_bits] << (width - 1 - k)
    win = windows.tolist()
    syms_lut, lens_lut = lut_sym.tolist(), lut_len.tolist()
    out = [0] * n
    pos = 0
    for i in range(n):
        if pos >= n_bits:
            raise FormatError(f"bitstream exhausted after {i} of {n} symbols")
        w = win[pos]
        s = syms_lut[w]
        if s < 0:
            raise FormatError(f"invalid code word at bit {pos}")
        out[i] = s
        pos += lens_lut[w]
    if pos != n_bits:
        raise FormatError(f"decoded {n} symbols using {pos} bits, expected {n_bits}")
    return np.asarray(out, np.int64)
