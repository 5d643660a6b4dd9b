"""Zero-run RLE, canonical Huffman coding and the ``AALW`` container.

Container layout (little-endian)::

    "AALW" | version u8 | M u16 | segment_count u32 | original_sample_count u64
    | pad_length u8 | mu u8 | alpha f32 | token_count u64 | table_size u16
    | table_size x (zigzag-varint symbol, u8 code length)
    | payload_bit_count u64 | payload bytes | CRC-32 of all preceding bytes u32

Literals and run counts share one Huffman alphabet; the decoder tells them
apart by position (a count always follows a zero token).
"""

from __future__ import annotations

import heapq
import itertools
import struct
import zlib
from collections import Counter
from dataclasses import dataclass

import numpy as np

MAGIC = b"AALW"
VERSION = 1
MAX_RUN = 255
MAX_CODE_LENGTH = 32

_FIXED = struct.Struct("<4sBHIQBBfQH")


class BitstreamError(ValueError):
    pass


class CRCError(BitstreamError):
    pass


# -- run-length coding ---------------------------------------------------------


def rle_encode(q) -> list[int]:
    """Replace each maximal run of zeros by ``0, count`` (runs longer than 255 are split)."""
    out = []
    run = 0
    for value in q:
        value = int(value)
        if value == 0:
            run += 1
            if run == MAX_RUN:
                out += [0, MAX_RUN]
                run = 0
            continue
        if run:
            out += [0, run]
            run = 0
        out.append(value)
    if run:
        out += [0, run]
    return out


def rle_decode(tokens) -> list[int]:
    out = []
    it = iter(tokens)
    for tok in it:
        tok = int(tok)
        if tok != 0:
            out.append(tok)
            continue
        count = next(it, None)
        if count is None:
            raise BitstreamError("dangling zero: run token without a count")
        count = int(count)
        if not 1 <= count <= MAX_RUN:
            raise BitstreamError(f"run count {count} outside 1..{MAX_RUN}")
        out.extend([0] * count)
    return out


# -- canonical Huffman ----------------------------------------------------------


@dataclass
class CodeTable:
    """Canonical prefix code: ``lengths`` maps symbol -> code length."""

    lengths: dict[int, int]

    def __post_init__(self):
        for sym, n in self.lengths.items():
            if not 1 <= n <= MAX_CODE_LENGTH:
                raise ValueError(f"code length {n} for symbol {sym} outside 1..{MAX_CODE_LENGTH}")
        if self.lengths and sum(2.0**-n for n in self.lengths.values()) > 1.0:
            raise ValueError("code lengths violate the Kraft inequality")
        self.codes = canonical_codes(self.lengths)

    def ordered(self) -> list[tuple[int, int]]:
        """``(symbol, length)`` pairs in canonical order: length ascending, then symbol."""
        return sorted(self.lengths.items(), key=lambda item: (item[1], item[0]))


def canonical_codes(lengths: dict[int, int]) -> dict[int, int]:
    codes = {}
    code = 0
    prev = None
    for sym, n in sorted(lengths.items(), key=lambda item: (item[1], item[0])):
        if prev is not None:
            code = (code + 1) << (n - prev)
        codes[sym] = code
        prev = n
    return codes


def huffman_lengths(freqs: dict[int, int]) -> dict[int, int]:
    """Optimal code lengths; ties are broken toward the subtree holding the smaller symbol."""
    if not freqs:
        raise ValueError("cannot build a code table for an empty stream")
    if len(freqs) == 1:
        return {next(iter(freqs)): 1}
    depth = {sym: 0 for sym in freqs}
    heap = [(f, sym, [sym]) for sym, f in freqs.items()]
    heapq.heapify(heap)
    while len(heap) > 1:
        fa, ka, a = heapq.heappop(heap)
        fb, kb, b = heapq.heappop(heap)
        for sym in itertools.chain(a, b):
            depth[sym] += 1
        heapq.heappush(heap, (fa + fb, min(ka, kb), a + b))
    return depth


def build_code_table(tokens) -> CodeTable:
    tokens = list(tokens)
    if not tokens:
        raise ValueError("cannot build a code table for an empty stream")
    lengths = huffman_lengths(Counter(int(t) for t in tokens))
    if max(lengths.values()) > MAX_CODE_LENGTH:
        raise ValueError(f"Huffman code longer than {MAX_CODE_LENGTH} bits")
    return CodeTable(lengths)


def entropy_encode(tokens, table: CodeTable) -> tuple[bytes, int]:
    """Concatenate canonical codes MSB-first; returns ``(payload, bit_count)``."""
    parts = []
    codes, lengths = table.codes, table.lengths
    for tok in tokens:
        tok = int(tok)
        if tok not in codes:
            raise BitstreamError(f"token {tok} is not in the code table")
        parts.append(format(codes[tok], f"0{lengths[tok]}b"))
    bits = "".join(parts)
    nbits = len(bits)
    if nbits == 0:
        return b"", 0
    pad = -nbits % 8
    payload = int(bits + "0" * pad, 2).to_bytes((nbits + pad) // 8, "big")
    return payload, nbits


def entropy_decode(payload: bytes, table: CodeTable, token_count: int, bit_count: int | None = None) -> list[int]:
    if bit_count is None:
        bit_count = 8 * len(payload)
    if bit_count > 8 * len(payload):
        raise BitstreamError("payload shorter than its declared bit count")
    if token_count == 0:
        return []
    bits = format(int.from_bytes(payload, "big"), f"0{8 * len(payload)}b")[:bit_count]
    lookup = {(n, table.codes[sym]): sym for sym, n in table.lengths.items()}
    max_len = max(table.lengths.values())
    out = []
    pos = 0
    while len(out) < token_count:
        code = 0
        for n in range(1, max_len + 1):
            if pos >= bit_count:
                raise BitstreamError(f"bits exhausted after {len(out)} of {token_count} tokens")
            code = (code << 1) | (bits[pos] == "1")
            pos += 1
            sym = lookup.get((n, code))
            if sym is not None:
                out.append(sym)
                break
        else:
            raise BitstreamError(f"invalid prefix at bit {pos}")
    return out


# -- container ----------------------------------------------------------------


@dataclass
class StreamHeader:
    M: int
    segment_count: int
    original_sample_count: int
    pad_length: int
    mu: int
    alpha: float


def zigzag(n: int) -> int:
    return 2 * n if n >= 0 else -2 * n - 1


def unzigzag(z: int) -> int:
    return z >> 1 if z % 2 == 0 else -((z + 1) >> 1)


def write_varint(value: int, out: bytearray) -> None:
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def read_varint(data: bytes, pos: int) -> tuple[int, int]:
    value = shift = 0
    while True:
        if pos >= len(data):
            raise BitstreamError("truncated varint")
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7


def pack_stream(header: StreamHeader, latents) -> bytes:
    """Serialize integer latents of shape (segment_count, M) into a container."""
    latents = np.asarray(latents, dtype=np.int64).reshape(-1, header.M)
    if latents.shape[0] != header.segment_count:
        raise BitstreamError(f"header says {header.segment_count} segments, got {latents.shape[0]}")
    if header.segment_count * header.M - header.original_sample_count != header.pad_length:
        raise BitstreamError("pad_length inconsistent with segment and sample counts")
    if header.segment_count and not 0 <= header.pad_length < header.M:
        raise BitstreamError("pad_length must be smaller than M")

    tokens = rle_encode(latents.ravel())
    if tokens:
        table = build_code_table(tokens)
        payload, nbits = entropy_encode(tokens, table)
        entries = table.ordered()
    else:
        payload, nbits, entries = b"", 0, []

    out = bytearray(
        _FIXED.pack(
            MAGIC, VERSION, header.M, header.segment_count, header.original_sample_count,
            header.pad_length, header.mu, header.alpha, len(tokens), len(entries),
        )
    )
    for sym, n in entries:
        write_varint(zigzag(sym), out)
        out.append(n)
    out += struct.pack("<Q", nbits)
    out += payload
    out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


def unpack_stream(data: bytes) -> tuple[StreamHeader, np.ndarray]:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BitstreamError("bad magic: not an AALW stream")
    if len(data) < _FIXED.size + 12:
        raise BitstreamError("stream truncated")
    if data[4] != VERSION:
        raise BitstreamError(f"unsupported stream version {data[4]}")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise CRCError("CRC mismatch: stream is corrupted")

    _, _, M, nseg, nsamp, pad, mu, alpha, ntok, tsize = _FIXED.unpack_from(data, 0)
    pos = _FIXED.size
    lengths = {}
    for _ in range(tsize):
        zz, pos = read_varint(data, pos)
        if pos >= len(data):
            raise BitstreamError("truncated code table")
        lengths[unzigzag(zz)] = data[pos]
        pos += 1
    (nbits,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    nbytes = -(-nbits // 8)
    if pos + nbytes != len(data) - 4:
        raise BitstreamError("payload size disagrees with payload_bit_count")
    header = StreamHeader(M, nseg, nsamp, pad, mu, alpha)
    if nseg * M - nsamp != pad:
        raise BitstreamError("inconsistent segment, sample and pad counts")

    if ntok:
        table = CodeTable(lengths)
        tokens = entropy_decode(data[pos : pos + nbytes], table, ntok, nbits)
    else:
        tokens = []
    values = rle_decode(tokens)
    if len(values) != nseg * M:
        raise BitstreamError(f"decoded {len(values)} latents, header implies {nseg * M}")
    return header, np.array(values, dtype=np.int64).reshape(nseg, M)
