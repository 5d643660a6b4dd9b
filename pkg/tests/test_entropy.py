import itertools
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftcodec.entropy import (
    BitstreamError,
    CodeTable,
    CRCError,
    StreamHeader,
    build_code_table,
    canonical_codes,
    entropy_decode,
    entropy_encode,
    huffman_lengths,
    pack_stream,
    rle_decode,
    rle_encode,
    unpack_stream,
    unzigzag,
    zigzag,
)


def sparse_stream(rng, n, sparsity, spread=20):
    q = rng.integers(-spread, spread + 1, size=n)
    q[rng.random(n) < sparsity] = 0
    return q


def brute_force_optimum(freqs):
    """Smallest weighted code length over every length assignment satisfying Kraft."""
    best = None
    n = len(freqs)
    for lengths in itertools.product(range(1, n + 1), repeat=n):
        if sum(2.0**-l for l in lengths) <= 1:
            cost = sum(f * l for f, l in zip(freqs, lengths))
            best = cost if best is None else min(best, cost)
    return best


class TestRLE:
    def test_examples(self):
        assert rle_encode([5, 0, 0, 0, 2]) == [5, 0, 3, 2]
        assert rle_encode([0] * 300) == [0, 255, 0, 45]
        assert rle_encode([]) == []
        assert rle_encode([0] * 255) == [0, 255]
        assert rle_encode([0] * 256) == [0, 255, 0, 1]

    def test_decode(self):
        assert rle_decode([5, 0, 3, 2]) == [5, 0, 0, 0, 2]
        assert rle_decode([0, 255, 0, 45]) == [0] * 300

    def test_dangling_zero(self):
        with pytest.raises(BitstreamError, match="dangling zero"):
            rle_decode([0])

    @pytest.mark.parametrize("count", [0, 256, -1])
    def test_bad_count(self, count):
        with pytest.raises(BitstreamError):
            rle_decode([0, count])

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.one_of(st.just(0), st.integers(-1000, 1000)), max_size=600))
    def test_round_trip(self, q):
        tokens = rle_encode(q)
        assert rle_decode(tokens) == q
        # every zero token is followed by a count in 1..255
        i = 0
        while i < len(tokens):
            if tokens[i] == 0:
                assert 1 <= tokens[i + 1] <= 255
                i += 2
            else:
                i += 1


class TestHuffman:
    def test_two_symbols(self):
        assert huffman_lengths({7: 1, -3: 1}) == {7: 1, -3: 1}

    def test_single_symbol(self):
        table = build_code_table([4] * 10)
        assert table.lengths == {4: 1}
        _, nbits = entropy_encode([4] * 10, table)
        assert nbits == 10

    def test_skewed(self):
        tokens = [1] * 4 + [2] * 2 + [3] + [4]
        table = build_code_table(tokens)
        assert table.lengths == {1: 1, 2: 2, 3: 3, 4: 3}
        _, nbits = entropy_encode(tokens, table)
        assert nbits == 14 == brute_force_optimum([4, 2, 1, 1])

    @pytest.mark.parametrize("seed", range(20))
    def test_optimal_against_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        freqs = rng.integers(1, 30, size=int(rng.integers(2, 6))).tolist()
        lengths = huffman_lengths(dict(enumerate(freqs)))
        assert sum(freqs[s] * n for s, n in lengths.items()) == brute_force_optimum(freqs)

    def test_deterministic_ties(self):
        assert huffman_lengths({3: 1, 1: 1, 2: 1}) == huffman_lengths({1: 1, 2: 1, 3: 1})
        # equal weights: the two smallest symbols are merged first
        assert huffman_lengths({1: 1, 2: 1, 3: 1}) == {1: 2, 2: 2, 3: 1}

    def test_kraft_and_canonical_order(self):
        rng = np.random.default_rng(1)
        table = build_code_table(sparse_stream(rng, 5000, 0.5).tolist())
        assert sum(2.0**-n for n in table.lengths.values()) <= 1
        ordered = table.ordered()
        codes = [table.codes[s] for s, _ in ordered]
        lens = [n for _, n in ordered]
        # canonical codes increase when read as left-aligned bit strings
        aligned = [c << (max(lens) - n) for c, n in zip(codes, lens)]
        assert aligned == sorted(aligned) and len(set(aligned)) == len(aligned)

    def test_rebuild_from_lengths(self):
        rng = np.random.default_rng(2)
        table = build_code_table(sparse_stream(rng, 3000, 0.3).tolist())
        rebuilt = CodeTable(dict(table.ordered()))
        assert rebuilt.codes == table.codes
        assert canonical_codes({5: 2, 1: 1, 9: 3, 2: 3}) == {1: 0b0, 5: 0b10, 2: 0b110, 9: 0b111}

    def test_empty(self):
        with pytest.raises(ValueError):
            build_code_table([])

    def test_invalid_tables(self):
        with pytest.raises(ValueError):
            CodeTable({1: 1, 2: 1, 3: 1})
        with pytest.raises(ValueError):
            CodeTable({1: 33})


class TestEntropyCoding:
    def test_empty(self):
        table = build_code_table([1, 2])
        assert entropy_encode([], table) == (b"", 0)
        assert entropy_decode(b"", table, 0) == []

    def test_msb_first(self):
        table = CodeTable({1: 1, 2: 2, 3: 2})  # 1 -> 0, 2 -> 10, 3 -> 11
        payload, nbits = entropy_encode([2, 3, 1], table)
        assert nbits == 5
        assert payload == bytes([0b10110000])

    def test_random_round_trip(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            tokens = rle_encode(sparse_stream(rng, int(rng.integers(1, 200)), rng.random()))
            table = build_code_table(tokens)
            payload, nbits = entropy_encode(tokens, table)
            assert entropy_decode(payload, table, len(tokens), nbits) == tokens

    def test_truncated(self):
        tokens = [1, 2, 3, 1, 2, 3, 4, 4]
        table = build_code_table(tokens)
        payload, nbits = entropy_encode(tokens, table)
        with pytest.raises(BitstreamError):
            entropy_decode(payload[:-1], table, len(tokens), nbits - 8)

    def test_unknown_token(self):
        with pytest.raises(BitstreamError):
            entropy_encode([9], build_code_table([1, 2]))

    def test_invalid_prefix(self):
        # incomplete code: 0 -> symbol, prefixes starting with 1 are unassigned
        table = CodeTable({5: 1})
        with pytest.raises(BitstreamError, match="invalid prefix"):
            entropy_decode(bytes([0b10000000]), table, 1, 1)

    def test_beats_fixed_width(self):
        rng = np.random.default_rng(4)
        tokens = rle_encode(sparse_stream(rng, 2000, 0.7, spread=5))
        _, nbits = entropy_encode(tokens, build_code_table(tokens))
        assert nbits <= 32 * len(tokens)
        assert nbits < 8 * len(tokens)


class TestContainer:
    def header(self, nseg, M=7, extra=0):
        return StreamHeader(M, nseg, nseg * M - extra, extra, 3, 4.0)

    def test_zero_segments(self):
        data = pack_stream(self.header(0), np.zeros((0, 7), dtype=np.int64))
        header, q = unpack_stream(data)
        assert header == self.header(0)
        assert q.shape == (0, 7)
        assert len(data) == 4 + 1 + 2 + 4 + 8 + 1 + 1 + 4 + 8 + 2 + 8 + 4

    def test_layout(self):
        q = np.array([[5, 0, 0, 0, 2, 0, 0]])
        data = pack_stream(StreamHeader(7, 1, 5, 2, 3, 4.0), q)
        assert data[:4] == b"AALW" and data[4] == 1
        M, nseg, nsamp, pad, mu = struct.unpack_from("<HIQBB", data, 5)
        assert (M, nseg, nsamp, pad, mu) == (7, 1, 5, 2, 3)
        assert struct.unpack_from("<f", data, 21)[0] == 4.0
        ntok, tsize = struct.unpack_from("<QH", data, 25)
        assert rle_encode(q.ravel()) == [5, 0, 3, 2, 0, 2]
        assert ntok == 6
        assert tsize == 4  # literals and run counts share one alphabet: {0, 2, 3, 5}
        assert struct.unpack("<I", data[-4:])[0] == zlib.crc32(data[:-4])

    def test_random_round_trip(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            nseg = int(rng.integers(0, 40))
            pad = int(rng.integers(0, 7)) if nseg else 0
            q = sparse_stream(rng, nseg * 7, rng.random(), spread=int(rng.integers(1, 500))).reshape(nseg, 7)
            header, out = unpack_stream(pack_stream(self.header(nseg, extra=pad), q))
            assert header == self.header(nseg, extra=pad)
            np.testing.assert_array_equal(out, q)

    def test_flipped_payload_byte(self):
        q = np.random.default_rng(6).integers(-3, 4, size=(10, 7))
        data = bytearray(pack_stream(self.header(10), q))
        data[-6] ^= 0x10
        with pytest.raises(CRCError):
            unpack_stream(bytes(data))

    def test_bad_magic_and_version(self):
        data = bytearray(pack_stream(self.header(1), np.ones((1, 7), dtype=np.int64)))
        bad = bytearray(data)
        bad[0:4] = b"XXXX"
        with pytest.raises(BitstreamError, match="magic"):
            unpack_stream(bytes(bad))
        bad = bytearray(data)
        bad[4] = 2
        with pytest.raises(BitstreamError, match="version"):
            unpack_stream(bytes(bad))

    def test_inconsistent_counts(self):
        with pytest.raises(BitstreamError):
            pack_stream(StreamHeader(7, 2, 14, 0, 3, 4.0), np.zeros((3, 7), dtype=np.int64))
        with pytest.raises(BitstreamError):
            pack_stream(StreamHeader(7, 2, 10, 0, 3, 4.0), np.zeros((2, 7), dtype=np.int64))

    def test_zigzag(self):
        assert [zigzag(n) for n in (0, -1, 1, -2, 2)] == [0, 1, 2, 3, 4]
        for n in range(-1000, 1000):
            assert unzigzag(zigzag(n)) == n
