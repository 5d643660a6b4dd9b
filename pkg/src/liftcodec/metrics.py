"""Compression and distortion metrics, and whole-record evaluation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .codec import Model, decode_latent, dequantize_latent, encode_segment, quantize_latent
from .entropy import StreamHeader, pack_stream, unpack_stream
from .signal_io import SampleRecord, segment_array


@dataclass
class MetricsReport:
    cr: float
    prd: float
    prdn: float
    rmse: float
    qs: float
    samples: int
    stream_bytes: int

    COLUMNS = ("cr", "prd", "prdn", "rmse", "qs", "samples", "stream_bytes")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.COLUMNS)
        writer.writerow([getattr(self, c) for c in self.COLUMNS])
        return buf.getvalue()

    def to_table(self) -> str:
        row = asdict(self)
        head = "".join(f"{c:>14}" for c in self.COLUMNS)
        body = "".join(f"{row[c]:>14.4f}" if isinstance(row[c], float) else f"{row[c]:>14d}" for c in self.COLUMNS)
        return head + "\n" + body + "\n"


def distortion_metrics(x, y) -> tuple[float, float, float]:
    """Return ``(prd %, prdn %, rmse)`` of reconstruction ``y`` against original ``x``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"expected two 1-D arrays of equal length, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ValueError("distortion metrics need at least 2 samples")
    err = np.sum((x - y) ** 2)
    energy = np.sum(x**2)
    centred = np.sum((x - x.mean()) ** 2)
    if energy == 0:
        raise ValueError("PRD undefined: original signal has zero energy")
    if centred == 0:
        raise ValueError("PRDN undefined: original signal is constant")
    prd = 100.0 * math.sqrt(err / energy)
    prdn = 100.0 * math.sqrt(err / centred)
    rmse = math.sqrt(err / x.size)
    return prd, prdn, rmse


def compression_ratio(sample_count: int, bits_in: int, stream: bytes) -> float:
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if len(stream) == 0:
        raise ValueError("empty bitstream")
    return sample_count * bits_in / (8 * len(stream))


def quality_score(cr: float, prd: float) -> float:
    if prd == 0:
        raise ValueError("quality score undefined for PRD == 0")
    return cr / prd


def compress_samples(samples, model: Model) -> bytes:
    cfg = model.config
    samples = np.asarray(samples, dtype=np.float64)
    segs = segment_array(samples, cfg.M) if samples.size else np.zeros((0, cfg.M))
    q = quantize_latent(encode_segment(segs, model.encoder), cfg.mu, cfg.alpha) if len(segs) else segs.astype(np.int64)
    header = StreamHeader(cfg.M, len(segs), samples.size, len(segs) * cfg.M - samples.size, cfg.mu, cfg.alpha)
    return pack_stream(header, q)


def decompress_stream(stream: bytes, model: Model) -> np.ndarray:
    header, q = unpack_stream(stream)
    if header.M != model.config.M:
        raise ValueError(f"stream segment length {header.M} does not match model M={model.config.M}")
    if header.segment_count == 0:
        return np.zeros(0)
    z = dequantize_latent(q, header.mu, header.alpha)
    y = decode_latent(z, model.decoder)
    return y.reshape(-1)[: header.original_sample_count]


def evaluate_record(record: SampleRecord, model: Model, bits_in: int | None = None):
    """Compress and reconstruct ``record``; returns ``(MetricsReport, reconstruction)``."""
    bits_in = model.config.bits_in if bits_in is None else bits_in
    stream = compress_samples(record.samples, model)
    recon = decompress_stream(stream, model)
    prd, prdn, rmse = distortion_metrics(record.samples, recon)
    cr = compression_ratio(len(record), bits_in, stream)
    report = MetricsReport(cr, prd, prdn, rmse, quality_score(cr, prd), len(record), len(stream))
    return report, recon
