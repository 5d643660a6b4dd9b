"""Loading, synthesizing, segmenting and splitting 1-D sensor recordings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMATS = ("raw-f32-le", "raw-f64-le", "csv-single-column")


@dataclass
class SampleRecord:
    samples: np.ndarray
    sample_rate_hz: float
    label: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("record contains non-finite samples")

    def __len__(self):
        return self.samples.size


@dataclass
class Segment:
    values: np.ndarray
    origin_index: int


@dataclass
class SynthConfig:
    """Parameters of the synthetic bearing-fault vibration generator.

    The signal is a periodic impulse train at ``fault_freq_hz``; every impulse
    excites an exponentially decaying sinusoid at ``resonance_hz``. White
    Gaussian noise of standard deviation ``noise_std`` is added on top.
    """

    duration_s: float = 10.0
    sample_rate_hz: float = 8000.0
    fault_freq_hz: float = 105.0
    resonance_hz: float = 1200.0
    ring_decay: float = 300.0
    noise_std: float = 0.02
    amplitude: float = 1.0
    seed: int = 0

    def validate(self):
        for name in ("duration_s", "sample_rate_hz", "fault_freq_hz", "resonance_hz", "ring_decay"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if not self.noise_std >= 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")


def load_samples(path, format: str, sample_rate_hz: float = 1.0) -> SampleRecord:
    path = Path(path)
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc

    if format == "csv-single-column":
        values = []
        for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed CSV row {line!r}") from None
        samples = np.array(values, dtype=np.float64)
    else:
        dtype = "<f4" if format == "raw-f32-le" else "<f8"
        width = np.dtype(dtype).itemsize
        if len(data) % width:
            raise ValueError(f"{path}: size {len(data)} is not a multiple of {width} bytes")
        samples = np.frombuffer(data, dtype=dtype).astype(np.float64)

    if samples.size == 0:
        raise ValueError(f"{path}: zero samples")
    return SampleRecord(samples, sample_rate_hz, label=path.name)


def save_raw_f32(path, samples) -> None:
    Path(path).write_bytes(np.asarray(samples, dtype="<f4").tobytes())


def segment_record(record: SampleRecord, M: int = 7) -> list[Segment]:
    """Cut a record into consecutive non-overlapping windows of length ``M``.

    The last window is zero-padded when the record length is not a multiple of M.
    """
    if M < 2:
        raise ValueError(f"segment length M must be >= 2, got {M}")
    windows = segment_array(record.samples, M)
    return [Segment(row, i * M) for i, row in enumerate(windows)]


def segment_array(samples, M: int = 7) -> np.ndarray:
    """Array form of :func:`segment_record`: returns shape (count, M)."""
    if M < 2:
        raise ValueError(f"segment length M must be >= 2, got {M}")
    samples = np.asarray(samples, dtype=np.float64)
    count = -(-samples.size // M)
    padded = np.zeros(count * M)
    padded[: samples.size] = samples
    return padded.reshape(count, M)


def split_record(record: SampleRecord, train_fraction: float) -> tuple[SampleRecord, SampleRecord]:
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    cut = math.floor(train_fraction * len(record))
    head = SampleRecord(record.samples[:cut].copy(), record.sample_rate_hz, record.label + "[train]")
    tail = SampleRecord(record.samples[cut:].copy(), record.sample_rate_hz, record.label + "[test]")
    return head, tail


def synthesize_bearing(cfg: SynthConfig) -> SampleRecord:
    cfg.validate()
    n = int(round(cfg.duration_s * cfg.sample_rate_hz))
    if n < 1:
        raise ValueError("duration_s * sample_rate_hz must give at least one sample")
    t = np.arange(n) / cfg.sample_rate_hz
    signal = np.zeros(n)

    period = 1.0 / cfg.fault_freq_hz
    onsets = np.arange(0.0, cfg.duration_s, period)
    for onset in onsets:
        start = int(math.ceil(onset * cfg.sample_rate_hz - 1e-9))
        if start >= n:
            break
        tau = t[start:] - onset
        # rings are truncated once the envelope has decayed below 1e-12
        stop = min(n - start, int(math.ceil(28.0 / cfg.ring_decay * cfg.sample_rate_hz)) + 1)
        tau = tau[:stop]
        signal[start : start + stop] += np.exp(-cfg.ring_decay * tau) * np.cos(2 * np.pi * cfg.resonance_hz * tau)
    signal *= cfg.amplitude

    if cfg.noise_std > 0:
        rng = np.random.default_rng(cfg.seed)
        signal += rng.normal(0.0, cfg.noise_std, size=n)
    return SampleRecord(signal, cfg.sample_rate_hz, label=f"synth-seed{cfg.seed}")
