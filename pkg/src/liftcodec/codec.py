"""Encoder/decoder assembly, latent quantization and model files.

Encoder (runs on the sensor)::

    seg -> conv3 -> tanh -> LWT -> X
    z = AHT(conv3(AHT(conv3(AHT(conv3(X)))))) + AHT(conv1(X))

Decoder (runs on the host)::

    xb = inverse LWT(z)
    y  = L3([tanh(L2(tanh(L1(xb)))) || xb])
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import layers as L
from .lifting import (
    lwt_adjoint_packed,
    lwt_forward_packed,
    lwt_inverse_adjoint_packed,
    lwt_inverse_packed,
)

FORMAT_VERSION = 1
MAC_CONVENTIONS = ("convs-only", "all-multiplies")


class ModelFormatError(ValueError):
    pass


class ChecksumError(ModelFormatError):
    pass


class VersionError(ModelFormatError):
    pass


@dataclass
class CodecConfig:
    M: int = 7
    mu: int = 3
    alpha: float = 4.0
    lam: float = 0.05
    omega: float = 10.0
    phi: float = 0.6
    learning_rate: float = 0.001
    batch_size: int = 30
    seed: int = 0
    bits_in: int = 32
    hidden: int = 16

    def validate(self):
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        if not (isinstance(self.mu, int) and 0 <= self.mu <= 255):
            raise ValueError(f"mu must be an integer in [0, 255], got {self.mu}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if not 0 < self.phi <= 1:
            raise ValueError(f"phi must lie in (0, 1], got {self.phi}")
        if self.hidden < 1 or self.bits_in < 1:
            raise ValueError("hidden width and bits_in must be positive")
        return self


@dataclass
class EncoderParams:
    front: L.ConvParams
    left: list  # three (ConvParams, AHTParams) pairs
    right: tuple  # (ConvParams, AHTParams)

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name, arr in self.front.arrays().items():
            out[f"front.{name}"] = arr
        for i, (conv, aht) in enumerate(self.left):
            for name, arr in conv.arrays().items():
                out[f"left{i}.conv.{name}"] = arr
            for name, arr in aht.arrays().items():
                out[f"left{i}.aht.{name}"] = arr
        conv, aht = self.right
        for name, arr in conv.arrays().items():
            out[f"right.conv.{name}"] = arr
        for name, arr in aht.arrays().items():
            out[f"right.aht.{name}"] = arr
        return out

    def aht_layers(self):
        return [aht for _, aht in self.left] + [self.right[1]]


@dataclass
class DecoderParams:
    l1: L.LinearParams
    l2: L.LinearParams
    l3: L.LinearParams

    @property
    def hidden(self) -> int:
        return self.l1.weights.shape[0]

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in ("l1", "l2", "l3"):
            for name, arr in getattr(self, layer).arrays().items():
                out[f"{layer}.{name}"] = arr
        return out


def _glorot(rng, shape, fan_in, fan_out):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_encoder(M: int = 7, rng=None, threshold: float = 0.01, slope: float = 1.0) -> EncoderParams:
    rng = np.random.default_rng(rng)

    def conv(k):
        return L.ConvParams(_glorot(rng, (k,), k, k), 0.0)

    def aht():
        return L.AHTParams(np.full(M, threshold), np.full(M, slope))

    front = conv(3)
    left = [(conv(3), aht()) for _ in range(3)]
    right = (conv(1), aht())
    return EncoderParams(front, left, right)


def init_decoder(M: int = 7, hidden: int = 16, rng=None) -> DecoderParams:
    rng = np.random.default_rng(rng)

    def lin(n_out, n_in):
        return L.LinearParams(_glorot(rng, (n_out, n_in), n_in, n_out), np.zeros(n_out))

    return DecoderParams(lin(hidden, M), lin(hidden, hidden), lin(M, hidden + M))


# -- forward / backward -------------------------------------------------------


def encoder_forward(seg, p: EncoderParams):
    """Return the latent ``z`` and a cache of intermediates for :func:`encoder_backward`."""
    seg = np.asarray(seg, dtype=np.float64)
    M = p.right[1].thresholds.size
    if seg.shape[-1] != M:
        raise ValueError(f"segment length {seg.shape[-1]} != M={M}")
    a0 = L.conv1d_same_forward(seg, p.front)
    x = L.tanh_forward(a0)
    X = lwt_forward_packed(x)
    left_in, left_pre = [], []
    h = X
    for conv, aht in p.left:
        left_in.append(h)
        pre = L.conv1d_same_forward(h, conv)
        left_pre.append(pre)
        h = L.aht_forward(pre, aht)
    right_pre = L.conv1d_same_forward(X, p.right[0])
    z = h + L.aht_forward(right_pre, p.right[1])
    cache = {"seg": seg, "x": x, "X": X, "left_in": left_in, "left_pre": left_pre, "right_pre": right_pre}
    return z, cache


def encoder_backward(p: EncoderParams, cache, gz, train_thresholds: bool = True) -> dict[str, np.ndarray]:
    grads = {}
    # right branch
    g_pre, g_aht = L.aht_backward(cache["right_pre"], p.right[1], gz, train_thresholds)
    gX, g_conv = L.conv1d_same_backward(cache["X"], p.right[0], g_pre)
    _store(grads, "right.aht", g_aht)
    _store(grads, "right.conv", g_conv)
    # left branch, last layer first
    g = gz
    for i in reversed(range(len(p.left))):
        conv, aht = p.left[i]
        g_pre, g_aht = L.aht_backward(cache["left_pre"][i], aht, g, train_thresholds)
        g, g_conv = L.conv1d_same_backward(cache["left_in"][i], conv, g_pre)
        _store(grads, f"left{i}.aht", g_aht)
        _store(grads, f"left{i}.conv", g_conv)
    gX = gX + g
    gx = lwt_adjoint_packed(gX)
    ga0 = L.tanh_backward(cache["x"], gx)
    _, g_front = L.conv1d_same_backward(cache["seg"], p.front, ga0)
    _store(grads, "front", g_front)
    return grads


def decoder_forward(z, p: DecoderParams):
    z = np.asarray(z, dtype=np.float64)
    M = p.l3.weights.shape[0]
    if z.shape[-1] != M:
        raise ValueError(f"latent length {z.shape[-1]} != M={M}")
    xb = lwt_inverse_packed(z)
    t1 = L.tanh_forward(L.linear_forward(xb, p.l1))
    t2 = L.tanh_forward(L.linear_forward(t1, p.l2))
    cat = np.concatenate([t2, xb], axis=-1)
    y = L.linear_forward(cat, p.l3)
    return y, {"xb": xb, "t1": t1, "t2": t2, "cat": cat}


def decoder_backward(p: DecoderParams, cache, gy):
    """Return ``(gradient w.r.t. the latent, parameter gradients)``."""
    grads = {}
    gcat, g3 = L.linear_backward(cache["cat"], p.l3, gy)
    _store(grads, "l3", g3)
    H = p.hidden
    gt2, gxb = gcat[..., :H], gcat[..., H:]
    ga2 = L.tanh_backward(cache["t2"], gt2)
    gt1, g2 = L.linear_backward(cache["t1"], p.l2, ga2)
    _store(grads, "l2", g2)
    ga1 = L.tanh_backward(cache["t1"], gt1)
    gxb1, g1 = L.linear_backward(cache["xb"], p.l1, ga1)
    _store(grads, "l1", g1)
    gz = lwt_inverse_adjoint_packed(gxb + gxb1)
    return gz, grads


def _store(grads, prefix, group):
    for name, g in group.items():
        grads[f"{prefix}.{name}"] = g


def encode_segment(seg, p: EncoderParams) -> np.ndarray:
    return encoder_forward(seg, p)[0]


def decode_latent(z, p: DecoderParams) -> np.ndarray:
    return decoder_forward(z, p)[0]


# -- quantization -------------------------------------------------------------


def quantize_latent(z, mu: int, alpha: float) -> np.ndarray:
    """Integer latents ``round(10**mu * z / alpha)``, rounding half away from zero."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    scaled = (10.0**mu) * np.asarray(z, dtype=np.float64) / alpha
    q = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    if np.any(np.abs(q) >= 2**31):
        raise OverflowError("quantized latent exceeds the 32-bit signed range")
    return q.astype(np.int64)


def dequantize_latent(q, mu: int, alpha: float) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) * alpha / (10.0**mu)


# -- complexity ---------------------------------------------------------------


def count_parameters(p) -> int:
    return int(sum(arr.size for arr in p.named_arrays().values()))


def count_macs(p: EncoderParams, n_segments: int = 1, convention: str = "convs-only") -> int:
    """Multiply-accumulates needed to encode ``n_segments`` segments.

    ``convs-only`` counts kernel-tap multiplies (zero-padded taps included);
    ``all-multiplies`` adds the two lifting multiplies per output coefficient
    and one slope multiply per thresholding output.
    """
    if convention not in MAC_CONVENTIONS:
        raise ValueError(f"unknown MAC convention {convention!r}; expected one of {MAC_CONVENTIONS}")
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    M = p.right[1].thresholds.size
    convs = [p.front] + [c for c, _ in p.left] + [p.right[0]]
    per_segment = sum(M * c.kernel.size for c in convs)
    if convention == "all-multiplies":
        per_segment += 2 * M + M * len(p.aht_layers())
    return per_segment * n_segments


# -- model files --------------------------------------------------------------


@dataclass
class Model:
    encoder: EncoderParams
    decoder: DecoderParams
    config: CodecConfig

    @classmethod
    def initialize(cls, config: CodecConfig, seed=None) -> "Model":
        config.validate()
        rng = np.random.default_rng(config.seed if seed is None else seed)
        enc = init_encoder(config.M, rng)
        dec = init_decoder(config.M, config.hidden, rng)
        return cls(enc, dec, config)

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {f"encoder.{k}": v for k, v in self.encoder.named_arrays().items()}
        out.update({f"decoder.{k}": v for k, v in self.decoder.named_arrays().items()})
        return out

    def reconstruct(self, segments) -> np.ndarray:
        """Encode, quantize, dequantize and decode a (count, M) array of segments."""
        z = encode_segment(segments, self.encoder)
        q = quantize_latent(z, self.config.mu, self.config.alpha)
        return decode_latent(dequantize_latent(q, self.config.mu, self.config.alpha), self.decoder)


def _encoder_to_json(p: EncoderParams):
    def conv(c):
        return {"kernel": c.kernel.tolist(), "bias": float(c.bias)}

    def aht(a):
        return {"thresholds": a.thresholds.tolist(), "slopes": a.slopes.tolist()}

    return {
        "front": conv(p.front),
        "left": [{"conv": conv(c), "aht": aht(a)} for c, a in p.left],
        "right": {"conv": conv(p.right[0]), "aht": aht(p.right[1])},
    }


def _encoder_from_json(d) -> EncoderParams:
    def conv(c):
        return L.ConvParams(c["kernel"], c["bias"])

    def aht(a):
        return L.AHTParams(a["thresholds"], a["slopes"])

    return EncoderParams(
        conv(d["front"]),
        [(conv(e["conv"]), aht(e["aht"])) for e in d["left"]],
        (conv(d["right"]["conv"]), aht(d["right"]["aht"])),
    )


def _decoder_to_json(p: DecoderParams):
    return {
        name: {"weights": lin.weights.tolist(), "bias": lin.bias.tolist()}
        for name, lin in (("l1", p.l1), ("l2", p.l2), ("l3", p.l3))
    }


def _decoder_from_json(d) -> DecoderParams:
    return DecoderParams(*(L.LinearParams(d[k]["weights"], d[k]["bias"]) for k in ("l1", "l2", "l3")))


def serialize_model(model: Model) -> bytes:
    doc = {
        "format_version": FORMAT_VERSION,
        "M": model.config.M,
        "H": model.decoder.hidden,
        "config": asdict(model.config),
        "encoder": _encoder_to_json(model.encoder),
        "decoder": _decoder_to_json(model.decoder),
    }
    body = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return body + b"\n" + f"{zlib.crc32(body):08x}\n".encode("ascii")


def deserialize_model(data: bytes) -> Model:
    body, sep, trailer = data.rstrip(b"\n").rpartition(b"\n")
    if not sep:
        raise ChecksumError("model file has no checksum trailer (truncated?)")
    try:
        expected = int(trailer.decode("ascii"), 16)
    except ValueError:
        raise ChecksumError("model file checksum trailer is malformed (truncated?)") from None
    if zlib.crc32(body) != expected:
        raise ChecksumError("model file checksum mismatch")
    doc = json.loads(body)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported model format version {version!r} (expected {FORMAT_VERSION})")
    known = {f.name for f in fields(CodecConfig)}
    config = CodecConfig(**{k: v for k, v in doc["config"].items() if k in known}).validate()
    model = Model(_encoder_from_json(doc["encoder"]), _decoder_from_json(doc["decoder"]), config)
    if doc["M"] != config.M or doc["H"] != model.decoder.hidden:
        raise ModelFormatError("model dimensions disagree with the stored config")
    return model


def save_model(path, model: Model) -> None:
    Path(path).write_bytes(serialize_model(model))


def load_model(path) -> Model:
    return deserialize_model(Path(path).read_bytes())
