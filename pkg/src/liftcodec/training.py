"""Offline training of the encoder/decoder pair with the sparsity-penalized loss."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import layers as L
from .codec import CodecConfig, Model, decoder_backward, decoder_forward, encoder_backward, encoder_forward

log = logging.getLogger(__name__)

STOP_POLICIES = ("below-sustained", "above-literal")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs_max: int = 200
    batch_size: int = 30
    learning_rate: float = 0.001
    lam: float = 0.05
    omega: float = 10.0
    phi: float = 0.6
    seed: int = 0
    stop_policy: str = "below-sustained"
    monitor_batch: int = 256
    train_thresholds: bool = True

    def validate(self):
        if self.epochs_max < 1 or self.batch_size < 1 or self.monitor_batch < 1:
            raise ValueError("epochs_max, batch_size and monitor_batch must be positive")
        if not self.learning_rate >= 0:
            raise ValueError(f"learning rate must be non-negative, got {self.learning_rate}")
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if not 0 < self.phi <= 1:
            raise ValueError(f"phi must lie in (0, 1], got {self.phi}")
        if self.stop_policy not in STOP_POLICIES:
            raise ValueError(f"unknown stop policy {self.stop_policy!r}; expected one of {STOP_POLICIES}")
        return self


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    mse: float
    kld: float
    nonzero_fraction: float
    seconds: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def fractions(self) -> list[float]:
        return [r.nonzero_fraction for r in self.records]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "mse", "kld", "nonzero_fraction", "seconds"])
            for r in self.records:
                writer.writerow([r.epoch, repr(r.loss), repr(r.mse), repr(r.kld), repr(r.nonzero_fraction), f"{r.seconds:.3f}"])


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for name, p in self.params.items():
            g = grads[name]
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def loss_and_grads(model: Model, batch, lam, omega, train_thresholds=True):
    """Mean per-segment loss over ``batch`` and its gradient for every parameter."""
    z, enc_cache = encoder_forward(batch, model.encoder)
    y, dec_cache = decoder_forward(z, model.decoder)
    loss, mse, kld = L.total_loss(batch, y, z, lam, omega)
    weight = 1.0 / batch.shape[0]
    gy, gz_penalty = L.total_loss_backward(batch, y, z, lam, omega, weight)
    gz_dec, dec_grads = decoder_backward(model.decoder, dec_cache, gy)
    enc_grads = encoder_backward(model.encoder, enc_cache, gz_dec + gz_penalty, train_thresholds)
    grads = {f"encoder.{k}": v for k, v in enc_grads.items()}
    grads.update({f"decoder.{k}": v for k, v in dec_grads.items()})
    stats = (float(loss.mean()), float(mse.mean()), float(kld.mean()))
    return stats, grads, z


def sparsity_fraction(latents) -> float:
    """Share of latent entries that are not exactly zero."""
    latents = np.asarray(latents)
    if latents.size == 0:
        raise ValueError("sparsity_fraction needs a non-empty batch")
    return float(np.count_nonzero(latents) / latents.size)


def stop_check(fractions, phi: float, policy: str = "below-sustained") -> bool:
    """Decide from the monitored nonzero fractions whether training should stop."""
    if not fractions:
        raise ValueError("stop_check needs at least one monitored epoch")
    last = fractions[-1]
    if policy == "below-sustained":
        return last <= phi
    if policy == "above-literal":
        return last > phi
    raise ValueError(f"unknown stop policy {policy!r}")


def _as_batch(segments) -> np.ndarray:
    if isinstance(segments, np.ndarray):
        arr = np.asarray(segments, dtype=np.float64)
    else:
        arr = np.array([getattr(s, "values", s) for s in segments], dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise TrainingError("training needs at least one segment")
    return arr


def train_model(segments, cfg: TrainConfig, model: Model | None = None, codec: CodecConfig | None = None):
    """Train a codec on ``segments``; returns ``(model, TrainLog)``.

    A fresh model is initialized from ``codec`` (seeded by ``cfg.seed``) when
    none is given. The loop is deterministic for a fixed seed.
    """
    cfg.validate()
    data = _as_batch(segments)
    if model is None:
        codec = codec or CodecConfig(M=data.shape[1])
        codec.lam, codec.omega, codec.phi = cfg.lam, cfg.omega, cfg.phi
        codec.learning_rate, codec.batch_size, codec.seed = cfg.learning_rate, cfg.batch_size, cfg.seed
        model = Model.initialize(codec, seed=cfg.seed)
    if data.shape[1] != model.config.M:
        raise TrainingError(f"segments have length {data.shape[1]}, model expects M={model.config.M}")

    params = model.named_arrays()
    opt = Adam(params, cfg.learning_rate)
    thresholds = [k for k in params if k.endswith(".thresholds")]
    rng = np.random.default_rng(cfg.seed)
    monitor = data[: cfg.monitor_batch]
    log_ = TrainLog()

    for epoch in range(cfg.epochs_max):
        start = time.perf_counter()
        order = rng.permutation(data.shape[0])
        totals = np.zeros(3)
        fraction = 0.0
        for b, lo in enumerate(range(0, data.shape[0], cfg.batch_size)):
            batch = data[order[lo : lo + cfg.batch_size]]
            stats, grads, _ = loss_and_grads(model, batch, cfg.lam, cfg.omega, cfg.train_thresholds)
            if not np.isfinite(stats[0]):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            totals += np.array(stats) * batch.shape[0]
            opt.step(grads)
            for k in thresholds:
                np.maximum(params[k], 0.0, out=params[k])
            # the epoch's fraction is the worst value seen after any of its updates
            fraction = max(fraction, sparsity_fraction(encoder_forward(monitor, model.encoder)[0]))
        mean = totals / data.shape[0]
        rec = EpochRecord(epoch, *map(float, mean), fraction, time.perf_counter() - start)
        log_.records.append(rec)
        log.info("epoch %d loss %.6g mse %.6g kld %.6g nonzero %.3f", epoch, rec.loss, rec.mse, rec.kld, rec.nonzero_fraction)
        if stop_check(log_.fractions, cfg.phi, cfg.stop_policy):
            log_.stopped_early = epoch + 1 < cfg.epochs_max
            break
    return model, log_
