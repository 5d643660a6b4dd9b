"""Differentiable building blocks for the codec networks.

Every operator is a pair of functions: ``*_forward`` evaluates the op on a
batch (leading axes are batch axes, the last axis is the signal axis) and
``*_backward`` maps the upstream gradient to input and parameter gradients.
Parameter gradients are summed over the batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ConvParams:
    kernel: np.ndarray
    bias: np.ndarray  # 0-d array so optimizers can update it in place

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(())
        if self.kernel.shape not in ((1,), (3,)):
            raise ValueError(f"kernel length must be 1 or 3, got shape {self.kernel.shape}")

    def arrays(self):
        return {"kernel": self.kernel, "bias": self.bias}


@dataclass
class LinearParams:
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"inconsistent linear dimensions: weights {self.weights.shape}, bias {self.bias.shape}"
            )

    def arrays(self):
        return {"weights": self.weights, "bias": self.bias}


@dataclass
class AHTParams:
    thresholds: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=np.float64)
        self.slopes = np.asarray(self.slopes, dtype=np.float64)
        if self.thresholds.ndim != 1 or self.thresholds.shape != self.slopes.shape:
            raise ValueError("thresholds and slopes must be 1-D arrays of equal length")
        if np.any(self.thresholds < 0):
            raise ValueError("thresholds must be non-negative")

    def arrays(self):
        return {"thresholds": self.thresholds, "slopes": self.slopes}


# -- convolution -------------------------------------------------------------


def conv1d_same_forward(x, p: ConvParams) -> np.ndarray:
    """Correlation ``y_i = b + sum_j w_j x_{i+j-K//2}`` with zero padding; length preserved."""
    x = np.asarray(x, dtype=np.float64)
    k = p.kernel.size
    half = k // 2
    padded = _pad_last(x, half)
    n = x.shape[-1]
    y = np.full(x.shape, float(p.bias))
    for j in range(k):
        y += p.kernel[j] * padded[..., j : j + n]
    return y


def conv1d_same_backward(x, p: ConvParams, gy):
    x = np.asarray(x, dtype=np.float64)
    k = p.kernel.size
    half = k // 2
    n = x.shape[-1]
    padded = _pad_last(x, half)
    batch_axes = tuple(range(gy.ndim))
    gk = np.array([np.sum(gy * padded[..., j : j + n], axis=batch_axes) for j in range(k)])
    gb = np.sum(gy)
    gpad = np.zeros(padded.shape)
    for j in range(k):
        gpad[..., j : j + n] += p.kernel[j] * gy
    gx = gpad[..., half : half + n]
    return gx, {"kernel": gk, "bias": np.asarray(gb)}


def _pad_last(x, half):
    if half == 0:
        return x
    widths = [(0, 0)] * (x.ndim - 1) + [(half, half)]
    return np.pad(x, widths)


# -- dense -------------------------------------------------------------------


def linear_forward(x, p: LinearParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.weights.shape[1]:
        raise ValueError(f"input dimension {x.shape[-1]} != layer input {p.weights.shape[1]}")
    return x @ p.weights.T + p.bias


def linear_backward(x, p: LinearParams, gy):
    x2 = np.asarray(x, dtype=np.float64).reshape(-1, p.weights.shape[1])
    g2 = gy.reshape(-1, p.weights.shape[0])
    gw = g2.T @ x2
    gb = g2.sum(axis=0)
    gx = gy @ p.weights
    return gx, {"weights": gw, "bias": gb}


# -- tanh --------------------------------------------------------------------


def tanh_forward(x) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(y, gy) -> np.ndarray:
    """Gradient through tanh given its *output* ``y``."""
    return gy * (1.0 - y * y)


# -- adaptive hard thresholding ---------------------------------------------


def aht_forward(x, p: AHTParams) -> np.ndarray:
    """Zero every entry with ``|x_k| <= C_k``; scale survivors by ``beta_k``.

    This is the closed form of (soft_threshold(x) + C * sign(soft_threshold(x))) * beta.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.thresholds.size:
        raise ValueError(f"input length {x.shape[-1]} != threshold count {p.thresholds.size}")
    return np.where(np.abs(x) > p.thresholds, p.slopes * x, 0.0)


def aht_backward(x, p: AHTParams, gy, train_thresholds: bool = True):
    """Gradients of the thresholding layer.

    The exact derivative with respect to a threshold vanishes almost
    everywhere, so the threshold gradient is a surrogate: the derivative of
    the soft-threshold part alone, ``-beta_k * sign(x_k)`` on survivors.
    """
    x = np.asarray(x, dtype=np.float64)
    alive = np.abs(x) > p.thresholds
    batch_axes = tuple(range(gy.ndim - 1))
    gx = np.where(alive, gy * p.slopes, 0.0)
    gslope = np.sum(np.where(alive, gy * x, 0.0), axis=batch_axes)
    if train_thresholds:
        gthr = np.sum(np.where(alive, -gy * p.slopes * np.sign(x), 0.0), axis=batch_axes)
    else:
        gthr = np.zeros_like(p.thresholds)
    return gx, {"thresholds": gthr, "slopes": gslope}


def threshold_surrogate(x, p: AHTParams) -> np.ndarray:
    """Per-entry surrogate d(output)/d(threshold) used for training."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) > p.thresholds, -p.slopes * np.sign(x), 0.0)


# -- sparsity penalty --------------------------------------------------------


def activity_softmax(z) -> np.ndarray:
    """Softmax over ``|z|`` along the last axis (max-shifted for stability)."""
    a = np.abs(np.asarray(z, dtype=np.float64))
    e = np.exp(a - a.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def activity_softmax_backward(z, act, gact) -> np.ndarray:
    ga = act * (gact - np.sum(gact * act, axis=-1, keepdims=True))
    return ga * np.sign(z)


def kld_penalty(act, lam: float) -> np.ndarray:
    """Sum over the last axis of Bernoulli KL(lam || act_k), natural log."""
    act = np.asarray(act, dtype=np.float64)
    if not 0 < lam < 1:
        raise ValueError(f"sparsity parameter must lie in (0, 1), got {lam}")
    if np.any(act <= 0) or np.any(act >= 1):
        raise ValueError("activities must lie strictly inside (0, 1)")
    terms = lam * np.log(lam / act) + (1 - lam) * np.log((1 - lam) / (1 - act))
    return terms.sum(axis=-1)


def kld_penalty_backward(act, lam: float) -> np.ndarray:
    return -lam / act + (1 - lam) / (1 - act)


def total_loss(x, y, z, lam: float, omega: float):
    """Per-segment loss: MSE(x, y) + omega * KLD(lam || activity(z)).

    Returns ``(loss, mse, kld)`` arrays over the batch axes.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != y.shape or x.shape[-1] != z.shape[-1]:
        raise ValueError(f"shape mismatch: x {x.shape}, y {y.shape}, z {z.shape}")
    mse = np.mean((x - y) ** 2, axis=-1)
    kld = kld_penalty(activity_softmax(z), lam)
    return mse + omega * kld, mse, kld


def total_loss_backward(x, y, z, lam: float, omega: float, weight=1.0):
    """Gradients of ``weight * total_loss`` with respect to ``y`` and ``z``."""
    M = x.shape[-1]
    gy = weight * 2.0 * (y - x) / M
    act = activity_softmax(z)
    gact = weight * omega * kld_penalty_backward(act, lam)
    gz = activity_softmax_backward(z, act, gact)
    return gy, gz


# -- verification ------------------------------------------------------------


def gradient_check(func, analytic_grad, theta, eps: float = 1e-6, aht_margins=None) -> float:
    """Compare ``analytic_grad`` with central differences of scalar ``func`` at ``theta``.

    ``aht_margins`` (optional) holds the ``|input| - C`` gaps of every
    thresholding layer the probe passes through; each must be at least
    ``10 * eps`` or the finite differences would straddle a kink.
    Returns the maximum relative error over all entries of ``theta``.
    """
    if aht_margins is not None:
        margins = np.abs(np.asarray(aht_margins, dtype=np.float64))
        if margins.size and margins.min() < 10 * eps:
            raise ValueError(
                f"probe point within {margins.min():.3g} of a threshold; need >= {10 * eps:.3g}"
            )
    theta = np.array(theta, dtype=np.float64)
    flat = theta.reshape(-1)
    analytic = np.asarray(analytic_grad, dtype=np.float64).reshape(-1)
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + eps
        up = func(theta)
        flat[i] = saved - eps
        down = func(theta)
        flat[i] = saved
        numeric[i] = (up - down) / (2 * eps)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8)
    return float(rel.max()) if rel.size else 0.0
