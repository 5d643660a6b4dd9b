"""Single-level (5,3) lifting wavelet transform.

All routines operate on the last axis, so a batch of segments of shape
(B, n) is transformed in one call. The packed coefficient layout is
``[approx || detail]`` with ``ceil(n/2)`` low-pass values followed by
``floor(n/2)`` high-pass values.

Boundaries use whole-sample symmetric extension: the missing right even
neighbour of the last odd sample is the last even sample, and the missing
detail neighbours at either end are mirrored from the nearest detail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PREDICT = 0.5
UPDATE = 0.25


@dataclass
class WaveletCoeffs:
    approx: np.ndarray
    detail: np.ndarray
    n: int

    def __post_init__(self):
        self.approx = np.asarray(self.approx, dtype=np.float64)
        self.detail = np.asarray(self.detail, dtype=np.float64)
        if self.approx.shape[-1] != (self.n + 1) // 2 or self.detail.shape[-1] != self.n // 2:
            raise ValueError(
                f"coefficient lengths ({self.approx.shape[-1]}, {self.detail.shape[-1]}) "
                f"do not match n={self.n}"
            )

    def packed(self) -> np.ndarray:
        return np.concatenate([self.approx, self.detail], axis=-1)

    @classmethod
    def from_packed(cls, packed) -> "WaveletCoeffs":
        packed = np.asarray(packed, dtype=np.float64)
        n = packed.shape[-1]
        na = (n + 1) // 2
        return cls(packed[..., :na], packed[..., na:], n)


def _neighbours(n: int):
    """Index arrays for the predict (right even) and update (left/right detail) stencils."""
    na, nd = (n + 1) // 2, n // 2
    i = np.arange(nd)
    right_even = np.minimum(i + 1, na - 1)
    j = np.arange(na)
    left_detail = np.clip(j - 1, 0, nd - 1)
    same_detail = np.minimum(j, nd - 1)
    return right_even, left_detail, same_detail


def _check_length(n: int):
    if n < 2:
        raise ValueError(f"lifting transform needs at least 2 samples, got {n}")


def _predict(u, right_even):
    # (P u)_i = u_i + u_{i+1}
    return u[..., : right_even.size] + u[..., right_even]


def _predict_T(v, right_even, na):
    out = np.zeros(v.shape[:-1] + (na,))
    out[..., : v.shape[-1]] += v
    _scatter_add(out, right_even, v)
    return out


def _update(v, left_detail, same_detail):
    # (Q v)_j = v_j + v_{j-1}
    return v[..., same_detail] + v[..., left_detail]


def _update_T(u, left_detail, same_detail, nd):
    out = np.zeros(u.shape[:-1] + (nd,))
    _scatter_add(out, same_detail, u)
    _scatter_add(out, left_detail, u)
    return out


def _scatter_add(out, index, values):
    moved = np.moveaxis(out, -1, 0)
    np.add.at(moved, index, np.moveaxis(values, -1, 0))


def lwt_forward_packed(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    _check_length(n)
    if not np.all(np.isfinite(x)):
        raise ValueError("lifting input contains non-finite values")
    right_even, left_detail, same_detail = _neighbours(n)
    u = x[..., 0::2]
    v = x[..., 1::2] - PREDICT * _predict(u, right_even)
    u = u + UPDATE * _update(v, left_detail, same_detail)
    return np.concatenate([u, v], axis=-1)


def lwt_inverse_packed(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    n = c.shape[-1]
    _check_length(n)
    na = (n + 1) // 2
    right_even, left_detail, same_detail = _neighbours(n)
    u1, v1 = c[..., :na], c[..., na:]
    u = u1 - UPDATE * _update(v1, left_detail, same_detail)
    v = v1 + PREDICT * _predict(u, right_even)
    x = np.empty(c.shape)
    x[..., 0::2] = u
    x[..., 1::2] = v
    return x


def lwt_adjoint_packed(g) -> np.ndarray:
    """Transpose of the forward transform applied to packed coefficients ``g``."""
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[-1]
    _check_length(n)
    na, nd = (n + 1) // 2, n // 2
    right_even, left_detail, same_detail = _neighbours(n)
    gu, gv = g[..., :na], g[..., na:]
    # forward = predict then update; transpose runs them in reverse
    gv = gv + UPDATE * _update_T(gu, left_detail, same_detail, nd)
    gu = gu - PREDICT * _predict_T(gv, right_even, na)
    out = np.empty(g.shape)
    out[..., 0::2] = gu
    out[..., 1::2] = gv
    return out


def lwt_inverse_adjoint_packed(g) -> np.ndarray:
    """Transpose of the inverse transform; maps a signal-domain gradient to packed coefficients."""
    g = np.asarray(g, dtype=np.float64)
    n = g.shape[-1]
    _check_length(n)
    na, nd = (n + 1) // 2, n // 2
    right_even, left_detail, same_detail = _neighbours(n)
    gu, gv = g[..., 0::2], g[..., 1::2]
    gu = gu + PREDICT * _predict_T(gv, right_even, na)
    gv = gv - UPDATE * _update_T(gu, left_detail, same_detail, nd)
    return np.concatenate([gu, gv], axis=-1)


def lwt_forward(x) -> WaveletCoeffs:
    return WaveletCoeffs.from_packed(lwt_forward_packed(x))


def lwt_inverse(c: WaveletCoeffs) -> np.ndarray:
    return lwt_inverse_packed(c.packed())


def lwt_adjoint(g: WaveletCoeffs) -> np.ndarray:
    return lwt_adjoint_packed(g.packed())
