"""Analytic backward passes for the pooling operators.

The temperature gradient is taken with respect to ``log t`` (the stored
parameter), i.e. ``t * dLAE/dt = LAE - sum(z * softargmax(z / t))``.
Max pooling routes its gradient to the first maximal element.

:func:`finite_diff_oracle` is deliberately independent of everything
else here; tests use it to check the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .pooling import (
    PoolKind,
    PoolSpec,
    TemperatureMode,
    _check_t,
    _window,
    gate_alpha_windows,
    lae_windows,
    sigmoid,
    softargmax,
)
from .tensor import Tensor


@dataclass
class PoolGradients:
    d_input: np.ndarray
    d_log_t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    d_pre_alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    d_gate_w: np.ndarray = field(default_factory=lambda: np.zeros(0))


def lae_backward_input(z, t: float = 1.0) -> np.ndarray:
    """dLAE/dz_i = softargmax(z / t)_i."""
    z = _window(z)
    _check_t(t)
    return softargmax(z / t)


def lae_backward_logt(z, t: float = 1.0) -> float:
    z = _window(z)
    _check_t(t)
    p = softargmax(z / t)
    return float(lae_windows(z, t) - z @ p)


def max_backward(z) -> np.ndarray:
    z = _window(z)
    g = np.zeros_like(z)
    g[np.argmax(z)] = 1.0
    return g


def avg_backward(z) -> np.ndarray:
    z = _window(z)
    return np.full_like(z, 1.0 / z.size)


def mixed_backward(z, alpha: float):
    """Returns ``(d_z, d_pre_alpha)`` where alpha = sigmoid(pre_alpha)."""
    z = _window(z)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    d_z = alpha * max_backward(z) + (1 - alpha) * avg_backward(z)
    d_pre_alpha = (z.max() - z.mean()) * alpha * (1 - alpha)
    return d_z, float(d_pre_alpha)


def gated_backward(z, w):
    """Returns ``(d_z, d_w)`` for ``alpha = sigmoid(w . z)``."""
    z = _window(z)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size != z.size:
        raise ValueError(f"gate weights have length {w.size}, window has {z.size}")
    alpha = float(sigmoid(z @ w))
    spread = z.max() - z.mean()
    slope = spread * alpha * (1 - alpha)
    d_z = alpha * max_backward(z) + (1 - alpha) * avg_backward(z) + slope * w
    return d_z, slope * z


def softargmax_xent(logits, target: int) -> float:
    """Cross-entropy ``-log softargmax(logits)[target]``."""
    logits = _window(logits)
    top = logits.max()
    return float(top + np.log(np.exp(logits - top).sum()) - logits[target])


def softargmax_xent_backward(logits, target: int) -> np.ndarray:
    logits = _window(logits)
    if not 0 <= target < logits.size:
        raise IndexError(f"target {target} out of range for {logits.size} logits")
    g = softargmax(logits)
    g[target] -= 1.0
    return g


def finite_diff_oracle(f: Callable[[np.ndarray], float], z, h: float = 1e-6,
                       relative: bool = False) -> np.ndarray:
    """Central differences ``(f(z + h e_i) - f(z - h e_i)) / 2h``.

    With ``relative=True`` the step for coordinate ``i`` is ``h * (|z_i| + 1)``.
    """
    if not h > 0:
        raise ValueError(f"step size must be > 0, got {h}")
    z = np.array(z, dtype=np.float64).reshape(-1)
    grad = np.empty_like(z)
    for i in range(z.size):
        step = h * (abs(z[i]) + 1.0) if relative else h
        zp = z.copy()
        zm = z.copy()
        zp[i] += step
        zm[i] -= step
        # divide by the realised step to cancel representation error in z +/- step
        grad[i] = (f(zp) - f(zm)) / (zp[i] - zm[i])
    return grad


# -- batched backward used by the trainer -----------------------------------------


def _one_hot_first_max(z):
    idx = np.argmax(z, axis=-1)
    g = np.zeros_like(z)
    np.put_along_axis(g, idx[..., None], 1.0, axis=-1)
    return g


def pool_backward_array(x: np.ndarray, spec: PoolSpec, upstream: np.ndarray) -> PoolGradients:
    """Backward of :func:`~logavgexp.pooling.pool_array`.

    ``x`` is (B, C, H, W) and ``upstream`` is dLoss/dpooled with shape
    (B, C).  Parameter gradients are summed over the batch (and over
    channels when a parameter is shared).
    """
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    b, c, h, w = x.shape
    n = h * w
    z = x.reshape(b, c, n)
    if upstream.shape != (b, c):
        raise ValueError(f"upstream gradient must have shape {(b, c)}, got {upstream.shape}")
    out = PoolGradients(d_input=np.zeros_like(z))
    kind = spec.kind

    if kind is PoolKind.MAX:
        local = _one_hot_first_max(z)
    elif kind is PoolKind.AVG:
        local = np.full_like(z, 1.0 / n)
    elif kind is PoolKind.LSE:
        top = z.max(axis=-1, keepdims=True)
        e = np.exp(z - top)
        local = e / e.sum(axis=-1, keepdims=True)
    elif kind is PoolKind.LAE:
        temp = spec.temperature
        t = temp.for_channels(c)[None, :, None]
        top = z.max(axis=-1, keepdims=True)
        e = np.exp((z - top) / t)
        local = e / e.sum(axis=-1, keepdims=True)
        d_log_t = upstream * (lae_windows(z, np.broadcast_to(t[..., 0], (b, c)))
                              - (z * local).sum(axis=-1))
        if temp.mode is TemperatureMode.PER_CHANNEL:
            out.d_log_t = d_log_t.sum(axis=0)
        elif temp.mode is TemperatureMode.SHARED:
            out.d_log_t = np.array([d_log_t.sum()])
    elif kind is PoolKind.MIXED:
        alpha = spec.mixed.alpha[None, :, None]
        local = alpha * _one_hot_first_max(z) + (1 - alpha) / n
        spread = z.max(axis=-1) - z.mean(axis=-1)
        out.d_pre_alpha = (upstream * spread * (alpha * (1 - alpha))[..., 0]).sum(axis=0)
    elif kind is PoolKind.GATED:
        gw = spec.gate.w
        alpha = gate_alpha_windows(z, gw)[..., None]
        spread = (z.max(axis=-1) - z.mean(axis=-1))[..., None]
        slope = spread * alpha * (1 - alpha)
        local = alpha * _one_hot_first_max(z) + (1 - alpha) / n + slope * gw
        out.d_gate_w = ((upstream[..., None] * slope) * z).sum(axis=(0, 1))
    else:
        raise ValueError(f"unknown pooling kind {kind}")

    out.d_input = (upstream[..., None] * local).reshape(x.shape)
    return out


def global_pool_backward(x: Tensor, spec: PoolSpec, upstream=None) -> PoolGradients:
    """Gradients of :func:`~logavgexp.pooling.global_pool`.

    ``upstream`` defaults to ones, giving the raw per-window derivatives.
    ``d_input`` is returned as a :class:`Tensor`.
    """
    data = x.numpy()
    if upstream is None:
        upstream = np.ones(data.shape[:2])
    upstream = np.asarray(upstream, dtype=np.float64).reshape(data.shape[:2])
    grads = pool_backward_array(data, spec, upstream)
    grads.d_input = Tensor(x.shape, grads.d_input, x.precision)
    return grads
