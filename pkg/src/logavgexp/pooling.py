"""Global pooling operators.

Every operator collapses one channel's spatial window ``z`` (a vector of
``n = H*W`` values) to a single number.  The scalar functions
(:func:`pool_max`, :func:`pool_lae`, ...) take one window; the ``*_windows``
helpers do the same thing for an array of windows along its last axis and
are what :func:`global_pool` and the trainer use.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .precision import stable_logsumexp
from .tensor import Shape, Tensor


class PoolKind(str, enum.Enum):
    MAX = "max"
    AVG = "avg"
    LSE = "lse"
    LAE = "lae"
    MIXED = "mixed"
    GATED = "gated"


class TemperatureMode(str, enum.Enum):
    FIXED = "fixed"
    SHARED = "shared"
    PER_CHANNEL = "per_channel"


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass
class TemperatureParam:
    """Temperature stored as its logarithm.

    ``log_t`` has one entry for the fixed and shared modes and one entry per
    channel for the per-channel mode.  Fixed temperatures are never touched
    by the trainer.
    """

    mode: TemperatureMode = TemperatureMode.FIXED
    log_t: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        self.mode = TemperatureMode(self.mode)
        self.log_t = np.atleast_1d(np.asarray(self.log_t, dtype=np.float64)).copy()
        if self.log_t.ndim != 1 or self.log_t.size == 0:
            raise ValueError("log_t must be a non-empty vector")
        if self.mode is not TemperatureMode.PER_CHANNEL and self.log_t.size != 1:
            raise ValueError(f"{self.mode.value} temperature takes a single log_t entry")
        if not np.all(np.isfinite(self.log_t)):
            raise ValueError("log_t must be finite")

    @classmethod
    def from_t(cls, t0: float, mode=TemperatureMode.FIXED, channels: int = 1):
        if not t0 > 0:
            raise ValueError(f"temperature must be > 0, got {t0}")
        mode = TemperatureMode(mode)
        size = channels if mode is TemperatureMode.PER_CHANNEL else 1
        return cls(mode, np.full(size, np.log(t0)))

    @property
    def t(self) -> np.ndarray:
        return np.exp(self.log_t)

    @property
    def trainable(self) -> bool:
        return self.mode is not TemperatureMode.FIXED

    def for_channels(self, channels: int) -> np.ndarray:
        """Per-channel temperatures, broadcasting shared/fixed values."""
        if self.mode is TemperatureMode.PER_CHANNEL:
            if self.log_t.size != channels:
                raise ValueError(
                    f"per-channel temperature has {self.log_t.size} entries "
                    f"but the input has {channels} channels"
                )
            return self.t
        return np.full(channels, self.t[0])


@dataclass
class MixedParam:
    """Per-channel mixing weight, stored before the sigmoid."""

    pre_alpha: np.ndarray

    def __post_init__(self):
        self.pre_alpha = np.atleast_1d(np.asarray(self.pre_alpha, dtype=np.float64)).copy()

    @classmethod
    def from_alpha(cls, alpha: float, channels: int):
        if not 0 < alpha < 1:
            raise ValueError("initial alpha must lie strictly inside (0, 1)")
        return cls(np.full(channels, np.log(alpha) - np.log1p(-alpha)))

    @property
    def alpha(self) -> np.ndarray:
        return np.atleast_1d(sigmoid(self.pre_alpha))


@dataclass
class GateParam:
    """Gate weights; one weight per spatial position, no bias."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.atleast_1d(np.asarray(self.w, dtype=np.float64)).copy()


@dataclass
class PoolSpec:
    kind: PoolKind
    temperature: Optional[TemperatureParam] = None
    mixed: Optional[MixedParam] = None
    gate: Optional[GateParam] = None

    def __post_init__(self):
        self.kind = PoolKind(self.kind)
        blocks = {
            PoolKind.LAE: "temperature",
            PoolKind.MIXED: "mixed",
            PoolKind.GATED: "gate",
        }
        wanted = blocks.get(self.kind)
        for name in ("temperature", "mixed", "gate"):
            present = getattr(self, name) is not None
            if name == wanted and not present:
                raise ValueError(f"{self.kind.value} pooling needs a {name} block")
            if name != wanted and present:
                raise ValueError(f"{self.kind.value} pooling takes no {name} block")

    @classmethod
    def lae(cls, t: float = 1.0, mode=TemperatureMode.FIXED, channels: int = 1):
        return cls(PoolKind.LAE, temperature=TemperatureParam.from_t(t, mode, channels))

    @classmethod
    def mixed_pool(cls, channels: int, alpha: float = 0.5):
        return cls(PoolKind.MIXED, mixed=MixedParam.from_alpha(alpha, channels))

    @classmethod
    def gated_pool(cls, window: int, w=None):
        return cls(PoolKind.GATED, gate=GateParam(np.zeros(window) if w is None else w))

    @property
    def size_adaptive(self) -> bool:
        return self.kind is not PoolKind.GATED

    def copy(self) -> "PoolSpec":
        return copy.deepcopy(self)

    def __str__(self):
        if self.kind is PoolKind.LAE:
            t = self.temperature
            return f"lae(t={np.round(t.t, 4).tolist()}, mode={t.mode.value})"
        return self.kind.value


def _window(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.size == 0:
        raise ValueError("cannot pool an empty window")
    if not np.all(np.isfinite(z)):
        raise ValueError("pooling window contains non-finite values")
    return z


def _check_t(t) -> None:
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)) or np.any(t <= 0):
        raise ValueError(f"temperature must be finite and > 0, got {t}")


# -- array kernels over the last axis ------------------------------------------


def lae_windows(z: np.ndarray, t) -> np.ndarray:
    """LogAvgExp with temperature over the last axis.

    ``t`` broadcasts against ``z[..., 0]``.  Computed as
    ``z* + t * (log sum exp((z - z*) / t) - log n)`` with ``z* = max(z)``:
    nothing overflows, a constant window returns its value exactly, and the
    result never leaves ``[z* - t log n, z*]``.
    """
    z = np.asarray(z, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)[..., None]
    n = z.shape[-1]
    top = z.max(axis=-1, keepdims=True)
    s = np.exp((z - top) / t).sum(axis=-1, keepdims=True)
    return (top + t * (np.log(s) - np.log(n)))[..., 0]


def mixed_windows(z: np.ndarray, alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=np.float64)
    mean = z.mean(axis=-1)
    # same as alpha*max + (1-alpha)*mean, but exact when max == mean
    return mean + alpha * (z.max(axis=-1) - mean)


def gate_alpha_windows(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    if z.shape[-1] != w.shape[-1]:
        raise ValueError(
            f"gate weights cover {w.shape[-1]} positions but the window has {z.shape[-1]}; "
            "gated pooling is not size-adaptive"
        )
    return sigmoid(z @ w)


# -- single windows --------------------------------------------------------------


def pool_max(z) -> float:
    return float(_window(z).max())


def pool_avg(z) -> float:
    return float(_window(z).mean())


def pool_lse(z) -> float:
    return float(stable_logsumexp(_window(z)))


def pool_lae(z, t: float = 1.0) -> float:
    """``t * (LSE(z / t) - log n)``: smooth maximum, bounded by max(z) and mean(z)."""
    z = _window(z)
    _check_t(t)
    return float(lae_windows(z, t))


def pool_mixed(z, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return float(mixed_windows(_window(z), alpha))


def pool_gated(z, w) -> float:
    z = _window(z)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size != z.size:
        raise ValueError(f"gate weights have length {w.size}, window has {z.size}")
    return pool_mixed(z, float(sigmoid(z @ w)))


def softargmax(z) -> np.ndarray:
    z = _window(z)
    e = np.exp(z - z.max())
    return e / e.sum()


def group_logits(z, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Coarse-grain logits: one LSE per group of (0-based) indices.

    ``softargmax`` of the result equals the summed fine-grained
    probabilities of each group.
    """
    z = _window(z)
    seen = []
    for g in groups:
        if len(g) == 0:
            raise ValueError("groups may not be empty")
        seen.extend(int(i) for i in g)
    if sorted(seen) != list(range(z.size)):
        raise ValueError(f"groups must partition the indices 0..{z.size - 1}")
    return np.array([stable_logsumexp(z[list(g)]) for g in groups])


# -- whole tensors ---------------------------------------------------------------


def pool_array(x: np.ndarray, spec: PoolSpec) -> np.ndarray:
    """Globally pool a (B, C, H, W) array to (B, C)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"expected a (B, C, H, W) array, got shape {x.shape}")
    b, c, h, w = x.shape
    z = x.reshape(b, c, h * w)
    kind = spec.kind
    if kind is PoolKind.MAX:
        return z.max(axis=-1)
    if kind is PoolKind.AVG:
        return z.mean(axis=-1)
    if kind is PoolKind.LSE:
        return stable_logsumexp(z)
    if kind is PoolKind.LAE:
        t = spec.temperature.for_channels(c)
        return lae_windows(z, np.broadcast_to(t, (b, c)))
    if kind is PoolKind.MIXED:
        alpha = spec.mixed.alpha
        if alpha.size != c:
            raise ValueError(f"mixed pooling has {alpha.size} alphas for {c} channels")
        return mixed_windows(z, alpha)
    if kind is PoolKind.GATED:
        return mixed_windows(z, gate_alpha_windows(z, spec.gate.w))
    raise ValueError(f"unknown pooling kind {kind}")


def global_pool(x: Tensor, spec: PoolSpec) -> Tensor:
    """Pool every channel over its full spatial extent; output is (B, C, 1, 1)."""
    data = x.numpy()
    if not np.all(np.isfinite(data)):
        raise ValueError("global_pool input contains non-finite values")
    out = pool_array(data, spec)
    return Tensor(Shape(x.shape.batch, x.shape.channels, 1, 1), out, x.precision)
