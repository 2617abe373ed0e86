"""Log-sum-exp kernels and reduced-precision emulation.

Half and single precision are emulated on float64 storage: every
elementary operation (subtract, divide, multiply, exp, log, each step of
the accumulation) is computed in float64 and immediately rounded to the
target format.  Accumulation runs sequentially in index order so the
emulated error profile does not depend on numpy's pairwise summation.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, List, Sequence

import numpy as np

from .tensor import PrecisionTag

HALF_MAX = 65504.0


class KernelVariant(str, enum.Enum):
    STABLE = "stable"
    NAIVE = "naive"


def stable_logsumexp(x, axis: int = -1):
    """``max + log(sum(exp(x - max)))`` along ``axis`` (float64, vectorised)."""
    x = np.asarray(x, dtype=np.float64)
    top = x.max(axis=axis, keepdims=True)
    out = top + np.log(np.exp(x - top).sum(axis=axis, keepdims=True))
    out = np.squeeze(out, axis=axis)
    return out if out.ndim else float(out)


def round_half(x):
    """Round to the nearest IEEE 754 binary16 value (ties to even).

    Magnitudes past the overflow threshold become infinite, subnormals are
    kept and NaN stays NaN.  Returns float64 values.
    """
    with np.errstate(over="ignore"):
        out = np.asarray(x, dtype=np.float64).astype(np.float16).astype(np.float64)
    return out if out.ndim else float(out)


def round_single(x):
    with np.errstate(over="ignore"):
        out = np.asarray(x, dtype=np.float64).astype(np.float32).astype(np.float64)
    return out if out.ndim else float(out)


def _identity(x):
    return np.asarray(x, dtype=np.float64)


def rounder(precision) -> Callable:
    precision = PrecisionTag(precision)
    if precision is PrecisionTag.HALF:
        return round_half
    if precision is PrecisionTag.SINGLE:
        return round_single
    return _identity


class _Emulator:
    """Elementary float ops, each result rounded to one precision."""

    def __init__(self, precision):
        self.r = rounder(precision)

    def __call__(self, x):
        return np.asarray(self.r(x), dtype=np.float64)

    def sub(self, a, b):
        return self(np.subtract(a, b))

    def add(self, a, b):
        return self(np.add(a, b))

    def mul(self, a, b):
        return self(np.multiply(a, b))

    def div(self, a, b):
        return self(np.divide(a, b))

    def exp(self, a):
        with np.errstate(over="ignore"):
            return self(np.exp(a))

    def log(self, a):
        with np.errstate(divide="ignore"):
            return self(np.log(a))

    def sum(self, a):
        """Sequential left-to-right sum over the last axis."""
        acc = np.zeros(a.shape[:-1])
        for i in range(a.shape[-1]):
            acc = self.add(acc, a[..., i])
        return acc


def _emulated_lae(z, t, precision, variant, subtract_log_n=True):
    ops = _Emulator(precision)
    z = ops(np.asarray(z, dtype=np.float64))
    t = ops(np.asarray(t, dtype=np.float64))
    n = z.shape[-1]
    if variant is KernelVariant.STABLE:
        top = z.max(axis=-1)
        scaled = ops.div(ops.sub(z, top[..., None]), t[..., None])
    else:
        top = np.zeros(z.shape[:-1])
        scaled = ops.div(z, t[..., None])
    e = ops.exp(scaled)
    s = ops.sum(e)
    inner = ops.log(s)
    if subtract_log_n:
        inner = ops.sub(inner, ops.log(float(n)))
    value = ops.add(top, ops.mul(t, inner))
    return z, t, e, s, value


def lse_kernel(z, variant=KernelVariant.STABLE, precision=PrecisionTag.DOUBLE):
    """Log-sum-exp of one window (or of each window along the last axis).

    The naive variant exponentiates directly and returns ``inf`` on
    overflow instead of raising, so the contrast with the stable variant
    stays observable.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1:] == (0,) or z.ndim == 0:
        raise ValueError("lse_kernel needs a non-empty window")
    variant = KernelVariant(variant)
    t = np.ones(z.shape[:-1])
    *_, value = _emulated_lae(z, t, precision, variant, subtract_log_n=False)
    return value if value.ndim else float(value)


def lae_kernel(z, t, variant=KernelVariant.STABLE, precision=PrecisionTag.DOUBLE):
    """Temperature LogAvgExp under emulated precision."""
    z = np.asarray(z, dtype=np.float64)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), z.shape[:-1])
    *_, value = _emulated_lae(z, t, precision, KernelVariant(variant))
    return value if value.ndim else float(value)


def lae_with_grads(z, t, precision=PrecisionTag.DOUBLE):
    """Forward value, input gradient and log-temperature gradient of LAE.

    All three are evaluated with the stable kernel under the given
    precision.  The input gradient is ``softargmax(z / t)`` formed as
    ``exp((z - z*) / t) / sum``; the log-temperature gradient is
    ``LAE - sum(z * p)``.
    """
    z = np.asarray(z, dtype=np.float64)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), z.shape[:-1])
    ops = _Emulator(precision)
    z, t, e, s, value = _emulated_lae(z, t, precision, KernelVariant.STABLE)
    p = ops.div(e, s[..., None])
    weighted = ops.sum(ops.mul(z, p))
    d_log_t = ops.sub(value, weighted)
    return value, p, d_log_t


@dataclass
class SweepRow:
    t: float
    precision: str
    forward_median: float
    forward_max: float
    grad_input_median: float
    grad_input_max: float
    grad_signal_median: float
    grad_signal_max: float
    grad_logt_median: float
    grad_logt_max: float

    def as_dict(self):
        return asdict(self)


def _rel(err, ref):
    tiny = np.finfo(np.float64).tiny
    return np.abs(err) / np.maximum(np.abs(ref), tiny)


def _rel_norm(err, ref):
    tiny = np.finfo(np.float64).tiny
    return np.linalg.norm(err, axis=-1) / np.maximum(np.linalg.norm(ref, axis=-1), tiny)


def default_sweep_windows(count: int = 200, size: int = 64, seed: int = 0) -> np.ndarray:
    """Standard-normal windows, pre-rounded so they are exact in binary16."""
    rng = np.random.default_rng(seed)
    return round_half(rng.standard_normal((count, size)))


def lae_precision_sweep(
    z_samples,
    t_grid: Iterable[float],
    precisions: Iterable = (PrecisionTag.HALF, PrecisionTag.SINGLE),
) -> List[SweepRow]:
    """Relative error of emulated LAE against float64, per (t, precision).

    Errors are aggregated (median and max) over the windows.  Four
    quantities are compared:

    * ``forward``: the pooled value;
    * ``grad_input``: the input gradient vector (norm-wise);
    * ``grad_signal``: the input gradient with its mean removed, i.e. the
      part that differs from average pooling's uniform ``1/n`` gradient
      and tells upstream weights *where* the evidence is (norm-wise);
    * ``grad_logt``: the log-temperature gradient.

    Inputs are rounded into each precision before the kernel runs.
    """
    windows = np.atleast_2d(np.asarray(z_samples, dtype=np.float64))
    t_grid = [float(t) for t in t_grid]
    precisions = [PrecisionTag(p) for p in precisions]
    if windows.size == 0 or not t_grid or not precisions:
        raise ValueError("precision sweep needs windows, temperatures and precisions")
    if any(t <= 0 for t in t_grid):
        raise ValueError("temperatures must be > 0")

    rows = []
    for t in t_grid:
        ref_val, ref_p, ref_lt = lae_with_grads(windows, t, PrecisionTag.DOUBLE)
        ref_signal = ref_p - ref_p.mean(axis=-1, keepdims=True)
        for prec in precisions:
            val, p, lt = lae_with_grads(windows, t, prec)
            signal = p - p.mean(axis=-1, keepdims=True)
            fwd = _rel(val - ref_val, ref_val)
            gin = _rel_norm(p - ref_p, ref_p)
            gsig = _rel_norm(signal - ref_signal, ref_signal)
            glt = _rel(lt - ref_lt, ref_lt)
            rows.append(SweepRow(
                t=t,
                precision=prec.value,
                forward_median=float(np.median(fwd)),
                forward_max=float(np.max(fwd)),
                grad_input_median=float(np.median(gin)),
                grad_input_max=float(np.max(gin)),
                grad_signal_median=float(np.median(gsig)),
                grad_signal_max=float(np.max(gsig)),
                grad_logt_median=float(np.median(glt)),
                grad_logt_max=float(np.max(glt)),
            ))
    return rows


DEFAULT_T_GRID: Sequence[float] = tuple(float(2 ** k) for k in range(11))
