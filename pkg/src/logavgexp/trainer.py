"""Desk-scale training harness.

The task plants a class-specific pattern at one (or a few) random spatial
sites of a noisy feature map; the label is "which pattern appears
anywhere".  The model is Conv(1x1) -> global pool -> bias -> softargmax,
so each pooled channel is the logit of one class.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .grad import pool_backward_array
from .pooling import PoolKind, PoolSpec, TemperatureMode, pool_array

log = logging.getLogger(__name__)


class Placement(str, enum.Enum):
    SINGLE = "single-site"
    MULTI = "multi-site"


class Transform(str, enum.Enum):
    ZOOM = "zoom"
    CROP_OR_PAD_ZERO = "crop_or_pad_zero"
    CROP_OR_PAD_NORMAL = "crop_or_pad_normal"


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class SyntheticTask:
    classes: int = 4
    height: int = 8
    width: int = 8
    features: int = 8
    signal_strength: float = 5.0
    noise_std: float = 1.0
    placement: Placement = Placement.SINGLE
    max_sites: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.classes < 1:
            raise ValueError("task needs at least one class")
        if self.height < 1 or self.width < 1:
            raise ValueError("task grid must be at least 1x1")
        if self.features < self.classes:
            raise ValueError("need at least as many feature channels as classes")
        object.__setattr__(self, "placement", Placement(self.placement))

    def prototypes(self) -> np.ndarray:
        """Orthonormal class patterns, shape (classes, features)."""
        rng = np.random.default_rng([self.seed, 0x5EED])
        q, _ = np.linalg.qr(rng.standard_normal((self.features, self.features)))
        return q[:, : self.classes].T.copy()


@dataclass
class Dataset:
    x: np.ndarray  # (N, features, H, W)
    y: np.ndarray  # (N,)

    def __len__(self):
        return len(self.y)


def generate_dataset(task: SyntheticTask, n: int, stream: int = 0) -> Dataset:
    """Draw ``n`` labelled samples; ``stream`` selects an independent split."""
    if n < 1:
        raise ValueError("dataset size must be >= 1")
    rng = np.random.default_rng([task.seed, stream])
    h, w = task.height, task.width
    x = task.noise_std * rng.standard_normal((n, task.features, h, w))
    y = rng.integers(0, task.classes, size=n)
    protos = task.prototypes()
    for i in range(n):
        if task.placement is Placement.SINGLE:
            count = 1
        else:
            count = int(rng.integers(1, min(task.max_sites, h * w) + 1))
        sites = rng.choice(h * w, size=count, replace=False)
        for s in sites:
            x[i, :, s // w, s % w] += task.signal_strength * protos[y[i]]
    return Dataset(x, y)


@dataclass
class TinyModel:
    weights: np.ndarray  # (classes, features) 1x1 convolution
    pool: PoolSpec
    bias: Optional[np.ndarray] = None

    @classmethod
    def init(cls, task: SyntheticTask, pool: PoolSpec, seed: int = 0,
             bias: bool = True, scale: float = 0.1) -> "TinyModel":
        rng = np.random.default_rng(seed)
        weights = scale * rng.standard_normal((task.classes, task.features))
        return cls(weights, pool.copy(), np.zeros(task.classes) if bias else None)

    def copy(self) -> "TinyModel":
        return TinyModel(
            self.weights.copy(),
            self.pool.copy(),
            None if self.bias is None else self.bias.copy(),
        )

    def feature_maps(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("kd,ndhw->nkhw", self.weights, x, optimize=True)

    def logits(self, x: np.ndarray) -> np.ndarray:
        out = pool_array(self.feature_maps(x), self.pool)
        if self.bias is not None:
            out = out + self.bias
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def temperatures(self) -> np.ndarray:
        if self.pool.kind is not PoolKind.LAE:
            return np.zeros(0)
        return self.pool.temperature.t.copy()

    def pool_parameters(self) -> List[np.ndarray]:
        """Trainable pooling arrays; these never receive weight decay."""
        spec = self.pool
        if spec.kind is PoolKind.LAE and spec.temperature.trainable:
            return [spec.temperature.log_t]
        if spec.kind is PoolKind.MIXED:
            return [spec.mixed.pre_alpha]
        if spec.kind is PoolKind.GATED:
            return [spec.gate.w]
        return []


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    temp_lr_multiplier: float = 1.0
    weight_decay: float = 1e-4
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.temp_lr_multiplier < 0 or self.weight_decay < 0:
            raise ValueError("learning rate, multiplier and weight decay must be >= 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TrainRecord:
    epoch: int
    train_loss: float
    eval_accuracy: float
    temperatures: np.ndarray = field(default_factory=lambda: np.zeros(0))


def cross_entropy(logits: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradient with respect to the logits."""
    top = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - top)
    s = e.sum(axis=1, keepdims=True)
    rows = np.arange(len(y))
    loss = float(np.mean(np.log(s[:, 0]) + top[:, 0] - logits[rows, y]))
    grad = e / s
    grad[rows, y] -= 1.0
    return loss, grad / len(y)


def loss_and_grads(model: TinyModel, x: np.ndarray, y: np.ndarray):
    """Loss plus gradients for (weights, bias, pooling parameters)."""
    feats = model.feature_maps(x)
    logits = pool_array(feats, model.pool)
    if model.bias is not None:
        logits = logits + model.bias
    loss, d_logits = cross_entropy(logits, y)
    pg = pool_backward_array(feats, model.pool, d_logits)
    d_weights = np.einsum("nkhw,ndhw->kd", pg.d_input, x, optimize=True)
    d_bias = None if model.bias is None else d_logits.sum(axis=0)
    kind = model.pool.kind
    if kind is PoolKind.LAE:
        d_pool = [pg.d_log_t] if model.pool.temperature.trainable else []
    elif kind is PoolKind.MIXED:
        d_pool = [pg.d_pre_alpha]
    elif kind is PoolKind.GATED:
        d_pool = [pg.d_gate_w]
    else:
        d_pool = []
    return loss, d_weights, d_bias, d_pool


def evaluate(model: TinyModel, data: Dataset) -> float:
    return float(np.mean(model.predict(data.x) == data.y))


def train(model: TinyModel, data: Dataset, cfg: TrainConfig,
          eval_data: Optional[Dataset] = None):
    """Plain minibatch SGD.  Returns ``(trained_model, records)``.

    The input model is not modified.  Weight decay acts on the convolution
    weights and the bias only; pooling parameters step with
    ``learning_rate * temp_lr_multiplier`` and no decay.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    model = model.copy()
    eval_data = data if eval_data is None else eval_data
    rng = np.random.default_rng(cfg.seed)
    lr = cfg.learning_rate
    pool_lr = lr * cfg.temp_lr_multiplier
    records = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(data))
        losses = []
        for bi, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, d_w, d_b, d_pool = loss_and_grads(model, data.x[idx], data.y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, batch {bi} "
                    f"(pool={model.pool}, lr={lr})"
                )
            losses.append(loss)
            model.weights -= lr * (d_w + cfg.weight_decay * model.weights)
            if model.bias is not None:
                model.bias -= lr * (d_b + cfg.weight_decay * model.bias)
            for param, grad in zip(model.pool_parameters(), d_pool):
                param -= pool_lr * grad
        rec = TrainRecord(epoch, float(np.mean(losses)), evaluate(model, eval_data),
                          model.temperatures())
        log.debug("epoch %d loss %.4f acc %.3f", rec.epoch, rec.train_loss, rec.eval_accuracy)
        records.append(rec)
    return model, records


# -- input-size robustness --------------------------------------------------------


def _resize_nearest(x: np.ndarray, size: int) -> np.ndarray:
    h, w = x.shape[-2:]
    rows = np.minimum(((np.arange(size) + 0.5) * h / size).astype(int), h - 1)
    cols = np.minimum(((np.arange(size) + 0.5) * w / size).astype(int), w - 1)
    return x[..., rows[:, None], cols[None, :]]


def _crop_or_pad(x: np.ndarray, size: int, rng: Optional[np.random.Generator]) -> np.ndarray:
    *lead, h, w = x.shape
    if rng is None:
        out = np.zeros((*lead, size, size))
    else:
        out = rng.standard_normal((*lead, size, size))
    # offsets of the overlap in source and destination, centred
    def span(src, dst):
        if src >= dst:
            off = (src - dst) // 2
            return slice(off, off + dst), slice(0, dst)
        off = (dst - src) // 2
        return slice(0, src), slice(off, off + src)

    sr, dr = span(h, size)
    sc, dc = span(w, size)
    out[..., dr, dc] = x[..., sr, sc]
    return out


def transform_inputs(x: np.ndarray, transform, size: int, seed: int = 0) -> np.ndarray:
    transform = Transform(transform)
    if size < 1:
        raise ValueError(f"target size must be >= 1, got {size}")
    if transform is Transform.ZOOM:
        return _resize_nearest(x, size)
    if transform is Transform.CROP_OR_PAD_ZERO:
        return _crop_or_pad(x, size, None)
    return _crop_or_pad(x, size, np.random.default_rng(seed))


def evaluate_robustness(model: TinyModel, data: Dataset, transform,
                        sizes: Sequence[int], seed: int = 0) -> Dict[int, float]:
    """Accuracy after resizing every input to ``size x size``.

    Pooling sees the transformed spatial size, so LAE's ``log n`` term
    follows the new window.  Gated pooling is tied to one window size and
    is rejected.
    """
    if not model.pool.size_adaptive:
        raise ValueError("gated pooling has a fixed window size; cannot evaluate other sizes")
    sizes = list(sizes)
    if not sizes:
        raise ValueError("no target sizes given")
    out = {}
    for size in sizes:
        xt = transform_inputs(data.x, transform, int(size), seed)
        out[int(size)] = float(np.mean(model.predict(xt) == data.y))
    return out


# -- temperature study ------------------------------------------------------------


def make_pool_spec(kind, task: SyntheticTask, t0: float = 4.0,
                   mode=TemperatureMode.SHARED, alpha: float = 0.5) -> PoolSpec:
    kind = PoolKind(kind)
    if kind is PoolKind.LAE:
        return PoolSpec.lae(t0, mode, task.classes)
    if kind is PoolKind.MIXED:
        return PoolSpec.mixed_pool(task.classes, alpha)
    if kind is PoolKind.GATED:
        return PoolSpec.gated_pool(task.height * task.width)
    return PoolSpec(kind)


def temperature_trajectory_study(
    t0_grid: Sequence[float],
    repeats: int,
    mode=TemperatureMode.SHARED,
    task: SyntheticTask = SyntheticTask(),
    cfg: TrainConfig = TrainConfig(),
    n_train: int = 2000,
) -> Dict[float, List[np.ndarray]]:
    """Train one model per (t0, repeat) and collect its final temperatures."""
    mode = TemperatureMode(mode)
    if mode is TemperatureMode.FIXED:
        raise ValueError("fixed temperatures are not trained; nothing to study")
    if repeats < 1 or not len(t0_grid):
        raise ValueError("need at least one initial temperature and one repeat")
    results: Dict[float, List[np.ndarray]] = {}
    for t0 in t0_grid:
        finals = []
        for r in range(repeats):
            run_task = replace(task, seed=task.seed + r)
            data = generate_dataset(run_task, n_train)
            spec = PoolSpec.lae(float(t0), mode, task.classes)
            model = TinyModel.init(run_task, spec, seed=cfg.seed + r)
            trained, _ = train(model, data, replace(cfg, seed=cfg.seed + r))
            finals.append(trained.temperatures())
        results[float(t0)] = finals
    return results
