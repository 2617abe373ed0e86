"""LogAvgExp global pooling with a trainable temperature."""

from .grad import PoolGradients, global_pool_backward, pool_backward_array
from .pooling import (
    PoolKind,
    PoolSpec,
    TemperatureMode,
    TemperatureParam,
    global_pool,
    pool_array,
    pool_avg,
    pool_gated,
    pool_lae,
    pool_lse,
    pool_max,
    pool_mixed,
    softargmax,
)
from .tensor import PrecisionTag, Shape, Tensor, tensor_from

__all__ = [
    "PoolGradients", "global_pool_backward", "pool_backward_array",
    "PoolKind", "PoolSpec", "TemperatureMode", "TemperatureParam",
    "global_pool", "pool_array", "pool_avg", "pool_gated", "pool_lae", "pool_lse",
    "pool_max", "pool_mixed", "softargmax",
    "PrecisionTag", "Shape", "Tensor", "tensor_from",
]
