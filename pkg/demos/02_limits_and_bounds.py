"""LAE moves between max and mean as the temperature goes from 0 to infinity."""
import numpy as np

from logavgexp.pooling import PoolKind, PoolSpec, global_pool, pool_lae
from logavgexp.tensor import tensor_from

rng = np.random.default_rng(0)
z = rng.normal(0, 2, size=16)
print("max  =", z.max().round(4))
print("mean =", z.mean().round(4))

for t in [1e-3, 0.1, 0.5, 1, 2, 8, 64, 1e4]:
    v = pool_lae(z, t)
    lower = max(z.mean(), z.max() - t * np.log(z.size))
    print(f"t={t:<7g} lae={v:8.4f}   lower bound={lower:8.4f}")

# constant maps: LAE ignores the map size, LSE grows by log n
for side in (2, 4, 8):
    x = tensor_from((1, 1, side, side), np.full(side * side, 0.3))
    lae = global_pool(x, PoolSpec.lae(1.0)).data.item()
    lse = global_pool(x, PoolSpec(PoolKind.LSE)).data.item()
    print(f"{side}x{side}: lae={lae:.6f} lse={lse:.6f}")
