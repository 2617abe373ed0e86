"""Pool a 2x2 map with every operator and look at the numbers."""
import numpy as np

from logavgexp.pooling import PoolKind, PoolSpec, global_pool, pool_avg, pool_lae, pool_lse, pool_max, pool_mixed
from logavgexp.tensor import tensor_from

X = np.array([[-1.0, 0.0], [1.4, 1.6]])
z = X.reshape(-1)

print("max      ", pool_max(z))
print("avg      ", pool_avg(z))
print("mixed 0.5", pool_mixed(z, 0.5))
for t in (0.5, 1.0, 2.0):
    print(f"lae t={t:<4}", round(pool_lae(z, t), 4))

# LSE sits above the max; LAE is LSE shifted down by log n
print("lse      ", round(pool_lse(z), 4), "=", round(pool_lae(z, 1.0) + np.log(4), 4))

# the same thing through the tensor API, batch of one, one channel
x = tensor_from((1, 1, 2, 2), z)
print("global_pool lae(t=1):", global_pool(x, PoolSpec.lae(1.0)).data.item())
print("global_pool max     :", global_pool(x, PoolSpec(PoolKind.MAX)).data.item())
