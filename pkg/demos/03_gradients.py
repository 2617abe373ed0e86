"""Where does the gradient go?  Max sends it to one cell, LAE spreads it out."""
import numpy as np

from logavgexp import grad as G
from logavgexp.pooling import pool_lae

z = np.array([-1.0, 0.0, 1.4, 1.6])
swapped = np.array([-1.0, 0.0, 1.6, 1.4])

print("max  ", G.max_backward(z), G.max_backward(swapped))
print("avg  ", G.avg_backward(z))
print("mixed", G.mixed_backward(z, 0.5)[0])
for t in (0.5, 1.0, 2.0):
    print(f"lae t={t}", G.lae_backward_input(z, t).round(4))

# nudge the top two past each other: the LAE gradient barely moves
eps = 1e-6
a = np.array([-1.0, 0.0, 1.5 - eps, 1.5 + eps])
b = a[[0, 1, 3, 2]]
print("lae jump:", np.abs(G.lae_backward_input(a, 1) - G.lae_backward_input(b, 1)).max())
print("max jump:", np.abs(G.max_backward(a) - G.max_backward(b)).max())

# temperature gradient, checked against central differences on log t
t = 1.0
fd = G.finite_diff_oracle(lambda v: pool_lae(z, np.exp(v[0])), [np.log(t)], 1e-6)
print("d lae / d log t:", G.lae_backward_logt(z, t), "finite diff:", fd[0])
