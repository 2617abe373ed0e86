"""Emulated half and single precision LAE, compared with float64."""
from logavgexp.precision import DEFAULT_T_GRID, default_sweep_windows, lae_precision_sweep, lse_kernel, KernelVariant
from logavgexp.tensor import PrecisionTag

# the naive kernel overflows binary16 quickly; the shifted one does not
z = [12.0, 11.0, 3.0]
print("naive half :", lse_kernel(z, KernelVariant.NAIVE, PrecisionTag.HALF))
print("stable half:", lse_kernel(z, KernelVariant.STABLE, PrecisionTag.HALF))

windows = default_sweep_windows(count=200, size=64)
rows = lae_precision_sweep(windows, DEFAULT_T_GRID, ["half", "single"])
print(f"{'t':>6} {'prec':>6} {'forward':>10} {'grad p':>10} {'grad p-1/n':>11} {'grad logt':>10}")
for r in rows:
    print(f"{r.t:6g} {r.precision:>6} {r.forward_median:10.2e} {r.grad_input_median:10.2e} "
          f"{r.grad_signal_median:11.2e} {r.grad_logt_median:10.2e}")
# at large t the weights all sit near 1/n; their departure from uniform is
# what carries information, and that is what half precision loses first
