import bisect
import math

import numpy as np
import pytest

from logavgexp.pooling import lae_windows
from logavgexp.precision import (
    DEFAULT_T_GRID,
    KernelVariant,
    default_sweep_windows,
    lae_kernel,
    lae_precision_sweep,
    lae_with_grads,
    lse_kernel,
    round_half,
    round_single,
    stable_logsumexp,
)
from logavgexp.tensor import PrecisionTag


def _decode_half(bits: int) -> float:
    sign = -1.0 if bits >> 15 else 1.0
    exp = (bits >> 10) & 0x1F
    frac = bits & 0x3FF
    if exp == 0x1F:
        return sign * math.inf if frac == 0 else math.nan
    if exp == 0:
        return sign * math.ldexp(frac, -24)
    return sign * math.ldexp(1024 + frac, exp - 25)


# all finite non-negative binary16 values with their bit patterns, ascending
_POSITIVE = sorted((_decode_half(b), b) for b in range(0x7C00))
_VALUES = [v for v, _ in _POSITIVE]


def oracle_round_half(x: float) -> float:
    """Nearest binary16 by search over the enumerated value set, ties to even."""
    if math.isnan(x):
        return math.nan
    mag = abs(x)
    # beyond max + half an ulp (65504 + 16) the nearest choice is infinity
    if mag >= 65520.0:
        return math.copysign(math.inf, x)
    i = bisect.bisect_left(_VALUES, mag)
    if i < len(_VALUES) and _VALUES[i] == mag:
        return math.copysign(mag, x)
    lo, hi = _POSITIVE[i - 1], _POSITIVE[i]
    dlo, dhi = mag - lo[0], hi[0] - mag
    if dlo < dhi:
        pick = lo
    elif dhi < dlo:
        pick = hi
    else:
        pick = lo if lo[1] % 2 == 0 else hi
    return math.copysign(pick[0], x)


class TestRoundHalf:
    @pytest.mark.parametrize("x, expected", [
        (1 + 2 ** -11, 1.0),
        (1 + 3 * 2 ** -11, 1 + 2 ** -9),
        (65504.0, 65504.0),
        (65519.99, 65504.0),
        (65520.0, math.inf),
        (-65520.0, -math.inf),
        (0.0, 0.0),
        (2 ** -24, 2 ** -24),
        (2 ** -25, 0.0),
        (1.5 * 2 ** -25, 2 ** -24),
    ])
    def test_examples(self, x, expected):
        assert round_half(x) == expected

    def test_nan(self):
        assert math.isnan(round_half(math.nan))

    def test_against_enumeration(self, rng):
        xs = np.concatenate([
            rng.normal(0, 1, 3000),
            rng.normal(0, 1e4, 2000),
            rng.uniform(-1e-4, 1e-4, 2000),
            [v + d for v in _VALUES[::97] for d in (0.0,)],
        ])
        # exact midpoints between neighbours exercise ties-to-even
        mids = [(a + b) / 2 for a, b in zip(_VALUES[::53], _VALUES[1::53])]
        for x in np.concatenate([xs, mids, -np.asarray(mids)]):
            assert round_half(float(x)) == oracle_round_half(float(x)), x

    def test_idempotent_and_monotone(self, rng):
        xs = np.sort(rng.normal(0, 100, 5000))
        r = round_half(xs)
        np.testing.assert_array_equal(round_half(r), r)
        assert np.all(np.diff(r) >= 0)

    def test_single(self):
        assert round_single(1 + 2 ** -24) == 1.0
        assert round_single(1 + 2 ** -22) == 1 + 2 ** -22


class TestKernels:
    def test_stable_large(self):
        assert lse_kernel([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2), abs=1e-12)
        assert lse_kernel([1000.0, 1000.0], KernelVariant.NAIVE) == math.inf

    def test_singleton_zero(self):
        for variant in KernelVariant:
            for prec in PrecisionTag:
                assert lse_kernel([0.0], variant, prec) == 0.0

    def test_stable_matches_naive(self, rng):
        for _ in range(500):
            z = rng.normal(0, 5, size=int(rng.integers(1, 65)))
            a = lse_kernel(z, KernelVariant.STABLE)
            b = lse_kernel(z, KernelVariant.NAIVE)
            assert abs(a - b) <= 1e-12 * max(1.0, abs(b))

    def test_stable_finite_extremes(self, rng):
        for _ in range(100):
            z = rng.normal(0, 1, size=16)
            z[rng.integers(0, 16)] = 1e4
            z[rng.integers(0, 16)] = -1e4
            assert np.isfinite(lse_kernel(z))
            assert np.isfinite(lse_kernel(-np.abs(z)))

    def test_vectorised_matches_numpy_path(self, rng):
        z = rng.normal(size=(10, 20))
        np.testing.assert_allclose(lse_kernel(z), stable_logsumexp(z), rtol=1e-14)
        np.testing.assert_allclose(lae_kernel(z, 3.0), lae_windows(z, np.full(10, 3.0)),
                                   rtol=1e-13)

    def test_half_rounds_every_step(self):
        # each partial sum of 2048 + 1 + 1 + ... stays 2048 in binary16
        z = np.log(np.array([2048.0] + [1.0] * 8))
        assert lse_kernel(z, precision=PrecisionTag.HALF) == round_half(math.log(2048))
        assert lse_kernel(z) == pytest.approx(math.log(2056), abs=1e-12)

    def test_naive_half_overflows_early(self):
        z = [12.0, 12.0]
        assert lse_kernel(z, KernelVariant.NAIVE, PrecisionTag.HALF) == math.inf
        assert np.isfinite(lse_kernel(z, KernelVariant.STABLE, PrecisionTag.HALF))

    def test_grads_double_match_closed_form(self, rng):
        z = rng.normal(size=(5, 30))
        val, p, dlt = lae_with_grads(z, 2.0)
        e = np.exp(z / 2.0)
        ref_p = e / e.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(p, ref_p, rtol=1e-13)
        np.testing.assert_allclose(dlt, val - (z * ref_p).sum(axis=1), atol=1e-13)


class TestSweep:
    def test_empty_grids(self):
        w = default_sweep_windows(4, 8)
        with pytest.raises(ValueError):
            lae_precision_sweep(w, [], ["half"])
        with pytest.raises(ValueError):
            lae_precision_sweep(w, [1.0], [])

    def test_rows(self):
        rows = lae_precision_sweep(default_sweep_windows(20, 16), [1.0, 8.0], ["half", "single"])
        assert [(r.t, r.precision) for r in rows] == [
            (1.0, "half"), (1.0, "single"), (8.0, "half"), (8.0, "single")]
        for r in rows:
            assert r.grad_input_median <= r.grad_input_max

    def test_double_is_exact_reference(self):
        rows = lae_precision_sweep(default_sweep_windows(10, 16), [1.0, 64.0], ["double"])
        for r in rows:
            assert r.forward_max == 0.0 and r.grad_input_max == 0.0

    def test_half_t1_small(self):
        (row,) = lae_precision_sweep(default_sweep_windows(), [1.0], ["half"])
        assert row.grad_input_median < 1e-2
        assert row.grad_signal_median < 1e-2

    def test_half_signal_error_grows_with_t(self):
        rows = lae_precision_sweep(default_sweep_windows(), DEFAULT_T_GRID, ["half"])
        med = [r.grad_signal_median for r in rows]
        assert all(b >= a for a, b in zip(med, med[1:])), med

    def test_deterministic(self):
        a = lae_precision_sweep(default_sweep_windows(), [4.0], ["half"])
        b = lae_precision_sweep(default_sweep_windows(), [4.0], ["half"])
        assert a == b
