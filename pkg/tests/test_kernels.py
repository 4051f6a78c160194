import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from condwalk import _kernels
from condwalk._kernels import MARTINGALE_SLAB, WALK_SLAB, map_slabs, pyref
from condwalk.exact import walk_lattice
from condwalk.martingale import martingale_lattice, solve_poisson

_core = _kernels._core
needs_core = pytest.mark.skipif(_core is None,
                                reason="compiled extension not built")

A_SUPPORT = np.array([-0.5, 0.5])
A_CUM = np.array([0.5, 1.0])
B_SUPPORT = np.array([-1.0, 1.0])
B_CUM = np.array([0.5, 1.0])


def walk_args(chain4, kill=True):
    p_cum = chain4.p_cum
    _, k0, shifts = walk_lattice(chain4, Fraction(2))
    return (0x5EED, 7, 500, 0, k0, np.array(shifts, np.int64), p_cum,
            [1, 4, 16, 64], kill)


class TestBackendSelection:
    def test_backend_reported(self):
        assert _kernels.BACKEND in ("compiled", "python")
        assert (_kernels.BACKEND == "compiled") == (_core is not None)

    def test_affine_rd_always_pyref(self):
        # no compiled twin exists for the d-dimensional walk
        assert _kernels.affine_rd_walk is pyref.affine_rd_walk

    def test_force_pyref_env(self):
        code = ("import condwalk._kernels as k; "
                "print(k.BACKEND, k.finite_walk.__module__)")
        env = dict(os.environ, CONDWALK_FORCE_PYREF="1")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        assert out.stdout.split() == ["python", "condwalk._kernels.pyref"]


@needs_core
class TestCompiledEquality:
    def test_finite_walk(self, chain4):
        for kill in (True, False):
            a = pyref.finite_walk(*walk_args(chain4, kill))
            b = _core.finite_walk(*walk_args(chain4, kill))
            for x, y in zip(a, b):
                assert np.array_equal(np.asarray(x), np.asarray(y))

    @pytest.mark.parametrize("b_mode", [0, 1])
    def test_affine1d_walk(self, b_mode):
        args = (0x5EED, 3, 400, 0.25, 2.0, A_SUPPORT, A_CUM, b_mode,
                -1.0, 1.0, B_SUPPORT, B_CUM, [2, 8, 32], True)
        a = pyref.affine1d_walk(*args)
        b = _core.affine1d_walk(*args)
        for x, y in zip(a, b):
            assert np.array_equal(np.asarray(x), np.asarray(y))

    @pytest.mark.parametrize("stop_rule", [0, 1, 2])
    def test_finite_martingale(self, chain4, stop_rule):
        sol = solve_poisson(chain4)
        lc, k0L, shifts, theta, r = martingale_lattice(chain4, sol,
                                                       Fraction(3))
        args = (0xABCD, 11, 400, 2, k0L, np.array(shifts, np.int64),
                np.array(theta, np.int64), np.array(r, np.int64),
                chain4.p_cum, 5000, stop_rule)
        a = pyref.finite_martingale(*args)
        b = _core.finite_martingale(*args)
        for x, y in zip(a[:7], b[:7]):
            assert np.array_equal(np.asarray(x), np.asarray(y))
        assert a[7] == b[7] == 0

    @pytest.mark.parametrize("stop_rule", [0, 1, 2])
    def test_affine1d_martingale(self, stop_rule):
        args = (0xABCD, 5, 300, 0.25, 2.0, A_SUPPORT, A_CUM, 0, -1.0, 1.0,
                B_SUPPORT, B_CUM, 2.0, 1.0, 4000, stop_rule)
        a = pyref.affine1d_martingale(*args)
        b = _core.affine1d_martingale(*args)
        for x, y in zip(a[:7], b[:7]):
            assert np.array_equal(np.asarray(x), np.asarray(y))
        assert a[7] == b[7]

    def test_dp_step_float(self, chain4):
        rng = np.random.default_rng(1)
        mass = rng.random((4, 200))
        mass[:, :30] = 0.0
        # keep headroom above the frontier as the DP driver does, so no
        # mass can shift past the top of the buffer
        mass[:, -24:] = 0.0
        _, _, shifts = walk_lattice(chain4, Fraction(2))
        shifts = np.array(shifts, np.int64)
        out_a = np.zeros_like(mass)
        out_b = np.zeros_like(mass)
        exit_a = pyref.dp_step_float(mass, chain4.p_float, shifts, 25, out_a)
        exit_b = _core.dp_step_float(mass, chain4.p_float, shifts, 25, out_b)
        assert np.array_equal(out_a, out_b)
        # scalar reduction order differs between the backends
        assert exit_a == pytest.approx(exit_b, abs=1e-12)
        # stochastic rows conserve mass up to the exit leak
        total_in = mass.sum()
        assert out_b.sum() + exit_b == pytest.approx(total_in, rel=1e-12)


class TestMapSlabs:
    def test_covers_range_in_slab_order(self):
        calls = []

        def fn(start, count):
            calls.append((start, count))
            return (start, count)

        results = map_slabs(fn, 5 * 1000 + 17, threads=4, slab=1000)
        assert results == calls or sorted(results) == sorted(calls)
        starts = [s for s, _ in results]
        counts = [c for _, c in results]
        assert starts == sorted(starts)
        assert sum(counts) == 5017
        assert starts[0] == 0
        assert all(c <= 1000 for c in counts)

    def test_thread_count_does_not_change_results(self):
        def fn(start, count):
            return list(range(start, start + count))

        one = map_slabs(fn, 4096, threads=1, slab=512)
        many = map_slabs(fn, 4096, threads=8, slab=512)
        assert one == many

    def test_slab_constants(self):
        assert WALK_SLAB == 1 << 16
        assert MARTINGALE_SLAB == 1 << 14
