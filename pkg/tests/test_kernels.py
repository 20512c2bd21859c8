"""The compiled extension and the numpy fallback compute the same thing."""

import os
import subprocess
import sys

import numpy as np
import pytest

import rwass
from rwass import _kernels_py as pure
from rwass.fields import neighbor_matrix, sweep_order
from rwass.regions import _pack_side, _padded_dims

import helpers

compiled = pytest.importorskip("rwass._kernels")


def side_args(t):
    # cost_matrix consumes keys, values, offsets, saddles, ext, dims, grid
    return (t[0], t[1], t[2], t[3], t[5], t[6], t[7])


class TestBackendSelection:
    def test_extension_is_active(self):
        assert rwass.COMPILED is True
        assert rwass.backend_name() == "compiled"

    def test_env_override_selects_fallback(self):
        env = dict(os.environ, RWASS_PURE="1")
        out = subprocess.run(
            [sys.executable, "-c", "import rwass; print(rwass.backend_name())"],
            capture_output=True,
            text=True,
            env=env,
            check=True,
        )
        assert out.stdout.strip() == "pure"


class TestKeys:
    def test_round_trip(self, rng):
        off = rng.integers(-(1 << 20), 1 << 20, size=(200, 3))
        for mod in (compiled, pure):
            keys = mod.pack_keys(off)
            assert np.array_equal(mod.unpack_keys(keys), off)
        assert np.array_equal(compiled.pack_keys(off), pure.pack_keys(off))

    def test_key_order_is_lexicographic(self, rng):
        off = rng.integers(-50, 50, size=(300, 3))
        keys = pure.pack_keys(off)
        assert np.array_equal(
            np.argsort(keys, kind="stable"),
            np.lexsort((off[:, 2], off[:, 1], off[:, 0])),
        )


class TestSweepParity:
    def test_events_bitwise_equal(self, rng):
        for _ in range(25):
            g = helpers.random_grid(rng, max_extent=5)
            nbr = neighbor_matrix(g)
            for kind in ("min", "max"):
                order = sweep_order(g, kind)
                pos = np.empty(g.size, dtype=np.int64)
                pos[order] = np.arange(g.size, dtype=np.int64)
                got = compiled.sweep(nbr, order, pos)
                want = pure.sweep(nbr, order, pos)
                for a, b in zip(got, want):
                    assert np.array_equal(a, b)


class TestCostParity:
    @pytest.mark.parametrize("q", [1.0, 2.0, 2.5])
    @pytest.mark.parametrize("bg", [0, 1])
    def test_ground_pow(self, rng, q, bg):
        a = helpers.small_member(rng).regions[0]
        b = helpers.small_member(rng).regions[0]
        args = (
            a.keys, a.values, b.keys, b.values,
            a.saddle_value, b.saddle_value, q, bg,
            a.padded_extremum(), b.padded_extremum(),
            _padded_dims(a.grid), _padded_dims(b.grid),
            a.grid.values, b.grid.values,
        )
        gc = compiled.ground_pow(*args)
        gp = pure.ground_pow(*args)
        assert gc == pytest.approx(gp, rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("q", [1.0, 2.0])
    @pytest.mark.parametrize("bg", [0, 1])
    def test_cost_matrix(self, rng, q, bg):
        ta = _pack_side(helpers.small_member(rng).regions)
        tb = _pack_side(helpers.small_member(rng).regions)
        Cc = compiled.cost_matrix(*side_args(ta), *side_args(tb), q, bg)
        Cp = pure.cost_matrix(*side_args(ta), *side_args(tb), q, bg)
        assert Cc.shape == Cp.shape
        assert np.allclose(Cc, Cp, rtol=1e-12, atol=1e-15)

    def test_empty_side(self, rng):
        ta = _pack_side([])
        tb = _pack_side(helpers.small_member(rng).regions)
        Cc = compiled.cost_matrix(*side_args(ta), *side_args(tb), 2.0, 0)
        assert Cc.shape == (0, len(tb[3]))

    @pytest.mark.parametrize("q", [1.0, 2.0, 3.0])
    def test_proj_vector(self, rng, q):
        t = _pack_side(helpers.small_member(rng).regions)
        pc = compiled.proj_vector(t[1], t[2], t[3], t[4], q)
        pp = pure.proj_vector(t[1], t[2], t[3], t[4], q)
        assert np.allclose(pc, pp, rtol=1e-12, atol=1e-15)

    def test_each_backend_is_exactly_symmetric(self, rng):
        a = helpers.small_member(rng).regions[0]
        b = helpers.small_member(rng).regions[0]
        for mod in (compiled, pure):
            fwd = mod.ground_pow(
                a.keys, a.values, b.keys, b.values,
                a.saddle_value, b.saddle_value, 2.0, 1,
                a.padded_extremum(), b.padded_extremum(),
                _padded_dims(a.grid), _padded_dims(b.grid),
                a.grid.values, b.grid.values,
            )
            rev = mod.ground_pow(
                b.keys, b.values, a.keys, a.values,
                b.saddle_value, a.saddle_value, 2.0, 1,
                b.padded_extremum(), a.padded_extremum(),
                _padded_dims(b.grid), _padded_dims(a.grid),
                b.grid.values, a.grid.values,
            )
            assert fwd == rev
