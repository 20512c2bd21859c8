"""Grid container, sweep order, connectivity and the file formats."""

import struct

import numpy as np
import pytest

import rwass
from rwass.errors import ContractError, InputError
from rwass.fields import (
    freudenthal_offsets,
    neighbor_matrix,
    sweep_order,
    vertex_coords,
    vertex_index,
)

from helpers import random_grid
from oracles import oracle_neighbors


class TestScalarGrid:
    def test_basic_views(self):
        g = rwass.ScalarGrid((2, 3), [0, 1, 2, 3, 4, 5])
        assert g.size == 6
        assert g.ndim == 2
        assert g.values.dtype == np.float64
        assert g.shaped().shape == (2, 3)
        assert g.value_range() == 5.0
        assert g.spacing == (1.0, 1.0)

    def test_spacing_is_validated(self):
        g = rwass.ScalarGrid((2, 2), np.zeros(4), spacing=(0.5, 2.0))
        assert g.spacing == (0.5, 2.0)
        with pytest.raises(ContractError, match="bad spacing"):
            rwass.ScalarGrid((2, 2), np.zeros(4), spacing=(1.0,))
        with pytest.raises(ContractError, match="bad spacing"):
            rwass.ScalarGrid((2, 2), np.zeros(4), spacing=(1.0, 0.0))

    def test_axis_count_bounds(self):
        with pytest.raises(ContractError, match="1..3 axes"):
            rwass.ScalarGrid((2, 2, 2, 2), np.zeros(16))
        with pytest.raises(ContractError, match="extents must be positive"):
            rwass.ScalarGrid((0, 3), np.zeros(0))

    def test_value_count_must_match(self):
        with pytest.raises(ContractError, match="does not match"):
            rwass.ScalarGrid((2, 3), np.zeros(5))

    def test_values_must_be_finite(self):
        with pytest.raises(InputError, match="must be finite"):
            rwass.ScalarGrid((2,), [0.0, np.nan])
        with pytest.raises(InputError, match="must be finite"):
            rwass.ScalarGrid((2,), [0.0, np.inf])

    def test_vertex_coords_roundtrip(self, rng):
        for _ in range(20):
            g = random_grid(rng)
            for v in range(g.size):
                assert vertex_index(g, vertex_coords(g, v)) == v


class TestSweepOrder:
    def test_min_order_breaks_ties_by_id(self):
        g = rwass.ScalarGrid((6,), [1.0, 0.0, 1.0, 0.0, 2.0, 1.0])
        want = sorted(range(6), key=lambda v: (g.values[v], v))
        assert sweep_order(g, "min").tolist() == want

    def test_max_order_is_exact_reverse(self, rng):
        for _ in range(10):
            g = random_grid(rng)
            lo = sweep_order(g, "min")
            hi = sweep_order(g, "max")
            assert hi.tolist() == lo.tolist()[::-1]

    def test_bad_kind(self):
        g = rwass.ScalarGrid((2,), [0.0, 1.0])
        with pytest.raises(ContractError, match="kind must be 'min' or 'max'"):
            sweep_order(g, "up")


class TestConnectivity:
    def test_offset_counts(self):
        assert len(freudenthal_offsets(1)) == 2
        assert len(freudenthal_offsets(2)) == 6
        assert len(freudenthal_offsets(3)) == 14

    def test_offsets_closed_under_negation(self):
        for ndim in (1, 2, 3):
            offs = {tuple(o) for o in freudenthal_offsets(ndim)}
            assert (0,) * ndim not in offs
            assert offs == {tuple(-c for c in o) for o in offs}

    def test_bad_ndim(self):
        with pytest.raises(ContractError, match="ndim must be 1..3"):
            freudenthal_offsets(4)

    @pytest.mark.parametrize("dims", [(5,), (3, 4), (2, 3, 2)])
    def test_neighbors_match_bruteforce(self, dims):
        g = rwass.ScalarGrid(dims, np.zeros(int(np.prod(dims))))
        adj = oracle_neighbors(dims)
        table = neighbor_matrix(g)
        for v in range(g.size):
            assert sorted(rwass.neighbors(g, v)) == sorted(adj[v])
            assert sorted(int(u) for u in table[v] if u >= 0) == sorted(adj[v])

    def test_neighbors_vertex_out_of_range(self):
        g = rwass.ScalarGrid((2, 2), np.zeros(4))
        with pytest.raises(ContractError, match="out of range"):
            rwass.neighbors(g, 4)


class TestRsfFormat:
    def test_roundtrip_f64(self, tmp_path, rng):
        g = random_grid(rng)
        path = tmp_path / "field.rsf"
        rwass.save_rsf(g, path)
        back = rwass.load_rsf(path)
        assert back.dims == g.dims
        assert np.array_equal(back.values, g.values)

    def test_roundtrip_f32_rounds(self, tmp_path):
        g = rwass.ScalarGrid((3,), [0.1, 0.2, 0.3])
        path = tmp_path / "field.rsf"
        rwass.save_rsf(g, path, dtype="f32")
        back = rwass.load_rsf(path)
        assert np.array_equal(back.values, g.values.astype(np.float32).astype(np.float64))

    def test_bad_dtype_name(self, tmp_path):
        g = rwass.ScalarGrid((2,), [0.0, 1.0])
        with pytest.raises(ContractError, match="dtype must be"):
            rwass.save_rsf(g, tmp_path / "x.rsf", dtype="f16")

    @pytest.mark.parametrize(
        "blob,message",
        [
            (b"XXXX" + bytes(10), "bad magic at byte 0"),
            (b"RSF1", "truncated header at byte 4"),
            (b"RSF1" + struct.pack("<B", 4), "axis count 4 at byte 4"),
            (b"RSF1" + struct.pack("<B", 2) + b"\x01", "truncated extent list at byte 5"),
            (
                b"RSF1" + struct.pack("<BII", 2, 0, 3) + b"\x01",
                "zero extent at byte 5",
            ),
            (
                b"RSF1" + struct.pack("<BIB", 1, 2, 7) + bytes(16),
                "unknown value type 7 at byte 9",
            ),
            (
                b"RSF1" + struct.pack("<BIB", 1, 2, 1) + bytes(8),
                "payload at byte 10 holds 8 bytes, expected 16",
            ),
        ],
    )
    def test_malformed_files(self, tmp_path, blob, message):
        path = tmp_path / "bad.rsf"
        path.write_bytes(blob)
        with pytest.raises(InputError, match=message.replace("(", "\\(")):
            rwass.load_rsf(path)

    def test_non_finite_payload_names_offset(self, tmp_path):
        blob = (
            b"RSF1"
            + struct.pack("<BIB", 1, 2, 1)
            + struct.pack("<dd", 1.0, float("nan"))
        )
        path = tmp_path / "bad.rsf"
        path.write_bytes(blob)
        with pytest.raises(InputError, match="non-finite value at byte 18"):
            rwass.load_rsf(path)


class TestCsv:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("1.0,2.0,3.0\n4.0,5.0,6.0\n")
        g = rwass.load_csv(path)
        assert g.dims == (2, 3)
        assert g.values.tolist() == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("1,2\n\n3,4\n")
        assert rwass.load_csv(path).dims == (2, 2)

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("1,2\n3,oops\n")
        with pytest.raises(InputError, match="line 2"):
            rwass.load_csv(path)

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(InputError, match="row 2 has 1 columns, expected 2"):
            rwass.load_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("\n")
        with pytest.raises(InputError, match="no data rows"):
            rwass.load_csv(path)

    def test_non_finite(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("1,inf\n")
        with pytest.raises(InputError, match="non-finite value"):
            rwass.load_csv(path)


class TestSynth:
    def test_deterministic_per_seed(self):
        a = rwass.synth_hills((8, 8), seed=5)
        b = rwass.synth_hills((8, 8), seed=5)
        c = rwass.synth_hills((8, 8), seed=6)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_explicit_hill_peaks_where_asked(self):
        g = rwass.synth_hills((9, 9), hills=[((4, 4), 2.0, 1.5)])
        assert int(np.argmax(g.values)) == vertex_index(g, (4, 4))
        assert g.values.max() == pytest.approx(2.0)

    def test_center_axis_mismatch(self):
        with pytest.raises(ContractError, match="does not match 2 axes"):
            rwass.synth_hills((4, 4), hills=[((1.0,), 1.0, 1.0)])

    def test_width_must_be_positive(self):
        with pytest.raises(ContractError, match="width must be positive"):
            rwass.synth_hills((4, 4), hills=[((1.0, 1.0), 1.0, 0.0)])

    def test_noise_bounds_and_determinism(self):
        g = rwass.synth_hills((8, 8), seed=1)
        n1 = rwass.add_noise(g, 0.25, seed=9)
        n2 = rwass.add_noise(g, 0.25, seed=9)
        assert np.array_equal(n1.values, n2.values)
        assert np.max(np.abs(n1.values - g.values)) <= 0.25

    def test_noise_rejects_negative_eps(self):
        g = rwass.synth_hills((4, 4))
        with pytest.raises(ContractError, match="eps must be nonnegative"):
            rwass.add_noise(g, -0.1)
