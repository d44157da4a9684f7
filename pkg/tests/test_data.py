import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from invertkit.data import SignalTable, TableError, decimate, dumps_csv, grid_points, load_csv, save_csv, synth
from invertkit.expr import parse_sexpr
from invertkit.gp import cost
from invertkit.interval import Box

from conftest import SYSTEM_2D, WAVELET, wavelet


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestCsv:
    def test_load_simple(self, tmp_path):
        t = load_csv(write(tmp_path, "x,y\n0,1\n1,2\n2,4\n"))
        assert t.columns == ["x", "y"] and t.n_inputs == 1 and len(t) == 3
        assert t.outputs[:, 0].tolist() == [1.0, 2.0, 4.0]

    def test_explicit_inputs(self, tmp_path):
        t = load_csv(write(tmp_path, "a,b,c\n0,1,2\n3,4,5\n"), n_inputs=1)
        assert t.inputs.shape == (2, 1) and t.outputs.shape == (2, 2)

    def test_bad_cell_names_row(self, tmp_path):
        with pytest.raises(TableError, match="row 3"):
            load_csv(write(tmp_path, "x,y\n0,1\n1,?\n"))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(TableError, match="row 2"):
            load_csv(write(tmp_path, "x,y\n0,1,2\n1,2\n"))

    def test_missing_header(self, tmp_path):
        with pytest.raises(TableError, match="header"):
            load_csv(write(tmp_path, "0,1\n1,2\n2,3\n"))
        with pytest.raises(TableError, match="header"):
            load_csv(write(tmp_path, ""))

    def test_non_finite(self, tmp_path):
        with pytest.raises(TableError, match="row 2"):
            load_csv(write(tmp_path, "x,y\nnan,1\n1,2\n"))

    def test_too_short(self, tmp_path):
        with pytest.raises(TableError):
            load_csv(write(tmp_path, "x,y\n0,1\n"))

    @settings(max_examples=100)
    @given(arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(2, 4)), elements=st.floats(-1e300, 1e300)))
    def test_round_trip(self, tmp_path_factory, rows):
        cols = [f"c{i}" for i in range(rows.shape[1])]
        t = SignalTable(cols, rows, 1)
        p = tmp_path_factory.mktemp("rt") / "t.csv"
        save_csv(t, p)
        back = load_csv(p)
        assert back.columns == cols
        assert np.array_equal(back.rows, rows)
        assert dumps_csv(back) == p.read_text(encoding="utf-8")


class TestSynth:
    def test_noiseless_wavelet(self):
        t = synth(WAVELET, [(-3, 3)], 601)
        assert len(t) == 601 and t.columns == ["x", "f"]
        assert t.inputs[0, 0] == -3.0 and t.inputs[-1, 0] == 3.0
        for x, y in t.rows[::37]:
            assert y == pytest.approx(wavelet(x), abs=1e-15)
        assert cost(parse_sexpr(WAVELET, 1), t.dataset()) == 0.0

    def test_noise_bound(self):
        clean = synth(WAVELET, [(-3, 3)], 601)
        noisy = synth(WAVELET, [(-3, 3)], 601, noise_half_width=0.25, seed=3)
        diff = noisy.outputs - clean.outputs
        assert np.all(np.abs(diff) <= 0.25)
        assert np.abs(diff).max() > 0.2
        assert abs(diff.mean()) < 0.03

    def test_seeded(self):
        a = synth(WAVELET, [(-3, 3)], 101, 0.25, seed=9)
        b = synth(WAVELET, [(-3, 3)], 101, 0.25, seed=9)
        c = synth(WAVELET, [(-3, 3)], 101, 0.25, seed=10)
        assert dumps_csv(a) == dumps_csv(b) != dumps_csv(c)

    def test_grid_is_lexicographic(self):
        pts = grid_points(Box([(0, 1), (10, 12)]), 3)
        assert pts[:4].tolist() == [[0, 10], [0, 11], [0, 12], [0.5, 10]]
        assert len(pts) == 9

    def test_multi_output(self):
        t = synth(SYSTEM_2D, [(-1, 1), (-1, 1)], 5)
        assert t.columns == ["x", "y", "f0", "f1"] and t.n_inputs == 2 and len(t) == 25

    def test_random_mode(self):
        t = synth("(* x y)", [(0, 1), (2, 3)], 10, mode="random", seed=1)
        assert len(t) == 100
        assert np.all((t.inputs[:, 0] >= 0) & (t.inputs[:, 0] <= 1))
        assert np.all((t.inputs[:, 1] >= 2) & (t.inputs[:, 1] <= 3))

    def test_invalid_point_listed(self):
        with pytest.raises(ValueError, match=r"\(0\.0,\)"):
            synth("(/ 1 x)", [(-1, 1)], 3)

    @pytest.mark.parametrize("kw", [{"m": 1}, {"m": 5, "noise_half_width": -1}, {"m": 5, "mode": "sobol"}])
    def test_bad_args(self, kw):
        with pytest.raises(ValueError):
            synth("x", [(0, 1)], **kw)


class TestDecimate:
    def table(self, n):
        xs = np.arange(n, dtype=float)
        return SignalTable(["x", "y"], np.column_stack([xs, xs * 2]), 1)

    def test_identity(self):
        t = self.table(17)
        assert np.array_equal(decimate(t, 1).rows, t.rows)

    def test_601_by_10(self):
        d = decimate(self.table(601), 10)
        assert d.inputs[:, 0].tolist() == list(range(0, 601, 10))
        assert len(d) == 61

    def test_keeps_last(self):
        d = decimate(self.table(25), 10)
        assert d.inputs[:, 0].tolist() == [0, 10, 20, 24]

    def test_too_few(self):
        with pytest.raises(TableError):
            decimate(self.table(5), 10)

    @given(st.integers(2, 200), st.integers(1, 30))
    def test_subsequence(self, n, k):
        t = self.table(n)
        if len(range(0, n, k)) < 2:
            return
        d = decimate(t, k)
        xs = d.inputs[:, 0]
        assert xs[0] == 0 and xs[-1] == n - 1
        assert np.all(np.diff(xs) > 0)
        assert set(xs) <= set(t.inputs[:, 0])
