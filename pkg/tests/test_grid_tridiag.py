import numpy as np
import pytest

from fpcontrol.grid import Grid4D
from fpcontrol.tridiag import TridiagonalBreakdown, thomas_solve, transpose_bands


class TestGrid4D:
    def test_spacing_and_shape(self):
        g = Grid4D.cube(0.0, 6.0, 13)
        assert g.h == pytest.approx(0.5)
        assert g.shape == (13, 13, 13, 13)
        assert g.cell_count() == 13**4

    def test_rejects_mismatched_spacing(self):
        with pytest.raises(ValueError, match="identical"):
            Grid4D(lo=(0, 0, 0, 0), hi=(6, 6, 6, 3), npts=(13, 13, 13, 13))

    def test_rejects_tiny_axes(self):
        with pytest.raises(ValueError, match="3 nodes"):
            Grid4D(lo=(0, 0, 0, 0), hi=(6, 6, 6, 6), npts=(13, 13, 13, 2))

    def test_integrates_constants_exactly(self):
        g = Grid4D.cube(0.0, 6.0, 9)
        assert g.integrate(np.ones(g.shape)) == pytest.approx(6.0**4, rel=1e-13)

    def test_axis_weights_sum_to_length(self):
        g = Grid4D.cube(0.0, 6.0, 11)
        assert g.axis_weights(2).sum() == pytest.approx(6.0)

    def test_mean_of_uniform_density_is_center(self):
        g = Grid4D.cube(0.0, 6.0, 9)
        f = np.ones(g.shape)
        f /= g.integrate(f)
        assert np.allclose(g.mean_position(f), [3.0, 3.0, 3.0, 3.0], atol=1e-12)

    def test_marginal_of_product_density(self):
        g = Grid4D.cube(0.0, 6.0, 9)
        parts = []
        f = np.ones(g.shape)
        for i in range(4):
            gi = np.exp(-0.5 * (g.axis(i) - 2.0 - 0.3 * i) ** 2)
            gi /= np.sum(g.axis_weights(i) * gi)
            parts.append(gi)
            f = f * g.broadcast_axis(i, gi)
        for i in range(4):
            assert np.allclose(g.marginal(f, i), parts[i], rtol=1e-12)

    def test_contains(self):
        g = Grid4D.cube(0.0, 6.0, 9)
        assert g.contains([0.0, 6.0, 3.0, 1.0])
        assert not g.contains([-0.1, 3.0, 3.0, 3.0])


class TestThomas:
    def _random_system(self, rng, batch, n):
        lo = rng.uniform(-1.0, 0.0, batch + (n,))
        up = rng.uniform(-1.0, 0.0, batch + (n,))
        lo[..., 0] = 0.0
        up[..., -1] = 0.0
        di = 2.5 + np.abs(lo) + np.abs(up)
        rhs = rng.normal(size=batch + (n,))
        return lo, di, up, rhs

    def _dense(self, lo, di, up):
        n = di.shape[-1]
        mat = np.diag(di)
        mat += np.diag(lo[1:], -1)
        mat += np.diag(up[:-1], 1)
        return mat

    def test_matches_dense_solve(self, rng):
        lo, di, up, rhs = self._random_system(rng, (), 17)
        x = thomas_solve(lo, di, up, rhs)
        expected = np.linalg.solve(self._dense(lo, di, up), rhs)
        assert np.allclose(x, expected, rtol=1e-12, atol=1e-13)

    def test_batched_matches_loop(self, rng):
        lo, di, up, rhs = self._random_system(rng, (5, 4), 9)
        x = thomas_solve(lo, di, up, rhs)
        for idx in np.ndindex(5, 4):
            expected = np.linalg.solve(self._dense(lo[idx], di[idx], up[idx]), rhs[idx])
            assert np.allclose(x[idx], expected, rtol=1e-11, atol=1e-12)

    def test_broadcast_bands_against_full(self, rng):
        lo, di, up, _ = self._random_system(rng, (), 11)
        rhs = rng.normal(size=(6, 11))
        x = thomas_solve(lo, di, up, rhs)
        full = thomas_solve(np.broadcast_to(lo, (6, 11)), np.broadcast_to(di, (6, 11)),
                            np.broadcast_to(up, (6, 11)), rhs)
        assert np.array_equal(x, full)

    def test_transpose_bands_match_dense_transpose(self, rng):
        lo, di, up, rhs = self._random_system(rng, (), 13)
        lo_t, di_t, up_t = transpose_bands(lo, di, up)
        x = thomas_solve(lo_t, di_t, up_t, rhs)
        expected = np.linalg.solve(self._dense(lo, di, up).T, rhs)
        assert np.allclose(x, expected, rtol=1e-12, atol=1e-13)

    def test_breakdown_reports_stage(self):
        with pytest.raises(TridiagonalBreakdown):
            thomas_solve(np.zeros(3), np.zeros(3), np.zeros(3), np.ones(3))
