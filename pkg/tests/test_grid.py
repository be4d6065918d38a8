import numpy as np
import pytest

from gpwkb.grid import (ComplexField, Grid, GridError, RealField, boundary_trace, deriv, deriv_periodic,
                        divergence, gradient_y, gradient_z, integrate, laplacian, norm, read_field_csv,
                        trace_array, write_field_csv)


def field(grid, fn):
    return RealField(grid, fn(grid.z))


class TestGrid:
    def test_nodes(self):
        g = Grid(4.0, 81)
        assert g.z[0] == 0.0 and g.z[-1] == 4.0
        assert g.dz == pytest.approx(0.05)
        assert g.shape == (81,)
        assert not g.has_y

    def test_tangential(self):
        g = Grid(2.0, 21, y_max=1.0, ny=8)
        assert g.shape == (8, 21)
        assert g.dy == pytest.approx(0.125)
        assert g.y[-1] < g.y_max  # periodic: last node excluded

    def test_invalid(self):
        with pytest.raises(GridError):
            Grid(-1.0, 10)
        with pytest.raises(GridError):
            Grid(1.0, 1)
        with pytest.raises(GridError):
            Grid(1.0, 10, y_max=1.0)

    def test_refined(self):
        g = Grid(1.0, 11).refined(2)
        assert g.nz == 21 and g.dz == pytest.approx(0.05)


class TestFields:
    def test_read_only(self):
        f = RealField(Grid(1.0, 5), np.zeros(5))
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            RealField(Grid(1.0, 5), np.zeros(6))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            ComplexField(Grid(1.0, 3), np.array([0, np.nan, 0]))


class TestLaplacian:
    def test_quadratic_exact(self):
        g = Grid(2.0, 41)
        out = laplacian(field(g, lambda z: z ** 2))
        np.testing.assert_allclose(out.values[1:-1], 2.0, atol=1e-10)

    def test_constant(self):
        g = Grid(2.0, 41)
        np.testing.assert_allclose(laplacian(field(g, lambda z: 3.0 + 0 * z)).values, 0.0, atol=1e-10)

    def test_sine_self_convergence(self):
        L = 3.0

        def err(n):
            g = Grid(L, n)
            f = field(g, lambda z: np.sin(np.pi * z / L))
            return np.max(np.abs(laplacian(f).values[1:-1] + (np.pi / L) ** 2 * f.values[1:-1]))

        ratio = err(41) / err(81)
        assert ratio == pytest.approx(4.0, rel=0.05)

    def test_dirichlet_rows(self):
        g = Grid(1.0, 11)
        out = laplacian(field(g, np.exp), bc="dirichlet")
        assert out.values[0] == 0.0 and out.values[-1] == 0.0

    def test_too_small(self):
        with pytest.raises(GridError):
            laplacian(RealField(Grid(1.0, 2), np.zeros(2)))

    def test_fourth_order(self):
        errs = []
        for n in (41, 81):
            g = Grid(1.0, n)
            errs.append(np.max(np.abs(laplacian(field(g, np.sin), order=4).values + np.sin(g.z))))
        assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.3)


class TestGradient:
    def test_linear(self):
        g = Grid(1.0, 11)
        np.testing.assert_allclose(gradient_z(field(g, lambda z: 3 * z)).values, 3.0, atol=1e-12)

    def test_constant(self):
        g = Grid(1.0, 11)
        np.testing.assert_allclose(gradient_z(field(g, lambda z: 2 + 0 * z)).values, 0.0, atol=1e-12)

    def test_exponential_self_convergence(self):
        def err(n):
            g = Grid(2.0, n)
            return np.max(np.abs(gradient_z(field(g, lambda z: np.exp(-z))).values + np.exp(-g.z)))

        assert err(41) / err(81) == pytest.approx(4.0, rel=0.1)

    def test_tangential_and_divergence(self):
        g = Grid(1.0, 41, y_max=2 * np.pi, ny=32)
        Y, Zm = g.mesh()
        fy = RealField(g, np.sin(Y))
        np.testing.assert_allclose(gradient_y(fy, order=4).values, np.cos(Y), atol=1e-4)
        fz = RealField(g, Zm ** 2)
        np.testing.assert_allclose(divergence(fz, fy, order=4).values, 2 * Zm + np.cos(Y), atol=1e-4)

    def test_periodic_spectral_like(self):
        y = 2 * np.pi * np.arange(64) / 64
        u = np.sin(y)[:, None]
        np.testing.assert_allclose(deriv_periodic(u, y[1], 2, order=4, axis=0), -u, atol=1e-5)


class TestTrace:
    def test_constant(self):
        tr = boundary_trace(field(Grid(1.0, 21), lambda z: 2.0 + 0 * z), 3)
        np.testing.assert_allclose(tr.values[0], [2.0, 0, 0, 0], atol=1e-9)
        assert tr.max_order == 3

    def test_linear(self):
        tr = boundary_trace(field(Grid(1.0, 21), lambda z: z), 1)
        np.testing.assert_allclose(tr.values[0], [0.0, 1.0], atol=1e-12)

    def test_exponential(self):
        g = Grid(2.0, 401)
        vals = trace_array(np.exp(-g.z), g.dz, 4)
        np.testing.assert_allclose(vals, [(-1.0) ** j for j in range(5)], atol=5e-5)

    def test_insufficient_nodes(self):
        with pytest.raises(GridError):
            trace_array(np.zeros(6), 0.1, 3)


class TestNorms:
    def test_unit(self):
        g = Grid(3.0, 31)
        assert norm(field(g, lambda z: 1 + 0 * z)) == pytest.approx(np.sqrt(3.0))

    def test_zero(self):
        f = field(Grid(1.0, 11), lambda z: 0 * z)
        for kind in ("L2", "sup", "H1"):
            assert norm(f, kind) == 0.0

    def test_sine(self):
        L = 2.0
        f = field(Grid(L, 201), lambda z: np.sin(np.pi * z / L))
        assert norm(f) == pytest.approx(np.sqrt(L / 2), abs=1e-4)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            norm(field(Grid(1.0, 11), lambda z: z), "L7")

    def test_periodic_integral(self):
        g = Grid(1.0, 11, y_max=2.0, ny=8)
        assert integrate(np.ones(g.shape), g) == pytest.approx(2.0)


class TestIO:
    def test_roundtrip_complex(self, tmp_path):
        g = Grid(1.0, 7, y_max=1.0, ny=3)
        rng = np.random.default_rng(0)
        f = ComplexField(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
        write_field_csv(tmp_path / "f.csv", f)
        back = read_field_csv(tmp_path / "f.csv", g)
        np.testing.assert_array_equal(back.values, f.values)
        assert open(tmp_path / "f.csv").readline().strip() == "z,y,re,im"

    def test_roundtrip_real(self, tmp_path):
        g = Grid(1.0, 5)
        f = RealField(g, np.linspace(0, 1, 5) / 3)
        write_field_csv(tmp_path / "r.csv", f)
        np.testing.assert_array_equal(read_field_csv(tmp_path / "r.csv", g).values, f.values)


def test_deriv_weights_exact_on_polynomials():
    z = np.linspace(0, 1, 11)
    np.testing.assert_allclose(deriv(z ** 3, z[1], 2, order=4), 6 * z, atol=1e-9)
