import numpy as np
import pytest

from gpwkb.corrector import (Background, GridMismatchError, apply_P, bernoulli_rhs, build_corrector, source_fa,
                             source_gphi, recover_amplitude, solve_linear_wave)
from gpwkb.grid import Grid, div_coef_grad, lap
from gpwkb.harness import ScenarioConfig, initial_data
from gpwkb.hierarchy import build_hierarchy
from gpwkb.limit import CFLError, DensityFloorError, solve_phi0

L = 2.0
T = 1.0


def flat(nz, T=T, courant=0.4):
    g = Grid(L, nz)
    n = int(np.ceil(T / (courant * g.dz)))
    return Background.flat(g, np.linspace(0, T, n + 1))


def mms_error(nz, case):
    bg = flat(nz)
    t, z = bg.t[:, None], bg.grid.z[None, :]
    if case == "sine":
        k = np.pi / L
        exact = np.sin(t) * np.sin(k * z)
        f = (-1 + k ** 2) * exact
        sol = solve_linear_wave(bg, f, init=(np.zeros(nz), np.sin(k * bg.grid.z)))
    else:
        exact = np.sin(t) * np.exp(-z)
        f = -2 * np.sin(t) * np.exp(-z)
        sol = solve_linear_wave(bg, f, g=np.sin(bg.t), g_far=np.sin(bg.t) * np.exp(-L),
                                init=(np.zeros(nz), np.exp(-bg.grid.z)))
    return np.max(np.abs(sol.phi - exact))


def wave_orders(case, sizes=(51, 101, 201)):
    errs = [mms_error(n, case) for n in sizes]
    return [np.log2(a / b) for a, b in zip(errs, errs[1:])]


def bump_background(nz=401, T=0.5):
    cfg = ScenarioConfig()
    g = Grid(8.0, nz)
    a00, p00 = initial_data(cfg, g)
    return solve_phi0(a00, p00, T, g)


class TestApplyP:
    def test_flat_is_wave_operator(self):
        bg = flat(101)
        rng = np.random.default_rng(1)
        f, ft, ftt = rng.normal(size=(3, 101))
        # every coupling term vanishes, leaving d_t^2 - div(grad)
        np.testing.assert_allclose(apply_P(bg, 3, f, ft, ftt), ftt - div_coef_grad(np.ones(101), f, bg.grid),
                                   atol=1e-9)
        z = bg.grid.z
        smooth = apply_P(bg, 3, np.sin(z), 0 * z, 0 * z)
        np.testing.assert_allclose(smooth[2:-2], -lap(np.sin(z), bg.grid)[2:-2], atol=1e-3)

    def test_constant_annihilated(self):
        traj = bump_background()
        bg = Background.from_trajectory(traj)
        c = np.full(bg.grid.nz, 0.7)
        assert np.max(np.abs(apply_P(bg, 10, c, 0 * c, 0 * c))) < 1e-12

    def test_manufactured_evaluation(self):
        k = np.pi / L
        errs = []
        for nz in (101, 201):
            bg = flat(nz)
            z, t = bg.grid.z, 0.3
            phi = np.sin(t) * np.sin(k * z)
            out = apply_P(bg, 0, phi, np.cos(t) * np.sin(k * z), -phi)
            # rows next to the wall compose one-sided stencils and are first order
            errs.append(np.max(np.abs(out - (-1 + k ** 2) * phi)[5:-5]))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)

    def test_shape_check(self):
        bg = flat(51)
        with pytest.raises(GridMismatchError):
            apply_P(bg, 0, np.zeros(50), np.zeros(50), np.zeros(50))


class TestLinearWave:
    def test_zero(self):
        sol = solve_linear_wave(flat(51), None)
        assert np.max(np.abs(sol.phi)) == 0.0

    @pytest.mark.parametrize("case", ["sine", "exp"])
    def test_manufactured_order(self, case):
        for order in wave_orders(case):
            assert order == pytest.approx(2.0, abs=0.2)

    def test_boundary_injection(self):
        bg = flat(51)
        sol = solve_linear_wave(bg, None, g=0.1 * np.sin(bg.t))
        np.testing.assert_array_equal(sol.phi[:, 0], 0.1 * np.sin(bg.t))

    def test_linearity(self):
        bg = flat(81)
        rng = np.random.default_rng(2)
        z = bg.grid.z
        f1 = np.outer(np.cos(bg.t), np.sin(np.pi * z / L))
        f2 = np.outer(bg.t, z * (L - z))
        g1, g2 = np.sin(bg.t), bg.t ** 2
        s1 = solve_linear_wave(bg, f1, g1)
        s2 = solve_linear_wave(bg, f2, g2)
        a, b = rng.normal(size=2)
        s = solve_linear_wave(bg, a * f1 + b * f2, a * g1 + b * g2)
        np.testing.assert_allclose(s.phi, a * s1.phi + b * s2.phi, atol=1e-12)

    def test_compatibility(self):
        bg = flat(51)
        with pytest.raises(ValueError):
            solve_linear_wave(bg, None, g=np.ones(len(bg.t)))

    def test_cfl(self):
        g = Grid(L, 51)
        bg = Background.flat(g, np.linspace(0, 1, 5))
        with pytest.raises(CFLError):
            solve_linear_wave(bg, None)

    def test_forcing_shape(self):
        bg = flat(51)
        with pytest.raises(GridMismatchError):
            solve_linear_wave(bg, np.zeros((len(bg.t), 50)))


class TestSources:
    def test_order1_rhs_zero(self):
        g = Grid(1.0, 11)
        assert np.all(bernoulli_rhs(-1, [np.ones(11)], [np.zeros(11)], [np.zeros(11)], g) == 0)

    def test_missing_member(self):
        g = Grid(1.0, 11)
        z = np.zeros(11)
        with pytest.raises(KeyError):
            source_fa(1, [z, z], [z, z], g)

    def test_gphi_products(self):
        g = Grid(1.0, 201)
        z = g.z
        a = [np.ones_like(z), 0.3 * z]
        phi = [np.zeros_like(z), z ** 2]
        phi_t = [np.zeros_like(z), np.full_like(z, 0.5)]
        got = source_gphi(0, a, phi, phi_t, g)
        # k = 0 by hand: -a1 phi1_t - (1/2)[a0 (phi1_z^2 + 2 a1^2) + 2 a1 (phi0_z phi1_z + 2 a0 a1)]
        ref = -0.3 * z * 0.5 - 0.5 * ((2 * z) ** 2 + 2 * (0.3 * z) ** 2) - 0.3 * z * 2 * 0.3 * z
        np.testing.assert_allclose(got[1:-1], ref[1:-1], atol=1e-10)

    def test_fa(self):
        g = Grid(1.0, 201)
        z = g.z
        a = [np.ones_like(z), z]
        phi = [np.zeros_like(z), z ** 2]
        got = source_fa(0, a, phi, g)
        np.testing.assert_allclose(got[1:-1], -(2 * z + 0.5 * z * 2)[1:-1], atol=1e-10)


class TestRecovery:
    def test_trivial(self):
        g = Grid(1.0, 11)
        z = np.zeros(11)
        out = recover_amplitude(z, z, np.full(11, 0.2), z, np.ones(11), g)
        np.testing.assert_allclose(out, -0.1)

    def test_zero(self):
        g = Grid(1.0, 11)
        z = np.zeros(11)
        assert np.all(recover_amplitude(z, z, z, z, np.ones(11), g) == 0)

    def test_floor(self):
        g = Grid(1.0, 11)
        z = np.zeros(11)
        with pytest.raises(DensityFloorError):
            recover_amplitude(z, z, z, z, np.full(11, 0.4), g)


class TestBuildCorrector:
    def test_flat_is_zero(self):
        bg = flat(51, T=0.3)
        zt = np.zeros((len(bg.t), 51))
        pair = build_corrector(-1, bg, [bg.a0], [bg.phi0], [bg.phi0_t])
        assert np.max(np.abs(pair.a)) == 0.0 and np.max(np.abs(pair.phi)) == 0.0
        pair2 = build_corrector(0, bg, [bg.a0, zt], [bg.phi0, zt], [bg.phi0_t, zt], zt[:, 0])
        assert np.max(np.abs(pair2.phi)) == 0.0 and pair2.order == 2

    def test_matched_boundary_trace(self):
        # bump placed near the wall so the layers are nontrivial
        cfg = ScenarioConfig(z1=0.2, z2=1.2, z_max=3.8, T=0.8)
        g = Grid(cfg.z_max, 761)
        a00, p00 = initial_data(cfg, g)
        traj = solve_phi0(a00, p00, cfg.T, g, extra_steps=2)
        H = build_hierarchy(traj, 1, nZ=1000)
        assert np.max(np.abs(H.A[0])) > 1e-4
        for j in (1, 2, 3):
            np.testing.assert_allclose(H.phi[j][:, 0], -H.Phi[j][:, 0, 0], atol=1e-14)
        # zero initial data: a_1 at t = 0 reduces to -phi_1t/(2 a0) = -RHS/(2 a0) = 0
        assert np.max(np.abs(H.a[1][0])) < 1e-12

    def test_initial_amplitude(self):
        traj = bump_background(T=0.2)
        bg = Background.from_trajectory(traj)
        pair = build_corrector(-1, bg, [bg.a0], [bg.phi0], [bg.phi0_t], np.zeros(len(bg.t)))
        np.testing.assert_allclose(pair.a[0], 0.0, atol=1e-14)
