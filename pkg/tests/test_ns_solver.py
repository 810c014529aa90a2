import numpy as np
import pytest

from channellab import flux_carrier as fc
from channellab import geometry as geo
from channellab import ns_solver as ns
from channellab.errors import NonConvergence, OutOfRange

from conftest import poiseuille_psi, poiseuille_u1


class TestConfig:
    def test_validation(self):
        with pytest.raises(OutOfRange):
            ns.SolverConfig(tol=0.0)
        with pytest.raises(OutOfRange):
            ns.SolverConfig(relax=1.5)


class TestStokes:
    def test_poiseuille_recovered_in_interior(self, straight, carrier_unit):
        grid = geo.make_grid(straight, -8, 8, 257, 33)
        st = ns.solve_stokes(grid, carrier_unit, straight)
        mask = np.abs(grid.xi) <= 4.0
        err = np.abs(st.u1[mask, :] - poiseuille_u1(grid.x2[mask, :])).max()
        # ny=33: one-sided wall stencil bias (h^2/3)|psi'''| ~ 2e-3
        assert err < 2.5e-3
        errp = np.abs(st.psi[mask, :] - poiseuille_psi(grid.x2[mask, :])).max()
        assert errp < 2e-4

    def test_zero_flux_gives_zero_field(self, straight):
        grid = geo.make_grid(straight, -4, 4, 65, 17)
        st = ns.solve_stokes(grid, fc.CarrierParams(0.0, 0.5), straight)
        assert np.abs(st.psi).max() == 0.0
        assert np.abs(st.omega).max() == 0.0


class TestPicard:
    def test_poiseuille_is_discrete_fixed_point(self, straight, carrier_unit):
        # the nodal shear flow solves every interior equation exactly
        grid = geo.make_grid(straight, -6, 6, 97, 25)
        psi = poiseuille_psi(grid.x2)
        omega = 1.5 * grid.x2
        state = ns._state_from_fields(grid, straight, carrier_unit, psi, omega)
        assert ns.residual_norm(state) < 1e-12

    def test_fixed_point_state_unchanged(self, poiseuille_state, straight,
                                         carrier_unit):
        cfg = ns.SolverConfig(tol=1e-10)
        new, res = ns.picard_step(poiseuille_state, carrier_unit, straight, cfg)
        assert res < 1e-9
        assert np.abs(new.psi - poiseuille_state.psi).max() < 1e-9

    def test_zero_flux_stays_zero(self, straight):
        grid = geo.make_grid(straight, -4, 4, 65, 17)
        params = fc.CarrierParams(0.0, 0.5)
        st = ns.solve_stokes(grid, params, straight)
        new, res = ns.picard_step(st, params, straight)
        assert np.abs(new.psi).max() == 0.0
        assert res == 0.0


class TestSolveSteady:
    def test_poiseuille_accuracy(self, poiseuille_state):
        grid = poiseuille_state.grid
        mask = np.abs(grid.xi) <= 4.0
        err = np.abs(
            poiseuille_state.u1[mask, :] - poiseuille_u1(grid.x2[mask, :])
        ).max()
        assert err < 2.5e-3  # ny=33 wall-stencil bias dominates

    def test_interior_slice_flux(self, power_state):
        fl = ns.slice_flux_profile(power_state)
        grid = power_state.grid
        margin_lo = grid.a + float(power_state.profile.width(grid.a))
        margin_hi = grid.b - float(power_state.profile.width(grid.b))
        mask = (grid.xi >= margin_lo) & (grid.xi <= margin_hi)
        # quadrature floor ~ (1/32)^4 |psi^(5)| at ny=33; the
        # acceptance suite pins 1e-6 at ny=65
        assert np.abs(fl[mask] - 1.0).max() < 1e-5

    def test_zero_flux_zero_energy(self, straight):
        st = ns.solve_steady(
            straight, fc.CarrierParams(0.0, 0.5), -4, 4, 65, 17
        )
        assert ns.dirichlet_energy(st, -4, 4) == 0.0

    def test_nonconvergence_is_reported(self, straight, carrier_unit):
        cfg = ns.SolverConfig(tol=1e-9, max_iter=1)
        with pytest.raises(NonConvergence) as info:
            ns.solve_steady(straight, carrier_unit, -6, 6, 97, 25, cfg)
        assert info.value.best_residual is not None

    def test_converged_flag_and_history(self, poiseuille_state):
        assert poiseuille_state.converged
        assert poiseuille_state.residual_history[-1][1] < 1e-10
        assert poiseuille_state.diagnostics["energy_ratio_c0"] > 0

    def test_wall_streamfunction_values(self, power_state):
        # the flux constraint is Dirichlet data on psi
        assert np.abs(power_state.psi[:, 0]).max() < 1e-12
        assert np.abs(power_state.psi[:, -1] - 1.0).max() < 1e-12

    def test_carrier_bound_ratio_stable_across_truncations(
        self, straight, carrier_unit
    ):
        cfg = ns.SolverConfig(tol=1e-9)
        ratios = []
        for T in (6.0, 12.0):
            st = ns.solve_steady(
                straight, carrier_unit, -T, T, int(16 * T) + 1, 33, cfg
            )
            ratios.append(st.diagnostics["energy_ratio_c0"])
        assert abs(ratios[1] - ratios[0]) <= 0.5 * ratios[0]


class TestEnergies:
    def test_poiseuille_energy_per_unit_length(self, poiseuille_state):
        # 3/2 phi^2 per unit length on the width-2 strip
        e = ns.dirichlet_energy(poiseuille_state, 0.0, 4.0)
        assert e == pytest.approx(6.0, rel=0.01)

    def test_additivity(self, power_state):
        a = ns.dirichlet_energy(power_state, 0.0, 2.0)
        b = ns.dirichlet_energy(power_state, 2.0, 4.0)
        tot = ns.dirichlet_energy(power_state, 0.0, 4.0)
        assert abs(a + b - tot) <= 1e-10 * tot

    def test_constant_weight_matches_plain_energy(self, power_state):
        grid = power_state.grid
        beta_star = 0.5
        w = ns.weighted_energy(power_state, lambda x: np.full_like(x, beta_star))
        e = ns.dirichlet_energy(
            power_state, grid.a, grid.b, of_perturbation=True
        )
        assert w == pytest.approx(beta_star * e, rel=1e-10)

    def test_zero_weight(self, power_state):
        assert ns.weighted_energy(power_state, lambda x: np.zeros_like(x)) == 0.0

    def test_incompressibility_second_order(self, power_half, carrier_unit):
        cfg = ns.SolverConfig(tol=1e-9)
        divs = []
        for nx, ny in [(129, 17), (257, 33)]:
            st = ns.solve_steady(power_half, carrier_unit, -6, 6, nx, ny, cfg)
            grid = st.grid
            du1 = ns._d1(st.u1, grid.hx, 0) + grid.j1 * ns._d1(st.u1, grid.hy, 1)
            du2 = ns._d1(st.u2, grid.hy, 1) / grid.f[:, None]
            mask = np.abs(grid.xi) <= 3.0
            divs.append(float(np.abs((du1 + du2)[mask, 1:-1]).max()))
        assert divs[0] / divs[1] > 3.0  # observed order ~ 2


class TestGridConvergence:
    def test_poiseuille_order_two(self, straight, carrier_unit):
        cfg = ns.SolverConfig(tol=1e-10)
        errs = []
        for nx, ny in [(65, 17), (129, 33)]:
            st = ns.solve_steady(straight, carrier_unit, -6, 6, nx, ny, cfg)
            mask = np.abs(st.grid.xi) <= 2.0
            errs.append(
                np.abs(st.u1[mask, :] - poiseuille_u1(st.grid.x2[mask, :])).max()
            )
        order = np.log2(errs[0] / errs[1])
        assert order >= 1.8

    def test_truncation_independence(self, straight, carrier_unit):
        cfg = ns.SolverConfig(tol=1e-9)
        st_small = ns.solve_steady(straight, carrier_unit, -8, 8, 129, 33, cfg)
        st_big = ns.solve_steady(straight, carrier_unit, -16, 16, 257, 33, cfg)
        e_small = ns.dirichlet_energy(st_small, -4, 4)
        e_big = ns.dirichlet_energy(st_big, -4, 4)
        assert abs(e_small - e_big) <= 0.01 * e_big

    def test_curved_channel_self_convergence(self, power_half):
        # Richardson study in place of a manufactured solution (the solver
        # has no body-force hook); the carrier band is kept wide so the
        # end data stays resolved on the coarsest grid.  Observed order
        # sits near 1.75 at desk scale; Poiseuille meets 2.0 above.
        params = fc.CarrierParams(1.0, 0.9)
        cfg = ns.SolverConfig(tol=1e-9)
        sols = [
            ns.solve_steady(power_half, params, -4, 4, nx, ny, cfg)
            for nx, ny in [(129, 17), (257, 33), (513, 65)]
        ]
        c, m, f = sols
        mask_c = np.abs(c.grid.xi) <= 2.0
        mask_m = np.abs(m.grid.xi) <= 2.0
        d1 = np.abs((m.psi[::2, ::2] - c.psi)[mask_c]).max()
        d2 = np.abs((f.psi[::2, ::2] - m.psi)[mask_m]).max()
        assert np.log2(d1 / d2) >= 1.5


class TestPressure:
    def test_poiseuille_pressure_slope(self, poiseuille_state):
        p = ns.pressure_recover(poiseuille_state)
        grid = poiseuille_state.grid
        i0, i1 = np.searchsorted(grid.xi, [-4.0, 4.0])
        jc = grid.ny // 2
        slope = np.polyfit(grid.xi[i0:i1], p[i0:i1, jc], 1)[0]
        assert slope == pytest.approx(-1.5, rel=1e-4)

    def test_zero_field_zero_pressure(self, straight):
        st = ns.solve_steady(
            straight, fc.CarrierParams(0.0, 0.5), -4, 4, 65, 17
        )
        p = ns.pressure_recover(st)
        assert np.abs(p).max() < 1e-12

    def test_mean_zero_on_subdomain(self, poiseuille_state):
        p = ns.pressure_mean_zero(poiseuille_state, 0.0, 4.0)
        masses = ns._window_column_masses(poiseuille_state, 0.0, 4.0)
        wy = np.full(poiseuille_state.grid.ny, poiseuille_state.grid.hy)
        wy[0] *= 0.5
        wy[-1] *= 0.5
        mean = np.einsum("i,ij,j->", masses, p, wy) / masses.sum()
        assert abs(mean) < 1e-12

    def test_momentum_residual_second_order(self, straight, carrier_unit):
        cfg = ns.SolverConfig(tol=1e-10)
        res = []
        for nx, ny in [(129, 17), (257, 33)]:
            st = ns.solve_steady(straight, carrier_unit, -8, 8, nx, ny, cfg)
            res.append(ns.momentum_residual(st, -4.0, 4.0))
        assert res[0] / res[1] > 3.0


class TestKrylovAndUpwind:
    def test_krylov_matches_direct(self, straight, carrier_unit):
        cfg_d = ns.SolverConfig(tol=1e-9)
        cfg_k = ns.SolverConfig(
            tol=1e-9, linear_solver=ns.LinearSolverKind.KRYLOV_ILU
        )
        st_d = ns.solve_steady(straight, carrier_unit, -4, 4, 65, 17, cfg_d)
        st_k = ns.solve_steady(straight, carrier_unit, -4, 4, 65, 17, cfg_k)
        assert np.abs(st_d.psi - st_k.psi).max() < 1e-7

    def test_upwind_converges(self, power_half, carrier_unit):
        cfg = ns.SolverConfig(tol=1e-9, convection=ns.ConvectionScheme.UPWIND)
        st = ns.solve_steady(power_half, carrier_unit, -4, 4, 65, 17, cfg)
        assert st.converged

    def test_continuation_for_large_flux(self, straight):
        params = fc.CarrierParams(5.0, 0.2)
        cfg = ns.SolverConfig(
            tol=1e-8, max_iter=120, relax=0.8,
            convection=ns.ConvectionScheme.UPWIND,
        )
        st = ns.solve_steady(straight, params, -4, 4, 97, 33, cfg)
        assert st.converged
        fl = ns.slice_flux_profile(st)
        mask = np.abs(st.grid.xi) <= 1.0
        assert np.abs(fl[mask] - 5.0).max() < 5e-3
