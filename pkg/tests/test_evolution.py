"""Linear flows, nonlinearities, exponential integrators, IST evolution."""

import numpy as np
import pytest

from dbarlab.core import (
    ContractViolation,
    Field,
    GridSpec,
    UsageError,
    d,
    grid_norm,
    grid_points,
)
from dbarlab.evolution import (
    ETDRK4,
    IFRK4,
    Trajectory,
    asymptotic_state,
    diagonalization_check,
    evolve_direct,
    evolve_ist,
    linear_flow,
    load_trajectory,
    model_dsii,
    model_mnv,
    model_nv,
    nonlinearity_dsii,
    nonlinearity_mnv,
    nonlinearity_nv,
    save_trajectory,
    stability_bound,
)
from dbarlab.scattering import KGrid

GRID = GridSpec(64, 8.0)
Z = grid_points(GRID)


def gaussian(amp=1.0, width=1.0):
    return Field(GRID, amp * np.exp(-np.abs(Z) ** 2 / width**2))


def constrained(amp=0.4, width2=1.44):
    # u = 2 dbar(phi) for real Gaussian phi: satisfies Im d(u) = 0
    return Field(GRID, -2 * amp * (Z / width2) * np.exp(-np.abs(Z) ** 2 / width2))


def plane_wave(a, b):
    return Field(GRID, np.exp(1j * (a * Z.real + b * Z.imag)))


def rel_dist(f, g):
    return grid_norm(Field(f.grid, f.values - g.values)) / grid_norm(g)


class TestLinearFlow:
    def test_identity_at_zero_time(self):
        f = gaussian()
        out = linear_flow(model_mnv(GRID), f, 0.0)
        assert np.allclose(out.values, f.values, atol=1e-15)

    def test_plane_wave_phase(self):
        # sigma(a, b) = i a (3 b^2 - a^2)/4 for the third-order flow
        a, b = 2 * np.pi / GRID.L, -3 * np.pi / GRID.L
        w = plane_wave(a, b)
        t = 0.37
        sigma = 1j * a * (3 * b**2 - a**2) / 4
        out = linear_flow(model_mnv(GRID), w, t)
        assert np.max(np.abs(out.values - np.exp(-t * sigma) * w.values)) < 1e-12

    def test_dsii_plane_wave_phase(self):
        a, b = np.pi / GRID.L, 2 * np.pi / GRID.L
        w = plane_wave(a, b)
        t = 0.5
        sigma = 0.5j * (a**2 - b**2)
        out = linear_flow(model_dsii(GRID), w, t)
        assert np.max(np.abs(out.values - np.exp(-t * sigma) * w.values)) < 1e-12

    @pytest.mark.parametrize("factory", [model_mnv, model_nv, model_dsii])
    def test_unitarity(self, factory):
        rng = np.random.default_rng(3)
        f = Field(
            GRID,
            rng.standard_normal((GRID.n, GRID.n))
            + 1j * rng.standard_normal((GRID.n, GRID.n)),
        )
        nf = grid_norm(f)
        for t in (-10.0, -1.0, 1.0, 10.0):
            assert abs(grid_norm(linear_flow(factory(GRID), f, t)) - nf) <= 1e-13 * nf


class TestNonlinearities:
    def test_zero(self):
        zeros = Field(GRID, np.zeros((GRID.n, GRID.n)))
        assert grid_norm(nonlinearity_mnv(zeros)) == 0
        assert grid_norm(nonlinearity_nv(zeros)) == 0
        assert grid_norm(nonlinearity_dsii(zeros)) == 0

    def test_mnv_cubic_homogeneity(self):
        u = gaussian(0.5)
        n1 = nonlinearity_mnv(u)
        n2 = nonlinearity_mnv(Field(GRID, 3.0 * u.values))
        assert rel_dist(Field(GRID, n2.values / 27.0), n1) <= 1e-12

    def test_mnv_plane_wave_vanishes(self):
        w = Field(GRID, 0.7 * plane_wave(np.pi / 4, np.pi / 2).values)
        assert grid_norm(nonlinearity_mnv(w)) <= 1e-13

    def test_nv_quadratic_homogeneity_and_reality(self):
        rng = np.random.default_rng(5)
        q = Field(GRID, np.asarray(
            rng.standard_normal((GRID.n, GRID.n)), dtype=complex))
        n1 = nonlinearity_nv(q)
        n2 = nonlinearity_nv(Field(GRID, 2.0 * q.values))
        assert rel_dist(Field(GRID, n2.values / 4.0), n1) <= 1e-12
        assert np.max(np.abs(n1.values.imag)) <= 1e-12 * grid_norm(n1)

    def test_nv_rejects_complex(self):
        with pytest.raises(ContractViolation):
            nonlinearity_nv(gaussian() and Field(GRID, 1j * np.ones((64, 64))))

    def test_nv_literal_form_differs_but_same_scale(self):
        q = Field(GRID, np.real(gaussian(1.0).values).astype(complex))
        a = nonlinearity_nv(q, form="canonical")
        b = nonlinearity_nv(q, form="literal")
        assert grid_norm(a) > 0 and grid_norm(b) > 0
        assert 0.1 <= grid_norm(a) / grid_norm(b) <= 10.0

    def test_dsii_cubic_homogeneity_and_plane_wave(self):
        u = gaussian(0.5, 1.2)
        n1 = nonlinearity_dsii(u)
        n2 = nonlinearity_dsii(Field(GRID, 2.0 * u.values))
        assert rel_dist(Field(GRID, n2.values / 8.0), n1) <= 1e-12
        # constant |u|^2 means r = 0 under the zero-mean convention
        w = Field(GRID, 0.9 * plane_wave(np.pi / 2, np.pi / 4).values)
        assert grid_norm(nonlinearity_dsii(w)) <= 1e-13


class TestEvolveDirect:
    def test_linear_exactness_on_nonlinearity_free_mode(self):
        # a single plane wave kills all three nonlinearities, so the
        # integrating factor must reproduce the linear flow to rounding
        model = model_mnv(GRID)
        w = plane_wave(2 * np.pi / GRID.L, -3 * np.pi / GRID.L)
        dt = stability_bound(model, IFRK4) * 0.9
        T = 32 * dt
        for scheme in (IFRK4, ETDRK4):
            traj = evolve_direct(model, w, T, dt, scheme, save_times=[0, T])
            lin = linear_flow(model, w, T)
            assert rel_dist(traj.states[-1], lin) <= 1e-12

    @pytest.mark.parametrize("scheme", [IFRK4, ETDRK4])
    def test_fourth_order_self_convergence(self, scheme):
        model = model_mnv(GRID)
        u0 = gaussian(1.0)
        dtb = stability_bound(model, scheme)
        T = 16 * dtb
        sols = []
        for div in (1, 2, 4):
            traj = evolve_direct(model, u0, T, dtb / div, scheme, save_times=[T])
            sols.append(traj.states[-1])
        e1 = rel_dist(sols[0], sols[1])
        e2 = rel_dist(sols[1], sols[2])
        assert np.log2(e1 / e2) >= 3.5

    def test_l2_conservation_and_constraint_transport(self):
        model = model_mnv(GRID)
        u0 = constrained()
        dtb = stability_bound(model, IFRK4)
        nst = 2 * int(np.ceil(0.1 / dtb / 2))
        dt = 0.1 / nst
        traj = evolve_direct(model, u0, 0.1, dt, IFRK4, save_times=[0, 0.05, 0.1])
        n0 = grid_norm(u0)
        for st in traj.states:
            assert abs(grid_norm(st) - n0) <= 1e-6 * n0
            im_ratio = grid_norm(Field(GRID, np.imag(d(st).values))) / grid_norm(st)
            assert im_ratio <= 1e-6

    def test_nv_real_projection_health(self):
        model = model_nv(GRID)
        q0 = Field(GRID, np.real(gaussian(0.5).values).astype(complex))
        dtb = stability_bound(model, IFRK4)
        traj = evolve_direct(model, q0, 8 * dtb, dtb, IFRK4, save_times=[8 * dtb])
        assert max(traj.health["im_projection"]) <= 1e-12
        assert np.max(np.abs(traj.states[-1].values.imag)) == 0.0

    def test_time_reversal(self):
        # compare against the integrator's own initial projection (the
        # one-time dealias truncation of the datum is not a scheme error)
        import scipy.fft as sfft

        from dbarlab.core import dealias_mask

        model = model_mnv(GRID)
        u0 = gaussian(0.8, 2.0)
        mask = dealias_mask(GRID, model.dealias_fraction)
        u0m = Field(GRID, sfft.ifft2(np.where(mask, sfft.fft2(u0.values), 0)))
        dtb = stability_bound(model, IFRK4)
        T = 16 * dtb
        fwd = evolve_direct(model, u0, T, dtb, IFRK4, save_times=[T])
        back = evolve_direct(model, fwd.states[-1], -T, -dtb, IFRK4, save_times=[-T])
        # scheme error at this dt, with a factor-10 allowance
        probe = evolve_direct(model, u0, T, dtb / 2, IFRK4, save_times=[T])
        scheme_err = rel_dist(fwd.states[-1], probe.states[-1])
        assert rel_dist(back.states[-1], u0m) <= 10 * max(scheme_err, 1e-13)

    def test_scaling_covariance(self):
        # lam * u0(lam .) evolved to t/lam^3 on the lam-shrunk box matches
        # the unscaled evolution sampled on the shared node set
        lam = 2.0
        model = model_mnv(GRID)
        u0 = gaussian(0.8)
        dtb = stability_bound(model, IFRK4) / 8  # fine grid bound dominates
        T = 16 * dtb
        coarse = evolve_direct(model, u0, T, dtb, IFRK4, save_times=[T])

        fine_grid = GridSpec(GRID.n, GRID.L / lam)
        zf = grid_points(fine_grid)
        u0f = Field(fine_grid, lam * 0.8 * np.exp(-np.abs(lam * zf) ** 2))
        modelf = model_mnv(fine_grid)
        dtf = dtb / lam**3
        fine = evolve_direct(modelf, u0f, T / lam**3, dtf, IFRK4,
                             save_times=[T / lam**3])
        got = fine.states[-1].values / lam
        want = coarse.states[-1].values
        err = np.sqrt(np.mean(np.abs(got - want) ** 2))
        ref = np.sqrt(np.mean(np.abs(want) ** 2))
        assert err <= 1e-4 * ref

    def test_dt_validation(self):
        model = model_mnv(GRID)
        with pytest.raises(UsageError):
            evolve_direct(model, gaussian(), 1.0, 1.0, IFRK4)
        dtb = stability_bound(model, IFRK4)
        with pytest.raises(UsageError):
            evolve_direct(model, gaussian(), 10.5 * dtb, dtb, IFRK4,
                          save_times=[dtb / 3])

    def test_blow_up_detection_truncates(self):
        # absurdly large NV datum focuses immediately
        model = model_nv(GRID)
        q0 = Field(GRID, np.real(600 * np.exp(-np.abs(Z) ** 2)).astype(complex))
        dtb = stability_bound(model, IFRK4)
        traj = evolve_direct(model, q0, 512 * dtb, dtb, IFRK4,
                             save_times=[0.0, 512 * dtb])
        assert traj.blow_up is not None
        assert traj.blow_up["bracket"][1] <= 512 * dtb
        assert len(traj.states) >= 1


@pytest.mark.slow
class TestEvolveIST:
    KG = KGrid(32, 3.0)

    def test_time_zero_is_involution(self):
        u0 = gaussian(1.0)
        traj = evolve_ist(u0, [0.0], self.KG, tol=1e-8)
        assert rel_dist(traj.states[0], u0) <= 2e-2

    def test_small_data_matches_linear_flow(self):
        model = model_mnv(GRID)
        T = 0.05
        errs = []
        amps = [0.1, 0.05, 0.025]
        for amp in amps:
            u0 = gaussian(amp)
            ist = evolve_ist(u0, [T], self.KG, tol=1e-10)
            lin = linear_flow(model, u0, T)
            errs.append(grid_norm(Field(GRID, ist.states[-1].values - lin.values)))
        slope = np.polyfit(np.log(amps), np.log(errs), 1)[0]
        assert slope >= 1.9

    def test_two_path_agreement_amplitude_half(self):
        model = model_mnv(GRID)
        u0 = gaussian(0.5)
        T = 0.05
        dtb = stability_bound(model, IFRK4)
        nst = int(np.ceil(T / dtb))
        direct = evolve_direct(model, u0, T, T / nst, IFRK4, save_times=[0, T])
        ist = evolve_ist(u0, [T], self.KG, tol=1e-8)
        assert rel_dist(ist.states[-1], direct.states[-1]) <= 5e-2
        # norm constant across ist times
        assert abs(grid_norm(ist.states[-1]) - grid_norm(u0)) <= 2e-2 * grid_norm(u0)

    def test_diagonalization_check(self):
        model = model_mnv(GRID)
        u0 = gaussian(0.5)
        T = 0.05
        dtb = stability_bound(model, IFRK4)
        nst = int(np.ceil(T / dtb))
        traj = evolve_direct(model, u0, T, T / nst, IFRK4, save_times=[0, T])
        devs = diagonalization_check(traj, self.KG, tol=1e-8)
        assert devs[0][1] == 0.0
        assert devs[-1][1] <= 5e-2

    def test_asymptotic_state_linear_trajectory(self):
        # hand-built linear trajectory: back-propagation is exact
        model = model_mnv(GRID)
        u0 = gaussian(0.3)
        times = [0.0, 0.02, 0.04]
        states = [linear_flow(model, u0, t) for t in times]
        traj = Trajectory("mNV", GRID, times, states, 0.02, IFRK4, 0.5)
        out = asymptotic_state(traj, +1, tol=1e-10)
        assert out.status == "stabilized"
        assert rel_dist(out.field, u0) <= 1e-12

    def test_asymptotic_state_identification(self):
        model = model_mnv(GRID)
        u0 = gaussian(1e-2)
        T = 0.05
        dtb = stability_bound(model, IFRK4)
        nst = 2 * int(np.ceil(T / dtb / 2))
        traj = evolve_direct(model, u0, T, T / nst, IFRK4,
                             save_times=[0, T / 2, T])
        out = asymptotic_state(traj, +1, kgrid=self.KG, tol=1e-5)
        assert out.status == "stabilized"
        assert out.identification_error is not None
        assert out.identification_error <= 1e-3
        n0 = grid_norm(u0)
        assert abs(grid_norm(out.field) - n0) <= 2e-2 * n0


class TestTrajectoryIO:
    def test_roundtrip(self, tmp_path):
        model = model_mnv(GRID)
        u0 = gaussian(0.5)
        dtb = stability_bound(model, IFRK4)
        traj = evolve_direct(model, u0, 4 * dtb, dtb, IFRK4,
                             save_times=[0, 4 * dtb])
        save_trajectory(tmp_path / "traj", traj)
        back = load_trajectory(tmp_path / "traj")
        assert back.model_tag == traj.model_tag
        assert back.times == traj.times
        assert np.array_equal(back.states[-1].values, traj.states[-1].values)
        assert back.scheme == traj.scheme
