"""Jost solves, the scattering transform, involution, and conventions."""

import numpy as np
import pytest

from dbarlab._jost import JostSweep
from dbarlab.core import (
    BandError,
    Field,
    GridSpec,
    cauchy_transform,
    exp_k,
    grid_norm,
    grid_points,
    hat_transform_nodes,
)
from dbarlab.scattering import (
    KGrid,
    UsageError,
    inverse_scattering,
    jost_identity_check,
    read_scattering,
    scattering_transform,
    solve_jost,
    solve_jost_pair,
    write_scattering,
)


def gaussian(grid, amp=1.0, width=1.0):
    z = grid_points(grid)
    return Field(grid, amp * np.exp(-np.abs(z) ** 2 / width**2))


GRID = GridSpec(64, 8.0)
KG = KGrid(32, 3.0)


class TestSolveJost:
    def test_zero_potential(self):
        u = Field(GRID, np.zeros((GRID.n, GRID.n)))
        sol = solve_jost(u, 1 + 1j)
        assert sol.iterations == 0
        assert np.max(np.abs(sol.m.values - 1.0)) == 0.0

    def test_residual_unit_gaussian(self):
        u = gaussian(GRID)
        tol = 1e-8
        for sign in (+1, -1):
            sol = solve_jost(u, 1 + 1j, sign=sign, tol=tol)
            assert sol.converged
            assert sol.residual <= tol * (1.0 + grid_norm(u))

    def test_born_limit_quadratic(self):
        # m = 1 + sign*C(e_{-k} u) + O(|u|^2): the gap fits a stable
        # quadratic constant across two decades of amplitude
        k = 0.5 + 0.3j
        base = gaussian(GRID)
        ratios = []
        for eps in (1e-1, 1e-2, 1e-3):
            u = Field(GRID, eps * base.values)
            sol = solve_jost(u, k, tol=1e-13)
            born = cauchy_transform(
                Field(GRID, exp_k(GRID, -k).values * u.values),
                tail_threshold=np.inf,
            )
            gap = grid_norm(Field(GRID, sol.m.values - 1.0 - born.values))
            ratios.append(gap / grid_norm(u) ** 2)
        ratios = np.array(ratios)
        assert np.all(np.abs(ratios / ratios[0] - 1.0) < 0.05)

    def test_pair_residuals_and_combinations(self):
        u = gaussian(GRID, 0.8)
        sol = solve_jost_pair(u, 1.0, tol=1e-9)
        assert sol.residual_norms["+"] <= 1e-8 * (1 + grid_norm(u))
        assert sol.residual_norms["-"] <= 1e-8 * (1 + grid_norm(u))
        assert np.allclose(
            sol.m1.values, (sol.m_plus.values + sol.m_minus.values) / 2
        )
        assert np.allclose(
            sol.m2.values, (sol.m_plus.values - sol.m_minus.values) / 2
        )


class TestScatteringTransform:
    def test_zero_field(self):
        u = Field(GRID, np.zeros((GRID.n, GRID.n)))
        s = scattering_transform(u, KG)
        assert np.all(s.values == 0)
        assert s.status == "ok"

    def test_linearization_exponent(self):
        # ||S(eps u) - eps conj(u_hat)||_2 should vanish quadratically
        base = gaussian(GRID)
        ax = KG.axis()
        uhat_unit = hat_transform_nodes(base, ax, ax)
        epss = np.array([1e-1, 3e-2, 1e-2])
        errs = []
        for eps in epss:
            u = Field(GRID, eps * base.values)
            s = scattering_transform(u, KG, tol=1e-12)
            diff = s.values - eps * np.conj(uhat_unit)
            errs.append(np.sqrt(KG.cell_area * np.sum(np.abs(diff) ** 2)))
        slope = np.polyfit(np.log(epss), np.log(errs), 1)[0]
        assert slope >= 1.9

    def test_linear_limit_conjugate_symmetry(self):
        # for real u the linear term conj(u_hat) satisfies
        # u_hat(-k) = -conj(u_hat(k)); checked on paired grid nodes
        rng = np.random.default_rng(8)
        z = grid_points(GRID)
        vals = np.zeros_like(z, dtype=complex)
        for _ in range(4):
            c = rng.uniform(-1.5, 1.5, 2)
            w = rng.uniform(0.7, 1.4)
            a = rng.uniform(-1, 1)
            vals += a * np.exp(-(np.abs(z - (c[0] + 1j * c[1])) ** 2) / w**2)
        u = Field(GRID, vals)
        ax = KG.axis()
        uhat = hat_transform_nodes(u, ax, ax)
        # node (ik2, ik1) pairs with (nk-ik2, nk-ik1); the -K row/column
        # has no mirror on the half-open lattice
        inner = uhat[1:, 1:]
        ref = inner[::-1, ::-1]  # k -> -k
        sym_err = np.max(np.abs(ref + np.conj(inner)))
        assert sym_err <= 1e-6 * np.max(np.abs(uhat))

    def test_band_validation(self):
        u = gaussian(GRID)
        with pytest.raises(BandError):
            scattering_transform(u, KGrid(16, 2 * GRID.hat_band))

    def test_partial_failures_recorded_not_zeroed(self):
        # starving the solver of iterations flags nodes instead of
        # silently zeroing them
        u = gaussian(GRID, 1.0)
        s = scattering_transform(u, KGrid(4, 1.0), tol=1e-13, max_iter=2,
                                 restart=2)
        assert s.status == "partial"
        assert len(s.failures) > 0
        failed = s.failures[0]
        assert {"ik1", "ik2", "k", "residual", "iterations"} <= set(failed)
        assert np.all(np.isfinite(s.values))


@pytest.mark.slow
class TestInvolution:
    def test_plancherel_and_involution(self):
        u = gaussian(GRID)
        s = scattering_transform(u, KG, tol=1e-8)
        assert s.status == "ok"
        ratio = s.norm() / grid_norm(u)
        assert 0.97 <= ratio <= 1.03
        rec = inverse_scattering(s, GRID, tol=1e-8)
        err = grid_norm(Field(GRID, rec.values - u.values)) / grid_norm(u)
        assert err <= 2e-2

    def test_inverse_of_zero(self):
        s = scattering_transform(Field(GRID, np.zeros((GRID.n, GRID.n))), KG)
        rec = inverse_scattering(s, GRID)
        assert np.max(np.abs(rec.values)) <= 1e-14


class TestIdentities:
    def test_zero_potential_residuals_vanish(self):
        u = Field(GRID, np.zeros((GRID.n, GRID.n)))
        rep = jost_identity_check(u, 1.0)
        assert rep.residual_literal == (0.0, 0.0)
        assert rep.residual_phase_inserted == (0.0, 0.0)

    def test_gaussian_matching_convention(self):
        u = gaussian(GRID)
        rep = jost_identity_check(u, 1.0, tol=1e-7)
        assert rep.matching_convention == "phase-inserted"
        assert max(rep.residual_phase_inserted) <= 1e-5
        assert min(rep.residual_literal) > 1e-2

    def test_convention_stable_across_k(self):
        u = gaussian(GRID, 0.7)
        flags = {
            jost_identity_check(u, k, tol=1e-7).matching_convention
            for k in (1.0, 1j, 1 + 1j)
        }
        assert flags == {"phase-inserted"}


class TestDeterminism:
    def test_repeat_is_bitwise_identical(self):
        u = gaussian(GRID, 0.9)
        kg = KGrid(8, 2.0)
        s1 = scattering_transform(u, kg)
        s2 = scattering_transform(u, kg)
        assert np.array_equal(s1.values, s2.values)
        assert np.array_equal(s1.iterations, s2.iterations)

    def test_batch_composition_independent(self):
        u = gaussian(GRID, 0.9)
        sweep = JostSweep(u, window="half", tol=1e-8)
        k = 0.7 - 0.2j
        lone, it1, _, _ = sweep.solve_nodes([k], [1.0])
        ks = [0.1 + 0.4j, k, -1.0 + 1j, 0.3]
        grouped, its, _, _ = sweep.solve_nodes(ks, [1.0] * 4)
        assert np.array_equal(lone[0], grouped[1])
        assert it1[0] == its[1]


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        u = gaussian(GRID, 0.5)
        kg = KGrid(8, 2.0)
        s = scattering_transform(u, kg)
        write_scattering(tmp_path / "s", s)
        back = read_scattering(tmp_path / "s")
        assert np.array_equal(back.values, s.values)
        assert np.array_equal(back.iterations, s.iterations)
        assert back.kgrid == s.kgrid
        assert back.source_l2 == s.source_l2

    def test_inverse_rejects_nonfinite(self):
        kg = KGrid(8, 2.0)
        vals = np.zeros((8, 8), complex)
        vals[0, 0] = np.nan
        from dbarlab.scattering import ScatteringData

        bad = ScatteringData(
            kgrid=kg,
            values=vals,
            source_l2=1.0,
            iterations=np.zeros((8, 8), np.int64),
            residuals=np.zeros((8, 8)),
        )
        with pytest.raises(UsageError):
            inverse_scattering(bad, GridSpec(16, 2.0))
