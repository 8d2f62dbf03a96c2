"""Acceptance suite at the reference scale (n=256, L=8, nk=64, K=4).

One test per criterion; each prints its pass/fail line.  Expensive
intermediates are shared through a module-scoped context, so the suite
runs the reference-scale scattering transforms once.
"""

import pytest

from dbarlab import acceptance

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


@pytest.fixture(scope="module")
def ctx():
    return acceptance.Context(scale="reference", workers=1, tol=1e-6)


def _check(ctx, name):
    result = acceptance.run_one(ctx, name)
    print(result.line())
    assert result.passed, result.line()


def test_a1_involution(ctx):
    _check(ctx, "A1")


def test_a2_plancherel(ctx):
    _check(ctx, "A2")


def test_a3_linearization(ctx):
    _check(ctx, "A3")


def test_a4_diagonalization(ctx):
    _check(ctx, "A4")


def test_a5_two_path_agreement(ctx):
    _check(ctx, "A5")


def test_a6_integrator_order(ctx):
    _check(ctx, "A6")


def test_a7_conservation_and_constraint(ctx):
    _check(ctx, "A7")


def test_a8_miura_identity(ctx):
    _check(ctx, "A8")


def test_a9_aap_classifier(ctx):
    _check(ctx, "A9")


def test_a10_nv_via_miura(ctx):
    _check(ctx, "A10")


def test_a11_gn_ratios(ctx):
    _check(ctx, "A11")


def test_a12_pointwise_bounds(ctx):
    _check(ctx, "A12")


def test_a13_oracle_equivalences(ctx):
    _check(ctx, "A13")


def test_a14_strichartz_scaling(ctx):
    _check(ctx, "A14")
