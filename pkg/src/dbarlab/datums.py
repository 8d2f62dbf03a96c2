"""Analytic datum families shipped with the experiment runner.

Every acceptance experiment runs from these closed-form fields; no external
data is needed.  The constrained family u = 2 dbar(phi) with a real Gaussian
phi has the closed form u = -2 a (z - c)/s * exp(-|z - c|^2 / s) and
satisfies d(u) = conj(d(u)) exactly.
"""

from __future__ import annotations

import numpy as np

from .core import Field, GridSpec, UsageError, grid_points


def gaussian(grid: GridSpec, amplitude=1.0, width=1.0, center=0j) -> Field:
    z = grid_points(grid) - center
    return Field(grid, amplitude * np.exp(-np.abs(z) ** 2 / width**2))


def unit_mass_gaussian(grid: GridSpec, width=1.0) -> Field:
    # ||a exp(-r^2/w^2)||_2 = a w sqrt(pi/2)
    amp = 1.0 / (width * np.sqrt(np.pi / 2.0))
    return gaussian(grid, amp, width)


def gaussian_sum(grid: GridSpec, amplitude=0.5, count=3, seed=0, spread=1.6,
                 complex_phases=True) -> Field:
    rng = np.random.default_rng(seed)
    z = grid_points(grid)
    vals = np.zeros_like(z, dtype=complex)
    for _ in range(count):
        c = rng.uniform(-spread, spread, 2)
        w = rng.uniform(0.8, 1.5)
        a = amplitude * rng.uniform(0.6, 1.0)
        if complex_phases:
            a = a * np.exp(2j * np.pi * rng.uniform())
        vals += a * np.exp(-np.abs(z - (c[0] + 1j * c[1])) ** 2 / w**2)
    return Field(grid, vals)


def constrained_gaussian(grid: GridSpec, amplitude=0.4, width2=1.44,
                         center=0j) -> Field:
    z = grid_points(grid) - center
    vals = -2.0 * amplitude * (z / width2) * np.exp(-np.abs(z) ** 2 / width2)
    return Field(grid, vals)


def constrained_sum(grid: GridSpec, amplitude=0.3, count=3, seed=0,
                    spread=1.2) -> Field:
    rng = np.random.default_rng(seed)
    z = grid_points(grid)
    vals = np.zeros_like(z, dtype=complex)
    for _ in range(count):
        c = rng.uniform(-spread, spread, 2)
        s = rng.uniform(1.0, 2.0)
        a = amplitude * rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
        zz = z - (c[0] + 1j * c[1])
        vals += -2.0 * a * (zz / s) * np.exp(-np.abs(zz) ** 2 / s)
    return Field(grid, vals)


def deep_well(grid: GridSpec, depth=10.0, width=1.0) -> Field:
    z = grid_points(grid)
    return Field(grid, (-depth * np.exp(-np.abs(z) ** 2 / width**2)).astype(complex))


def nv_focusing(grid: GridSpec, amplitude=1.0, width=1.0) -> Field:
    """Rational-profile focusing datum for the NV flow (real, negative)."""
    z = grid_points(grid)
    r2 = np.abs(z) ** 2 / width**2
    return Field(grid, (-amplitude / (1.0 + r2) ** 2).astype(complex))


FAMILIES = {
    "gaussian": gaussian,
    "unit_mass_gaussian": unit_mass_gaussian,
    "gaussian_sum": gaussian_sum,
    "constrained_gaussian": constrained_gaussian,
    "constrained_sum": constrained_sum,
    "deep_well": deep_well,
    "nv_focusing": nv_focusing,
}


def make_field(grid: GridSpec, family: str, **params) -> Field:
    if family not in FAMILIES:
        raise UsageError(
            f"unknown datum family {family!r}; known: {sorted(FAMILIES)}"
        )
    return FAMILIES[family](grid, **params)


def scattering_corpus(grid: GridSpec):
    """Named fields exercised by the transform-side acceptance gates."""
    return [
        ("unit_gaussian", gaussian(grid, 1.0, 1.0)),
        ("unit_mass_gaussian", unit_mass_gaussian(grid)),
        ("small_gaussian", gaussian(grid, 0.19, 1.0)),
        ("constrained_gaussian", constrained_gaussian(grid, 0.4, 1.44)),
    ]


def miura_corpus(grid: GridSpec):
    """Constrained fields whose Miura images drive the map-side gates."""
    return [
        ("constrained_gaussian", constrained_gaussian(grid, 0.4, 1.44)),
        ("constrained_wide", constrained_gaussian(grid, 0.3, 2.5)),
        ("constrained_sum", constrained_sum(grid, 0.3, 3, seed=2)),
        ("constrained_offset",
         constrained_gaussian(grid, 0.35, 1.2, center=0.8 - 0.5j)),
    ]


def gn_ensemble(grid: GridSpec, count=20, amplitude=0.5, seed=100):
    return [
        (f"member_{i:02d}", gaussian_sum(grid, amplitude, 3, seed=seed + i))
        for i in range(count)
    ]
