"""Norms and inequality checkers.

Littlewood-Paley/Besov machinery, mixed space-time dispersive norms, the
discrete variation norm, a dyadic maximal function, the nonlinear
interpolation-ratio checkers for the scattering transform, and PDE
residuals of trajectories.

The Littlewood-Paley profile is a fixed polynomial smoothstep in
log2|xi|: phi = 1 on |xi| <= 1, 0 on |xi| >= 2, with
S(t) = 6 t^5 - 15 t^4 + 10 t^3 on the transition.  It is frozen so norms
are reproducible bit-for-bit across platforms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.fft as sfft

from . import core
from .core import Field, GridSpec, UsageError, grid_norm
from .evolution import Trajectory, get_model
from .scattering import KGrid, scattering_transform


# ---------------------------------------------------------------------------
# Littlewood-Paley decomposition


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def lp_profile(rho: np.ndarray) -> np.ndarray:
    """Radial bump: 1 on rho <= 1, 0 on rho >= 2, smoothstep in log2(rho)."""
    out = np.zeros_like(rho, dtype=np.float64)
    out[rho <= 1.0] = 1.0
    mid = (rho > 1.0) & (rho < 2.0)
    out[mid] = 1.0 - _smoothstep(np.log2(rho[mid]))
    return out


def shell_range(grid: GridSpec) -> range:
    """Dyadic exponents j with shells 2^j meeting the grid band."""
    lo = int(np.floor(np.log2(np.pi / grid.L)))
    hi = int(np.ceil(np.log2(np.sqrt(2.0) * grid.nyquist)))
    return range(lo, hi + 1)


@dataclass
class LPDecomposition:
    """Dyadic shell projections P_j f; sum of blocks reproduces f exactly
    for mean-free f (the remainder is the dc component alone)."""

    field: Field
    exponents: list
    blocks: list
    dc: complex

    def reconstruction_error(self) -> float:
        total = np.full_like(self.field.values, self.dc)
        for b in self.blocks:
            total = total + b.values
        return grid_norm(
            Field(self.field.grid, total - self.field.values)
        ) / max(grid_norm(self.field), 1e-300)


def lp_decompose(f: Field) -> LPDecomposition:
    grid = f.grid
    X1, X2 = core.dual_mesh(grid)
    rho = np.sqrt(X1**2 + X2**2)
    fh = sfft.fft2(np.asarray(f.values))
    dc = fh[0, 0] / grid.n**2
    blocks, exps = [], []
    for j in shell_range(grid):
        psi = lp_profile(rho / 2.0**j) - lp_profile(rho / 2.0 ** (j - 1))
        if not np.any(psi > 0):
            continue
        blocks.append(Field(grid, sfft.ifft2(psi * fh), f.space_tag))
        exps.append(j)
    return LPDecomposition(field=f, exponents=exps, blocks=blocks, dc=complex(dc))


# ---------------------------------------------------------------------------
# norms


@dataclass
class NormReport:
    name: str
    value: float
    params: dict = dc_field(default_factory=dict)
    grid: str = ""
    cadence: float | None = None
    extras: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if not (self.value >= 0 and np.isfinite(self.value)):
            raise UsageError(f"norm value must be finite and >= 0: {self.value}")


def _grid_label(grid: GridSpec) -> str:
    return f"n={grid.n},L={grid.L}"


def lp_norm(f: Field, p: float) -> float:
    """L^p by grid quadrature (p = inf: max)."""
    a = np.abs(np.asarray(f.values))
    if np.isinf(p):
        return float(a.max())
    return float((f.grid.cell_area * np.sum(a**p)) ** (1.0 / p))


def besov_norm(f: Field, s: float, p: float, q: float) -> NormReport:
    """Homogeneous Besov norm (sum_j (2^{js} ||P_j f||_p)^q)^{1/q}.

    Shells are truncated to the grid band and the dc component is dropped
    (torus surrogate of the homogeneous space).
    """
    if not (p >= 1 and q >= 1):
        raise UsageError("besov_norm needs p, q >= 1")
    dec = lp_decompose(f)
    terms = np.array(
        [2.0 ** (j * s) * lp_norm(b, p) for j, b in zip(dec.exponents, dec.blocks)]
    )
    if np.isinf(q):
        val = float(terms.max()) if terms.size else 0.0
    else:
        val = float(np.sum(terms**q) ** (1.0 / q)) if terms.size else 0.0
    return NormReport(
        name="besov",
        value=val,
        params={"s": s, "p": p, "q": q},
        grid=_grid_label(f.grid),
    )


def _strichartz_r(p: float) -> float:
    if not p > 2:
        raise UsageError("Strichartz exponent requires p > 2")
    return 2.0 * p / (p - 2.0)


def strichartz_norm(traj: Trajectory, p: float) -> NormReport:
    """|| |D|^{1/p} u ||_{L^p_t L^r_x} with 1/p + 1/r = 1/2.

    Time integration by trapezoid on the (uniform) save grid; the extras
    carry the l2-refined shell variant (sum_j ||P_j .||^2)^{1/2}.
    """
    r = _strichartz_r(p)
    times = np.asarray(traj.times, dtype=float)
    if times.size < 2:
        raise UsageError("strichartz_norm needs at least two save times")
    dt = np.diff(times)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * max(abs(times[-1]), 1.0):
        raise UsageError("strichartz_norm needs a uniform save grid")
    grid = traj.grid
    frac = core.fractional_multiplier(grid, 1.0 / p)

    vals_t = []
    shells_t = []
    for st in traj.states:
        g = core.apply_multiplier(frac, st)
        vals_t.append(lp_norm(g, r) ** p)
        dec = lp_decompose(g)
        shells_t.append(
            {j: lp_norm(b, r) for j, b in zip(dec.exponents, dec.blocks)}
        )
    value = float(np.trapezoid(vals_t, times) ** (1.0 / p))

    all_j = sorted({j for sh in shells_t for j in sh})
    refined_sq = 0.0
    for j in all_j:
        series = np.array([sh.get(j, 0.0) ** p for sh in shells_t])
        refined_sq += np.trapezoid(series, times) ** (2.0 / p)
    refined = float(np.sqrt(refined_sq))

    cadence = float(dt[0])
    return NormReport(
        name="strichartz",
        value=value,
        params={"p": p, "r": r, "s": 1.0 / p},
        grid=_grid_label(grid),
        cadence=cadence,
        extras={"l2_refined": refined},
    )


def v_p_discrete(samples, p: float) -> NormReport:
    """Exact discrete p-variation: max over increasing subsequences of the
    sampled sequence of (sum ||v_{j+1} - v_j||^p)^{1/p}, by dynamic
    programming on best-ending-at-j values."""
    if len(samples) < 2:
        raise UsageError("v_p_discrete needs at least two samples")
    if not (p >= 1):
        raise UsageError("v_p_discrete needs p >= 1")
    n = len(samples)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = grid_norm(
                Field(samples[i].grid, samples[j].values - samples[i].values)
            )
    best = np.zeros(n)  # best sum of p-th powers ending at j
    for j in range(1, n):
        cand = best[:j] + dist[:j, j] ** p
        best[j] = max(0.0, float(np.max(cand)))
    value = float(np.max(best) ** (1.0 / p))
    return NormReport(
        name="v_p",
        value=value,
        params={"p": p, "samples": n},
        grid=_grid_label(samples[0].grid),
    )


def maximal_function(f: Field) -> Field:
    """Discrete uncentered maximal function over grid-aligned squares with
    dyadic side lengths (periodic wrap); dominates |f| pointwise."""
    a = np.abs(np.asarray(f.values))
    n = f.grid.n
    out = a.copy()
    scales = int(np.log2(n))
    for m in range(1, scales + 1):
        w = 1 << m
        # average over the square with lower corner at each node, by
        # dyadic doubling of trailing sums, then max over the w placements
        # containing the node (a trailing-window max on each axis)
        s = a.copy()
        for axis in (0, 1):
            t = s
            for step in range(m):
                t = t + np.roll(t, -(1 << step), axis=axis)
            s = t
        avg = s / (w * w)
        mx = avg
        for axis in (0, 1):
            t = mx
            for step in range(m):
                t = np.maximum(t, np.roll(t, 1 << step, axis=axis))
            mx = t
        out = np.maximum(out, mx)
    return Field(f.grid, out.astype(complex), f.space_tag)


# ---------------------------------------------------------------------------
# nonlinear interpolation ratios for the scattering transform


def _admissible_fixed_time(s: float, r: float):
    if not (2.0 < r < 4.0):
        raise UsageError("fixed-time ratio needs 2 < r < 4")
    if not (0.0 < s < 0.5):
        raise UsageError("fixed-time ratio needs 0 < s < 1/2")
    r1 = 1.0 / (2.0 / r - 0.5)
    return r1


def gn_ratio(
    u: Field,
    s: float,
    r: float,
    kgrid: KGrid,
    tol: float = 1e-6,
    workers: int = 1,
    scattering: "np.ndarray | None" = None,
) -> NormReport:
    """Fixed-time interpolation ratio

        ||S u||_{B^{s,r}_2} / ( ||u_hat||_2^{1/2} ||u_hat||_{B^{2s,r1}_2}^{1/2} )

    with 1/2 + 1/r1 = 2/r, both sides measured on the k-grid.  Degenerate
    (zero) input is reported via value nan in extras and value 0.
    """
    r1 = _admissible_fixed_time(s, r)
    kf_grid = kgrid.as_grid()
    ax = kgrid.axis()
    uhat = core.hat_transform_nodes(u, ax, ax)
    if scattering is None:
        sd = scattering_transform(u, kgrid, tol=tol, workers=workers)
        s_vals = sd.values
    else:
        s_vals = scattering
    s_field = Field(kf_grid, s_vals)
    uhat_field = Field(kf_grid, uhat)

    lhs = besov_norm(s_field, s, r, 2).value
    rhs = (
        grid_norm(uhat_field) ** 0.5
        * besov_norm(uhat_field, 2 * s, r1, 2).value ** 0.5
    )
    if rhs == 0.0:
        return NormReport(
            name="gn_ratio",
            value=0.0,
            params={"s": s, "r": r, "r1": r1},
            grid=_grid_label(kf_grid),
            extras={"status": "degenerate-input"},
        )
    return NormReport(
        name="gn_ratio",
        value=float(lhs / rhs),
        params={"s": s, "r": r, "r1": r1},
        grid=_grid_label(kf_grid),
        extras={"lhs": lhs, "rhs": rhs},
    )


def gn_ratio_linear_limit(u: Field, s: float, r: float, kgrid: KGrid) -> float:
    """The ratio with S u replaced by conj(u_hat) (the linearization)."""
    r1 = _admissible_fixed_time(s, r)
    ax = kgrid.axis()
    uhat = core.hat_transform_nodes(u, ax, ax)
    kf_grid = kgrid.as_grid()
    f = Field(kf_grid, np.conj(uhat))
    g = Field(kf_grid, uhat)
    rhs = grid_norm(g) ** 0.5 * besov_norm(g, 2 * s, r1, 2).value ** 0.5
    if rhs == 0:
        return float("nan")
    return float(besov_norm(f, s, r, 2).value / rhs)


def gn_ratio_spacetime(
    traj: Trajectory,
    p: float,
    kgrid: KGrid,
    tol: float = 1e-6,
    workers: int = 1,
) -> NormReport:
    """Space-time ratio: the l2-refined S^p norm (in the k variable) of
    t -> S u(t) against ||u_hat||_{l2 Linf L2}^{1/2} ||u_hat||_{l2 S^{p1}}^{1/2}
    with 1/p1 = 2/p."""
    if not p > 4.0:
        raise UsageError("space-time ratio needs p > 4 (so that p1 > 2)")
    p1 = p / 2.0
    kf_grid = kgrid.as_grid()
    ax = kgrid.axis()

    s_states, h_states = [], []
    for st in traj.states:
        sd = scattering_transform(st, kgrid, tol=tol, workers=workers)
        s_states.append(Field(kf_grid, sd.values))
        h_states.append(Field(kf_grid, core.hat_transform_nodes(st, ax, ax)))
    if all(grid_norm(f) == 0 for f in h_states):
        return NormReport(
            name="gn_ratio_spacetime",
            value=0.0,
            params={"p": p, "p1": p1},
            grid=_grid_label(kf_grid),
            extras={"status": "degenerate-input"},
        )

    s_traj = Trajectory("diag", kf_grid, list(traj.times), s_states, traj.dt,
                        "samples", 0.0)
    h_traj = Trajectory("diag", kf_grid, list(traj.times), h_states, traj.dt,
                        "samples", 0.0)
    lhs = strichartz_norm(s_traj, p).extras["l2_refined"]
    rhs_b = strichartz_norm(h_traj, p1).extras["l2_refined"]

    # l2 Linf L2 of u_hat: per-shell sup over time of the L2 norm
    all_shells = {}
    for f in h_states:
        dec = lp_decompose(f)
        for j, b in zip(dec.exponents, dec.blocks):
            all_shells.setdefault(j, []).append(grid_norm(b))
    rhs_e = float(
        np.sqrt(sum(max(v) ** 2 for v in all_shells.values()))
    )
    rhs = rhs_e**0.5 * rhs_b**0.5
    value = float(lhs / rhs) if rhs > 0 else 0.0
    return NormReport(
        name="gn_ratio_spacetime",
        value=value,
        params={"p": p, "p1": p1},
        grid=_grid_label(kf_grid),
        cadence=float(traj.times[1] - traj.times[0]) if len(traj.times) > 1 else None,
        extras={"lhs": lhs, "rhs_energy": rhs_e, "rhs_besov": rhs_b},
    )


# ---------------------------------------------------------------------------
# PDE residuals


def _h_minus_one(f: Field) -> float:
    """Mean-corrected homogeneous H^{-1}-type norm (weight 1/|xi|)."""
    grid = f.grid
    fh = core._forward_values(np.asarray(f.values - np.mean(f.values)), grid)
    X1, X2 = core.dual_mesh(grid)
    rho = np.sqrt(X1**2 + X2**2)
    w = np.zeros_like(rho)
    w[rho > 0] = 1.0 / rho[rho > 0]
    return float(np.sqrt(np.sum(np.abs(fh * w) ** 2)) / (2.0 * grid.L))


def pde_residual(traj: Trajectory, model=None, workers: int = 1) -> list:
    """Discrete H^{-1} residual ||u_t + sigma(D) u - N(u)|| at interior
    save times, with u_t by 4th-order (or, below five samples, 2nd-order)
    central differences on the save grid.  Returns [(t, NormReport)].
    """
    if len(traj.times) < 3:
        raise UsageError("pde_residual needs at least 3 save times")
    times = np.asarray(traj.times, dtype=float)
    dts = np.diff(times)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * max(abs(times[-1]), 1.0):
        raise UsageError("pde_residual needs a uniform save cadence")
    dt = float(dts[0])
    if model is None:
        model = get_model(
            traj.model_tag, traj.grid, getattr(traj, "nonlin_form", "canonical")
        )
    w_mask = core.dealias_mask(traj.grid, model.dealias_fraction)
    from .evolution import _Work

    work = _Work(model, workers)
    states = [np.asarray(st.values) for st in traj.states]
    out = []
    n_times = len(times)
    order4 = n_times >= 5
    rng_lo, rng_hi = (2, n_times - 2) if order4 else (1, n_times - 1)
    for i in range(rng_lo, rng_hi):
        if order4:
            ut = (
                -states[i + 2] + 8 * states[i + 1] - 8 * states[i - 1] + states[i - 2]
            ) / (12 * dt)
        else:
            ut = (states[i + 1] - states[i - 1]) / (2 * dt)
        ah = np.where(w_mask, sfft.fft2(states[i]), 0.0)
        rhs_hat = -model.dispersion.symbol * ah + work.nonlin_hat(ah)
        resid = ut - sfft.ifft2(rhs_hat)
        rep = NormReport(
            name="pde_residual",
            value=_h_minus_one(Field(traj.grid, resid)),
            params={"model": traj.model_tag, "order": 4 if order4 else 2},
            grid=_grid_label(traj.grid),
            cadence=dt,
        )
        out.append((float(times[i]), rep))
    return out


# ---------------------------------------------------------------------------
# CSV export (flat schema)

CSV_FIELDS = ["run_id", "name", "s", "p", "r", "q", "value", "grid", "cadence"]


def write_reports(path, reports, run_id: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for rep in reports:
            w.writerow(
                {
                    "run_id": run_id,
                    "name": rep.name,
                    "s": rep.params.get("s", ""),
                    "p": rep.params.get("p", ""),
                    "r": rep.params.get("r", ""),
                    "q": rep.params.get("q", ""),
                    "value": rep.value,
                    "grid": rep.grid,
                    "cadence": rep.cadence if rep.cadence is not None else "",
                }
            )
