"""The d-bar scattering transform and its involution inverse.

The direct transform solves, for each spectral parameter k, the pair of
real-linear equations

    dbar m_pm = pm e_{-k} u conj(m_pm),        m_pm - 1 -> 0 at infinity,

and assembles

    S u(k) = (1/2 pi i) * integral( e_k(z) conj(u(z)) (m_+ + m_-) ) dz.

Splitting m_pm = 1 + w_pm, the constant part integrates to the conjugate hat
transform exactly, so S u(k) = conj(u_hat(k)) + (1/2 pi i) int e_k conj(u)
(w_+ + w_-); the linearization of S at u = 0 is conj(u_hat).

The transform is an involution: the inverse applies the same construction to
the scattering data read as a potential in the k variable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import core
from ._jost import JostSweep
from .core import (
    BandError,
    Field,
    GridSpec,
    UsageError,
    Wavenumber,
    grid_norm,
    hat_transform_nodes,
)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
DEFAULT_RESTART = 30


@dataclass(frozen=True)
class KGrid:
    """Square lattice of spectral parameters: nk nodes per axis on [-K, K)."""

    nk: int
    K: float

    def __post_init__(self):
        if self.nk < 2:
            raise UsageError("kgrid needs at least 2 nodes per axis")
        if not (self.K > 0):
            raise UsageError("kgrid half-width must be positive")

    @property
    def dk(self) -> float:
        return 2.0 * self.K / self.nk

    @property
    def cell_area(self) -> float:
        return self.dk * self.dk

    def axis(self) -> np.ndarray:
        return -self.K + self.dk * np.arange(self.nk)

    def nodes(self) -> np.ndarray:
        """Complex nodes k = k1 + i k2, layout [ik2, ik1]."""
        ax = self.axis()
        K1, K2 = np.meshgrid(ax, ax, indexing="xy")
        return K1 + 1j * K2

    def as_grid(self) -> GridSpec:
        """Reinterpret as a physical grid (for the involution inverse)."""
        return GridSpec(self.nk, self.K)


@dataclass
class JostSolution:
    """Jost pair at one spectral parameter, with derived combinations.

    m1 = (m_+ + m_-)/2 and m2 = (m_+ - m_-)/2.  The identity
    dbar m1 = e_{-k} u conj(m2) holds for these; see jost_identity_check for
    the phase-free forms quoted in terms of a rephased m2.
    """

    k: complex
    m_plus: Field
    m_minus: Field
    m1: Field
    m2: Field
    residual_norms: dict
    iterations: dict
    tail_fraction: float

    @property
    def converged(self) -> bool:
        return all(np.isfinite(v) for v in self.residual_norms.values())


class JostConvergenceError(RuntimeError):
    """Krylov iteration exhausted max_iter; flags an exceptional (u, k) pair."""

    def __init__(self, k, residual, iterations, history=None):
        super().__init__(
            f"Jost solve did not converge at k={k}: residual {residual:.3e} "
            f"after {iterations} iterations"
        )
        self.k = k
        self.residual = residual
        self.iterations = iterations
        self.history = history or []


@dataclass
class ScatteringData:
    """S u sampled on a k-grid, with per-node solver statistics."""

    kgrid: KGrid
    values: np.ndarray  # [ik2, ik1]
    source_l2: float
    iterations: np.ndarray
    residuals: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "ok" if not self.failures else "partial"

    def norm(self) -> float:
        return float(
            np.sqrt(self.kgrid.cell_area * np.sum(np.abs(self.values) ** 2))
        )

    def as_field(self) -> Field:
        return Field(self.kgrid.as_grid(), self.values, core.SPECTRAL_PARAMETER)


def _check_band(zgrid: GridSpec, kgrid: KGrid) -> None:
    if kgrid.K > zgrid.hat_band + 1e-12:
        raise BandError(
            f"kgrid half-width {kgrid.K} exceeds the hat band "
            f"{zgrid.hat_band:.3f} of the z-grid"
        )


@dataclass
class JostHalf:
    """One Jost equation's solution m = 1 + w with solver statistics."""

    k: complex
    sign: int
    m: Field
    iterations: int
    residual: float
    tail_fraction: float
    converged: bool


def solve_jost(
    u: Field,
    k,
    sign: int = +1,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    restart: int = DEFAULT_RESTART,
    workers: int = 1,
    raise_on_failure: bool = True,
) -> JostHalf:
    """Solve one Jost equation on the full window.

    The residual reported is the fixed-point form
    ||w - sign * C(e_{-k} u conj(1+w))|| in grid L2 units, which is how the
    forward operator acts on the solver output.
    """
    kc = complex(k.k) if isinstance(k, Wavenumber) else complex(k)
    _warn_tail(u)
    sweep = JostSweep(
        u, window="full", tol=tol, max_iter=max_iter, restart=restart,
        workers=workers,
    )
    W, iters, resid, ok = sweep.solve_nodes([kc], [float(sign)])
    if not ok[0] and raise_on_failure:
        raise JostConvergenceError(kc, float(resid[0]), int(iters[0]))
    m = Field(u.grid, 1.0 + W[0], core.PHYSICAL)
    res = _fixed_point_residual(u, kc, m, sign)
    return JostHalf(
        k=kc,
        sign=int(sign),
        m=m,
        iterations=int(iters[0]),
        residual=res,
        tail_fraction=sweep.tail_fraction,
        converged=bool(ok[0]),
    )


def _warn_tail(u: Field, threshold: float = 1e-6) -> None:
    import warnings as _warnings

    tail = core.central_tail_fraction(u)
    if tail > threshold:
        _warnings.warn(
            core.SupportLeakageWarning(
                f"potential has relative tail mass {tail:.3e} outside the "
                f"central half-window (threshold {threshold:.1e})"
            )
        )


def _fixed_point_residual(u: Field, k: complex, m: Field, sign: int) -> float:
    """||w - sign * C(e_{-k} u conj(m))|| in grid L2 units."""
    phi = core.exp_k(u.grid, -k).values * u.values
    g = Field(u.grid, phi * np.conj(m.values))
    cw = core.cauchy_transform(
        g, mode=core.FREE_SPACE_TRUNCATED, tail_threshold=np.inf
    )
    w = m.values - 1.0
    return grid_norm(Field(u.grid, w - sign * cw.values))


def solve_jost_pair(
    u: Field,
    k,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    restart: int = DEFAULT_RESTART,
    workers: int = 1,
    raise_on_failure: bool = True,
) -> JostSolution:
    """Both Jost equations at one k, with residuals and derived m1, m2."""
    kc = complex(k.k) if isinstance(k, Wavenumber) else complex(k)
    _warn_tail(u)
    sweep = JostSweep(
        u, window="full", tol=tol, max_iter=max_iter, restart=restart,
        workers=workers,
    )
    W, iters, resid, ok = sweep.solve_nodes([kc, kc], [1.0, -1.0])
    if raise_on_failure and not (ok[0] and ok[1]):
        bad = 0 if not ok[0] else 1
        raise JostConvergenceError(kc, float(resid[bad]), int(iters[bad]))
    m_plus = Field(u.grid, 1.0 + W[0], core.PHYSICAL)
    m_minus = Field(u.grid, 1.0 + W[1], core.PHYSICAL)
    m1 = Field(u.grid, 0.5 * (m_plus.values + m_minus.values), core.PHYSICAL)
    m2 = Field(u.grid, 0.5 * (m_plus.values - m_minus.values), core.PHYSICAL)
    residuals = {
        "+": _fixed_point_residual(u, kc, m_plus, +1),
        "-": _fixed_point_residual(u, kc, m_minus, -1),
    }
    return JostSolution(
        k=kc,
        m_plus=m_plus,
        m_minus=m_minus,
        m1=m1,
        m2=m2,
        residual_norms=residuals,
        iterations={"+": int(iters[0]), "-": int(iters[1])},
        tail_fraction=sweep.tail_fraction,
    )


def scattering_transform(
    u: Field,
    kgrid: KGrid,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    restart: int = DEFAULT_RESTART,
    workers: int = 1,
    window: str = "half",
) -> ScatteringData:
    """S u on every node of the k-grid.

    Nodes are independent systems solved in data-parallel batches; failed
    nodes keep their best-effort value and are listed in .failures.
    """
    _check_band(u.grid, kgrid)
    ax = kgrid.axis()
    linear = np.conj(hat_transform_nodes(u, ax, ax))  # [ik2, ik1]
    sweep = JostSweep(
        u, window=window, tol=tol, max_iter=max_iter, restart=restart,
        workers=workers,
    )
    nodes = kgrid.nodes().ravel()
    res = sweep.scattering_values(nodes, linear.ravel())
    nk = kgrid.nk
    values = res.values.reshape(nk, nk)
    iters = res.iterations.reshape(nk, nk)
    resid = res.residuals.reshape(nk, nk)
    conv = res.converged.reshape(nk, nk)
    failures = [
        {
            "ik2": int(i2),
            "ik1": int(i1),
            "k": complex(nodes.reshape(nk, nk)[i2, i1]),
            "residual": float(resid[i2, i1]),
            "iterations": int(iters[i2, i1]),
        }
        for i2, i1 in zip(*np.nonzero(~conv))
    ]
    return ScatteringData(
        kgrid=kgrid,
        values=values,
        source_l2=grid_norm(u),
        iterations=iters,
        residuals=resid,
        failures=failures,
    )


def _eval_grid_size(kgrid: KGrid, out_grid: GridSpec) -> int:
    """Spectral-parameter sampling adequate for the inverse transform.

    The inverse is evaluated at z-nodes; its content in the hat variable
    extends to about twice the data band K, so the evaluation grid needs
    hat band >= 2K, i.e. n_eval >= 8 K L / pi.  Never above out_grid.n.
    """
    need = int(np.ceil(8.0 * kgrid.K * out_grid.L / np.pi))
    n = 16
    while n < need:
        n *= 2
    return min(n, out_grid.n)


def inverse_scattering(
    s: ScatteringData,
    out_grid: GridSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    restart: int = DEFAULT_RESTART,
    workers: int = 1,
) -> Field:
    """Involution inverse: the same transform applied to the data.

    The scattering data is read as a potential on its k-grid; the result is
    evaluated at the nodes of an adequate z-grid and band-limited resampled
    onto out_grid.
    """
    if not np.all(np.isfinite(s.values)):
        raise UsageError("scattering data contains non-finite values")
    kg = s.kgrid
    pot_grid = kg.as_grid()  # requires power-of-two nk
    pot = Field(pot_grid, s.values, core.PHYSICAL)
    band = pot_grid.hat_band
    if band < 0.5 * out_grid.L:
        raise BandError(
            f"the k-grid's inverse band {band:.3f} covers less than half of "
            f"the output window {out_grid.L}"
        )
    n_eval = _eval_grid_size(kg, out_grid)
    eval_grid = GridSpec(n_eval, out_grid.L)
    ax = eval_grid.axis()
    # nodes beyond the representable band are zero-filled: the admissible
    # data class decays there, and the k-grid cannot resolve them
    valid = np.abs(ax) <= band + 1e-12
    axv = ax[valid]
    linear = np.conj(hat_transform_nodes(pot, axv, axv))
    sweep = JostSweep(
        pot, window="full", tol=tol, max_iter=max_iter, restart=restart,
        workers=workers,
    )
    Z1, Z2 = np.meshgrid(axv, axv, indexing="xy")
    nodes = (Z1 + 1j * Z2).ravel()
    res = sweep.scattering_values(nodes, linear.ravel())
    if not np.all(res.converged):
        bad = np.flatnonzero(~res.converged)
        raise JostConvergenceError(
            nodes[bad[0]], float(res.residuals[bad[0]]),
            int(res.iterations[bad[0]]),
        )
    vals = np.zeros((n_eval, n_eval), dtype=np.complex128)
    vals[np.ix_(valid, valid)] = res.values.reshape(axv.size, axv.size)
    out = Field(eval_grid, vals, core.PHYSICAL)
    return core.resample_field(out, out_grid.n)


@dataclass
class JostIdentityReport:
    """Residuals of the two displayed first-order identities, evaluated with
    the module's m2 = (m_+ - m_-)/2 literally and with the e_{pm k} phases
    inserted (m2 -> e_{-k} conj(m2)); the smaller residual names the
    matching convention."""

    k: complex
    residual_literal: tuple
    residual_phase_inserted: tuple
    matching_convention: str


def jost_identity_check(
    u: Field,
    k,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
) -> JostIdentityReport:
    """Check dbar m1 = u m2 and d(e_k m2) = e_k conj(u) m1 on solver output.

    Both identities are evaluated with the module's m2 literally and with the
    e_{pm k} phases inserted (m2 -> e_{-k} conj(m2)).  Derivatives of the
    Jost remainders are taken spectrally on the padded torus, where the
    solved remainders have a periodic representation through the Cauchy
    transform of their own right-hand sides; this keeps the 1/z tails from
    contaminating the residuals.
    """
    kc = complex(k.k) if isinstance(k, Wavenumber) else complex(k)
    sol = solve_jost_pair(u, kc, tol=tol, workers=workers)
    grid = u.grid
    n = grid.n
    ek = core.exp_k(grid, kc).values
    emk = np.conj(ek)
    phi = emk * u.values

    def padded(vals):
        g = Field(grid, vals)
        return core.cauchy_transform(
            g, mode=core.FREE_SPACE_TRUNCATED, return_padded=True,
            tail_threshold=np.inf,
        )

    def crop(f):
        lo = (f.grid.n - n) // 2
        return f.values[lo : lo + n, lo : lo + n]

    wp_pad = padded(phi * np.conj(sol.m_plus.values))
    wm_pad = padded(-phi * np.conj(sol.m_minus.values))
    m1_rem_pad = Field(wp_pad.grid, 0.5 * (wp_pad.values + wm_pad.values))
    m2_pad = Field(wp_pad.grid, 0.5 * (wp_pad.values - wm_pad.values))

    m1, m2 = sol.m1.values, sol.m2.values
    scale = 1.0 + grid_norm(u)

    dbar_m1 = crop(core.d_bar(m1_rem_pad))
    r1_lit = grid_norm(Field(grid, dbar_m1 - u.values * m2), grid) / scale
    r1_phase = (
        grid_norm(Field(grid, dbar_m1 - phi * np.conj(m2)), grid) / scale
    )

    rhs = ek * np.conj(u.values) * m1
    ek_pad = core.exp_k(m2_pad.grid, kc).values
    lhs_lit = crop(core.d(Field(m2_pad.grid, ek_pad * m2_pad.values)))
    r2_lit = grid_norm(Field(grid, lhs_lit - rhs), grid) / scale
    lhs_phase = crop(core.d(Field(m2_pad.grid, np.conj(m2_pad.values))))
    r2_phase = grid_norm(Field(grid, lhs_phase - rhs), grid) / scale

    matching = (
        "phase-inserted"
        if (r1_phase + r2_phase) <= (r1_lit + r2_lit)
        else "literal"
    )
    return JostIdentityReport(
        k=kc,
        residual_literal=(r1_lit, r2_lit),
        residual_phase_inserted=(r1_phase, r2_phase),
        matching_convention=matching,
    )


def check_transform(s: ScatteringData, out_grid: GridSpec) -> Field:
    """Inverse hat normalization applied to scattering data (linear inverse)."""
    ax = s.kgrid.axis()
    return core.check_transform_nodes(
        s.values, ax, ax, s.kgrid.cell_area, out_grid
    )


# ---------------------------------------------------------------------------
# persistence: F2D1 container + JSON sidecar of solver statistics


def write_scattering(path_prefix, s: ScatteringData) -> None:
    core.write_field(str(path_prefix) + ".f2d1", s.as_field())
    stats = {
        "source_l2": s.source_l2,
        "kgrid": {"nk": s.kgrid.nk, "K": s.kgrid.K},
        "iterations": s.iterations.tolist(),
        "residuals": s.residuals.tolist(),
        "failures": [
            {**f, "k": [f["k"].real, f["k"].imag]} for f in s.failures
        ],
        "status": s.status,
    }
    with open(str(path_prefix) + ".json", "w") as fh:
        json.dump(stats, fh, indent=1)


def read_scattering(path_prefix) -> ScatteringData:
    f = core.read_field(str(path_prefix) + ".f2d1")
    with open(str(path_prefix) + ".json") as fh:
        stats = json.load(fh)
    kg = KGrid(stats["kgrid"]["nk"], stats["kgrid"]["K"])
    failures = [
        {**d, "k": complex(d["k"][0], d["k"][1])} for d in stats["failures"]
    ]
    return ScatteringData(
        kgrid=kg,
        values=np.array(f.values),
        source_l2=stats["source_l2"],
        iterations=np.array(stats["iterations"], dtype=np.int64),
        residuals=np.array(stats["residuals"]),
        failures=failures,
    )
