"""Batched solver for the Jost fixed-point equations.

For a potential u and spectral parameter k the unknown w = m - 1 solves the
real-linear equation

    w - s * C(phi_k * conj(w)) = s * C(phi_k),      phi_k = e_{-k} u,  s = +-1,

with C the free-space dbar^{-1} (truncated-kernel convolution).  The
conjugation makes the operator real-linear only, so the Krylov iteration is
GMRES over the real field: inner products are Re<a, b> and all recurrence
coefficients are real, which is equivalent to solving the doubled system for
(Re w, Im w).

Because the right-hand side and the product phi * conj(w) vanish where u
does, the unknown can be restricted to a window containing the support of u:

* window "half": w lives on the central half of the z-grid; the convolution
  runs on the original (n, L) torus with kernel radius L.  This is the fast
  path for sweeps over many k nodes.
* window "full": w lives on the whole grid; the convolution runs on the
  zero-padded (2n, 2L) torus with kernel radius 2L (the public single-k
  contract).

Each system in a batch evolves independently (per-node Arnoldi data, a
per-node first-crossing iteration count, and a per-node truncated
least-squares solve), so returned values and iteration counts are bitwise
reproducible regardless of how nodes are grouped into batches.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.linalg import solve_triangular

from .core import (
    Field,
    SupportLeakageWarning,
    _free_cauchy_symbol,
    central_tail_fraction,
)

_BATCH_MEMORY_BUDGET = 1 << 30  # bytes for the Krylov basis of one batch


@dataclass
class SweepResult:
    """Per-node outcome of a batched Jost sweep (arrays indexed by node)."""

    values: np.ndarray  # scattering values S u(k)
    iterations: np.ndarray  # inner iterations, summed over the two signs
    residuals: np.ndarray  # worst fixed-point residual (grid L2 units)
    converged: np.ndarray  # both signs converged


class JostSweep:
    def __init__(
        self,
        u: Field,
        window: str = "half",
        tol: float = 1e-8,
        max_iter: int = 200,
        restart: int = 30,
        workers: int = 1,
        warm_start: str = "none",
        tail_threshold: float = 1e-4,
    ):
        if window not in ("half", "full"):
            raise ValueError(f"unknown window {window!r}")
        self.grid = u.grid
        self.window = window
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.restart = int(restart)
        self.workers = int(workers)
        if warm_start not in ("none", "born"):
            raise ValueError(f"unknown warm start {warm_start!r}")
        self.warm_start = warm_start
        self.tail_fraction = central_tail_fraction(u)
        # the half-window geometry truncates the potential there; the full
        # window only requires decay by the grid corners (callers check)
        if window == "half" and self.tail_fraction > tail_threshold:
            warnings.warn(
                SupportLeakageWarning(
                    f"Jost potential has relative tail mass "
                    f"{self.tail_fraction:.3e} outside the central half-window "
                    f"(threshold {tail_threshold:.1e})"
                )
            )

        n, L = u.grid.n, u.grid.L
        if window == "half":
            self.win_n = n // 2
            self.win_lo = n // 4
            self.conv_n = n
            conv_L = L
            radius = L
        else:
            self.win_n = n
            self.win_lo = n // 2
            self.conv_n = 2 * n
            conv_L = 2 * L
            radius = 2 * L
        self.symbol = _free_cauchy_symbol(self.conv_n, conv_L, radius)

        lo, wn = self.win_lo, self.win_n
        ax = u.grid.axis()
        self.x_win = ax[lo : lo + wn]
        sl = slice(lo, lo + wn) if window == "half" else slice(0, n)
        self.u_win = np.ascontiguousarray(u.values[sl, sl])
        if window == "full":
            self.x_win = ax
        self.u_norm = float(
            np.sqrt(u.grid.cell_area * np.sum(np.abs(u.values) ** 2))
        )
        # residual target in raw vector 2-norm units
        self.vec_tol = self.tol * (1.0 + self.u_norm) / u.grid.h

    # -- geometry helpers ---------------------------------------------------

    def _phases(self, knodes: np.ndarray) -> np.ndarray:
        """e_{-k}(z) on the window for each node: exp(-2i(x k1 - y k2))."""
        k1 = knodes.real[:, None]
        k2 = knodes.imag[:, None]
        px = np.exp(-2j * (self.x_win[None, :] * k1))  # [B, wn] in x
        py = np.exp(2j * (self.x_win[None, :] * k2))  # [B, wn] in y
        return np.einsum("by,bx->byx", py, px)

    def _cauchy(self, g: np.ndarray) -> np.ndarray:
        """Batched free-space dbar^{-1}: [B, wn, wn] -> [B, wn, wn]."""
        B = g.shape[0]
        lo, wn, nt = self.win_lo, self.win_n, self.conv_n
        buf = getattr(self, "_buf", None)
        if buf is None or buf.shape[0] < B:
            buf = np.zeros((B, nt, nt), dtype=np.complex128)
            self._buf = buf
        big = buf[:B]
        # only the window block is ever written; the border stays zero
        big[:, lo : lo + wn, lo : lo + wn] = g
        ghat = sfft.fft2(big, axes=(-2, -1), workers=self.workers)
        ghat *= self.symbol
        out = sfft.ifft2(ghat, axes=(-2, -1), workers=self.workers)
        return out[:, lo : lo + wn, lo : lo + wn]

    # -- real-linear batched GMRES -----------------------------------------

    def _apply(self, X, phi, signs):
        """A X = X - s * C(phi * conj(X)) for a stack of systems."""
        B, wn = X.shape[0], self.win_n
        g = phi * np.conj(X)
        cw = self._cauchy(g.reshape(B, wn, wn)).reshape(B, wn * wn)
        return X - signs[:, None] * cw

    def _rhs(self, phi, signs):
        B, wn = phi.shape[0], self.win_n
        c = self._cauchy(phi.reshape(B, wn, wn)).reshape(B, wn * wn)
        return signs[:, None] * c

    def solve_nodes(self, knodes: np.ndarray, signs: np.ndarray):
        """Solve one system per (k, sign) pair.

        Returns (W, iterations, residuals, converged) with W of shape
        [B, win_n, win_n].
        """
        knodes = np.asarray(knodes, dtype=np.complex128).ravel()
        signs = np.asarray(signs, dtype=np.float64).ravel()
        B = knodes.size
        wn = self.win_n
        N = wn * wn

        phi = (self._phases(knodes) * self.u_win[None, :, :]).reshape(B, N)
        b = self._rhs(phi, signs)
        X = b.copy() if self.warm_start == "born" else np.zeros_like(b)

        iters = np.zeros(B, dtype=np.int64)
        resid = np.full(B, np.inf)
        done = np.zeros(B, dtype=bool)

        # zero right-hand side (or zero potential): solved at 0 iterations
        bnorm = np.linalg.norm(b, axis=1)
        trivial = bnorm <= self.vec_tol
        if self.warm_start == "none":
            done |= trivial
            resid[trivial] = bnorm[trivial]

        m = self.restart
        total = np.zeros(B, dtype=np.int64)
        while True:
            active = np.flatnonzero(~done & (total < self.max_iter))
            if active.size == 0:
                break
            Xa, it_a, res_a, ok_a = self._gmres_cycle(
                X[active], phi[active], signs[active], m
            )
            X[active] = Xa
            total[active] += it_a
            iters[active] = total[active]
            resid[active] = res_a
            done[active] |= ok_a

        W = X.reshape(B, wn, wn)
        # grid-unit residuals
        resid_grid = resid * self.grid.h
        return W, iters, resid_grid, done | (resid <= self.vec_tol)

    def _gmres_cycle(self, X, phi, signs, m):
        """One restart cycle for the active systems; per-system truncation."""
        B, N = X.shape
        R = self._rhs(phi, signs) - self._apply(X, phi, signs)
        beta = np.linalg.norm(R, axis=1)
        ok0 = beta <= self.vec_tol
        if np.all(ok0):
            return X, np.zeros(B, dtype=np.int64), beta, ok0

        safe_beta = np.where(beta > 0, beta, 1.0)
        # Krylov basis stored batch-major as a real-interleaved view: the
        # float64 dot of complex128 data is exactly the real inner product,
        # and the Gram-Schmidt sweeps become BLAS matmuls
        V = np.empty((B, m + 1, 2 * N), dtype=np.float64)
        V[:, 0] = (R / safe_beta[:, None]).view(np.float64)
        H = np.zeros((B, m + 1, m))
        cs = np.zeros((B, m))
        sn = np.zeros((B, m))
        g = np.zeros((B, m + 1))
        g[:, 0] = beta
        cross = np.full(B, -1, dtype=np.int64)
        cross[ok0] = 0
        res_est = beta.copy()

        steps = 0
        for j in range(m):
            steps = j + 1
            vj = np.ascontiguousarray(V[:, j]).view(np.complex128)
            w = self._apply(vj, phi, signs).view(np.float64)
            # two-pass classical Gram-Schmidt (CGS2) against the basis
            basis = V[:, : j + 1]
            h1 = (basis @ w[:, :, None])[:, :, 0]
            w -= (h1[:, None, :] @ basis)[:, 0, :]
            h2 = (basis @ w[:, :, None])[:, :, 0]
            w -= (h2[:, None, :] @ basis)[:, 0, :]
            H[:, : j + 1, j] = h1 + h2
            hnext = np.linalg.norm(w, axis=1)
            H[:, j + 1, j] = hnext
            V[:, j + 1] = w / np.where(hnext > 0, hnext, 1.0)[:, None]

            # apply accumulated Givens rotations to the new column
            for i in range(j):
                t = cs[:, i] * H[:, i, j] + sn[:, i] * H[:, i + 1, j]
                H[:, i + 1, j] = -sn[:, i] * H[:, i, j] + cs[:, i] * H[:, i + 1, j]
                H[:, i, j] = t
            denom = np.hypot(H[:, j, j], H[:, j + 1, j])
            denom = np.where(denom > 0, denom, 1.0)
            cs[:, j] = H[:, j, j] / denom
            sn[:, j] = H[:, j + 1, j] / denom
            H[:, j, j] = cs[:, j] * H[:, j, j] + sn[:, j] * H[:, j + 1, j]
            H[:, j + 1, j] = 0.0
            g[:, j + 1] = -sn[:, j] * g[:, j]
            g[:, j] = cs[:, j] * g[:, j]
            res_est = np.abs(g[:, j + 1])
            newly = (cross < 0) & (res_est <= self.vec_tol)
            cross[newly] = j + 1
            if np.all(cross >= 0):
                break

        Xout = X.copy()
        Xout_r = Xout.view(np.float64)
        iters = np.where(cross >= 0, cross, steps).astype(np.int64)
        for bidx in range(B):
            jt = int(iters[bidx])
            if jt == 0:
                continue
            y = solve_triangular(H[bidx, :jt, :jt], g[bidx, :jt], lower=False)
            Xout_r[bidx] += y @ V[bidx, :jt, :]
        ok = cross >= 0
        # Givens residual estimate at each system's own truncation point
        res_out = res_est.copy()
        for bidx in range(B):
            if 0 <= cross[bidx] < steps:
                res_out[bidx] = min(res_out[bidx], self.vec_tol)
        return Xout, iters, res_out, ok

    # -- high level ----------------------------------------------------------

    def batch_size(self) -> int:
        per_system = (self.restart + 1) * self.win_n * self.win_n * 16
        b = max(int(_BATCH_MEMORY_BUDGET // max(per_system, 1)), 2)
        return int(min(b, 512))

    def scattering_values(
        self, knodes: np.ndarray, linear_part: np.ndarray
    ) -> SweepResult:
        """S u(k) for a flat list of nodes.

        linear_part carries conj(u_hat(k)) computed on the full grid; the
        window integral adds (1/2pi i) * integral(e_k conj(u) (w+ + w-)).
        """
        knodes = np.asarray(knodes, dtype=np.complex128).ravel()
        nn = knodes.size
        values = np.empty(nn, dtype=np.complex128)
        iterations = np.empty(nn, dtype=np.int64)
        residuals = np.empty(nn, dtype=np.float64)
        converged = np.empty(nn, dtype=bool)

        bs = max(self.batch_size() // 2, 1)  # two signs per node
        area = self.grid.cell_area
        u_conj = np.conj(self.u_win).reshape(-1)
        for start in range(0, nn, bs):
            kb = knodes[start : start + bs]
            nb = kb.size
            kk = np.concatenate([kb, kb])
            ss = np.concatenate([np.ones(nb), -np.ones(nb)])
            W, it, rs, ok = self.solve_nodes(kk, ss)
            wsum = (W[:nb] + W[nb:]).reshape(nb, -1)
            ek = np.conj(self._phases(kb)).reshape(nb, -1)
            integ = area * np.einsum("bn,bn->b", ek * u_conj[None, :], wsum)
            values[start : start + nb] = (
                linear_part[start : start + nb] + integ / (2j * np.pi)
            )
            iterations[start : start + nb] = it[:nb] + it[nb:]
            residuals[start : start + nb] = np.maximum(rs[:nb], rs[nb:])
            converged[start : start + nb] = ok[:nb] & ok[nb:]
        return SweepResult(values, iterations, residuals, converged)
