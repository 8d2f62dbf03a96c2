"""Diagnostics tour: shell decompositions, dispersive norms, ratio checkers.

Decomposes a field into dyadic shells, evaluates Besov and Strichartz
norms, computes the discrete p-variation of a back-propagated trajectory,
and evaluates the fixed-time interpolation ratio for the scattering
transform against its linear limit.
"""

import numpy as np

from dbarlab.core import GridSpec, grid_norm
from dbarlab.datums import gaussian
from dbarlab.diagnostics import (
    besov_norm,
    gn_ratio,
    gn_ratio_linear_limit,
    lp_decompose,
    maximal_function,
    strichartz_norm,
    v_p_discrete,
)
from dbarlab.evolution import Trajectory, linear_flow, model_mnv
from dbarlab.scattering import KGrid

grid = GridSpec(64, 8.0)
u = gaussian(grid, amplitude=0.5, width=1.0)

dec = lp_decompose(u)
print("dyadic shells 2^j with mass:")
for j, block in zip(dec.exponents, dec.blocks):
    nb = grid_norm(block)
    if nb > 1e-12:
        print(f"  j={j:+d}: ||P_j u||_2 = {nb:.4e}")
print(f"reconstruction error: {dec.reconstruction_error():.2e}")

rep = besov_norm(u, 0.25, 3.0, 2.0)
print(f"Besov norm (s=1/4, p=3, q=2): {rep.value:.6f}")

model = model_mnv(grid)
times = np.linspace(0.0, 0.1, 9)
states = [linear_flow(model, u, t) for t in times]
traj = Trajectory("mNV", grid, list(times), states, times[1], "linear", 0.5)
s4 = strichartz_norm(traj, 4.0)
print(f"S^4 norm of the linear flow: {s4.value:.6f} "
      f"(l2-refined {s4.extras['l2_refined']:.6f})")

back = [linear_flow(model, st, -t) for st, t in zip(states, times)]
print(f"p-variation of the back-propagated flow (exactly 0 for linear): "
      f"{v_p_discrete(back, 2.0).value:.2e}")

m = maximal_function(u)
print(f"maximal function dominates: min(Mu - |u|) = "
      f"{np.min(m.values.real - np.abs(u.values)):.2e}")

kgrid = KGrid(32, 3.0)
ratio = gn_ratio(u, 0.25, 3.0, kgrid, tol=1e-8)
lin = gn_ratio_linear_limit(u, 0.25, 3.0, kgrid)
print(f"interpolation ratio ||S u||_B / (||u_hat||^1/2 ||u_hat||_B^1/2): "
      f"{ratio.value:.4f} (linear limit {lin:.4f})")
