"""The Miura map, its Newton inverse, and the spectral range test.

Maps a constrained field u = 2 dbar(phi) to q = 2 d(u) + |u|^2, checks the
integral identity, recovers u by the Newton solve, and classifies both q
and a deep negative well by the smallest eigenvalue of -Lap + q.  The
Newton mean defect independently estimates -lambda_min.
"""

from dbarlab.core import Field, GridSpec, grid_norm
from dbarlab.datums import constrained_gaussian, deep_well
from dbarlab.miura import (
    miura_forward,
    miura_inverse,
    schrodinger_min_eig,
    zero_mode,
)

grid = GridSpec(64, 8.0)
u = constrained_gaussian(grid, amplitude=0.4, width2=1.44)

q = miura_forward(u)
print(f"constraint violation of u: {q.constraint_violation:.2e}")
print(f"integral identity: int q = {q.integral:.10f}, "
      f"||u||_2^2 = {grid_norm(u) ** 2:.10f}")

inv = miura_inverse(q, tol=1e-11)
err = grid_norm(Field(grid, inv.u.values - u.values)) / grid_norm(u)
print(f"Newton inverse: {inv.iterations} iterations, status {inv.status}, "
      f"roundtrip error {err:.2e}")

lam = schrodinger_min_eig(q)
print(f"lambda_min(-Lap + q) = {lam:.3e}  (in range: zero mode exists)")
zm = zero_mode(q)
print(f"zero mode: min psi = {zm.psi.values.real.min():.4f} > 0, "
      f"conductivity residual {zm.conductivity_residual:.2e}")

well = deep_well(grid, depth=10.0)
lam_w = schrodinger_min_eig(well)
inv_w = miura_inverse(well, max_newton=25)
print(f"deep well: lambda_min = {lam_w:.4f} < 0 -> outside the range")
print(f"  Newton status: {inv_w.status}, mean defect {inv_w.mean_defect:.4f} "
      f"(estimates -lambda_min = {-lam_w:.4f})")
