"""Forward and inverse scattering: the transform is its own inverse.

Computes S u for a Gaussian on a modest grid, checks the Plancherel ratio,
applies the same transform again, and prints the involution error.  With
matplotlib installed, saves a side-by-side of |u|, |S u| and the recovered
field.
"""

import numpy as np

from dbarlab.core import Field, GridSpec, grid_norm
from dbarlab.datums import gaussian
from dbarlab.scattering import KGrid, inverse_scattering, scattering_transform

grid = GridSpec(64, 8.0)
kgrid = KGrid(32, 3.0)
u = gaussian(grid, amplitude=1.0, width=1.0)

print(f"potential: unit Gaussian, ||u||_2 = {grid_norm(u):.6f}")
s = scattering_transform(u, kgrid, tol=1e-8)
print(f"scattering data on {kgrid.nk}x{kgrid.nk} nodes, |k| <= {kgrid.K}")
print(f"  solver iterations: mean {s.iterations.mean():.1f}, max {s.iterations.max()}")
print(f"  Plancherel ratio ||S u|| / ||u|| = {s.norm() / grid_norm(u):.6f}")

rec = inverse_scattering(s, grid, tol=1e-8)
err = grid_norm(Field(grid, rec.values - u.values)) / grid_norm(u)
print(f"involution: ||S(S u) - u|| / ||u|| = {err:.3e}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    for ax, (title, vals, extent) in zip(
        axes,
        [
            ("|u|", np.abs(u.values), grid.L),
            ("|S u|", np.abs(s.values), kgrid.K),
            ("|recovered - u|", np.abs(rec.values - u.values), grid.L),
        ],
    ):
        im = ax.imshow(
            vals,
            origin="lower",
            extent=[-extent, extent, -extent, extent],
        )
        ax.set_title(title)
        fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig("demo_scattering.png", dpi=110)
    print("wrote demo_scattering.png")
except ImportError:
    pass
