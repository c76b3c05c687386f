# %% [markdown]
# Boundary operators and the mean curvature stencil.
#
# A random manufactured state satisfying the kinematic and magnetic
# constraints becomes a basic state.  We look at the boundary matrix, the
# first variation of the boundary operator, and the curvature stencil on a
# paraboloid.

# %%
import numpy as np

from fbmhd import system as sy
from fbmhd.grid import SlabGrid
from fbmhd.thermo import ThermoModel
from fbmhd.verify import (boundary_first_remainders, boundary_structure_defect,
                          compatible_base, log_slope, paraboloid_patch_errors,
                          paraboloid_symbolic_value, random_perturbation)

eos = ThermoModel(p_inf=1.0)
rng = np.random.default_rng(1)
grid = SlabGrid(16, 12, 12, 5, t_final=0.2)
base, _ = compatible_base(rng, grid, eos)

defect, h = boundary_structure_defect(base)
print(f"boundary matrix minus its static part: {defect:.2e} (grid spacing {h:.3f})")

# %%
# the linearized boundary operator is the derivative of the nonlinear one
V, psi = random_perturbation(rng, grid)
thetas = np.array([1e-2, 5e-3, 2.5e-3, 1.25e-3])
rem = boundary_first_remainders(base, V, psi, thetas)
for th, r in zip(thetas, rem):
    print(f"theta {th:.2e}   remainder {r:.3e}")
print("slope", round(log_slope(thetas, rem), 3))

# %%
print("flat interface curvature:", np.max(np.abs(sy.mean_curvature(grid.bzeros(), grid))))
sizes = (8, 16, 32)
errs = paraboloid_patch_errors(sizes)
print("exact value", paraboloid_symbolic_value())
print("stencil errors", errs, "order", round(-log_slope(sizes, errs), 3))
