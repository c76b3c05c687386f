# %% [markdown]
# Nash-Moser iteration on a small slab.
#
# Starting from the approximate solution, each step solves the linearized
# problem at a smoothed, constraint-corrected state and adds the increment.
# Both residuals should fall by orders of magnitude within a few steps.

# %%
import numpy as np

from fbmhd import compat as cp
from fbmhd import nashmoser as nm
from fbmhd.grid import SlabGrid
from fbmhd.thermo import ThermoModel

eos = ThermoModel(p_inf=1.0)
grid = SlabGrid(12, 8, 8, 9, t_final=0.3)
Ubar = np.array([0.0, 0, 0, 0, 0, 0.5, 0, 0])
_, jet, _ = cp.perturbed_equilibrium(grid, eos, Ubar, 1e-3, seed=1)
approx = cp.build_approximate_solution(jet, grid)
problem = nm.NMProblem.from_approximate(approx, grid, eos, 1.0)
result = nm.run(problem, nm.NMConfig(max_steps=4))

# %%
print(f"initial residuals {result.initial_residual[0]:.3e} {result.initial_residual[1]:.3e}")
for row in result.rows:
    print(f"step {row['n']}: interior {row['residual_int']:.3e}  boundary {row['residual_bdy']:.3e}")
print("converged:", result.converged)
