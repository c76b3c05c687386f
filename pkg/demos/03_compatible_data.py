# %% [markdown]
# Compatible initial data and the approximate solution.
#
# Initial data near the constant state are corrected near the interface
# until the boundary conditions hold for the first four time derivatives.
# The jet then gives a Taylor polynomial in time, cut off smoothly.

# %%
import numpy as np

from fbmhd import compat as cp
from fbmhd.grid import SlabGrid
from fbmhd.thermo import ThermoModel

eos = ThermoModel(p_inf=1.0)
Ubar = np.array([0.0, 0, 0, 0, 0, 0.5, 0, 0])
grid = SlabGrid(16, 12, 12, 9, t_final=0.2)
U0, jet, _ = cp.perturbed_equilibrium(grid, eos, Ubar, 1e-3, seed=4)
phi0 = jet.phi[0]
for j, r in enumerate(cp.residual_norms(jet)):
    print(f"order {j}: compatibility residual {r:.2e}")

# %%
# breaking the data one node in from the interface shows up at the expected order
bad = U0.copy()
bad[0, 1] += 1e-4
jet_bad = cp.time_derivatives(bad, phi0, grid, eos, Ubar=Ubar)
print("residuals after the bump:", [f"{r:.1e}" for r in cp.residual_norms(jet_bad)])
try:
    cp.build_approximate_solution(jet_bad, grid)
except cp.IncompatibleDataError as exc:
    print("refused:", exc)

# %%
approx = cp.build_approximate_solution(jet, grid)
fa = cp.forcing_fa(approx, grid, eos)
print("approximate solution", approx.U.shape, "interface", approx.phi.shape)
print(f"interior defect max {np.max(np.abs(fa)):.2e}, zero in the past:",
      not np.any(fa[:, :grid.n_past + 1]))
