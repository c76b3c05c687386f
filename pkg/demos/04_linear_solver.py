# %% [markdown]
# Regularized linear solver on the flat equilibrium.
#
# A tangential mode switched on like t^2 drives the linearized problem.  The
# energy stays bounded uniformly in the regularization eps, and the eps > 0
# solutions approach the eps = 0 one at first order.

# %%
from pathlib import Path

import numpy as np

from fbmhd.config import load
from fbmhd.linearized import BasicState
from fbmhd.scenarios import linear_forcing
from fbmhd.solver import energy_report, solve_regularized
from fbmhd.verify import log_slope

cfg = load(Path(__file__).resolve().parent.parent / "configs" / "flat_linear.cfg")
grid = cfg.grid()
U = np.broadcast_to(cfg.state_vector()[:, None, None, None, None], (8,) + grid.shape)
base = BasicState(grid, U.copy(), grid.bzeros(), cfg.eos())
f = linear_forcing(cfg, grid)

reports = {eps: solve_regularized(base, f, eps=eps) for eps in (1e-2, 1e-3, 1e-4, 0.0)}
for eps, rep in reports.items():
    print(f"eps {eps:7.0e}  max energy {np.max(rep.energy['lhs']):.4e}  stable {rep.stable}")

# %%
ref = reports[0.0]
eps = [1e-2, 1e-3, 1e-4]
diff = [np.sqrt(grid.integrate(np.sum((reports[e].W - ref.W) ** 2, axis=0))) for e in eps]
print("distance to eps = 0:", [f"{d:.2e}" for d in diff], "slope", round(log_slope(eps, diff), 3))

# %%
for m in range(3):
    r = energy_report(ref, m)
    print(f"m = {m}: |W|_m = {r['W_m_star']:.3e}, |f|_m = {r['f_m_star']:.3e}, C = {r['C']:.3f}")
