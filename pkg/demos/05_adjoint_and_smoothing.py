# %% [markdown]
# Duality and the smoothing family.
#
# The discrete pairing of the linearized operator with its adjoint leaves a
# boundary term at the interface; its defect shrinks under refinement.  The
# smoothing operators damp high tangential modes and leave low ones alone.

# %%
import numpy as np

from fbmhd.grid import SlabGrid
from fbmhd.linearized import BasicState
from fbmhd.scenarios import adjoint_defects
from fbmhd.smoothing import SmoothingFamily, schedule, tangential_sobolev
from fbmhd.thermo import ThermoModel
from fbmhd.verify import compatible_base

eos = ThermoModel(p_inf=1.0)
rng = np.random.default_rng(9)
grid = SlabGrid(12, 8, 8, 9, t_final=0.2)
_, ms = compatible_base(rng, grid, eos)
coarse, fine = adjoint_defects(ms, grid, eos, 1.0, [3, 5], eps=1e-2)
for c, f in zip(coarse, fine):
    print(f"defect {c['defect']:.2e} -> {f['defect']:.2e} (ratio {c['defect'] / f['defect']:.1f})")

# %%
g = SlabGrid(9, 32, 32, 17, t_final=0.5)
S = SmoothingFamily(g)
_, X2, X3 = g.bmesh()
win = np.clip(g.t, 0, None)[:, None, None] ** 2
for k in (1, 4, 12):
    u = win * np.cos(k * X2) + 0.0 * X3
    ratio = tangential_sobolev(S.smooth(u, 4.0, True), 0, g) / tangential_sobolev(u, 0, g)
    print(f"mode {k:2d}: kept fraction {ratio:.3f}")
print("theta schedule", [f"{schedule(4.0, n)[0]:.3f}" for n in range(5)])
