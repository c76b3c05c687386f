# %% [markdown]
# Symmetrizer and flux matrices for a stiffened-gas liquid.
#
# The closure is p = s e^S rho^gamma - p_inf.  The script samples admissible
# states and checks that every coefficient matrix is symmetric, that A0 is
# positive definite and that the symbol has a real spectrum.

# %%
import numpy as np

from fbmhd import system as sy
from fbmhd.thermo import ThermoModel
from fbmhd.verify import matrix_structure, random_admissible_states

eos = ThermoModel(p_inf=1.0)
rho = np.array([0.5, 1.0, 2.0])
p = eos.pressure(rho, 0.0)
print("pressure      ", p)
print("back to rho   ", eos.density(p, 0.0))
print("sound speed   ", eos.sound_speed(p, 0.0))

# %%
rng = np.random.default_rng(0)
U = random_admissible_states(rng, 500, eos)
report = matrix_structure(U, eos, rng)
for name, a in report["asymmetry"].items():
    print(f"{name:9s} relative asymmetry {a:.2e}")
print(f"smallest eigenvalue of A0      {report['min_eig_A0']:.3e}")
print(f"largest imaginary eigenvalue   {report['max_imag_symbol']:.2e}")

# %%
# a state whose density leaves the window is rejected
bad = U[:, :1].copy()
bad[0] = 50.0
try:
    sy.coefficients(bad, eos)
except sy.HyperbolicityError as exc:
    print("rejected:", exc)
