"""Exact (symbolic) evaluations used as oracles in several test modules."""
import numpy as np

from fbmhd import system as sy
from fbmhd.grid import chi, chi_prime
from fbmhd.manufactured import t, x1, x2, x3

AXES = (t, x1, x2, x3)


def exact_dPhi(ms, T, X1, X2, X3):
    c, cp = chi(X1), chi_prime(X1)
    f = ms.eval_phi(T, X2, X3)
    return np.stack([c * ms.eval_phi(T, X2, X3, deriv=(t,)), 1.0 + cp * f,
                     c * ms.eval_phi(T, X2, X3, deriv=(x2,)),
                     c * ms.eval_phi(T, X2, X3, deriv=(x3,))])


def exact_interior(ms, grid, eos):
    T, X1, X2, X3 = grid.mesh()
    U = ms.eval_U(T, X1, X2, X3)
    dU = np.stack([ms.eval_U(T, X1, X2, X3, deriv=(a,)) for a in AXES])
    return sy.interior_pointwise(U, dU, exact_dPhi(ms, T, X1, X2, X3), eos, check=False)


def exact_boundary(ms, grid, tension):
    T, X2, X3 = grid.bmesh()
    z = np.zeros_like(T)
    tr = ms.eval_U(T, z, X2, X3)
    p2 = ms.eval_phi(T, X2, X3, deriv=(x2,))
    p3 = ms.eval_phi(T, X2, X3, deriv=(x3,))
    pt = ms.eval_phi(T, X2, X3, deriv=(t,))
    n = np.sqrt(1 + p2**2 + p3**2)
    # divergence of grad(phi)/|N| by the product rule
    p22 = ms.eval_phi(T, X2, X3, deriv=(x2, x2))
    p33 = ms.eval_phi(T, X2, X3, deriv=(x3, x3))
    p23 = ms.eval_phi(T, X2, X3, deriv=(x2, x3))
    curv = (p22 + p33) / n - (p2 * p2 * p22 + 2 * p2 * p3 * p23 + p3 * p3 * p33) / n**3
    return np.stack([pt - (tr[1] - tr[2] * p2 - tr[3] * p3), tr[0] - tension * curv])
