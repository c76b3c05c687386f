"""Smooth manufactured fields with exact derivatives.

States are sympy expressions in ``(t, x1, x2, x3)`` built from a few random
Fourier modes that are periodic on the tangential torus of length ``2 pi``
(integer wavenumbers).  They are evaluated on grids or at scattered points,
with derivatives obtained symbolically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp

t, x1, x2, x3 = sp.symbols("t x1 x2 x3", real=True)
SPACE_TIME = (t, x1, x2, x3)
BOUNDARY_VARS = (t, x2, x3)


def _mode(rng, amp, with_x1=True, kmax=2):
    k2, k3 = (int(k) for k in rng.integers(-kmax, kmax + 1, size=2))
    om = float(rng.uniform(-1.5, 1.5))
    ph = float(rng.uniform(0, 2 * np.pi))
    a = float(amp * rng.uniform(0.5, 1.0))
    arg = k2 * x2 + k3 * x3 + om * t + ph
    if with_x1:
        decay = float(rng.uniform(0.3, 1.2))
        kx = float(rng.uniform(0.2, 1.5))
        return a * sp.cos(arg + kx * x1) * sp.exp(-decay * x1)
    return a * sp.sin(arg)


def random_scalar(rng, amp, nmodes=2, with_x1=True, kmax=2):
    return sum(_mode(rng, amp, with_x1, kmax) for _ in range(nmodes))


@dataclass
class ManufacturedState:
    """Symbolic state ``U`` (8 expressions) and interface ``phi``."""

    U: list
    phi: sp.Expr
    _cache: dict = field(default_factory=dict, repr=False)

    def _fn(self, key, exprs, vars_):
        if key not in self._cache:
            self._cache[key] = sp.lambdify(vars_, exprs, "numpy")
        return self._cache[key]

    def eval_U(self, T, X1, X2, X3, deriv=()):
        """Evaluate ``U`` or a mixed derivative, e.g. ``deriv=(x1, t)``."""
        exprs = [sp.diff(e, *deriv) if deriv else e for e in self.U]
        f = self._fn(("U",) + tuple(str(d) for d in deriv), exprs, SPACE_TIME)
        shape = np.broadcast_shapes(np.shape(T), np.shape(X1), np.shape(X2), np.shape(X3))
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), shape)
                         for v in f(T, X1, X2, X3)])

    def eval_phi(self, T, X2, X3, deriv=()):
        e = sp.diff(self.phi, *deriv) if deriv else self.phi
        f = self._fn(("phi",) + tuple(str(d) for d in deriv), e, BOUNDARY_VARS)
        shape = np.broadcast_shapes(np.shape(T), np.shape(X2), np.shape(X3))
        return np.broadcast_to(np.asarray(f(T, X2, X3), dtype=float), shape).copy()

    def on_grid(self, grid):
        T, X1, X2, X3 = grid.mesh()
        U = self.eval_U(T, X1, X2, X3)
        Tb, X2b, X3b = grid.bmesh()
        return U, self.eval_phi(Tb, X2b, X3b)


def equilibrium_values(eos, q=1.0, H=(0.0, 0.5, 0.3), S=0.0, v=(0.0, 0.0, 0.0)):
    return np.array([q, *v, *H, S], dtype=float)


def random_compatible_state(rng, base_values, amp=0.05, phi_amp=0.1, kmax=2):
    """Random state satisfying ``d_t phi = v.N`` and ``H.N = 0`` at ``x1 = 0`` exactly.

    ``base_values`` is a constant 8-vector; perturbations of size ``amp`` are
    added, the normal velocity and normal field are then fixed at the
    boundary and extended with an ``x1``-linear correction.
    """
    phi = random_scalar(rng, phi_amp, with_x1=False, kmax=kmax)
    U = [sp.Float(float(b)) + random_scalar(rng, amp, kmax=kmax) for b in base_values]
    at0 = {x1: 0}
    p2, p3 = sp.diff(phi, x2), sp.diff(phi, x3)
    v1b = sp.diff(phi, t) + U[2].subs(at0) * p2 + U[3].subs(at0) * p3
    h1b = U[5].subs(at0) * p2 + U[6].subs(at0) * p3
    U[1] = v1b * sp.exp(-x1) + x1 * random_scalar(rng, amp, nmodes=1, kmax=kmax)
    U[4] = h1b * sp.exp(-x1) + x1 * random_scalar(rng, amp, nmodes=1, kmax=kmax)
    return ManufacturedState(U, phi)


def random_state(rng, base_values, amp=0.05, phi_amp=0.1, kmax=2):
    """Random state without boundary constraints."""
    phi = random_scalar(rng, phi_amp, with_x1=False, kmax=kmax)
    U = [sp.Float(float(b)) + random_scalar(rng, amp, kmax=kmax) for b in base_values]
    return ManufacturedState(U, phi)
