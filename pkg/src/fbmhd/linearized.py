"""Linearized operators around a basic state, Alinhac's good unknown, the
W change of variables and the second variation of the boundary operator."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import system as sy
from .grid import DegenerateLiftError, SlabGrid, chi, chi_prime, lift, lift_scalar
from .thermo import ThermoModel


class CompatibilityError(ValueError):
    """Basic state violates the kinematic or magnetic boundary constraint."""


@dataclass(frozen=True)
class LevelData:
    coef: sy._Coef
    U: np.ndarray
    dU: np.ndarray
    dPhi: np.ndarray


class BasicState:
    """State ``(U0, phi0)`` around which problems are linearized.

    Derivatives are evaluated one time level at a time so slab-sized
    coefficient arrays are never all resident at once.
    """

    def __init__(self, grid: SlabGrid, U, phi, eos: ThermoModel, tension=1.0,
                 check=True, compat_factor=10.0):
        sy._check_tension(tension)
        self.grid = grid
        self.U = np.asarray(grid.check(U), dtype=float)
        self.phi = np.asarray(grid.check(phi, boundary=True), dtype=float)
        self.eos = eos
        self.tension = float(tension)
        self.lifted = lift(self.phi, grid)
        if check:
            margin = eos.hyperbolicity_margin(self.U)
            if not np.all(margin > 0):
                raise sy.HyperbolicityError(
                    f"basic state inadmissible, min margin {np.min(margin):.3g}")
            kin, mag = self.compatibility_residuals()
            tol = compat_factor * (max(grid.h1, grid.h2, grid.h3) ** 2 + grid.dt**2)
            worst = max(float(np.max(np.abs(kin))), float(np.max(np.abs(mag))))
            if worst > tol:
                raise CompatibilityError(
                    f"boundary constraints violated: residual {worst:.3g} > {tol:.3g}")

    # -- cached traces and per-level data
    @property
    def dPhi(self):
        return self.lifted.dPhi

    @cached_property
    def dphi(self):
        """Tangential gradient of the interface, (2, nt, n2, n3)."""
        g = self.grid
        return np.stack([g.db(self.phi, 2), g.db(self.phi, 3)])

    @cached_property
    def normal(self):
        one = np.ones_like(self.phi)
        return np.stack([one, -self.dphi[0], -self.dphi[1]])

    @cached_property
    def d1U_trace(self):
        u = self.U
        return (-3.0 * u[:, :, 0] + 4.0 * u[:, :, 1] - u[:, :, 2]) / (2.0 * self.grid.h1)

    def compatibility_residuals(self):
        g = self.grid
        tr = self.U[:, :, 0]
        kin = g.db(self.phi, 0) - (tr[1] * self.normal[0] + tr[2] * self.normal[1]
                                   + tr[3] * self.normal[2])
        mag = tr[4] * self.normal[0] + tr[5] * self.normal[1] + tr[6] * self.normal[2]
        return kin, mag

    def level(self, l, check=False):
        g = self.grid
        U = self.U[:, l]
        return LevelData(sy.coefficients(U, self.eos, check), U, g.grad_level(self.U, l),
                         self.dPhi[:, l])

    @cached_property
    def dU(self):
        return self.grid.grad(self.U)

    @cached_property
    def good_factor(self):
        """``d_1 U0 / d_1 Phi0``, the coefficient of the good unknown."""
        return self.grid.d(self.U, 1) / self.dPhi[1]


# ---------------------------------------------------------------------------
# good unknown


@dataclass(frozen=True)
class GoodUnknownPair:
    Vdot: np.ndarray
    psi: np.ndarray
    Psi: np.ndarray


def good_unknown(V, psi, base: BasicState):
    Psi, _ = lift_scalar(np.asarray(psi, dtype=float), base.grid)
    return GoodUnknownPair(V - base.good_factor * Psi, psi, Psi)


def raw_unknown(Vdot, psi, base: BasicState):
    """Inverse of :func:`good_unknown`."""
    Psi, _ = lift_scalar(np.asarray(psi, dtype=float), base.grid)
    return Vdot + base.good_factor * Psi


# ---------------------------------------------------------------------------
# interior operators, evaluated level by level


def _levelwise(base, fn, ncomp=8):
    g = base.grid
    out = np.empty((ncomp,) + g.shape)
    for l in range(g.nt_total):
        out[:, l] = fn(l, base.level(l))
    return out


def apply_Le_prime(base: BasicState, Vdot):
    """``L(U0, Phi0) Vdot + C(U0, Phi0) Vdot`` with grid stencils."""
    g = base.grid
    g.check(Vdot)

    def fn(l, lv):
        dV = g.grad_level(Vdot, l)
        return sy.apply_L(lv.coef, lv.dPhi, dV) + sy.apply_C(lv.coef, lv.dPhi, lv.dU, Vdot[:, l])

    return _levelwise(base, fn)


def apply_L_prime(base: BasicState, V, psi):
    """Full linearization of ``L(U, Phi) U`` in the direction ``(V, Psi)``."""
    g = base.grid
    _, dPsi = lift_scalar(np.asarray(psi, dtype=float), g)

    def fn(l, lv):
        dV = g.grad_level(V, l)
        return (sy.apply_L(lv.coef, lv.dPhi, dV) + sy.apply_C(lv.coef, lv.dPhi, lv.dU, V[:, l])
                + sy.apply_dPhi_variation(lv.coef, lv.dPhi, dPsi[:, l], lv.dU))

    return _levelwise(base, fn)


def nonlinear_residual(base: BasicState):
    g = base.grid
    return _levelwise(base, lambda l, lv: sy.apply_L(lv.coef, lv.dPhi, lv.dU))


def alinhac_form(base: BasicState, Vdot, psi):
    """``Le' Vdot + (Psi / d_1 Phi0) d_1 L(U0, Phi0)``; equals ``L'(V, Psi)``."""
    Psi, _ = lift_scalar(np.asarray(psi, dtype=float), base.grid)
    res = nonlinear_residual(base)
    return apply_Le_prime(base, Vdot) + Psi / base.dPhi[1] * base.grid.d(res, 1)


# ---------------------------------------------------------------------------
# boundary operators


def _curv_first(base, psi, l=None):
    g = base.grid
    dpsi = np.stack([g.db(psi, 2), g.db(psi, 3)])
    f2, f3 = sy.curvature_first_variation(base.dphi, dpsi)
    return sy.tangential_divergence(f2, f3, g)


def transport(base, psi):
    g = base.grid
    tr = base.U[:, :, 0]
    return g.db(psi, 0) + tr[2] * g.db(psi, 2) + tr[3] * g.db(psi, 3)


def apply_B_prime(base: BasicState, V, psi):
    """Linearization of the boundary operator in raw unknowns."""
    tr = V[:, :, 0]
    n = base.normal
    vn = tr[1] * n[0] + tr[2] * n[1] + tr[3] * n[2]
    return np.stack([transport(base, psi) - vn, tr[0] - base.tension * _curv_first(base, psi)])


def apply_Be_prime(base: BasicState, Vdot, psi):
    """Effective boundary operator acting on the good unknown."""
    tr = Vdot[:, :, 0]
    n = base.normal
    d1 = base.d1U_trace
    vn = tr[1] * n[0] + tr[2] * n[1] + tr[3] * n[2]
    d1vn = d1[1] * n[0] + d1[2] * n[1] + d1[3] * n[2]
    first = transport(base, psi) - d1vn * psi - vn
    second = tr[0] + d1[0] * psi - base.tension * _curv_first(base, psi)
    return np.stack([first, second])


def boundary_W_targets(base: BasicState, psi):
    """Values of ``(W1, W2)`` at ``x1 = 0`` that make the effective boundary
    operator vanish: ``W1 = -d_1 q0 psi + s curv'(psi)``, ``W2 = B psi``."""
    n = base.normal
    d1 = base.d1U_trace
    d1vn = d1[1] * n[0] + d1[2] * n[1] + d1[3] * n[2]
    w1 = -d1[0] * psi + base.tension * _curv_first(base, psi)
    w2 = transport(base, psi) - d1vn * psi
    return w1, w2


def apply_B_second(base: BasicState, pair1, pair2):
    """Second variation of the boundary operator; symmetric bilinear."""
    (V, psi), (Vt, psit) = pair1, pair2
    g = base.grid
    tr, trt = V[:, :, 0], Vt[:, :, 0]
    dpsi = np.stack([g.db(psi, 2), g.db(psi, 3)])
    dpsit = np.stack([g.db(psit, 2), g.db(psit, 3)])
    first = (trt[2] * dpsi[0] + trt[3] * dpsi[1]) + (tr[2] * dpsit[0] + tr[3] * dpsit[1])
    f2, f3 = sy.curvature_second_variation(base.dphi, dpsi, dpsit)
    second = -base.tension * sy.tangential_divergence(f2, f3, g)
    return np.stack([first, second])


# ---------------------------------------------------------------------------
# W variables


def to_W(base: BasicState, Vdot):
    """``W = J^{-1} Vdot``: the velocity slot becomes ``vdot . (1, -d2 Phi, -d3 Phi)``."""
    d = base.dPhi
    W = np.array(Vdot, dtype=float, copy=True)
    W[1] = Vdot[1] - d[2] * Vdot[2] - d[3] * Vdot[3]
    return W


def from_W(base: BasicState, W):
    d = base.dPhi
    V = np.array(W, dtype=float, copy=True)
    V[1] = W[1] + d[2] * W[2] + d[3] * W[3]
    return V


def J_matrix(d2, d3):
    d2 = np.asarray(d2, dtype=float)
    J = np.zeros((8, 8) + d2.shape)
    for i in range(8):
        J[i, i] = 1.0
    J[1, 2] = d2
    J[1, 3] = d3
    return J


def congruence(M, J):
    return np.einsum("ji...,jk...,kl...->il...", J, M, J)


BOUNDARY_COUPLING = np.zeros((8, 8))
BOUNDARY_COUPLING[0, 1] = BOUNDARY_COUPLING[1, 0] = 1.0


@dataclass(frozen=True)
class BoldMatrices:
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    A1_principal: np.ndarray
    A1_remainder: np.ndarray


def assemble_boldA(base: BasicState, x1_index=0):
    """``J^T A J`` for the time matrix, A1~, A2, A3 at one x1 index.

    Returns dense arrays of shape ``(8, 8, nt, n2, n3)`` and the split of the
    normal matrix into the constant coupling and a remainder.
    """
    U = base.U[:, :, x1_index]
    dPhi = base.dPhi[:, :, x1_index]
    k = sy.coefficients(U, base.eos, check=False)
    J = J_matrix(dPhi[2], dPhi[3])
    mats = [congruence(sy.combo_assemble(k, w), J) for w in sy.operator_weights(dPhi)]
    principal = np.broadcast_to(BOUNDARY_COUPLING.reshape((8, 8) + (1,) * (mats[1].ndim - 2)),
                                mats[1].shape)
    return BoldMatrices(mats[0], mats[1], mats[2], mats[3], np.array(principal),
                        mats[1] - principal)
