"""Symmetric matrices of the MHD system and the nonlinear fixed-domain operators.

Primary unknowns are ordered (q, v1, v2, v3, H1, H2, H3, S) along axis 0 of
every state array; trailing axes are arbitrary (points, grids, ...).

All coefficient matrices share one shape: ``sum_i w_i A_i(U)`` for weights
``w = (w0, w1, w2, w3)`` with ``A_0`` the time matrix.  Since
``A_i = v_i A_0 + B_i(H)`` the combination is
``(w0 + w.v) A_0 + (coupling terms linear in w)``, and its action and its
state derivative are cheap closed forms.
"""
from __future__ import annotations

import numpy as np

from .thermo import EOSDomainError, ThermoModel

NCOMP = 8
IQ, IS = 0, 7
IV = slice(1, 4)
IH = slice(4, 7)


class HyperbolicityError(ValueError):
    """State outside the admissible density window."""


def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


class _Coef:
    """Scalar coefficients of the matrices at a state."""

    __slots__ = ("v", "H", "c", "rho", "shifted", "gamma")

    def __init__(self, U, eos: ThermoModel, check=True):
        U = np.asarray(U, dtype=float)
        if U.shape[0] != NCOMP:
            raise ValueError(f"state must have {NCOMP} components on axis 0")
        self.v = U[IV]
        self.H = U[IH]
        p = U[IQ] - 0.5 * _dot3(self.H, self.H)
        try:
            self.rho = eos.density(p, U[IS])
        except EOSDomainError as exc:
            raise HyperbolicityError(str(exc)) from None
        if check:
            m = np.minimum(self.rho - eos.rho_floor, eos.rho_ceil - self.rho)
            if not np.all(m > 0):
                raise HyperbolicityError(
                    f"density leaves ({eos.rho_floor}, {eos.rho_ceil}); min margin {np.min(m):.3g}")
        self.shifted = p + eos.p_inf
        self.gamma = eos.gamma
        self.c = 1.0 / eos.rho_a2(p)


def coefficients(U, eos, check=True):
    return _Coef(U, eos, check)


def _a0_apply(k: _Coef, X):
    w = X[IQ] - _dot3(k.H, X[IH])
    cw = k.c * w
    out = np.empty(np.broadcast_shapes(X.shape, (NCOMP,) + np.shape(k.c)))
    out[IQ] = cw
    out[IV] = k.rho * X[IV]
    out[IH] = X[IH] - cw * k.H
    out[IS] = X[IS]
    return out


def combo_apply(k: _Coef, weights, X):
    """``(sum_i w_i A_i) X``; weights is a length-4 sequence (w0, w1, w2, w3)."""
    w0, w1, w2, w3 = weights
    wv = (w1, w2, w3)
    a = w0 + w1 * k.v[0] + w2 * k.v[1] + w3 * k.v[2]
    b = w1 * k.H[0] + w2 * k.H[1] + w3 * k.H[2]
    out = _a0_apply(k, X)
    out *= a
    out[IQ] += w1 * X[1] + w2 * X[2] + w3 * X[3]
    for j in range(3):
        out[1 + j] += wv[j] * X[IQ] - b * X[4 + j]
        out[4 + j] -= b * X[1 + j]
    return out


def combo_apply_dstate(k: _Coef, weights, V, X):
    """``(d/ds sum_i w_i A_i(U + s V))|_{s=0} X`` with weights held fixed."""
    w0, w1, w2, w3 = weights
    a = w0 + w1 * k.v[0] + w2 * k.v[1] + w3 * k.v[2]
    da = w1 * V[1] + w2 * V[2] + w3 * V[3]
    db = w1 * V[4] + w2 * V[5] + w3 * V[6]
    # derivative of A0 along V applied to X
    dp = V[IQ] - _dot3(k.H, V[IH])
    dc = -k.gamma * k.c**2 * dp
    drho = k.rho / k.gamma * (dp / k.shifted - V[IS])
    w = X[IQ] - _dot3(k.H, X[IH])
    dw = -_dot3(V[IH], X[IH])
    dcw = dc * w + k.c * dw
    cw = k.c * w
    shape = np.broadcast_shapes(X.shape, V.shape, (NCOMP,) + np.shape(k.c))
    out = np.zeros(shape)
    out[IQ] = a * dcw
    out[IV] = a * drho * X[IV]
    out[IH] = -a * (dcw * k.H + cw * V[IH])
    out += da * _a0_apply(k, X)
    for j in range(3):
        out[1 + j] -= db * X[4 + j]
        out[4 + j] -= db * X[1 + j]
    return out


def combo_assemble(k: _Coef, weights):
    """Dense ``sum_i w_i A_i`` with shape ``(8, 8) + batch``; exactly symmetric."""
    w0, w1, w2, w3 = (np.asarray(w, dtype=float) for w in weights)
    wv = (w1, w2, w3)
    a = w0 + w1 * k.v[0] + w2 * k.v[1] + w3 * k.v[2]
    b = w1 * k.H[0] + w2 * k.H[1] + w3 * k.H[2]
    shape = np.broadcast_shapes(np.shape(k.c), np.shape(a))
    M = np.zeros((NCOMP, NCOMP) + shape)

    def put(i, j, val):
        M[i, j] = val
        if i != j:
            M[j, i] = M[i, j]

    put(0, 0, a * k.c)
    for j in range(3):
        put(0, 1 + j, wv[j])
        put(0, 4 + j, -a * k.c * k.H[j])
        put(1 + j, 1 + j, a * k.rho)
        put(1 + j, 4 + j, -b)
        for l in range(j, 3):
            put(4 + j, 4 + l, a * ((1.0 if j == l else 0.0) + k.c * k.H[j] * k.H[l]))
    put(7, 7, a)
    return M


_E = ((1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0), (0.0, 0.0, 0.0, 1.0))


def assemble_A0(U, eos: ThermoModel):
    """Dense time matrix ``A_0(U)``; raises :class:`HyperbolicityError` if inadmissible."""
    return combo_assemble(_Coef(U, eos), _E[0])


def assemble_Ai(U, i, eos: ThermoModel):
    if i not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {i}")
    return combo_assemble(_Coef(U, eos), _E[i])


def a1_tilde_weights(dPhi):
    """Weights of ``(A1 - Phi_t A0 - Phi_2 A2 - Phi_3 A3)/Phi_1``."""
    inv = 1.0 / dPhi[1]
    return (-dPhi[0] * inv, inv, -dPhi[2] * inv, -dPhi[3] * inv)


def a1_tilde_weight_variation(dPhi, ddPhi):
    """Derivative of :func:`a1_tilde_weights` along a variation ``ddPhi`` of ``dPhi``."""
    inv = 1.0 / dPhi[1]
    r = ddPhi[1] * inv * inv
    return (-ddPhi[0] * inv + dPhi[0] * r, -r, -ddPhi[2] * inv + dPhi[2] * r,
            -ddPhi[3] * inv + dPhi[3] * r)


def _check_lift(dPhi, tol=1e-12):
    if np.min(dPhi[1]) < 0.5 - tol:
        raise ValueError("degenerate-lift: d_1 Phi < 1/2")


def assemble_A1_tilde(U, dPhi, eos: ThermoModel):
    dPhi = [np.asarray(d, dtype=float) for d in dPhi]
    _check_lift(dPhi)
    return combo_assemble(_Coef(U, eos), a1_tilde_weights(dPhi))


def operator_weights(dPhi):
    """Weights of the four coefficient matrices (A0, A1~, A2, A3)."""
    one, zero = 1.0, 0.0
    return ((one, zero, zero, zero), a1_tilde_weights(dPhi), _E[2], _E[3])


# ---------------------------------------------------------------------------
# pointwise operators: derivatives are supplied, so the same code serves grid
# stencils and exact (symbolic) derivatives.


def apply_L(k: _Coef, dPhi, dX):
    """``L(U, Phi) X = A0 X_t + A1~ X_1 + A2 X_2 + A3 X_3`` given ``dX`` (4, 8, ...)."""
    out = None
    for w, d in zip(operator_weights(dPhi), dX):
        term = combo_apply(k, w, d)
        out = term if out is None else out + term
    return out


def apply_C(k: _Coef, dPhi, dU, V):
    """Zeroth-order coefficient ``C(U, Phi) V`` contracted against ``dU``."""
    out = None
    for w, d in zip(operator_weights(dPhi), dU):
        term = combo_apply_dstate(k, w, V, d)
        out = term if out is None else out + term
    return out


def apply_dPhi_variation(k: _Coef, dPhi, ddPhi, dU):
    """Change of ``L(U, Phi) U`` when ``dPhi`` varies by ``ddPhi`` (only A1~ moves)."""
    return combo_apply(k, a1_tilde_weight_variation(dPhi, ddPhi), dU[1])


def interior_pointwise(U, dU, dPhi, eos, check=True):
    """``L(U, Phi) U`` from a state, its four derivatives and those of ``Phi``."""
    _check_lift(dPhi)
    return apply_L(_Coef(U, eos, check), dPhi, dU)


# ---------------------------------------------------------------------------
# grid operators


def nonlinear_interior_residual(U, phi, grid, eos, lifted=None):
    """Discrete ``L(U, Phi) U`` on the slab; ``phi`` is the interface history."""
    from .grid import lift

    grid.check(U)
    if lifted is None:
        lifted = lift(phi, grid)
    dU = grid.grad(U)
    return interior_pointwise(U, dU, lifted.dPhi, eos)


def curvature_flux(dphi2, dphi3):
    n = np.sqrt(1.0 + dphi2**2 + dphi3**2)
    return dphi2 / n, dphi3 / n


def _periodic_d(u, axis, h):
    return (np.roll(u, -1, axis) - np.roll(u, 1, axis)) / (2.0 * h)


def curvature_stencil(phi, h2, h3):
    """Divergence of the normalized gradient with periodic centered differences
    on the last two axes."""
    f2, f3 = curvature_flux(_periodic_d(phi, -2, h2), _periodic_d(phi, -1, h3))
    return _periodic_d(f2, -2, h2) + _periodic_d(f3, -1, h3)


def mean_curvature(phi, grid):
    """``H(phi) = div (D phi / sqrt(1 + |D phi|^2))`` on the periodic boundary grid."""
    return curvature_stencil(np.asarray(phi, dtype=float), grid.h2, grid.h3)


def mean_curvature_patch(phi, h2, h3):
    """Same stencil on a non-periodic patch; the two outer rings are dropped."""
    return curvature_stencil(np.asarray(phi, dtype=float), h2, h3)[..., 2:-2, 2:-2]


def curvature_first_variation(dphi, dpsi):
    """Flux of the linearized curvature: ``zeta/|N| - (zeta0.zeta) zeta0/|N|^3``."""
    n2 = 1.0 + dphi[0] ** 2 + dphi[1] ** 2
    n = np.sqrt(n2)
    proj = (dphi[0] * dpsi[0] + dphi[1] * dpsi[1]) / (n2 * n)
    return dpsi[0] / n - proj * dphi[0], dpsi[1] / n - proj * dphi[1]


def curvature_second_variation(dphi, da, db):
    """Flux of the second variation of the curvature in directions a and b."""
    n2 = 1.0 + dphi[0] ** 2 + dphi[1] ** 2
    n3 = n2 * np.sqrt(n2)
    za = dphi[0] * da[0] + dphi[1] * da[1]
    zb = dphi[0] * db[0] + dphi[1] * db[1]
    ab = da[0] * db[0] + da[1] * db[1]
    out = []
    for j in range(2):
        out.append(-(zb * da[j] + ab * dphi[j] + za * db[j]) / n3
                   + 3.0 * za * zb * dphi[j] / (n3 * n2))
    return tuple(out)


def tangential_divergence(f2, f3, grid):
    return grid.db(f2, 2) + grid.db(f3, 3)


def _check_tension(tension):
    if not tension > 0:
        raise ValueError(f"surface tension must be positive, got {tension}")


def boundary_residual(U, phi, grid, tension=1.0):
    """``(d_t phi - v.N, q - s H(phi))`` on the trace ``x1 = 0``; shape (2, nt, n2, n3)."""
    _check_tension(tension)
    grid.check(U)
    grid.check(phi, boundary=True)
    tr = U[:, :, 0]
    d2, d3 = grid.db(phi, 2), grid.db(phi, 3)
    vn = tr[1] - tr[2] * d2 - tr[3] * d3
    return np.stack([grid.db(phi, 0) - vn, tr[0] - tension * mean_curvature(phi, grid)])


def constraint_residuals(H, lifted):
    """Interior divergence of H in physical variables and ``H.N`` at ``x1 = 0``."""
    from .grid import partial_phi

    grid = lifted.grid
    div = sum(partial_phi(H[j], lifted, j + 1) for j in range(3))
    phi = lifted.phi
    tr = H[:, :, 0]
    hn = tr[0] - tr[1] * grid.db(phi, 2) - tr[2] * grid.db(phi, 3)
    return div, hn


def max_wave_speed(U, eos, normal_weights=(1.0, 1.0, 1.0)):
    """Upper bound of characteristic speeds: |v| plus the fast magnetosonic speed."""
    k = _Coef(U, eos, check=False)
    a2 = k.gamma * k.shifted / k.rho
    b2 = _dot3(k.H, k.H) / k.rho
    fast = np.sqrt(a2 + b2)
    return float(np.max(np.sqrt(_dot3(k.v, k.v)) + fast))
