"""Time-marching solver for the effective linear problem in W variables and
its regularization.

The march is the leapfrog scheme on the stored time levels, so the discrete
solution satisfies the centered space-time stencil equations exactly at every
interior node and every level before the last.  At ``x1 = 0`` the pressure
slot ``W1`` is set from the interface perturbation and the interface is
advanced from the trace of ``W2``; the remaining components use one-sided
normal differences.  The top of the slab uses the same one-sided closure for
all components.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import system as sy
from .grid import (boundary_sobolev_trace, chi, hstar_trace, lift_scalar)
from .linearized import BasicState, apply_Be_prime, apply_Le_prime, to_W


class CFLError(ValueError):
    def __init__(self, msg, dt_required):
        super().__init__(msg)
        self.dt_required = dt_required


@dataclass(frozen=True)
class SchemeParams:
    cfl: float = 0.9
    bilaplacian: str = "explicit"  # or "implicit"
    check_cfl: bool = True


@dataclass
class LinearSolveReport:
    Vdot: np.ndarray
    W: np.ndarray
    psi: np.ndarray
    energy: dict
    source_norm: float
    eps: float
    stable: bool
    dt_required: float
    lift: np.ndarray = field(repr=False, default=None)
    f: np.ndarray = field(repr=False, default=None)
    g: np.ndarray = field(repr=False, default=None)
    base: object = field(repr=False, default=None)

    @property
    def est4_ratio(self):
        lhs = self.energy["lhs"][-1]
        return float(lhs / self.source_norm) if self.source_norm > 0 else float("nan")


def _a0_inverse(k, Y):
    out = np.empty_like(Y)
    hy = sy._dot3(k.H, Y[sy.IH])
    hh = sy._dot3(k.H, k.H)
    out[0] = Y[0] * (1.0 / k.c + hh) + hy
    out[sy.IV] = Y[sy.IV] / k.rho
    out[sy.IH] = Y[sy.IH] + Y[0] * k.H
    out[7] = Y[7]
    return out


def _boundary_solve(k, R, dq):
    """Rows 1..7 of ``A0 X = R`` with ``X_q = dq`` prescribed."""
    X = np.empty_like(R)
    X[0] = dq
    X[sy.IV] = R[sy.IV] / k.rho
    r = R[sy.IH] + k.c * dq * k.H
    hh = sy._dot3(k.H, k.H)
    hr = sy._dot3(k.H, r)
    X[sy.IH] = r - (k.c * hr / (1.0 + k.c * hh)) * k.H
    X[7] = R[7]
    return X


def lift_boundary_source(g, base: BasicState):
    """Field whose effective boundary image with zero interface is ``g``.

    At ``x1 = 0`` the pressure is ``g2`` and the velocity is
    ``-g1 N / |N|^2``; the trace is extended by ``chi(x1)``.
    """
    grid = base.grid
    g = np.asarray(g, dtype=float)
    grid.check(g, boundary=True)
    if np.any(g[:, :grid.n_past] != 0.0):
        raise ValueError("boundary source must vanish in the past")
    out = grid.zeros(8)
    n = base.normal
    nn = n[0] ** 2 + n[1] ** 2 + n[2] ** 2
    c = chi(grid.x1)[None, :, None, None]
    out[0] = c * g[1][:, None]
    for j in range(3):
        out[1 + j] = c * (-g[0] * n[j] / nn)[:, None]
    return out


def _tangential_symbol4(grid):
    s2, s3 = grid.discrete_wavenumbers()
    return s2[:, None] ** 4 + s3[None, :] ** 4


def _bilaplacian(psi, grid):
    d2 = psi
    for _ in range(4):
        d2 = _d_per(d2, -2, grid.h2)
    d3 = psi
    for _ in range(4):
        d3 = _d_per(d3, -1, grid.h3)
    return d2 + d3


def _d_per(u, axis, h):
    return (np.roll(u, -1, axis) - np.roll(u, 1, axis)) / (2.0 * h)


def required_dt(base: BasicState, eps=0.0, scheme=SchemeParams()):
    grid = base.grid
    lam = sy.max_wave_speed(base.U, base.eos)
    k = sy.coefficients(base.U[:, :, 0], base.eos, check=False)
    smax2 = 1.0 / grid.h2**2 + 1.0 / grid.h3**2
    omega = np.sqrt(1.5 * base.tension * smax2 / (float(np.min(k.rho)) * grid.h1))
    d1 = base.d1U_trace
    omega += float(np.max(np.abs(d1[0]))) + float(np.max(np.abs(d1[1:4])))
    denom = lam * (1.0 / grid.h1 + 1.0 / grid.h2 + 1.0 / grid.h3) + omega
    dt = scheme.cfl / denom
    if eps > 0 and scheme.bilaplacian == "explicit":
        dt = min(dt, 0.5 * scheme.cfl / (eps * float(np.max(_tangential_symbol4(grid)))))
    return dt


def _march(base: BasicState, F, eps, scheme):
    """Leapfrog march of the homogenized problem; returns (Y, psi)."""
    grid = base.grid
    L = grid.nt_total
    Y = grid.zeros(8)
    psi = grid.bzeros()
    s4 = _tangential_symbol4(grid)
    dt = grid.dt
    n = base.normal
    d1 = base.d1U_trace
    d1vn = d1[1] * n[0] + d1[2] * n[1] + d1[3] * n[2]
    start = grid.n_past
    for l in range(start, L - 1):
        lv = base.level(l)
        Yl = Y[:, l]
        dY = np.stack([np.zeros_like(Yl)] + [grid.d_space(Yl, a) for a in (1, 2, 3)])
        R = F[:, l] - sy.apply_L(lv.coef, lv.dPhi, dY) - sy.apply_C(lv.coef, lv.dPhi, lv.dU, Yl)
        if eps > 0:
            W2 = Yl[1] - lv.dPhi[2] * Yl[2] - lv.dPhi[3] * Yl[3]
            dW2 = eps * grid.d_space(W2, 1)
            R[1] += dW2
            R[2] -= lv.dPhi[2] * dW2
            R[3] -= lv.dPhi[3] * dW2
        # interface
        w2 = Yl[1, 0] - base.dphi[0, l] * Yl[2, 0] - base.dphi[1, l] * Yl[3, 0]
        tr = base.U[:, l, 0]
        rhs = w2 - (tr[2] * grid.db(psi, 2)[l] + tr[3] * grid.db(psi, 3)[l]) + d1vn[l] * psi[l]
        if eps > 0 and scheme.bilaplacian == "implicit":
            rhat = np.fft.fft2(psi[l - 1] + 2 * dt * rhs)
            rhat -= dt * eps * s4 * np.fft.fft2(psi[l - 1])
            psi[l + 1] = np.real(np.fft.ifft2(rhat / (1.0 + dt * eps * s4)))
        else:
            if eps > 0:
                rhs = rhs - eps * _bilaplacian(psi[l - 1], grid)
            psi[l + 1] = psi[l - 1] + 2 * dt * rhs
        # interior and top rows
        step = _a0_inverse(lv.coef, R)
        Y[:, l + 1] = Y[:, l - 1] + 2 * dt * step
        # boundary rows: pressure from the interface
        nxt = l + 1
        dpsi = np.stack([grid.db(psi, 2)[nxt], grid.db(psi, 3)[nxt]])
        f2, f3 = sy.curvature_first_variation(base.dphi[:, nxt], dpsi)
        curv = _d_per(f2, -2, grid.h2) + _d_per(f3, -1, grid.h3)
        w1 = -d1[0, nxt] * psi[nxt] + base.tension * curv
        kb = sy.coefficients(base.U[:, l, 0], base.eos, check=False)
        dq = w1 - Y[0, l - 1, 0]
        Xb = _boundary_solve(kb, 2 * dt * R[:, 0], dq)
        Y[:, l + 1, 0] = Y[:, l - 1, 0] + Xb
    return Y, psi


def _energy(base, W, psi, grid):
    h1 = hstar_trace(W, 1, grid)
    d1 = grid.d(W[:2], 1)
    dnc = np.sqrt(grid.integrate_levels(np.sum(d1**2, axis=0)))
    tr = W[:2, :, 0]
    bnc = np.sqrt(grid.integrate_boundary_levels(np.sum(tr**2, axis=0)))
    dpsi = np.stack([grid.db(psi, 2), grid.db(psi, 3)])
    bpsi = np.sqrt(boundary_sobolev_trace(psi, 1, grid) ** 2
                   + boundary_sobolev_trace(dpsi, 1, grid) ** 2)
    n2 = 1.0 + base.dphi[0] ** 2 + base.dphi[1] ** 2
    surf = base.tension * np.sum((dpsi[0] ** 2 + dpsi[1] ** 2) / n2**1.5, axis=(-2, -1)) \
        * grid.h2 * grid.h3
    lhs = h1 + dnc + bnc + bpsi
    return {"W_h1star": h1, "d1W_nc": dnc, "W_nc_boundary": bnc, "psi_h1": bpsi,
            "surface_energy": surf, "lhs": lhs}


def solve_regularized(base: BasicState, f, g=None, eps=0.0, scheme=SchemeParams()):
    """Solve the (regularized) effective linear problem with sources ``f``, ``g``."""
    grid = base.grid
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    f = np.asarray(grid.check(f), dtype=float)
    if np.any(f[:, :grid.n_past] != 0.0):
        raise ValueError("interior source must vanish in the past")
    if g is None:
        g = grid.bzeros(2)
    dt_req = required_dt(base, eps, scheme)
    if scheme.check_cfl and grid.dt > dt_req * (1 + 1e-12):
        raise CFLError(f"time step {grid.dt:.4g} exceeds the stable bound {dt_req:.4g}", dt_req)
    vnat = lift_boundary_source(g, base)
    F = f - apply_Le_prime(base, vnat) if np.any(vnat) else f.copy()
    F[:, :grid.n_past] = 0.0
    Y, psi = _march(base, F, eps, scheme)
    Vdot = Y + vnat
    W = to_W(base, Y)
    Fb = to_W_transpose(base, F)
    energy = _energy(base, W, psi, grid)
    src = float(hstar_trace(Fb, 1, grid)[-1])
    stable = bool(np.all(np.isfinite(energy["lhs"])) and np.all(np.isfinite(Y)))
    return LinearSolveReport(Vdot, W, psi, energy, src, float(eps), stable, dt_req, vnat, f, g, base)


def solve_linearized(base, f, g=None, scheme=SchemeParams()):
    return solve_regularized(base, f, g, 0.0, scheme)


def to_W_transpose(base, F):
    """``J^T F``: the source in the W-form equations."""
    d = base.dPhi
    out = np.array(F, dtype=float, copy=True)
    out[2] = F[2] + d[2] * F[1]
    out[3] = F[3] + d[3] * F[1]
    return out


def energy_csv(report: LinearSolveReport):
    """One row per time level: t and the energy quantities of the report."""
    grid = report.base.grid if report.base is not None else None
    keys = list(report.energy)
    lines = ["t," + ",".join(keys)]
    t = grid.t if grid is not None else np.arange(len(report.energy[keys[0]]))
    for l in range(len(t)):
        lines.append(",".join([repr(float(t[l]))] + [repr(float(report.energy[k][l]))
                                                     for k in keys]))
    return "\n".join(lines) + "\n"


def energy_report(report: LinearSolveReport, m=1, max_order=3):
    """Norms entering the tame estimate at order ``m`` and the implied constant.

    ``C = (|W|_{m,*} + |(psi, D psi)|_{H^m}) / (|f|_{m,*} + |g|_{H^{m+1}}
    + K (|f|_{1,*} + |g|_{H^2}))`` with ``K`` the size of the basic state
    (deviation from its far mean in ``H^{m+1}_*`` plus the interface in
    ``H^{m+2}``).  At desk resolution this is a structural diagnostic.
    """
    from .grid import boundary_sobolev_norm, hstar_norm

    if not 0 <= m <= max_order:
        raise ValueError(f"order {m} outside 0..{max_order}")
    base = report.base
    grid = base.grid
    dpsi = np.stack([grid.db(report.psi, 2), grid.db(report.psi, 3)])
    w = hstar_norm(report.W, m, grid)
    p = float(np.sqrt(boundary_sobolev_norm(report.psi, m, grid) ** 2
                      + boundary_sobolev_norm(dpsi, m, grid) ** 2))
    fJ = to_W_transpose(base, report.f)
    fm = hstar_norm(fJ, m, grid)
    f1 = hstar_norm(fJ, 1, grid)
    g = report.g if report.g is not None else grid.bzeros(2)
    gm = boundary_sobolev_norm(g, m + 1, grid)
    g2 = boundary_sobolev_norm(g, 2, grid)
    mean = base.U[:, :, -1].mean(axis=(1, 2, 3))[:, None, None, None, None]
    ku = hstar_norm(base.U - mean, min(m + 1, 4), grid)
    kp = boundary_sobolev_norm(base.phi, min(m + 2, 4), grid)
    K = ku + kp
    lhs = w + p
    rhs = fm + gm + K * (f1 + g2)
    return {"m": m, "W_m_star": w, "psi_Hm": p, "f_m_star": fm, "g_Hm1": gm,
            "base_U": ku, "base_phi": kp, "lhs": lhs, "rhs": rhs,
            "C": lhs / rhs if rhs > 0 else 0.0}


# ---------------------------------------------------------------------------
# duality


def _bold_apply(k, weights, dPhi, X):
    """``J^T (sum_i w_i A_i) J X`` without assembling matrices."""
    JX = np.array(X, dtype=float, copy=True)
    JX[1] = X[1] + dPhi[2] * X[2] + dPhi[3] * X[3]
    Y = sy.combo_apply(k, weights, JX)
    Y[2] = Y[2] + dPhi[2] * Y[1]
    Y[3] = Y[3] + dPhi[3] * Y[1]
    return Y


def _eps_J(X, eps):
    out = np.zeros_like(X)
    out[1] = eps * X[1]
    return out


def adjoint_identity_check(base: BasicState, W, Wstar, eps=0.0):
    """Discrete defect of ``int (L_eps W.W* - W.L*_eps W*) = int_{x1=0} (eps J - A1) W.W*``.

    ``W`` must vanish at ``t = 0`` and ``W*`` at ``t = T``; both should vanish
    near the top of the slab, which the identity treats as absent.  The
    zeroth-order part cancels identically in the pairing and is omitted.
    Returns a dict with both sides and their absolute difference.
    """
    grid = base.grid
    grid.check(W)
    grid.check(Wstar)
    k = sy.coefficients(base.U, base.eos, check=False)
    dPhi = base.dPhi
    ws = sy.operator_weights(dPhi)
    LW = np.zeros_like(W)
    LsWs = np.zeros_like(W)
    for i, wgt in enumerate(ws):
        LW += _bold_apply(k, wgt, dPhi, grid.d(W, i))
        # -A_i d_i W* - (d_i A_i) W*  written as  -d_i (A_i W*)
        LsWs -= grid.d(_bold_apply(k, wgt, dPhi, Wstar), i)
    LW -= _eps_J(grid.d(W, 1), eps)
    LsWs += _eps_J(grid.d(Wstar, 1), eps)
    a = float(grid.integrate(np.sum(LW * Wstar, axis=0)))
    b = float(grid.integrate(np.sum(W * LsWs, axis=0)))
    lhs = a - b
    dPhi0 = dPhi[:, :, 0]
    A1W = _bold_apply(sy.coefficients(base.U[:, :, 0], base.eos, check=False),
                      sy.operator_weights(dPhi0)[1], dPhi0, W[:, :, 0])
    dens = np.sum((_eps_J(W[:, :, 0], eps) - A1W) * Wstar[:, :, 0], axis=0)
    rhs = float(grid.integrate_boundary(dens))
    scale = abs(a) + abs(b) + abs(rhs)
    return {"lhs": lhs, "rhs": rhs, "defect": abs(lhs - rhs),
            "relative": abs(lhs - rhs) / scale if scale > 0 else 0.0}
