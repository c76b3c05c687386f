"""Oracle computations shared by the test suite and the scenario runner.

Each function compares an operator against an independent evaluation
(eigensolvers, finite differences in a parameter, symbolic derivatives,
refinement studies) and returns the raw numbers; thresholds live with the
callers.
"""
from __future__ import annotations

import numpy as np

from . import system as sy
from .grid import SlabGrid, chi, chi_prime, chi_second
from .linearized import (BOUNDARY_COUPLING, BasicState, apply_B_prime, apply_B_second,
                         apply_Be_prime, assemble_boldA, good_unknown)
from .manufactured import (equilibrium_values, random_compatible_state, random_state, t as T_,
                           x1 as X1_, x2 as X2_, x3 as X3_)
from .thermo import ThermoModel

AXES = (T_, X1_, X2_, X3_)


def log_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# matrices


def random_admissible_states(rng, n, eos: ThermoModel):
    """``n`` random states (8, n) with density inside the admissible window."""
    out = np.empty((8, 0))
    while out.shape[1] < n:
        m = 2 * (n - out.shape[1]) + 16
        H = rng.normal(0.0, 0.7, (3, m))
        S = rng.uniform(-0.5, 0.5, m)
        rho = np.exp(rng.uniform(np.log(eos.rho_floor), np.log(eos.rho_ceil), m))
        p = eos.pressure(rho, S)
        U = np.concatenate([(p + 0.5 * np.sum(H**2, axis=0))[None],
                            rng.normal(0.0, 1.0, (3, m)), H, S[None]])
        ok = eos.hyperbolicity_margin(U) > 1e-9 * eos.rho_ceil
        out = np.concatenate([out, U[:, ok]], axis=1)
    return out[:, :n]


def matrix_structure(U, eos: ThermoModel, rng):
    """Symmetry defects, the smallest eigenvalue of ``A0`` and the largest
    imaginary part of the eigenvalues of ``A0^{-1} sum A_i xi_i``."""
    n = U.shape[1]
    mats = {"A0": sy.assemble_A0(U, eos)}
    for i in (1, 2, 3):
        mats[f"A{i}"] = sy.assemble_Ai(U, i, eos)
    dPhi = [rng.normal(0, 0.3, n), rng.uniform(0.5, 1.5, n), rng.normal(0, 0.3, n),
            rng.normal(0, 0.3, n)]
    mats["A1_tilde"] = sy.assemble_A1_tilde(U, dPhi, eos)
    asym = {}
    for name, M in mats.items():
        M = np.moveaxis(M, (0, 1), (-2, -1))
        scale = np.max(np.abs(M), axis=(-2, -1))
        asym[name] = float(np.max(np.max(np.abs(M - np.swapaxes(M, -1, -2)), axis=(-2, -1))
                                  / np.maximum(scale, 1e-300)))
    A0 = np.moveaxis(mats["A0"], (0, 1), (-2, -1))
    min_eig = float(np.min(np.linalg.eigvalsh(A0)[:, 0]))
    xi = rng.normal(size=(3, n))
    xi /= np.linalg.norm(xi, axis=0)
    sym = sum(xi[i - 1] * mats[f"A{i}"] for i in (1, 2, 3))
    sym = np.moveaxis(sym, (0, 1), (-2, -1))
    ev = np.linalg.eigvals(np.linalg.solve(A0, sym))
    scale = np.max(np.abs(ev), axis=-1)
    imag = float(np.max(np.max(np.abs(ev.imag), axis=-1) / np.maximum(scale, 1e-300)))
    return {"asymmetry": asym, "min_eig_A0": min_eig, "max_imag_symbol": imag}


# ---------------------------------------------------------------------------
# boundary structure


def compatible_base(rng, grid: SlabGrid, eos: ThermoModel, amp=0.05, phi_amp=0.05,
                    values=None):
    """Basic state from a random manufactured state satisfying the boundary constraints."""
    if values is None:
        values = equilibrium_values(eos)
    ms = random_compatible_state(rng, values, amp=amp, phi_amp=phi_amp)
    U, phi = ms.on_grid(grid)
    return BasicState(grid, U, phi, eos), ms


def boundary_structure_defect(base: BasicState):
    """``max |boldA1 - A1^(1)|`` at ``x1 = 0`` and the max spacing of the grid."""
    bold = assemble_boldA(base, 0)
    d = float(np.max(np.abs(bold.A1_remainder)))
    g = base.grid
    return d, max(g.h1, g.h2, g.h3, g.dt)


def boundary_coupling():
    return BOUNDARY_COUPLING.copy()


# ---------------------------------------------------------------------------
# Alinhac identity, pointwise with exact derivatives


def _lift_derivs(phi_vals, X1):
    """``dPhi`` (4, ...) and ``d_1 dPhi`` of ``x1 + chi(x1) phi`` from ``phi``
    and its derivatives ``(phi, phi_t, phi_2, phi_3)``."""
    f, ft, f2, f3 = phi_vals
    c, cp, cs = chi(X1), chi_prime(X1), chi_second(X1)
    d = np.stack([c * ft, 1.0 + cp * f, c * f2, c * f3])
    d1 = np.stack([cp * ft, cs * f, cp * f2, cp * f3])
    return d, d1


def _eval_phi_all(ms, T, X2, X3):
    return [ms.eval_phi(T, X2, X3)] + [ms.eval_phi(T, X2, X3, deriv=(a,)) for a in
                                       (T_, X2_, X3_)]


def _interior_at(ms, T, X1, X2, X3, eos):
    U = ms.eval_U(T, X1, X2, X3)
    dU = np.stack([ms.eval_U(T, X1, X2, X3, deriv=(a,)) for a in AXES])
    dPhi, _ = _lift_derivs(_eval_phi_all(ms, T, X2, X3), X1)
    return sy.interior_pointwise(U, dU, dPhi, eos, check=False)


def alinhac_remainders(rng, eos: ThermoModel, thetas, npts=64, amp=0.05, phi_amp=0.1,
                       fd_step=1e-3):
    """Pointwise remainders of the good-unknown identity.

    Returns ``max |L(U + th V, Phi + th Psi) - L(U, Phi) - th (Le' Vdot +
    Psi / d_1 Phi  d_1 L(U, Phi))|`` for each ``th``; quadratic in ``th``.
    All derivatives are exact except ``d_1 L``, taken by a fourth-order
    difference in ``x1`` (step ``fd_step``).
    """
    base = random_state(rng, equilibrium_values(eos), amp=amp, phi_amp=phi_amp)
    pert = random_state(rng, np.zeros(8), amp=1.0, phi_amp=1.0)
    T = rng.uniform(-0.5, 0.5, npts)
    X1 = rng.uniform(0.05, 3.0, npts)
    X2 = rng.uniform(0, 2 * np.pi, npts)
    X3 = rng.uniform(0, 2 * np.pi, npts)
    pts = (T, X1, X2, X3)
    U = base.eval_U(*pts)
    dU = np.stack([base.eval_U(*pts, deriv=(a,)) for a in AXES])
    d1dU = np.stack([base.eval_U(*pts, deriv=(X1_, a)) for a in AXES])
    phi_vals = _eval_phi_all(base, T, X2, X3)
    dPhi, d1dPhi = _lift_derivs(phi_vals, X1)
    V = pert.eval_U(*pts)
    dV = np.stack([pert.eval_U(*pts, deriv=(a,)) for a in AXES])
    psi, psit, psi2, psi3 = _eval_phi_all(pert, T, X2, X3)
    c, cp = chi(X1), chi_prime(X1)
    Psi = c * psi
    dPsi = np.stack([c * psit, cp * psi, c * psi2, c * psi3])
    # good unknown and its derivatives
    a, b = dU[1], dPhi[1]
    G = a / b
    Vdot = V - G * Psi
    dVdot = np.stack([dV[j] - (d1dU[j] / b - a * d1dPhi[j] / b**2) * Psi - G * dPsi[j]
                      for j in range(4)])
    k = sy.coefficients(U, eos, check=False)
    le = sy.apply_L(k, dPhi, dVdot) + sy.apply_C(k, dPhi, dU, Vdot)
    h = fd_step
    Lsh = {s: _interior_at(base, T, X1 + s * h, X2, X3, eos) for s in (-2, -1, 1, 2)}
    d1L = (Lsh[-2] - 8 * Lsh[-1] + 8 * Lsh[1] - Lsh[2]) / (12 * h)
    lin = le + Psi / b * d1L
    L0 = sy.interior_pointwise(U, dU, dPhi, eos, check=False)
    out = []
    for th in thetas:
        Lt = sy.interior_pointwise(U + th * V, dU + th * dV, dPhi + th * dPsi, eos, check=False)
        out.append(float(np.max(np.abs(Lt - L0 - th * lin))))
    return np.array(out)


# ---------------------------------------------------------------------------
# boundary operator and its variations


def random_perturbation(rng, grid: SlabGrid, amp=1.0):
    """Smooth random ``(V, psi)`` on the grid, periodic in ``x'``."""
    ms = random_state(rng, np.zeros(8), amp=amp, phi_amp=amp)
    return ms.on_grid(grid)


def boundary_first_remainders(base: BasicState, V, psi, thetas):
    """``max |(B(U + th V, phi + th psi) - B(U, phi)) / th - B'(V, psi)|``."""
    g = base.grid
    B0 = sy.boundary_residual(base.U, base.phi, g, base.tension)
    lin = apply_B_prime(base, V, psi)
    return np.array([float(np.max(np.abs(
        (sy.boundary_residual(base.U + th * V, base.phi + th * psi, g, base.tension) - B0) / th
        - lin))) for th in thetas])


def effective_vs_raw(base: BasicState, V, psi):
    """``max |B'_e(Vdot, psi) - B'(V, psi)|`` with ``Vdot`` the good unknown of ``V``."""
    gu = good_unknown(V, psi, base)
    return float(np.max(np.abs(apply_Be_prime(base, gu.Vdot, psi) - apply_B_prime(base, V, psi))))


def boundary_second_remainders(base: BasicState, pair1, pair2, thetas):
    """Second mixed difference of ``B`` along two directions minus ``B''``."""
    g = base.grid
    (V, psi), (W, chi_) = pair1, pair2

    def B(a, b):
        return sy.boundary_residual(base.U + a * V + b * W, base.phi + a * psi + b * chi_, g,
                                    base.tension)

    exact = apply_B_second(base, pair1, pair2)
    B00 = B(0.0, 0.0)
    return np.array([float(np.max(np.abs(
        (B(th, th) - B(th, 0.0) - B(0.0, th) + B00) / th**2 - exact))) for th in thetas])


# ---------------------------------------------------------------------------
# curvature


def paraboloid_patch_errors(sizes, half_width=0.5):
    """Error of the curvature stencil at the origin for ``(x2^2 + x3^2)/2``
    sampled on square patches; the exact value is 2."""
    errs = []
    for n in sizes:
        x = np.linspace(-half_width, half_width, 2 * n + 1)
        h = x[1] - x[0]
        X2, X3 = np.meshgrid(x, x, indexing="ij")
        vals = sy.mean_curvature_patch(0.5 * (X2**2 + X3**2), h, h)
        c = vals.shape[0] // 2
        errs.append(abs(float(vals[c, c]) - 2.0))
    return np.array(errs)


def paraboloid_symbolic_value():
    """Curvature of ``(x2^2 + x3^2)/2`` at the origin by symbolic differentiation."""
    import sympy as sp

    a, b = sp.symbols("a b", real=True)
    f = (a**2 + b**2) / 2
    n = sp.sqrt(1 + sp.diff(f, a) ** 2 + sp.diff(f, b) ** 2)
    H = sp.diff(sp.diff(f, a) / n, a) + sp.diff(sp.diff(f, b) / n, b)
    return float(H.subs({a: 0, b: 0}))


# ---------------------------------------------------------------------------
# smoothing family


def smoothing_exponents(grid: SlabGrid, thetas, k, j):
    """Fitted growth exponents of the three smoothing bounds on a mode family.

    The field at parameter ``th`` is one tangential mode whose wavenumber is
    tied to ``th`` so that each bound is attained: ``th`` for the growth
    bound, ``2 th`` for the approximation bound and ``1.5 th`` for the
    ``th``-derivative.  The approximation bound measures the defect in the
    lower of the two orders against the higher one.  Expected exponents are
    ``k - j``, ``-|k - j|`` and ``k - j - 1``.  Norms are spectral tangential
    Sobolev norms.
    """
    from .smoothing import SmoothingFamily, tangential_sobolev

    S = SmoothingFamily(grid)
    _, X2, X3 = grid.bmesh()
    t = grid.t
    win = np.clip(t, 0, None)[:, None, None] ** 2

    def mode(kk):
        return win * np.cos(kk * X2) + 0.0 * X3

    grow, approx, deriv = [], [], []
    for th in thetas:
        u = mode(th)
        grow.append(tangential_sobolev(S.smooth(u, th, True), k, grid)
                    / tangential_sobolev(u, j, grid))
        u = mode(2 * th)
        approx.append(tangential_sobolev(S.smooth(u, th, True) - u, min(k, j), grid)
                      / tangential_sobolev(u, max(k, j), grid))
        u = mode(1.5 * th)
        deriv.append(tangential_sobolev(S.dtheta(u, th, True), k, grid)
                     / tangential_sobolev(u, j, grid))
    return (log_slope(thetas, grow), log_slope(thetas, approx), log_slope(thetas, deriv))
