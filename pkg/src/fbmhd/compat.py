"""Time derivatives of the initial data at ``t = 0``, compatibility of the
data with the boundary conditions, and the approximate solution.

Time derivatives are propagated with truncated derivative arithmetic
(:mod:`fbmhd.faadibruno`) on the spatially discrete system: the interior
equation is solved for ``d_t U`` and the kinematic boundary condition gives
``d_t phi``.  Spatial derivatives are the same stencils the slab operators
use, so the approximate solution is consistent with the discrete residual.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from . import system as sy
from .faadibruno import Jet
from .grid import SlabGrid, chi, chi_prime
from .thermo import ThermoModel

MAX_JET_ORDER = 4


class IncompatibleDataError(ValueError):
    def __init__(self, msg, order, history=()):
        super().__init__(msg)
        self.order = order
        self.history = list(history)


def _pd(u, axis, h):
    return sy._periodic_d(u, axis, h)


@dataclass
class DataJet:
    """Time derivatives ``(U_(j) - delta_j0 Ubar, phi_(j))`` at ``t = 0``."""

    grid: SlabGrid
    eos: ThermoModel
    Ubar: np.ndarray
    U: list
    phi: list
    tension: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def order(self):
        return len(self.U) - 1

    def state(self, j):
        """Full ``d_t^j U`` at ``t = 0`` (adds ``Ubar`` at order 0)."""
        return self.U[0] + self.Ubar[:, None, None, None] if j == 0 else self.U[j]


def _dspace(grid, u, axis):
    return grid.d_space(u, axis)


def _lift_jets(grid, phis, order):
    """Jets of (d_t Phi, d_1 Phi, d_2 Phi, d_3 Phi) up to ``order``; needs ``order+1`` phis."""
    c = chi(grid.x1)[:, None, None]
    cp = chi_prime(grid.x1)[:, None, None]
    dt = Jet([c * phis[k + 1][None] for k in range(order + 1)])
    d1 = Jet([(1.0 if k == 0 else 0.0) + cp * phis[k][None] for k in range(order + 1)])
    d2 = Jet([c * _pd(phis[k], -2, grid.h2)[None] for k in range(order + 1)])
    d3 = Jet([c * _pd(phis[k], -1, grid.h3)[None] for k in range(order + 1)])
    return dt, d1, d2, d3


def _time_rhs_jet(grid, eos, Ufull, phis, order):
    """Jet (orders 0..order) of ``d_t U = G`` given state jets and ``order+1`` phi jets.

    ``Ufull[k]`` is the full ``d_t^k U`` at ``t = 0``.
    """
    comp = [Jet([Ufull[k][c] for k in range(order + 1)]) for c in range(8)]
    X = {i: [Jet([_dspace(grid, Ufull[k], i)[c] for k in range(order + 1)]) for c in range(8)]
         for i in (1, 2, 3)}
    ft, f1, f2, f3 = _lift_jets(grid, phis, order)
    inv1 = f1.reciprocal()
    weights = {1: (-1 * ft * inv1, inv1, -1 * f2 * inv1, -1 * f3 * inv1),
               2: (0.0, 0.0, 1.0, 0.0), 3: (0.0, 0.0, 0.0, 1.0)}
    v, H = comp[1:4], comp[4:7]
    q, S = comp[0], comp[7]
    G = [Jet.constant(np.zeros(grid.shape[1:]), order) for _ in range(8)]
    N = [Jet.constant(np.zeros(grid.shape[1:]), order) for _ in range(8)]
    for i in (1, 2, 3):
        w0, *wv = weights[i]
        Xi = X[i]
        a = w0 + sum((wv[j] * v[j] for j in range(3)), Jet.constant(0.0, order))
        b = sum((wv[j] * H[j] for j in range(3)), Jet.constant(0.0, order))
        for c in range(8):
            G[c] = G[c] - a * Xi[c]
        N[0] = N[0] + sum((wv[j] * Xi[1 + j] for j in range(3)), Jet.constant(0.0, order))
        for j in range(3):
            N[1 + j] = N[1 + j] + wv[j] * Xi[0] - b * Xi[4 + j]
            N[4 + j] = N[4 + j] - b * Xi[1 + j]
    hh = H[0] * H[0] + H[1] * H[1] + H[2] * H[2]
    shifted = q - 0.5 * hh + eos.p_inf
    inv_c = eos.gamma * shifted
    log_k = float(np.log(eos.entropy_scale))
    inv_rho = ((S + log_k - shifted.log()) * (1.0 / eos.gamma)).exp()
    hn = H[0] * N[4] + H[1] * N[5] + H[2] * N[6]
    G[0] = G[0] - (N[0] * (inv_c + hh) + hn)
    for j in range(3):
        G[1 + j] = G[1 + j] - N[1 + j] * inv_rho
        G[4 + j] = G[4 + j] - (N[4 + j] + N[0] * H[j])
    return G


def _kinematic_next(grid, Ufull, phis, j):
    """``phi_(j+1)`` from the j-th time derivative of ``d_t phi = v.N``."""
    out = Ufull[j][1, 0].copy()
    for k in range(j + 1):
        c = comb(j, k)
        out -= c * (Ufull[k][2, 0] * _pd(phis[j - k], -2, grid.h2)
                    + Ufull[k][3, 0] * _pd(phis[j - k], -1, grid.h3))
    return out


def time_derivatives(U0, phi0, grid: SlabGrid, eos: ThermoModel, m=MAX_JET_ORDER,
                     Ubar=None, tension=1.0, max_order=MAX_JET_ORDER, check=True):
    """Jet of the data up to order ``m``.

    ``U0`` has shape ``(8, n1, n2, n3)`` and ``phi0`` shape ``(n2, n3)``.
    ``Ubar`` defaults to the boundary-averaged far state ``U0[:, -1]`` mean.
    """
    if not 0 <= m <= max_order:
        raise ValueError(f"jet order {m} outside 0..{max_order}")
    U0 = np.asarray(U0, dtype=float)
    phi0 = np.asarray(phi0, dtype=float)
    if U0.shape != (8,) + grid.shape[1:] or phi0.shape != grid.bshape[1:]:
        raise ValueError("initial data do not match the spatial grid")
    if check:
        if float(np.max(np.abs(phi0))) > 0.25:
            raise ValueError("initial interface amplitude exceeds 1/4")
        margin = eos.hyperbolicity_margin(U0)
        if not np.all(margin > 0):
            raise sy.HyperbolicityError("initial state inadmissible")
    if Ubar is None:
        Ubar = U0[:, -1].mean(axis=(1, 2))
    Ubar = np.asarray(Ubar, dtype=float)
    Ufull = [U0]
    phis = [phi0]
    for j in range(m):
        phis.append(_kinematic_next(grid, Ufull, phis, j))
        G = _time_rhs_jet(grid, eos, Ufull, phis, j)
        Ufull.append(np.stack([G[c].d[j] * np.ones(grid.shape[1:]) for c in range(8)]))
    jetU = [U0 - Ubar[:, None, None, None]] + Ufull[1:]
    return DataJet(grid, eos, Ubar, jetU, phis, float(tension))


def first_derivative_direct(U0, phi0, grid, eos):
    """``-A0^{-1}(A1~ d_1 U + A2 d_2 U + A3 d_3 U)`` at ``t = 0`` with dense matrices."""
    c = chi(grid.x1)[:, None, None]
    cp = chi_prime(grid.x1)[:, None, None]
    n1 = grid.shape[1]
    tr = U0[:, 0]
    phit = tr[1] - tr[2] * _pd(phi0, -2, grid.h2) - tr[3] * _pd(phi0, -1, grid.h3)
    dPhi = np.stack([c * phit[None], 1.0 + cp * phi0[None],
                     c * _pd(phi0, -2, grid.h2)[None], c * _pd(phi0, -1, grid.h3)[None]])
    dPhi = np.broadcast_to(dPhi, (4, n1) + phi0.shape)
    k = sy.coefficients(U0, eos, check=False)
    R = 0.0
    for w, i in zip(sy.operator_weights(dPhi)[1:], (1, 2, 3)):
        M = sy.combo_assemble(k, w)
        R = R + np.einsum("ij...,j...->i...", M, grid.d_space(U0, i))
    A0 = sy.combo_assemble(k, (1.0, 0.0, 0.0, 0.0))
    A0m = np.moveaxis(A0, (0, 1), (-2, -1))
    Rm = np.moveaxis(R, 0, -1)[..., None]
    return -np.moveaxis(np.linalg.solve(A0m, Rm)[..., 0], -1, 0)


# ---------------------------------------------------------------------------
# compatibility


def _curvature_jets(grid, phis, order):
    """Jets of the curvature ``D.(D phi / sqrt(1 + |D phi|^2))`` up to ``order``."""
    x2 = Jet([_pd(phis[k], -2, grid.h2) for k in range(order + 1)])
    x3 = Jet([_pd(phis[k], -1, grid.h3) for k in range(order + 1)])
    r = (1.0 + x2 * x2 + x3 * x3).power(-0.5)
    f2, f3 = x2 * r, x3 * r
    return [_pd(f2.d[k], -2, grid.h2) + _pd(f3.d[k], -1, grid.h3) for k in range(order + 1)]


def compatibility_residuals(jet: DataJet, tension=None):
    """Per-order defects ``q_(j)|_{x1=0} - s d_t^j H(phi)``; list of (n2, n3) arrays."""
    s = jet.tension if tension is None else float(tension)
    sy._check_tension(s)
    m = jet.order
    curv = _curvature_jets(jet.grid, jet.phi, m)
    return [jet.state(j)[0, 0] - s * curv[j] for j in range(m + 1)]


def residual_norms(jet, tension=None):
    return [float(np.max(np.abs(r))) for r in compatibility_residuals(jet, tension)]


def profile(grid, j):
    """Boundary-layer profile ``chi(x1) x1^j / j!`` used for order-j corrections."""
    x = grid.x1
    return chi(x) * x**j / factorial(j)


def make_compatible(U0, phi0, grid, eos, m=MAX_JET_ORDER, tension=1.0, Ubar=None,
                    tol=1e-11, max_iter=40, probe=1e-6):
    """Adjust ``U0`` near the boundary until the data are compatible up to order ``m``.

    Order ``j`` is corrected by ``a_j(x') chi(x1) x1^j / j!`` added to the
    pressure (even ``j``) or to the normal velocity (odd ``j``).  Near a
    constant state the map from the coefficients to the residuals is close
    to a tangential convolution, so its impulse response (one probe per
    order) gives a per-wavenumber ``(m+1) x (m+1)`` symbol; the iteration
    applies the inverse symbol to the current residual.  Returns the adjusted
    data, the jet and the residual history.
    """
    U0 = np.asarray(U0, dtype=float)
    profs = [(0 if j % 2 == 0 else 1, profile(grid, j)[:, None, None]) for j in range(m + 1)]
    bshape = (m + 1,) + grid.bshape[1:]

    def apply(a):
        U = U0.copy()
        for j, (comp, prof) in enumerate(profs):
            U[comp] += a[j][None] * prof
        return U

    def residuals(a):
        jet = time_derivatives(apply(a), phi0, grid, eos, m, Ubar, tension)
        return jet, np.stack(compatibility_residuals(jet))

    a = np.zeros(bshape)
    jet, r = residuals(a)
    hist = [float(np.max(np.abs(r)))]
    if hist[-1] <= tol:
        return U0.copy(), jet, hist
    cols = []
    for j in range(m + 1):
        ap = a.copy()
        ap[j, 0, 0] += probe
        cols.append(np.fft.fft2((residuals(ap)[1] - r) / probe, axes=(-2, -1)))
    sym = np.moveaxis(np.stack(cols, axis=1), (0, 1), (-2, -1))
    try:
        inv = np.linalg.inv(sym)
    except np.linalg.LinAlgError:
        raise IncompatibleDataError("compatibility corrections are degenerate", -1) from None
    for _ in range(max_iter):
        rh = np.moveaxis(np.fft.fft2(r, axes=(-2, -1)), 0, -1)[..., None]
        step = np.real(np.fft.ifft2(np.moveaxis((inv @ rh)[..., 0], -1, 0), axes=(-2, -1)))
        a = a - step
        jet, r = residuals(a)
        hist.append(float(np.max(np.abs(r))))
        if hist[-1] <= tol:
            return apply(a), jet, hist
    raise IncompatibleDataError(
        f"compatibility iteration stalled at residual {min(hist):.3g}", -1, hist)


def perturbed_equilibrium(grid, eos, Ubar, amplitude, seed, m=MAX_JET_ORDER, tension=1.0,
                          phi_direction=(0, 1)):
    """Compatible data near the constant state ``Ubar``.

    The interface is one Fourier mode varying along ``phi_direction`` (chosen
    orthogonal to the tangential field so that ``H.N = 0`` holds with a
    constant field); velocity and entropy carry random low modes decaying in
    ``x1``, and the pressure is then fixed by :func:`make_compatible`.
    """
    rng = np.random.default_rng(seed)
    _, X1, X2, X3 = (a[0] for a in grid.mesh())
    bx2, bx3 = grid.bmesh()[1][0], grid.bmesh()[2][0]
    k2, k3 = phi_direction
    phi0 = amplitude * np.cos(k2 * bx2 + k3 * bx3 + rng.uniform(0, 2 * np.pi))
    U0 = np.broadcast_to(np.asarray(Ubar, dtype=float)[:, None, None, None],
                         (8,) + grid.shape[1:]).copy()
    for c in (1, 2, 3, 7):
        for _ in range(2):
            kk = rng.integers(-1, 2, size=2)
            ph = rng.uniform(0, 2 * np.pi)
            dec = rng.uniform(0.5, 1.0)
            U0[c] += amplitude * rng.uniform(0.3, 1.0) * np.exp(-dec * X1) * np.cos(
                kk[0] * X2 + kk[1] * X3 + ph)
    return make_compatible(U0, phi0, grid, eos, m, tension, Ubar)


# ---------------------------------------------------------------------------
# approximate solution


def time_cutoff(t, t_cut):
    """Smooth even cut-off: 1 for ``|t| <= t_cut``, 0 for ``|t| >= 2 t_cut``."""
    from .grid import _smooth_step

    s = np.abs(np.asarray(t, dtype=float)) / t_cut - 1.0
    return 1.0 - _smooth_step(np.clip(s, 0.0, 1.0))


@dataclass
class ApproximateSolution:
    U: np.ndarray
    phi: np.ndarray
    jet: DataJet
    t_cut: float


def build_approximate_solution(jet: DataJet, grid: SlabGrid = None, t_cut=None, tol=1e-8):
    """Taylor polynomial of the jet in time times a cut-off, sampled on ``grid``.

    Raises :class:`IncompatibleDataError` naming the first order whose
    compatibility residual exceeds ``tol``.
    """
    grid = jet.grid if grid is None else grid
    if grid.shape[1:] != jet.grid.shape[1:]:
        raise ValueError("grid and jet disagree on the spatial mesh")
    for j, r in enumerate(residual_norms(jet)):
        if r > tol:
            raise IncompatibleDataError(
                f"data incompatible at order {j}: residual {r:.3g} > {tol:.3g}", j)
    t = grid.t
    t_cut = grid.t_final if t_cut is None else float(t_cut)
    kap = time_cutoff(t, t_cut)
    U = np.broadcast_to(jet.Ubar[:, None, None, None, None], (8,) + grid.shape).copy()
    phi = np.zeros(grid.bshape)
    for j in range(jet.order + 1):
        w = kap * t**j / factorial(j)
        U += w[None, :, None, None, None] * jet.U[j][:, None]
        phi += w[:, None, None] * jet.phi[j][None]
    # the t = 0 level is the data itself, with no rounding from the sum
    U[:, grid.n_past] = jet.state(0)
    phi[grid.n_past] = jet.phi[0]
    return ApproximateSolution(U, phi, jet, t_cut)


def forcing_fa(approx: ApproximateSolution, grid: SlabGrid, eos: ThermoModel):
    """``-L(U^a, Phi^a)`` on levels ``t > 0`` and zero for ``t <= 0``."""
    f = -sy.nonlinear_interior_residual(approx.U, approx.phi, grid, eos)
    f[:, :grid.n_past + 1] = 0.0
    return f


def boundary_forcing(approx: ApproximateSolution, grid: SlabGrid, tension):
    """``-B(U^a, phi^a)`` on levels ``t > 0``: the boundary defect of the polynomial."""
    g = -sy.boundary_residual(approx.U, approx.phi, grid, tension)
    g[:, :grid.n_past + 1] = 0.0
    return g


def initial_size(jet: DataJet, s=None):
    """Size of the data: sum over orders of discrete Sobolev norms of
    ``(U_(j), phi_(j))`` with ``s - j`` spatial derivatives."""
    g = jet.grid
    s = jet.order if s is None else int(s)
    vol = g.h1 * g.h2 * g.h3
    total = 0.0
    for j in range(jet.order + 1):
        k = max(s - j, 0)
        fields = [jet.U[j]]
        bfields = [jet.phi[j]]
        for _ in range(k):
            fields = [g.d_space(f, a) for f in fields for a in (1, 2, 3)] + fields
            bfields = [_pd(f, ax, h) for f in bfields for ax, h in ((-2, g.h2), (-1, g.h3))] \
                + bfields
        total += sum(float(np.sum(f**2)) for f in fields) * vol
        total += sum(float(np.sum(f**2)) for f in bfields) * g.h2 * g.h3
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# time-stepping oracle


def _semi_discrete_rhs(grid, eos, U, phi):
    tr = U[:, 0]
    phit = tr[1] - tr[2] * _pd(phi, -2, grid.h2) - tr[3] * _pd(phi, -1, grid.h3)
    G = _time_rhs_jet(grid, eos, [U], [phi, phit], 0)
    return np.stack([G[c].d[0] * np.ones(grid.shape[1:]) for c in range(8)]), phit


def march_oracle(U0, phi0, grid, eos, tau, steps):
    """RK4 march of the spatially discrete equations in both time directions.

    Returns the sampled states at ``t = k tau`` for ``k = -steps..steps``.
    """
    out = {0: (np.array(U0, float), np.array(phi0, float))}
    for sgn in (1, -1):
        U, phi = out[0]
        h = sgn * tau
        for k in range(1, steps + 1):
            k1 = _semi_discrete_rhs(grid, eos, U, phi)
            k2 = _semi_discrete_rhs(grid, eos, U + 0.5 * h * k1[0], phi + 0.5 * h * k1[1])
            k3 = _semi_discrete_rhs(grid, eos, U + 0.5 * h * k2[0], phi + 0.5 * h * k2[1])
            k4 = _semi_discrete_rhs(grid, eos, U + h * k3[0], phi + h * k3[1])
            U = U + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            phi = phi + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            out[sgn * k] = (U, phi)
    return out


# centered differences of second order for derivatives 1..4
_FD = {1: {-1: -0.5, 1: 0.5},
       2: {-1: 1.0, 0: -2.0, 1: 1.0},
       3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
       4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0}}


def oracle_derivatives(samples, tau, order):
    """Centered finite-difference time derivatives at ``t = 0`` of marched samples."""
    U = [samples[0][0] - 0.0]
    phi = [samples[0][1]]
    for j in range(1, order + 1):
        U.append(sum(c * samples[k][0] for k, c in _FD[j].items()) / tau**j)
        phi.append(sum(c * samples[k][1] for k, c in _FD[j].items()) / tau**j)
    return U, phi
