"""Nash-Moser iteration around the approximate solution.

Unknowns are perturbations ``(V, psi)`` of ``(U^a, phi^a)``.  Writing
``N(V, psi) = L(U^a + V, Phi^a + Psi) - L(U^a, Phi^a)`` and
``M(V, psi) = B(U^a + V, phi^a + psi) - B(U^a, phi^a)``, the targets are
``f^a`` and ``g^a`` (the interior and boundary defects of the approximate
solution for ``t > 0``).  Each step smooths the accumulated errors, solves
the effective linear problem at a modified state that satisfies the
boundary constraints, and records the split of the new error into a
quadratic part, two substitution parts and the part dropped by the
effective operator.

The interior residual is measured on every node except the pressure row at
``x1 = 0`` (there the boundary condition replaces the equation) and on
levels ``0 <= t < T``; the boundary residual on the same levels.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import system as sy
from .compat import ApproximateSolution, boundary_forcing, forcing_fa
from .grid import SlabGrid, boundary_sobolev_norm, chi, hstar_norm, lift_scalar
from .linearized import (BasicState, apply_B_prime, apply_Be_prime, apply_L_prime,
                         apply_Le_prime, raw_unknown)
from .smoothing import SmoothingFamily, schedule
from .solver import SchemeParams, solve_regularized
from .thermo import ThermoModel


class DivergenceError(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


class InadmissibleStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class NMConfig:
    theta0: float = 4.0
    alpha: float = 12.0
    alpha_tilde: float = 15.0
    epsilon: float = 0.1
    max_steps: int = 8
    tol_interior: float = 1e-14
    tol_boundary: float = 1e-14
    hyp_orders: tuple = (1, 2)
    divergence_window: int = 3
    floor_rel: float = 1e-11
    checkpoint_every: int = 0
    cfl: float = 0.9

    def __post_init__(self):
        if self.theta0 < 1:
            raise ValueError("nash_moser.theta0 must be >= 1")
        if self.alpha_tilde < self.alpha:
            raise ValueError("nash_moser.alpha_tilde must be >= alpha")
        if self.max_steps < 0:
            raise ValueError("nash_moser.max_steps must be >= 0")


@dataclass
class NMProblem:
    grid: SlabGrid
    eos: ThermoModel
    tension: float
    approx: ApproximateSolution
    fa: np.ndarray
    ga: np.ndarray
    La: np.ndarray
    Ba: np.ndarray

    @classmethod
    def from_approximate(cls, approx, grid, eos, tension):
        La = sy.nonlinear_interior_residual(approx.U, approx.phi, grid, eos)
        Ba = sy.boundary_residual(approx.U, approx.phi, grid, tension)
        return cls(grid, eos, float(tension), approx, forcing_fa(approx, grid, eos),
                   boundary_forcing(approx, grid, tension), La, Ba)

    def total(self, V, psi):
        return self.approx.U + V, self.approx.phi + psi

    def interior_map(self, V, psi):
        U, phi = self.total(V, psi)
        return sy.nonlinear_interior_residual(U, phi, self.grid, self.eos) - self.La

    def boundary_map(self, V, psi):
        U, phi = self.total(V, psi)
        return sy.boundary_residual(U, phi, self.grid, self.tension) - self.Ba

    def base(self, V, psi, check=False):
        U, phi = self.total(V, psi)
        return BasicState(self.grid, U, phi, self.eos, self.tension, check=check)


def interior_mask(grid):
    m = np.zeros((8,) + grid.shape, dtype=bool)
    m[:, grid.n_past:grid.nt_total - 1] = True
    m[0, :, 0] = False
    return m


def boundary_mask(grid):
    m = np.zeros((2,) + grid.bshape, dtype=bool)
    m[:, grid.n_past:grid.nt_total - 1] = True
    return m


def masked_norm(r, grid, boundary=False):
    """Discrete ``L^2`` norm over the measured nodes."""
    mask = boundary_mask(grid) if boundary else interior_mask(grid)
    vol = grid.dt * grid.h2 * grid.h3 * (1.0 if boundary else grid.h1)
    return float(np.sqrt(np.sum(np.where(mask, r, 0.0) ** 2) * vol))


@dataclass
class IterationState:
    n: int
    V: np.ndarray
    psi: np.ndarray
    E: np.ndarray
    Et: np.ndarray
    Fsum: np.ndarray
    Gsum: np.ndarray
    residual_int: float = float("nan")
    residual_bdy: float = float("nan")
    history: list = field(default_factory=list)

    @property
    def theta(self):
        return float(self._cfg_theta0**2 + self.n) ** 0.5

    _cfg_theta0: float = 4.0


def initial_state(problem: NMProblem, cfg: NMConfig):
    g = problem.grid
    st = IterationState(0, g.zeros(8), g.bzeros(), g.zeros(8), g.bzeros(2), g.zeros(8),
                        g.bzeros(2), _cfg_theta0=cfg.theta0)
    st.residual_int = masked_norm(-problem.fa, g)
    st.residual_bdy = masked_norm(-problem.ga, g, boundary=True)
    return st


def modified_state(problem: NMProblem, V, psi, theta, smoother: SmoothingFamily):
    """``(V_{n+1/2}, psi_{n+1/2})``: smoothed perturbation with the normal
    velocity and normal field at ``x1 = 0`` restored so that the total state
    satisfies ``d_t phi = v.N`` and ``H.N = 0`` on levels ``t >= 0``.

    The corrections are extended into the slab with ``chi(x1)``.
    Returns ``(V_half, psi_half, Vs, psis)`` where ``Vs, psis`` are the plain
    smoothed fields.
    """
    g = problem.grid
    Vs = smoother.smooth(V, theta)
    psis = smoother.smooth(psi, theta, boundary=True)
    U, phi = problem.total(Vs, psis)
    d2, d3 = g.db(phi, 2), g.db(phi, 3)
    tr = U[:, :, 0]
    dv1 = g.db(phi, 0) + tr[2] * d2 + tr[3] * d3 - tr[1]
    dh1 = tr[5] * d2 + tr[6] * d3 - tr[4]
    dv1[:g.n_past] = 0.0
    dh1[:g.n_past] = 0.0
    prof = chi(g.x1)[None, :, None, None]
    Vh = Vs.copy()
    Vh[1] += prof * dv1[:, None]
    Vh[4] += prof * dh1[:, None]
    return Vh, psis, Vs, psis


def _state_norm(V, psi, grid, s):
    v = hstar_norm(V, s, grid) if s <= 2 else float("nan")
    return float(np.sqrt(v**2 + boundary_sobolev_norm(psi, s, grid) ** 2))


def iterate_step(problem: NMProblem, st: IterationState, cfg: NMConfig,
                 smoother: SmoothingFamily, scheme: SchemeParams):
    """One Nash-Moser step; returns the new state and a diagnostics row."""
    g = problem.grid
    n = st.n
    theta, delta = schedule(cfg.theta0, n)
    # sources from the accumulated errors
    Sfa = smoother.smooth(problem.fa - st.E, theta)
    Sga = smoother.smooth(problem.ga - st.Et, theta, boundary=True)
    f_n = Sfa - st.Fsum
    g_n = Sga - st.Gsum
    f_n[:, :g.n_past] = 0.0
    g_n[:, :g.n_past] = 0.0
    # modified state and effective linear solve
    Vh, psih, Vs, psis = modified_state(problem, st.V, st.psi, theta, smoother)
    try:
        base_h = problem.base(Vh, psih, check=True)
    except (ValueError, sy.HyperbolicityError) as exc:
        raise InadmissibleStateError(f"step {n}: modified state rejected: {exc}") from exc
    rep = solve_regularized(base_h, f_n, g_n, 0.0, scheme)
    if not rep.stable:
        raise InadmissibleStateError(f"step {n}: linear solve unstable")
    dVdot, dpsi = rep.Vdot, rep.psi
    dV = raw_unknown(dVdot, dpsi, base_h)
    V1, psi1 = st.V + dV, st.psi + dpsi
    # error split
    base_n = problem.base(st.V, st.psi)
    base_s = problem.base(Vs, psis)
    N0 = problem.interior_map(st.V, st.psi)
    N1 = problem.interior_map(V1, psi1)
    Lp_n = apply_L_prime(base_n, dV, dpsi)
    Lp_s = apply_L_prime(base_s, dV, dpsi)
    Lp_h = apply_L_prime(base_h, dV, dpsi)
    Le_h = apply_Le_prime(base_h, dVdot)
    e_quad = N1 - N0 - Lp_n
    e_sub1 = Lp_n - Lp_s
    e_sub2 = Lp_s - Lp_h
    e_last = Lp_h - Le_h
    e_solve = Le_h - f_n
    e_n = e_quad + e_sub1 + e_sub2 + e_last + e_solve
    direct = N1 - N0 - Le_h
    split_defect = float(np.max(np.abs(e_quad + e_sub1 + e_sub2 + e_last - direct)))
    M0 = problem.boundary_map(st.V, st.psi)
    M1 = problem.boundary_map(V1, psi1)
    Bp_n = apply_B_prime(base_n, dV, dpsi)
    Bp_s = apply_B_prime(base_s, dV, dpsi)
    Bp_h = apply_B_prime(base_h, dV, dpsi)
    et_quad = M1 - M0 - Bp_n
    et_sub1 = Bp_n - Bp_s
    et_sub2 = Bp_s - Bp_h
    et_solve = apply_Be_prime(base_h, dVdot, dpsi) - g_n
    et_n = et_quad + et_sub1 + et_sub2 + (Bp_h - apply_Be_prime(base_h, dVdot, dpsi)) + et_solve
    # bookkeeping
    Fsum = st.Fsum + f_n
    Gsum = st.Gsum + g_n
    rec_int = float(np.max(np.abs(Fsum + smoother.smooth(st.E, theta) - smoother.smooth(
        problem.fa, theta))))
    rec_bdy = float(np.max(np.abs(Gsum + smoother.smooth(st.Et, theta, boundary=True)
                                  - smoother.smooth(problem.ga, theta, boundary=True))))
    new = IterationState(n + 1, V1, psi1, st.E + e_n, st.Et + et_n, Fsum, Gsum,
                         _cfg_theta0=cfg.theta0)
    new.residual_int = masked_norm(N1 - problem.fa, g)
    new.residual_bdy = masked_norm(M1 - problem.ga, g, boundary=True)
    dv_scale = _state_norm(dV, dpsi, g, 1)
    dv0 = _state_norm(dV, dpsi, g, 0)
    row = {
        "n": n, "theta": theta, "delta": delta,
        "residual_int": new.residual_int, "residual_bdy": new.residual_bdy,
        "e_quad": masked_norm(e_quad, g), "e_sub1": masked_norm(e_sub1, g),
        "e_sub2": masked_norm(e_sub2, g), "e_last": masked_norm(e_last, g),
    }
    for s in cfg.hyp_orders:
        row[f"hyp_ratio_{s}"] = _state_norm(dV, dpsi, g, s) * theta ** (cfg.alpha + 1 - s) / delta
    row.update({
        "e_solve": masked_norm(e_solve, g),
        "et_quad": masked_norm(et_quad, g, True), "et_sub1": masked_norm(et_sub1, g, True),
        "et_sub2_max": float(np.max(np.abs(et_sub2))),
        "split_defect": split_defect,
        "recurrence_int": rec_int, "recurrence_bdy": rec_bdy,
        "dV_h0": dv0, "dV_h1": dv_scale,
        "e_quad_ratio": masked_norm(e_quad, g) / (dv0 * dv_scale) if dv0 * dv_scale > 0 else 0.0,
        "modified_bas1b": float(max(np.max(np.abs(r)) for r in base_h.compatibility_residuals())),
    })
    return new, row


@dataclass
class NMResult:
    rows: list
    state: IterationState
    converged: bool
    initial_residual: tuple

    def csv(self):
        return trace_csv(self.rows)

    def final_fields(self, problem):
        return problem.total(self.state.V, self.state.psi)


def trace_csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def run(problem: NMProblem, cfg: NMConfig = NMConfig(), checkpoint=None):
    """Iterate until both residuals are below tolerance or ``max_steps``.

    Raises :class:`DivergenceError` if the total residual grows over
    ``divergence_window`` consecutive steps while above the round-off floor.
    """
    g = problem.grid
    smoother = SmoothingFamily(g)
    scheme = SchemeParams(cfl=cfg.cfl, check_cfl=True)
    st = initial_state(problem, cfg)
    r0 = (st.residual_int, st.residual_bdy)
    floor = cfg.floor_rel * (r0[0] + r0[1])
    rows = []
    growth = 0
    prev = r0[0] + r0[1]
    for _ in range(cfg.max_steps):
        if st.residual_int <= cfg.tol_interior and st.residual_bdy <= cfg.tol_boundary:
            return NMResult(rows, st, True, r0)
        st, row = iterate_step(problem, st, cfg, smoother, scheme)
        rows.append(row)
        if checkpoint is not None and cfg.checkpoint_every and st.n % cfg.checkpoint_every == 0:
            checkpoint(st)
        cur = st.residual_int + st.residual_bdy
        if not np.isfinite(cur):
            raise DivergenceError(f"non-finite residual at step {st.n}", rows)
        growth = growth + 1 if (cur > prev and cur > floor) else 0
        if growth >= cfg.divergence_window:
            raise DivergenceError(
                f"residual grew over {growth} consecutive steps (now {cur:.3g})", rows)
        prev = cur
    done = st.residual_int <= cfg.tol_interior and st.residual_bdy <= cfg.tol_boundary
    return NMResult(rows, st, done, r0)


def schedule_sum(theta0, steps, s, alpha):
    """Partial sum of ``Delta_n theta_n^{s - alpha - 2}`` over the run window."""
    n = np.arange(steps)
    th, de = schedule(theta0, n)
    return float(np.sum(de * th ** (s - alpha - 2)))
