"""Pipelines behind the command-line subcommands.

Every pipeline takes a validated :class:`~fbmhd.config.ScenarioConfig` and
returns an :class:`Outcome`: named pass/fail checks, CSV artifacts and
optional field dumps.  Nothing is written here; the caller decides.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import compat as cp
from . import nashmoser as nm
from . import system as sy
from . import verify as vf
from .config import ScenarioConfig
from .fieldio import boundary_spacing, read_field, slab_spacing
from .grid import SlabGrid, chi
from .linearized import BasicState
from .solver import (SchemeParams, adjoint_identity_check, energy_csv, energy_report,
                     solve_regularized)

THETAS = (1e-2, 1e-3, 1e-4, 1e-5)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: str

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": _json_num(self.value),
                "limit": self.limit}


@dataclass
class Outcome:
    checks: list = field(default_factory=list)
    csv: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def add(self, name, passed, value, limit):
        self.checks.append(Check(name, bool(passed), float(value), limit))

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


def _json_num(x):
    x = float(x)
    return x if np.isfinite(x) else repr(x)


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _flat_base(cfg: ScenarioConfig, grid: SlabGrid, eos):
    U = np.broadcast_to(cfg.state_vector()[:, None, None, None, None],
                        (8,) + grid.shape).copy()
    return BasicState(grid, U, grid.bzeros(), eos, cfg.surface_tension)


# ---------------------------------------------------------------------------


def check_operators(cfg: ScenarioConfig) -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    eos = cfg.eos()
    grid = cfg.grid()
    out = Outcome()
    U = vf.random_admissible_states(rng, int(cfg["operators.samples"]), eos)
    ms = vf.matrix_structure(U, eos, rng)
    out.add("matrices_symmetric", max(ms["asymmetry"].values()) <= 1e-12,
            max(ms["asymmetry"].values()), "<= 1e-12")
    out.add("A0_positive_definite", ms["min_eig_A0"] > 0, ms["min_eig_A0"], "> 0")
    out.add("symbol_real_spectrum", ms["max_imag_symbol"] <= 1e-8, ms["max_imag_symbol"],
            "<= 1e-8")
    worst_bs = worst_raw = 0.0
    slopes_a, slopes_b1, slopes_b2 = [], [], []
    h = max(grid.h1, grid.h2, grid.h3, grid.dt)
    for _ in range(int(cfg["operators.cases"])):
        base, _ = vf.compatible_base(rng, grid, eos)
        base = BasicState(grid, base.U, base.phi, eos, cfg.surface_tension)
        worst_bs = max(worst_bs, vf.boundary_structure_defect(base)[0])
        V, psi = vf.random_perturbation(rng, grid)
        worst_raw = max(worst_raw, vf.effective_vs_raw(base, V, psi))
        slopes_b1.append(vf.log_slope(THETAS, vf.boundary_first_remainders(base, V, psi, THETAS)))
        pair2 = vf.random_perturbation(rng, grid)
        th2 = (1e-1, 3e-2, 1e-2, 3e-3)
        slopes_b2.append(vf.log_slope(th2, vf.boundary_second_remainders(
            base, (V, psi), pair2, th2)))
        slopes_a.append(vf.log_slope(THETAS, vf.alinhac_remainders(rng, eos, THETAS)))
    out.add("boundary_matrix_structure", worst_bs <= 10 * h**2, worst_bs, f"<= {10 * h**2:.4g}")
    out.add("effective_equals_raw_boundary", worst_raw <= 1e-12, worst_raw, "<= 1e-12")
    out.add("boundary_first_variation_slope", all(abs(s - 1) <= 0.1 for s in slopes_b1),
            min(slopes_b1, key=lambda s: -abs(s - 1)), "1.0 +- 0.1")
    out.add("boundary_second_variation_slope", all(abs(s - 1) <= 0.2 for s in slopes_b2),
            min(slopes_b2, key=lambda s: -abs(s - 1)), "1.0 +- 0.2")
    out.add("alinhac_remainder_slope", all(abs(s - 2) <= 0.2 for s in slopes_a),
            min(slopes_a, key=lambda s: -abs(s - 2)), "2.0 +- 0.2")
    flat = float(np.max(np.abs(sy.mean_curvature(grid.bzeros(), grid))))
    out.add("curvature_flat_zero", flat == 0.0, flat, "== 0")
    sizes = (8, 16, 32)
    errs = vf.paraboloid_patch_errors(sizes)
    order = -vf.log_slope(sizes, errs)
    out.add("curvature_paraboloid_order", abs(order - 2) <= 0.2, order, "2.0 +- 0.2")
    out.csv["checks.csv"] = _table(["name", "passed", "value", "limit"],
                                   [(c.name, int(c.passed), c.value, c.limit) for c in out.checks])
    return out


# ---------------------------------------------------------------------------


def _initial_data(cfg: ScenarioConfig, grid, eos, m):
    Ubar = cfg.state_vector()
    pU, pphi = cfg["data.U0"], cfg["data.phi0"]
    if pU or pphi:
        if not (pU and pphi):
            raise ValueError("data.U0 and data.phi0 must be given together")
        U0 = read_field(pU)[0]
        phi0 = read_field(pphi)[0][0]
        U0, jet, hist = cp.make_compatible(U0, phi0, grid, eos, m, cfg.surface_tension, Ubar,
                                           tol=float(cfg["compat.tol"]))
        return U0, jet, hist
    return cp.perturbed_equilibrium(grid, eos, Ubar, float(cfg["state.amplitude"]), cfg.seed,
                                    m=m, tension=cfg.surface_tension)


def compat_check(cfg: ScenarioConfig) -> Outcome:
    eos = cfg.eos()
    grid = cfg.grid()
    m = int(cfg["compat.order"])
    tol = float(cfg["compat.tol"])
    out = Outcome()
    U0, jet, hist = _initial_data(cfg, grid, eos, m)
    res = cp.residual_norms(jet)
    out.add("compatible_up_to_order", max(res) <= tol, max(res), f"<= {tol:g}")
    Ubar = cfg.state_vector()
    eq = np.broadcast_to(Ubar[:, None, None, None], U0.shape)
    ejet = cp.time_derivatives(eq, np.zeros(grid.bshape[1:]), grid, eos, m, Ubar,
                               cfg.surface_tension)
    ez = max(float(np.max(np.abs(u))) for u in ejet.U + ejet.phi)
    out.add("equilibrium_jets_zero", ez == 0.0, ez, "== 0")
    first_hits = []
    for jstar in range(m + 1):
        comp = 0 if jstar % 2 == 0 else 1
        node = 0 if jstar == 0 else jstar + 1
        Up = U0.copy()
        Up[comp, node] += 1e-3 * np.cos(grid.x2)[:, None]
        pj = cp.time_derivatives(Up, jet.phi[0], grid, eos, m, jet.Ubar, cfg.surface_tension)
        r = cp.residual_norms(pj)
        hit = next((j for j, v in enumerate(r) if v > 1e3 * tol), -1)
        first_hits.append(hit)
    ok = first_hits == list(range(m + 1))
    out.add("incompatibility_detected_at_order", ok, sum(h == j for j, h in
                                                        enumerate(first_hits)), f"== {m + 1}")
    approx = cp.build_approximate_solution(jet, grid, tol=max(1e-8, tol))
    fa = cp.forcing_fa(approx, grid, eos)
    past = float(np.max(np.abs(fa[:, :grid.n_past + 1])))
    out.add("forcing_vanishes_in_past", past == 0.0, past, "== 0")
    t0 = grid.n_past
    same = bool(np.array_equal(approx.U[:, t0], jet.state(0))
                and np.array_equal(approx.phi[t0], jet.phi[0]))
    out.add("approximate_solution_restricts_to_data", same, float(not same), "== 0")
    M0 = cp.initial_size(jet)
    out.add("initial_size_finite", np.isfinite(M0), M0, "finite")
    out.info["iterations"] = len(hist) - 1
    rows = [(j, res[j], float(np.max(np.abs(jet.U[j]))), float(np.max(np.abs(jet.phi[j]))))
            for j in range(m + 1)]
    out.csv["compat.csv"] = _table(["order", "residual", "jet_U_max", "jet_phi_max"], rows)
    out.fields["U0"] = (U0, slab_spacing(grid)[1:])
    out.fields["phi0"] = (jet.phi[0], boundary_spacing(grid)[1:])
    out.fields["Ua"] = (approx.U, slab_spacing(grid))
    out.fields["phia"] = (approx.phi, boundary_spacing(grid))
    out.fields["fa"] = (fa, slab_spacing(grid))
    return out


# ---------------------------------------------------------------------------


def linear_forcing(cfg: ScenarioConfig, grid: SlabGrid):
    """Smooth source vanishing in the past: ``t^2 chi(x1) e^{-x1}`` times tangential modes."""
    kind = cfg["linear.forcing"]
    amp = float(cfg["linear.forcing_amplitude"])
    f = grid.zeros(8)
    if kind == "none" or amp == 0:
        return f
    T, X1, X2, X3 = grid.mesh()
    env = amp * np.clip(T, 0.0, None) ** 2 * chi(X1) * np.exp(-X1)
    if kind == "mode":
        k2, k3 = cfg["linear.mode"]
        wave = np.cos(k2 * X2 + k3 * X3)
        for c, w in ((0, 1.0), (1, 0.5), (2, 0.25)):
            f[c] = w * env * wave
    else:
        rng = np.random.default_rng(cfg.seed)
        for c in range(8):
            k = rng.integers(-2, 3, size=2)
            f[c] = rng.normal() * env * np.cos(k[0] * X2 + k[1] * X3 + rng.uniform(0, 2 * np.pi))
    f[:, :grid.n_past] = 0.0
    return f


def solve_linear(cfg: ScenarioConfig) -> Outcome:
    eos = cfg.eos()
    grid = cfg.grid()
    base = _flat_base(cfg, grid, eos)
    f = linear_forcing(cfg, grid)
    scheme = SchemeParams(cfl=float(cfg["linear.cfl"]), bilaplacian=cfg["linear.bilaplacian"])
    out = Outcome()
    reports = {}
    for eps in cfg["linear.eps"]:
        rep = solve_regularized(base, f, None, float(eps), scheme)
        reports[float(eps)] = rep
        out.csv[f"energy_eps_{float(eps):g}.csv"] = energy_csv(rep)
        lhs = rep.energy["lhs"]
        bound = float(cfg["linear.energy_bound"]) * max(rep.source_norm, 1e-300)
        top = float(np.max(lhs))
        out.add(f"energy_finite_eps_{float(eps):g}", rep.stable and np.all(np.isfinite(lhs)),
                top, "finite")
        out.add(f"energy_bounded_eps_{float(eps):g}", top <= bound, top, f"<= {bound:.4g}")
        smin = float(np.min(rep.energy["surface_energy"]))
        out.add(f"surface_energy_nonnegative_eps_{float(eps):g}", smin >= 0.0, smin, ">= 0")
        out.fields[f"W_eps_{float(eps):g}"] = (rep.W, slab_spacing(grid))
        out.fields[f"psi_eps_{float(eps):g}"] = (rep.psi, boundary_spacing(grid))
    positive = sorted(e for e in reports if e > 0)
    if len(positive) >= 2:
        tops = [float(np.max(reports[e].energy["lhs"])) for e in positive]
        spread = max(tops) / min(tops) if min(tops) > 0 else (1.0 if max(tops) == 0 else np.inf)
        out.add("energy_uniform_in_eps", spread < 2.0, spread, "< 2")
    if 0.0 in reports and len(positive) >= 2:
        ref = reports[0.0]
        diffs = [np.sqrt(grid.integrate(np.sum((reports[e].W - ref.W) ** 2, axis=0))
                         + grid.integrate_boundary((reports[e].psi - ref.psi) ** 2))
                 for e in positive]
        if min(diffs) > 0:
            slope = vf.log_slope(positive, diffs)
            out.add("eps_limit_slope", abs(slope - 1) <= 0.2, slope, "1.0 +- 0.2")
            out.csv["eps_ladder.csv"] = _table(["eps", "difference"], zip(positive, diffs))
    rep = reports[min(reports)]
    rows = []
    for m in range(4):
        r = energy_report(rep, m)
        rows.append([m] + [r[k] for k in ("W_m_star", "psi_Hm", "f_m_star", "g_Hm1", "base_U",
                                           "base_phi", "lhs", "rhs", "C")])
    out.csv["tame.csv"] = _table(["m", "W_m_star", "psi_Hm", "f_m_star", "g_Hm1", "base_U",
                                  "base_phi", "lhs", "rhs", "C"], rows)
    return out


# ---------------------------------------------------------------------------


def dual_fields(seed, grid: SlabGrid):
    """Smooth random ``(W, W*)``: ``W`` vanishes at ``t <= 0`` and ``W*`` at
    ``t >= T``; both vanish past ``x1 = 2.5``.  The same seed gives the same
    continuum fields on every grid."""
    rng = np.random.default_rng(seed)
    T, X1, X2, X3 = grid.mesh()
    tf = grid.t_final
    W = grid.zeros(8)
    Ws = grid.zeros(8)
    for c in range(8):
        for F, win in ((W, np.clip(T, 0, None) ** 2), (Ws, np.clip(tf - T, 0, None) ** 2)):
            k = rng.integers(-2, 3, size=2)
            F[c] += rng.normal() * win * chi(X1) * np.cos(
                k[0] * X2 + k[1] * X3 + rng.uniform(0.3, 1.5) * X1 + rng.uniform(0, 2 * np.pi))
    W[:, :grid.n_past] = 0.0
    return W, Ws


def adjoint_defects(ms, grid: SlabGrid, eos, tension, seeds, eps):
    """Adjoint defects for each seed on ``grid`` and on its refinement."""
    out = []
    for g in (grid, grid.refined(2)):
        U, phi = ms.on_grid(g)
        base = BasicState(g, U, phi, eos, tension)
        out.append([adjoint_identity_check(base, *dual_fields(s, g), eps) for s in seeds])
    return out


def adjoint_check(cfg: ScenarioConfig) -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    eos = cfg.eos()
    grid = cfg.grid()
    eps = float(cfg["adjoint.eps"])
    out = Outcome()
    _, ms = vf.compatible_base(rng, grid, eos)
    seeds = [int(s) for s in rng.integers(0, 2**31, int(cfg["adjoint.pairs"]))]
    U, phi = ms.on_grid(grid)
    base = BasicState(grid, U, phi, eos, cfg.surface_tension)
    W, _ = dual_fields(seeds[0], grid)
    z = adjoint_identity_check(base, W, np.zeros_like(W), eps)["defect"]
    out.add("zero_dual_field_zero_defect", z == 0.0, z, "== 0")
    coarse, fine = adjoint_defects(ms, grid, eos, cfg.surface_tension, seeds, eps)
    ratios = [c["defect"] / f["defect"] if f["defect"] > 0 else np.inf
              for c, f in zip(coarse, fine)]
    lim = float(cfg["adjoint.min_ratio"])
    out.add("defect_refinement_ratio", min(ratios) >= lim, min(ratios), f">= {lim:g}")
    out.csv["adjoint.csv"] = _table(
        ["seed", "defect_h", "defect_h2", "relative_h", "relative_h2", "ratio"],
        [(s, c["defect"], f["defect"], c["relative"], f["relative"], r)
         for s, c, f, r in zip(seeds, coarse, fine, ratios)])
    return out


# ---------------------------------------------------------------------------


def nm_config(cfg: ScenarioConfig):
    s = cfg.section("nashmoser")
    return nm.NMConfig(theta0=float(s["theta0"]), alpha=float(s["alpha"]),
                       alpha_tilde=float(s["alpha_tilde"]), epsilon=float(s["epsilon"]),
                       max_steps=int(s["max_steps"]), tol_interior=float(s["tol_interior"]),
                       tol_boundary=float(s["tol_boundary"]),
                       hyp_orders=tuple(int(x) for x in s["hyp_orders"]),
                       checkpoint_every=int(s["checkpoint_every"]), cfl=float(s["cfl"]))


def run_nashmoser(cfg: ScenarioConfig) -> Outcome:
    eos = cfg.eos()
    grid = cfg.grid()
    ncfg = nm_config(cfg)
    out = Outcome()
    U0, jet, _ = _initial_data(cfg, grid, eos, cp.MAX_JET_ORDER)
    approx = cp.build_approximate_solution(jet, grid)
    problem = nm.NMProblem.from_approximate(approx, grid, eos, cfg.surface_tension)

    def checkpoint(st):
        out.fields[f"checkpoint_{st.n:03d}_V"] = (st.V.copy(), slab_spacing(grid))
        out.fields[f"checkpoint_{st.n:03d}_psi"] = (st.psi.copy(), boundary_spacing(grid))

    try:
        res = nm.run(problem, ncfg, checkpoint=checkpoint)
        rows, r0, state = res.rows, res.initial_residual, res.state
        diverged = ""
    except nm.DivergenceError as exc:
        rows, diverged = exc.trace, str(exc)
        r0 = None
        state = None
    out.csv["nm_trace.csv"] = nm.trace_csv(rows)
    out.add("no_divergence", not diverged, float(bool(diverged)), "== 0")
    if rows:
        if r0 is None:
            r0 = (rows[0]["residual_int"], rows[0]["residual_bdy"])
        ri = r0[0] / max(rows[-1]["residual_int"], 1e-300)
        rb = r0[1] / max(rows[-1]["residual_bdy"], 1e-300)
        lim = float(cfg["nashmoser.min_reduction"])
        if r0[0] > 0:
            out.add("interior_residual_reduction", ri >= lim, ri, f">= {lim:g}")
        if r0[1] > 0:
            out.add("boundary_residual_reduction", rb >= lim, rb, f">= {lim:g}")
        rec = max(max(r["recurrence_int"], r["recurrence_bdy"]) for r in rows)
        out.add("source_recurrence_exact", rec <= 1e-12, rec, "<= 1e-12")
        et = max(r["et_sub2_max"] for r in rows)
        out.add("boundary_substitution_error_zero", et <= 1e-12, et, "<= 1e-12")
        sd = max(r["split_defect"] for r in rows)
        out.add("error_split_identity", sd <= 1e-10, sd, "<= 1e-10")
    want = min(5, ncfg.max_steps)
    converged_early = state is not None and len(rows) < want
    out.add("steps_completed", len(rows) >= want or converged_early, len(rows), f">= {want}")
    if state is not None:
        Uf, phif = problem.total(state.V, state.psi)
        out.fields["U_final"] = (Uf, slab_spacing(grid))
        out.fields["phi_final"] = (phif, boundary_spacing(grid))
    return out


PIPELINES = {
    "check-operators": check_operators,
    "compat-check": compat_check,
    "solve-linear": solve_linear,
    "adjoint-check": adjoint_check,
    "run-nashmoser": run_nashmoser,
}
