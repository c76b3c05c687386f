import numpy as np
import pytest

from fbmhd import solver as so
from fbmhd.grid import SlabGrid, chi
from fbmhd.linearized import BasicState, apply_Be_prime
from fbmhd.scenarios import dual_fields

GRID = SlabGrid(13, 8, 8, 41, t_final=0.2)


def flat_base(liquid, grid=GRID):
    U = grid.zeros(8)
    U[5] = 0.5
    return BasicState(grid, U, grid.bzeros(), liquid)


def forcing(grid, k2=1, k3=0, comps=(0, 1, 2), seed=None):
    T, X1, X2, X3 = grid.mesh()
    env = np.clip(T, 0, None) ** 2 * chi(X1) * np.exp(-X1)
    f = grid.zeros(8)
    r = np.random.default_rng(seed)
    for c in comps:
        f[c] = (r.normal() if seed is not None else 1.0) * env * np.cos(k2 * X2 + k3 * X3 + c)
    f[:, :grid.n_past] = 0.0
    return f


@pytest.fixture(scope="module")
def base():
    from fbmhd.thermo import ThermoModel

    return flat_base(ThermoModel(p_inf=1.0))


def test_zero_data_zero_solution(base):
    rep = so.solve_regularized(base, GRID.zeros(8), eps=1e-3)
    assert not np.any(rep.Vdot) and not np.any(rep.psi)
    assert np.all(rep.energy["lhs"] == 0)


def test_linearity(base):
    f1, f2 = forcing(GRID, seed=1), forcing(GRID, 2, 1, comps=range(8), seed=2)
    a, b = 0.3, -2.0
    s = so.solve_regularized(base, a * f1 + b * f2).Vdot
    s1 = so.solve_regularized(base, f1).Vdot
    s2 = so.solve_regularized(base, f2).Vdot
    assert np.max(np.abs(s - (a * s1 + b * s2))) <= 1e-10 * np.max(np.abs(s))


def test_causality(base):
    f = forcing(GRID, seed=3)
    cut = GRID.n_past + 15
    f2 = f.copy()
    f2[:, cut:] *= -4.0
    a = so.solve_regularized(base, f)
    b = so.solve_regularized(base, f2)
    assert np.array_equal(a.Vdot[:, :cut + 1], b.Vdot[:, :cut + 1])
    assert np.array_equal(a.psi[:cut + 1], b.psi[:cut + 1])
    late = GRID.zeros(8)
    late[:, cut:] = f[:, cut:]
    c = so.solve_regularized(base, late)
    assert not np.any(c.Vdot[:, :cut + 1])


def test_mode_confinement(base):
    # a constant base decouples tangential Fourier modes
    f = forcing(GRID, 2, 1)
    rep = so.solve_regularized(base, f, eps=1e-3)
    hat = np.fft.fft2(rep.Vdot, axes=(-2, -1))
    mask = np.zeros((GRID.n2, GRID.n3), bool)
    mask[2, 1] = mask[-2, -1] = True
    inside = np.max(np.abs(hat[..., mask]))
    outside = np.max(np.abs(hat[..., ~mask]))
    assert inside > 0 and outside <= 1e-12 * inside


def test_deterministic(base):
    f = forcing(GRID, seed=4)
    a = so.solve_regularized(base, f, eps=1e-2)
    b = so.solve_regularized(base, f, eps=1e-2)
    assert a.Vdot.tobytes() == b.Vdot.tobytes()
    assert so.energy_csv(a) == so.energy_csv(b)


def test_lift_boundary_source_reproduces_g(base):
    T, X2, X3 = GRID.bmesh()
    g = np.stack([np.clip(T, 0, None) ** 2 * np.cos(X2) + 0 * X3,
                  np.clip(T, 0, None) ** 2 * np.sin(X3) + 0 * X2])
    vnat = so.lift_boundary_source(g, base)
    np.testing.assert_allclose(apply_Be_prime(base, vnat, GRID.bzeros()), g, atol=1e-12)
    bad = g.copy()
    bad[:, 0] = 1.0
    with pytest.raises(ValueError):
        so.lift_boundary_source(bad, base)


def test_rejects_bad_inputs(base):
    with pytest.raises(ValueError):
        so.solve_regularized(base, GRID.zeros(8), eps=-1.0)
    f = GRID.zeros(8)
    f[:, 0] = 1.0
    with pytest.raises(ValueError, match="past"):
        so.solve_regularized(base, f)


def test_cfl_violation(liquid):
    coarse = SlabGrid(13, 8, 8, 3, t_final=1.0)
    with pytest.raises(so.CFLError) as exc:
        so.solve_regularized(flat_base(liquid, coarse), coarse.zeros(8))
    assert exc.value.dt_required < coarse.dt


def test_regularization_converges(base):
    f = forcing(GRID)
    sols = {e: so.solve_regularized(base, f, eps=e) for e in (1e-2, 1e-3, 1e-4, 0.0)}
    assert all(r.stable for r in sols.values())
    d = [np.max(np.abs(sols[e].W - sols[0.0].W)) for e in (1e-2, 1e-3, 1e-4)]
    assert d[0] > d[1] > d[2]
    assert np.log10(d[0] / d[2]) / 2 == pytest.approx(1.0, abs=0.2)


def test_energy_report_zero_and_range(base):
    rep = so.solve_regularized(base, GRID.zeros(8))
    r = so.energy_report(rep, 1)
    assert r["lhs"] == 0 and r["C"] == 0
    with pytest.raises(ValueError):
        so.energy_report(rep, 4)


def test_energy_report_order_one_matches_trace(base):
    rep = so.solve_regularized(base, forcing(GRID))
    r = so.energy_report(rep, 1)
    assert r["W_m_star"] == pytest.approx(rep.energy["W_h1star"][-1], rel=1e-12)
    assert r["C"] > 0 and np.isfinite(r["C"])


def test_energy_constant_stable_under_refinement(liquid):
    cs = []
    for g in (SlabGrid(9, 8, 8, 21, t_final=0.2), SlabGrid(17, 16, 16, 81, t_final=0.2)):
        rep = so.solve_regularized(flat_base(liquid, g), forcing(g))
        cs.append([so.energy_report(rep, m)["C"] for m in (0, 1, 2)])
    ratio = np.array(cs[1]) / np.array(cs[0])
    assert np.all((ratio > 1 / 3) & (ratio < 3))


def test_adjoint_trivial_pairs(base):
    W, Ws = dual_fields(5, GRID)
    z = so.adjoint_identity_check(base, W, np.zeros_like(Ws), eps=1e-2)
    assert z["lhs"] == 0 and z["rhs"] == 0 and z["defect"] == 0


def test_adjoint_exact_on_constant_base(liquid):
    g = SlabGrid(13, 12, 12, 13, t_final=0.5)
    r = so.adjoint_identity_check(flat_base(liquid, g), *dual_fields(6, g), eps=1e-2)
    assert r["relative"] < 1e-12


def test_adjoint_defect_shrinks(liquid):
    from fbmhd import verify as vf

    _, ms = vf.compatible_base(np.random.default_rng(9), SlabGrid(9, 8, 8, 9), liquid)
    out = []
    for g in (SlabGrid(13, 12, 12, 13, t_final=0.5), SlabGrid(25, 24, 24, 25, t_final=0.5)):
        b = BasicState(g, *ms.on_grid(g), liquid)
        out.append(so.adjoint_identity_check(b, *dual_fields(6, g), eps=1e-2))
    assert out[0]["defect"] / out[1]["defect"] > 3
