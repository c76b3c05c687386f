import numpy as np
import pytest

from fbmhd import compat as cp
from fbmhd import nashmoser as nm
from fbmhd.grid import SlabGrid
from fbmhd.smoothing import SmoothingFamily

UBAR = np.array([0.0, 0, 0, 0, 0, 0.5, 0, 0])
GRID = SlabGrid(12, 8, 8, 9, t_final=0.3)


def make_problem(eos, amplitude=1e-3, grid=GRID):
    _, jet, _ = cp.perturbed_equilibrium(grid, eos, UBAR, amplitude, seed=1)
    ap = cp.build_approximate_solution(jet, grid)
    return nm.NMProblem.from_approximate(ap, grid, eos, 1.0)


@pytest.fixture(scope="module")
def problem():
    from fbmhd.thermo import ThermoModel

    return make_problem(ThermoModel(p_inf=1.0))


@pytest.fixture(scope="module")
def result(problem):
    seen = []
    res = nm.run(problem, nm.NMConfig(max_steps=4, checkpoint_every=2), checkpoint=lambda s: seen.append(s.n))
    return res, seen


def test_config_validation():
    with pytest.raises(ValueError):
        nm.NMConfig(theta0=0.5)
    with pytest.raises(ValueError):
        nm.NMConfig(alpha=12, alpha_tilde=10)
    with pytest.raises(ValueError):
        nm.NMConfig(max_steps=-1)


def test_masks():
    m = nm.interior_mask(GRID)
    assert not m[:, :GRID.n_past].any() and not m[:, -1].any()
    assert not m[0, :, 0].any() and m[1, GRID.n_past, 0].all()
    b = nm.boundary_mask(GRID)
    assert b[:, GRID.n_past:-1].all() and not b[:, -1].any()


def test_masked_norm_of_constant():
    r = np.ones((8,) + GRID.shape)
    r[0, :, 0] = 1e9  # excluded row
    n_nodes = nm.interior_mask(GRID).sum()
    expect = np.sqrt(n_nodes * GRID.dt * GRID.h1 * GRID.h2 * GRID.h3)
    assert nm.masked_norm(r, GRID) == pytest.approx(expect)


def test_equilibrium_converges_immediately(liquid):
    problem = make_problem(liquid, amplitude=0.0)
    res = nm.run(problem, nm.NMConfig(max_steps=3))
    assert res.converged and res.rows == []


def test_residuals_decrease(result):
    res, _ = result
    r0i, r0b = res.initial_residual
    ri = [r["residual_int"] for r in res.rows]
    rb = [r["residual_bdy"] for r in res.rows]
    assert np.all(np.diff(ri) < 0) and np.all(np.diff(rb) < 0)
    assert r0i / ri[-1] > 1e4 and r0b / rb[-1] > 1e4


def test_bookkeeping_identities(result):
    res, _ = result
    for r in res.rows:
        assert r["recurrence_int"] <= 1e-12 and r["recurrence_bdy"] <= 1e-12
        assert r["et_sub2_max"] == 0.0
        assert r["split_defect"] <= 1e-12


def test_checkpoints(result):
    _, seen = result
    assert seen == [2, 4]


def test_trace_csv(result):
    res, _ = result
    text = res.csv()
    lines = text.strip().split("\n")
    assert len(lines) == len(res.rows) + 1
    assert lines[0].startswith("n,theta,delta,residual_int")


def test_modified_state_satisfies_constraints(problem, rng):
    g = problem.grid
    V = 1e-4 * rng.normal(size=(8,) + g.shape)
    psi = 1e-4 * rng.normal(size=g.bshape)
    V[:, :g.n_past] = 0
    psi[:g.n_past] = 0
    Vh, psih, _, _ = nm.modified_state(problem, V, psi, 4.0, SmoothingFamily(g))
    kin, mag = problem.base(Vh, psih).compatibility_residuals()
    assert np.max(np.abs(kin[g.n_past:])) < 1e-13
    assert np.max(np.abs(mag[g.n_past:])) < 1e-13


def test_divergence_detected(problem, monkeypatch):
    def growing(problem, st, cfg, smoother, scheme):
        new = nm.IterationState(st.n + 1, st.V, st.psi, st.E, st.Et, st.Fsum, st.Gsum)
        new.residual_int = st.residual_int * 2
        new.residual_bdy = st.residual_bdy * 2
        return new, {"n": st.n}

    monkeypatch.setattr(nm, "iterate_step", growing)
    with pytest.raises(nm.DivergenceError) as exc:
        nm.run(problem, nm.NMConfig(max_steps=10))
    assert len(exc.value.trace) == 3


def test_schedule_sum():
    a = nm.schedule_sum(4.0, 50, 2, 12.0)
    b = nm.schedule_sum(4.0, 100, 2, 12.0)
    assert 0 < a < b and b - a < 1e-10
