import numpy as np
import pytest

from fbmhd import compat as cp
from fbmhd.grid import SlabGrid

UBAR = np.array([0.0, 0, 0, 0, 0, 0.5, 0, 0])
GRID = SlabGrid(12, 8, 8, 5, t_final=0.2)


@pytest.fixture(scope="module")
def data():
    from fbmhd.thermo import ThermoModel

    eos = ThermoModel(p_inf=1.0)
    U0, jet, hist = cp.perturbed_equilibrium(GRID, eos, UBAR, 1e-3, seed=5)
    return eos, U0, jet, hist


def test_equilibrium_jets_vanish(liquid):
    eq = np.broadcast_to(UBAR[:, None, None, None], (8,) + GRID.shape[1:])
    jet = cp.time_derivatives(eq, np.zeros(GRID.bshape[1:]), GRID, liquid, 4, UBAR)
    assert all(not np.any(u) for u in jet.U) and all(not np.any(p) for p in jet.phi)
    assert max(cp.residual_norms(jet)) == 0.0


def test_compatible_data(data):
    _, _, jet, hist = data
    assert jet.order == 4
    assert max(cp.residual_norms(jet)) <= 1e-11
    assert hist[-1] < hist[0]


def test_first_derivative_matches_dense_solve(data):
    eos, U0, jet, _ = data
    direct = cp.first_derivative_direct(U0, jet.phi[0], GRID, eos)
    assert np.max(np.abs(jet.U[1] - direct)) < 1e-15


def test_jets_match_marching_oracle(data):
    eos, U0, jet, _ = data
    errs = []
    for tau in (4e-2, 2e-2):
        s = cp.march_oracle(U0, jet.phi[0], GRID, eos, tau, 2)
        U, phi = cp.oracle_derivatives(s, tau, 3)
        errs.append([max(np.max(np.abs(U[j] - jet.U[j])), np.max(np.abs(phi[j] - jet.phi[j])))
                     for j in (1, 2, 3)])
    ratio = np.array(errs[0]) / np.array(errs[1])
    assert np.all(ratio > 3.0)


def test_incompatibility_reported_at_first_order(data):
    eos, U0, jet, _ = data
    for jstar in range(5):
        comp = 0 if jstar % 2 == 0 else 1
        node = 0 if jstar == 0 else jstar + 1
        Up = U0.copy()
        Up[comp, node] += 1e-3 * np.cos(GRID.x2)[:, None]
        pj = cp.time_derivatives(Up, jet.phi[0], GRID, eos, 4, jet.Ubar)
        r = cp.residual_norms(pj)
        assert next(j for j, v in enumerate(r) if v > 1e-8) == jstar
        with pytest.raises(cp.IncompatibleDataError) as exc:
            cp.build_approximate_solution(pj, GRID)
        assert exc.value.order == jstar


def test_approximate_solution_restricts_to_data(data):
    eos, U0, jet, _ = data
    ap = cp.build_approximate_solution(jet, GRID)
    l0 = GRID.n_past
    assert np.array_equal(ap.U[:, l0], U0) and np.array_equal(ap.phi[l0], jet.phi[0])
    fa = cp.forcing_fa(ap, GRID, eos)
    assert not np.any(fa[:, :l0 + 1])


def test_approximate_solution_time_derivative():
    from fbmhd.thermo import ThermoModel

    eos = ThermoModel(p_inf=1.0)
    g = SlabGrid(12, 8, 8, 41, t_final=0.2, n_past=4)
    _, jet, _ = cp.perturbed_equilibrium(g, eos, UBAR, 1e-3, seed=5)
    ap = cp.build_approximate_solution(jet, g)
    l0 = g.n_past
    d1 = (ap.U[:, l0 + 1] - ap.U[:, l0 - 1]) / (2 * g.dt)
    assert np.max(np.abs(d1 - jet.U[1])) < 1e-3 * np.max(np.abs(jet.U[1])) + 1e-12


def test_time_cutoff():
    tt = np.linspace(-3, 3, 601)
    k = cp.time_cutoff(tt, 1.0)
    assert np.all(k[np.abs(tt) <= 1] == 1) and np.all(k[np.abs(tt) >= 2] == 0)
    np.testing.assert_allclose(k, cp.time_cutoff(-tt, 1.0), atol=0)


def test_input_validation(liquid):
    eq = np.broadcast_to(UBAR[:, None, None, None], (8,) + GRID.shape[1:])
    with pytest.raises(ValueError):
        cp.time_derivatives(eq, np.zeros(GRID.bshape[1:]), GRID, liquid, 5)
    with pytest.raises(ValueError):
        cp.time_derivatives(eq, np.full(GRID.bshape[1:], 0.3), GRID, liquid, 2)
    with pytest.raises(ValueError):
        cp.time_derivatives(eq[:, :-1], np.zeros(GRID.bshape[1:]), GRID, liquid, 2)


def test_initial_size_positive(data):
    _, _, jet, _ = data
    assert cp.initial_size(jet) > 0
