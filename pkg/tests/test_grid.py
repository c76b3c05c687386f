import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbmhd import grid as gr
from fbmhd.grid import SlabGrid


@pytest.mark.parametrize("alpha,w", [((0, 0, 0, 0, 0), 0), ((1, 0, 0, 0, 0), 1),
                                     ((0, 0, 0, 0, 1), 2), ((1, 1, 1, 1, 1), 6)])
def test_weight(alpha, w):
    assert gr.weight(alpha) == w


def test_weight_rejects_bad_index():
    with pytest.raises(ValueError):
        gr.weight((0, 0, -1, 0, 0))
    with pytest.raises(ValueError):
        gr.weight((0, 0, 0, 0))


def test_multi_indices_enumerates_by_weight():
    for m in range(4):
        got = gr.multi_indices(m)
        assert len(set(got)) == len(got)
        assert all(gr.weight(a) <= m for a in got)
    # weight 1: the four first derivatives that are not normal-direct
    assert len(gr.multi_indices(1)) == 5
    assert (0, 0, 0, 0, 1) in gr.multi_indices(2)


def test_chi_profile():
    x = np.linspace(0, 4, 4001)
    c, cp = gr.chi(x), gr.chi_prime(x)
    assert np.all(c[x <= 1.0] == 1.0)
    assert np.all(c[x >= 2.5] == 0.0)
    assert np.max(np.abs(cp)) <= 0.8 + 1e-12
    assert np.all(np.diff(c) <= 1e-15)
    fd = np.gradient(c, x)
    assert np.max(np.abs(fd - cp)) < 1e-3
    assert np.max(np.abs(np.gradient(cp, x) - gr.chi_second(x))) < 5e-2


def test_sigma_profile():
    x = np.linspace(0, 2, 20001)
    s, sp = gr.sigma(x), gr.sigma_prime(x)
    np.testing.assert_array_equal(s[x <= 0.5], x[x <= 0.5])
    assert np.all(s[x >= 1.0] == 1.0)
    assert np.all(np.diff(s) >= 0)
    assert np.max(np.abs(np.gradient(s, x) - sp)) < 1e-3
    # derivative continuous across both joins
    assert gr.sigma_prime(0.5) == pytest.approx(1.0)
    assert gr.sigma_prime(1.0) == pytest.approx(0.0, abs=1e-12)


def test_diff_exact_on_quadratics():
    x = np.linspace(0, 1, 11)
    u = 3 * x**2 - x + 2
    np.testing.assert_allclose(gr.diff(u, 0, x[1] - x[0]), 6 * x - 1, atol=1e-12)


def test_diff_second_order_periodic():
    errs = []
    for n in (16, 32, 64):
        x = np.arange(n) * 2 * np.pi / n
        errs.append(np.max(np.abs(gr.diff(np.sin(x), 0, x[1], periodic=True) - np.cos(x))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2) < 0.1)


def test_refined_halves_spacings():
    g = SlabGrid(9, 8, 8, 5, t_final=0.4)
    r = g.refined()
    assert r.h1 == pytest.approx(g.h1 / 2)
    assert r.h2 == pytest.approx(g.h2 / 2)
    assert r.dt == pytest.approx(g.dt / 2)
    assert r.t_final == g.t_final


def test_integrate_constant():
    g = SlabGrid(9, 8, 8, 5, t_final=0.4)
    vol = g.t_final * g.x1_extent * g.tangential_extent**2
    assert g.integrate(np.ones(g.shape)) == pytest.approx(vol)
    # pre-history levels carry no weight
    assert np.all(g.time_weights()[:g.n_past] == 0)


def test_hstar_of_constant_is_volume_norm():
    g = SlabGrid(9, 8, 8, 5, t_final=0.4)
    vol = g.t_final * g.x1_extent * g.tangential_extent**2
    u = np.full(g.shape, 2.0)
    for m in range(4):
        assert gr.hstar_norm(u, m, g) == pytest.approx(2.0 * np.sqrt(vol))


def test_hstar_order_cap():
    g = SlabGrid(9, 8, 8, 5)
    with pytest.raises(ValueError):
        gr.hstar_norm(g.zeros(), 5, g)
    with pytest.raises(ValueError):
        gr.dstar_apply(g.zeros(), (0, 0, 0, 0, 2), g, max_order=3)


def test_dstar_conormal_vanishes_at_boundary():
    g = SlabGrid(17, 8, 8, 5)
    T, X1, X2, X3 = g.mesh()
    u = np.sin(X1) + 0 * (T + X2 + X3)
    du = gr.dstar_apply(u, (0, 1, 0, 0, 0), g)
    assert np.max(np.abs(du[:, 0])) == 0.0
    np.testing.assert_allclose(du[:, -1], g.d(u, 1)[:, -1])


def test_boundary_sobolev_single_mode():
    g = SlabGrid(9, 16, 16, 5, t_final=0.5)
    T, X2, X3 = g.bmesh()
    psi = 0.3 * np.cos(2 * X2) + 0 * (T + X3)
    for s in range(3):
        expect = np.sqrt(g.t_final * 5.0**s * 0.09 * g.tangential_extent**2 / 2)
        assert gr.boundary_sobolev_norm(psi, s, g) == pytest.approx(expect, rel=1e-12)


def test_lift_flat_and_caps():
    g = SlabGrid(13, 8, 8, 5)
    lf = gr.lift(g.bzeros(), g)
    assert np.all(lf.dPhi[1] == 1.0) and np.all(lf.dPhi[[0, 2, 3]] == 0.0)
    with pytest.raises(gr.DegenerateLiftError):
        gr.lift(np.full(g.bshape, 0.6), g)


def test_lift_trace_reproduces_interface(rng):
    g = SlabGrid(13, 8, 8, 5)
    phi = 0.1 * rng.normal(size=g.bshape)
    lf = gr.lift(phi, g)
    np.testing.assert_array_equal(lf.trace(), phi)
    assert np.all(lf.Psi[:, g.x1 >= 2.5] == 0.0)


def test_partial_phi_recovers_physical_coordinate():
    # exact lift derivatives against stencils applied to Phi; the cut-off has
    # joints where the stencil error is only first order, so bound by h
    for n in (17, 33, 129):
        g = SlabGrid(n, 8, 8, 5)
        T, X2, X3 = g.bmesh()
        lf = gr.lift(0.1 * np.sin(X2 + X3 + T), g)
        e = np.max(np.abs(gr.partial_phi(lf.Phi, lf, 1) - 1.0))
        for idx in ("t", 2, 3):
            e = max(e, np.max(np.abs(gr.partial_phi(lf.Phi, lf, idx))))
        assert e < 0.1 * g.h1
    with pytest.raises(ValueError):
        gr.partial_phi(lf.Phi, lf, 4)


def test_grid_mismatch_detected():
    g = SlabGrid(9, 8, 8, 5)
    with pytest.raises(ValueError, match="grid mismatch"):
        g.d(np.zeros((3, 3, 3, 3)), 1)


_g = SlabGrid(9, 8, 8, 5)


@settings(max_examples=25, deadline=None)
@given(st.one_of(st.just(0.0), st.floats(1e-6, 5), st.floats(-5, -1e-6)), st.integers(0, 2**31 - 1))
def test_hstar_is_a_norm(a, seed):
    r = np.random.default_rng(seed)
    u, v = r.normal(size=_g.shape), r.normal(size=_g.shape)
    nu = gr.hstar_norm(u, 1, _g)
    assert gr.hstar_norm(a * u, 1, _g) == pytest.approx(abs(a) * nu, rel=1e-12)
    assert gr.hstar_norm(u + v, 1, _g) <= nu + gr.hstar_norm(v, 1, _g) + 1e-12
