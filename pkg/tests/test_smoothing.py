import numpy as np
import pytest

from fbmhd import smoothing as sm
from fbmhd import verify as vf
from fbmhd.grid import SlabGrid


def test_cutoff_symbol():
    r = np.linspace(0, 3, 301)
    c = sm.cutoff_symbol(r)
    assert np.all(c[r <= 1] == 1) and np.all(c[r >= 2] == 0)
    assert np.all(np.diff(c) <= 0)


@pytest.mark.parametrize("width", [8.0, 12.5, 30.0])
def test_kernel_moments(width):
    w = np.array(sm.one_sided_kernel(width))
    i = np.arange(len(w))
    assert np.sum(w) == pytest.approx(1.0, abs=1e-12)
    for p in range(1, sm.MOMENTS + 1):
        assert abs(np.sum(w * i**p)) < 1e-9 * width**p


def test_narrow_kernel_is_identity():
    assert sm.one_sided_kernel(0.5) == (1.0,)
    assert sm.one_sided_kernel(3.0) == (1.0,)


def test_kernel_reproduces_cubics():
    w = np.array(sm.one_sided_kernel(10.0))
    x = np.arange(60.0)
    u = 1 + 0.5 * x - 0.01 * x**2 + 1e-4 * x**3
    out = sm._apply_kernel(u, w, 0, causal=True)
    np.testing.assert_allclose(out[len(w):], u[len(w):], rtol=1e-10)


def test_causal_smoothing_preserves_zero_past(rng):
    g = SlabGrid(9, 16, 16, 200, t_final=1.0)
    S = sm.SmoothingFamily(g)
    start = g.n_past + 50
    u = rng.normal(size=g.bshape)
    u[:start] = 0.0
    for th in (1.0, 2.0, 4.0):
        assert len(S.time_kernel(th)) > 1 or th > 2
        out = S.smooth(u, th, boundary=True)
        assert not np.any(out[:start])


def test_theta_below_one_rejected():
    g = SlabGrid(9, 8, 8, 5)
    with pytest.raises(ValueError):
        sm.SmoothingFamily(g).smooth(g.bzeros(), 0.5, boundary=True)


def test_low_modes_untouched():
    g = SlabGrid(9, 16, 16, 5)
    _, X2, X3 = g.bmesh()
    u = np.cos(X2 + 2 * X3) + 0 * X2
    out = sm.SmoothingFamily(g).tangential(u, 3.0)
    np.testing.assert_allclose(out, u, atol=1e-13)
    assert np.max(np.abs(sm.SmoothingFamily(g).tangential(u, 1.0))) < 1e-13


def test_schedule():
    th, d = sm.schedule(4.0, np.arange(5))
    np.testing.assert_allclose(th, np.sqrt(16 + np.arange(5)))
    np.testing.assert_allclose(d, np.sqrt(17 + np.arange(5)) - th)


def test_tangential_sobolev_single_mode():
    g = SlabGrid(9, 16, 16, 5)
    _, X2, X3 = g.bmesh()
    u = (np.cos(3 * X2) + 0 * X3)[0]
    assert sm.tangential_sobolev(u, 1, g) == pytest.approx(
        np.sqrt(10 * g.tangential_extent**2 / 2), rel=1e-12)


@pytest.mark.parametrize("k,j", [(2, 0), (3, 1)])
def test_smoothing_exponents(k, j):
    g = SlabGrid(8, 64, 8, 8)
    grow, approx, deriv = vf.smoothing_exponents(g, [2, 4, 6, 8, 12, 16], k, j)
    assert grow == pytest.approx(k - j, abs=0.3)
    assert approx == pytest.approx(-abs(k - j), abs=0.3)
    assert deriv == pytest.approx(k - j - 1, abs=0.3)
