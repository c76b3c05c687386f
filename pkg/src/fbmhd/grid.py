"""Slab discretization, cut-off profiles, the interface lift and the weighted
anisotropic calculus.

Slab fields carry their space-time axes last, ``(..., nt_total, n1, n2, n3)``;
boundary fields are ``(..., nt_total, n2, n3)``.  The time axis starts with
``n_past`` pre-history levels at negative times, so functions vanishing in the
past are stored with zeros there.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# ---------------------------------------------------------------------------
# grid and stencils


def diff(u, axis, h, periodic=False):
    """Second-order first derivative along ``axis``.

    Centered in the interior; periodic wrap or one-sided second order at the
    two ends.
    """
    u = np.asarray(u, dtype=float)
    if periodic:
        return (np.roll(u, -1, axis) - np.roll(u, 1, axis)) / (2.0 * h)
    n = u.shape[axis]
    if n < 3:
        raise ValueError("need at least three points for the one-sided stencil")
    u = np.moveaxis(u, axis, 0)
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    out[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def trapezoid_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class SlabGrid:
    """Truncated half-space ``[0, X1] x [0, L)^2`` over ``[0, T]``.

    ``nt`` counts the levels on ``[0, T]``; ``n_past`` extra levels sit at
    ``-dt, -2 dt, ...`` before them.
    """

    n1: int
    n2: int
    n3: int
    nt: int
    x1_extent: float = 4.0
    tangential_extent: float = 2.0 * np.pi
    t_final: float = 1.0
    n_past: int = 2

    def __post_init__(self):
        if self.n1 < 8:
            raise ValueError(f"grid.n1 must be at least 8, got {self.n1}")
        if self.n2 < 4 or self.n3 < 4:
            raise ValueError("grid.n2 and grid.n3 must be at least 4")
        if self.nt < 3:
            raise ValueError("grid.nt must be at least 3")
        if self.x1_extent < 2.0:
            raise ValueError("grid.x1_extent must be at least 2")
        if not (self.tangential_extent > 0 and self.t_final > 0):
            raise ValueError("extents must be positive")
        if self.n_past < 1:
            raise ValueError("n_past must be at least 1")

    # spacings and coordinates
    @property
    def h1(self):
        return self.x1_extent / (self.n1 - 1)

    @property
    def h2(self):
        return self.tangential_extent / self.n2

    @property
    def h3(self):
        return self.tangential_extent / self.n3

    @property
    def dt(self):
        return self.t_final / (self.nt - 1)

    @property
    def nt_total(self):
        return self.nt + self.n_past

    @property
    def shape(self):
        return (self.nt_total, self.n1, self.n2, self.n3)

    @property
    def bshape(self):
        return (self.nt_total, self.n2, self.n3)

    @cached_property
    def t(self):
        return (np.arange(self.nt_total) - self.n_past) * self.dt

    @cached_property
    def x1(self):
        return np.arange(self.n1) * self.h1

    @cached_property
    def x2(self):
        return np.arange(self.n2) * self.h2

    @cached_property
    def x3(self):
        return np.arange(self.n3) * self.h3

    def mesh(self):
        """Broadcastable coordinate arrays ``(t, x1, x2, x3)`` for slab fields."""
        return (self.t[:, None, None, None], self.x1[None, :, None, None],
                self.x2[None, None, :, None], self.x3[None, None, None, :])

    def bmesh(self):
        return self.t[:, None, None], self.x2[None, :, None], self.x3[None, None, :]

    @property
    def spacing(self):
        return (self.dt, self.h1, self.h2, self.h3)

    def zeros(self, ncomp=None):
        return np.zeros(self.shape if ncomp is None else (ncomp,) + self.shape)

    def bzeros(self, ncomp=None):
        return np.zeros(self.bshape if ncomp is None else (ncomp,) + self.bshape)

    def check(self, u, boundary=False):
        want = self.bshape if boundary else self.shape
        if np.shape(u)[-len(want):] != want:
            raise ValueError(f"grid mismatch: field shape {np.shape(u)} vs grid {want}")
        return u

    # derivatives of slab fields, axis in {0: t, 1: x1, 2: x2, 3: x3}
    def d(self, u, axis):
        self.check(u)
        if axis == 0:
            return diff(u, -4, self.dt)
        if axis == 1:
            return diff(u, -3, self.h1)
        if axis == 2:
            return diff(u, -2, self.h2, periodic=True)
        if axis == 3:
            return diff(u, -1, self.h3, periodic=True)
        raise ValueError(f"axis must be 0..3, got {axis}")

    # derivatives restricted to one time level ``l`` of a slab field
    def d_level(self, u, axis, l):
        """Derivative at time index ``l`` of a full slab field (shape ``(..., n1, n2, n3)``)."""
        if axis == 0:
            n = self.nt_total
            if 0 < l < n - 1:
                return (u[..., l + 1, :, :, :] - u[..., l - 1, :, :, :]) / (2.0 * self.dt)
            if l == 0:
                return (-3.0 * u[..., 0, :, :, :] + 4.0 * u[..., 1, :, :, :]
                        - u[..., 2, :, :, :]) / (2.0 * self.dt)
            return (3.0 * u[..., n - 1, :, :, :] - 4.0 * u[..., n - 2, :, :, :]
                    + u[..., n - 3, :, :, :]) / (2.0 * self.dt)
        return self.d_space(u[..., l, :, :, :], axis)

    def d_space(self, ul, axis):
        """Spatial derivative of a single-level field ``(..., n1, n2, n3)``."""
        if axis == 1:
            return diff(ul, -3, self.h1)
        if axis == 2:
            return diff(ul, -2, self.h2, periodic=True)
        if axis == 3:
            return diff(ul, -1, self.h3, periodic=True)
        raise ValueError(f"spatial axis must be 1..3, got {axis}")

    def grad_level(self, u, l):
        return np.stack([self.d_level(u, a, l) for a in range(4)])

    def grad(self, u):
        """All four first derivatives stacked on a new leading axis."""
        return np.stack([self.d(u, a) for a in range(4)])

    # derivatives of boundary fields, axis in {0: t, 2: x2, 3: x3}
    def db(self, u, axis):
        self.check(u, boundary=True)
        if axis == 0:
            return diff(u, -3, self.dt)
        if axis == 2:
            return diff(u, -2, self.h2, periodic=True)
        if axis == 3:
            return diff(u, -1, self.h3, periodic=True)
        raise ValueError(f"boundary axis must be 0, 2 or 3, got {axis}")

    def discrete_wavenumbers(self):
        """Symbols ``sin(k h)/h`` of the centered tangential stencil."""
        k2 = 2 * np.pi * np.fft.fftfreq(self.n2, d=self.h2)
        k3 = 2 * np.pi * np.fft.fftfreq(self.n3, d=self.h3)
        return np.sin(k2 * self.h2) / self.h2, np.sin(k3 * self.h3) / self.h3

    # quadrature over t in [0, t_upto] (levels >= n_past)
    def time_weights(self, upto=None):
        last = self.nt_total - 1 if upto is None else int(upto)
        w = np.zeros(self.nt_total)
        if last > self.n_past:
            w[self.n_past:last + 1] = trapezoid_weights(last + 1 - self.n_past, self.dt)
        return w

    def integrate(self, density, upto=None):
        """Integral of a nonnegative slab density over ``[0, t] x slab``."""
        self.check(density)
        w1 = trapezoid_weights(self.n1, self.h1)
        s = np.sum(density, axis=(-2, -1)) * self.h2 * self.h3
        s = np.tensordot(s, w1, axes=([-1], [0]))
        return np.tensordot(s, self.time_weights(upto), axes=([-1], [0]))

    def integrate_levels(self, density):
        """Cumulative integral up to each time level."""
        self.check(density)
        w1 = trapezoid_weights(self.n1, self.h1)
        per_level = np.tensordot(np.sum(density, axis=(-2, -1)) * self.h2 * self.h3,
                                 w1, axes=([-1], [0]))
        return _cumulative_trapezoid(per_level, self.dt, self.n_past)

    def integrate_boundary(self, density, upto=None):
        self.check(density, boundary=True)
        s = np.sum(density, axis=(-2, -1)) * self.h2 * self.h3
        return np.tensordot(s, self.time_weights(upto), axes=([-1], [0]))

    def integrate_boundary_levels(self, density):
        self.check(density, boundary=True)
        s = np.sum(density, axis=(-2, -1)) * self.h2 * self.h3
        return _cumulative_trapezoid(s, self.dt, self.n_past)

    def refined(self, factor=2):
        """Grid with every spacing divided by ``factor``."""
        return SlabGrid((self.n1 - 1) * factor + 1, self.n2 * factor, self.n3 * factor,
                        (self.nt - 1) * factor + 1, self.x1_extent, self.tangential_extent,
                        self.t_final, self.n_past)


def _cumulative_trapezoid(values, dt, n_past):
    out = np.zeros_like(values)
    v = values[..., n_past:]
    acc = np.cumsum(0.5 * dt * (v[..., 1:] + v[..., :-1]), axis=-1)
    out[..., n_past + 1:] = acc
    return out


# ---------------------------------------------------------------------------
# cut-off profiles

CHI_FLAT_END = 1.0
CHI_SUPPORT_END = 2.5
CHI_RAMP = 0.25
CHI_SLOPE = 1.0 / (CHI_SUPPORT_END - CHI_FLAT_END - CHI_RAMP)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def _smooth_step(s):
    """C-infinity step from 0 at s <= 0 to 1 at s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def _smooth_step_prime(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 1)
    ss = np.where(inside, s, 0.5)
    a = np.exp(-1.0 / ss)
    b = np.exp(-1.0 / (1.0 - ss))
    da = a / ss**2
    db = -b / (1.0 - ss) ** 2
    val = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return np.where(inside, val, 0.0)


def _smooth_step_integral(s):
    """``int_0^s smooth_step`` by Gauss-Legendre; exact value 1/2 at s = 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    nodes = 0.5 * s[..., None] * (_GL_X + 1.0)
    return 0.5 * s * np.sum(_GL_W * _smooth_step(nodes), axis=-1)


def _plateau(x):
    a, b, r = CHI_FLAT_END, CHI_SUPPORT_END, CHI_RAMP
    return np.minimum(_smooth_step((x - a) / r), _smooth_step((b - x) / r))


def chi(x1):
    """Cut-off equal to 1 on [0, 1] and 0 beyond 2.5, with ``|chi'| <= 0.8``."""
    x = np.asarray(x1, dtype=float)
    a, b, r = CHI_FLAT_END, CHI_SUPPORT_END, CHI_RAMP
    up = r * _smooth_step_integral((x - a) / r)
    mid = 0.5 * r + np.clip(x - a - r, 0.0, b - a - 2 * r)
    down = 0.5 * r - r * _smooth_step_integral((b - x) / r)
    area = np.where(x <= a + r, up, np.where(x <= b - r, mid, (b - a - 2 * r) + 0.5 * r + down))
    out = 1.0 - CHI_SLOPE * np.where(x <= a, 0.0, np.where(x >= b, b - a - r, area))
    out = np.where(x >= b, 0.0, np.where(x <= a, 1.0, out))
    return out if out.ndim else float(out)


def chi_prime(x1):
    x = np.asarray(x1, dtype=float)
    out = -CHI_SLOPE * _plateau(x)
    return out if out.ndim else float(out)


def chi_second(x1):
    x = np.asarray(x1, dtype=float)
    a, b, r = CHI_FLAT_END, CHI_SUPPORT_END, CHI_RAMP
    up = _smooth_step_prime((x - a) / r) / r
    down = -_smooth_step_prime((b - x) / r) / r
    out = -CHI_SLOPE * np.where(x < 0.5 * (a + b), up, down)
    return out if out.ndim else float(out)


def sigma(x1):
    """Conormal weight: x1 below 1/2, 1 above 1, quintic Hermite blend between."""
    x = np.asarray(x1, dtype=float)
    s = np.clip((x - 0.5) / 0.5, 0.0, 1.0)
    blend = 0.5 + 0.5 * s + 2.0 * s**3 - 3.5 * s**4 + 1.5 * s**5
    out = np.where(x <= 0.5, x, np.where(x >= 1.0, 1.0, blend))
    return out if out.ndim else float(out)


def sigma_prime(x1):
    x = np.asarray(x1, dtype=float)
    s = np.clip((x - 0.5) / 0.5, 0.0, 1.0)
    blend = 2.0 * (0.5 + 6.0 * s**2 - 14.0 * s**3 + 7.5 * s**4)
    out = np.where(x <= 0.5, 1.0, np.where(x >= 1.0, 0.0, blend))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# interface lift


class DegenerateLiftError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LiftedInterface:
    """``Psi = chi(x1) phi`` and ``Phi = x1 + Psi`` with their first derivatives.

    ``dPhi`` stacks (d_t Phi, d_1 Phi, d_2 Phi, d_3 Phi) on axis 0.
    """

    grid: SlabGrid
    phi: np.ndarray
    Psi: np.ndarray
    Phi: np.ndarray
    dPhi: np.ndarray

    def trace(self):
        return self.Phi[..., 0, :, :]


def lift_scalar(psi, grid):
    """Lift of an arbitrary boundary scalar and its four first derivatives.

    No amplitude check; used for perturbations ``psi`` as well as for the
    interface itself.
    """
    grid.check(psi, boundary=True)
    c = chi(grid.x1)[None, :, None, None]
    cp = chi_prime(grid.x1)[None, :, None, None]
    ps = psi[:, None, :, :]
    Psi = c * ps
    dPsi = np.stack([c * grid.db(psi, 0)[:, None], cp * ps,
                     c * grid.db(psi, 2)[:, None], c * grid.db(psi, 3)[:, None]])
    return np.broadcast_to(Psi, grid.shape).copy(), np.broadcast_to(dPsi, (4,) + grid.shape).copy()


def lift(phi, grid, amplitude_cap=0.5, tol=1e-12):
    """Straighten the boundary: returns a :class:`LiftedInterface`.

    Raises
    ------
    DegenerateLiftError
        If ``max |phi|`` exceeds ``amplitude_cap`` or ``d_1 Phi < 1/2``.
    """
    phi = np.asarray(phi, dtype=float)
    grid.check(phi, boundary=True)
    amp = float(np.max(np.abs(phi))) if phi.size else 0.0
    if amp > amplitude_cap + tol:
        raise DegenerateLiftError(
            f"interface amplitude {amp:.3g} exceeds the admissible {amplitude_cap}")
    Psi, dPhi = lift_scalar(phi, grid)
    dPhi[1] += 1.0
    if np.min(dPhi[1]) < 0.5 - tol:
        raise DegenerateLiftError("d_1 Phi dropped below 1/2")
    Phi = grid.x1[None, :, None, None] + Psi
    return LiftedInterface(grid, phi, Psi, Phi, dPhi)


def partial_phi(u, lifted, idx):
    """Derivatives in the physical variables expressed on the straightened slab.

    ``idx`` is one of ``'t', 1, 2, 3``.
    """
    g, dPhi = lifted.grid, lifted.dPhi
    d1u = g.d(u, 1)
    if idx in (1, "1"):
        return d1u / dPhi[1]
    axis = {"t": 0, 0: 0, 2: 2, "2": 2, 3: 3, "3": 3}.get(idx)
    if axis is None:
        raise ValueError(f"idx must be one of t, 1, 2, 3; got {idx!r}")
    return g.d(u, axis) - dPhi[axis] / dPhi[1] * d1u


# ---------------------------------------------------------------------------
# anisotropic calculus and norms


def weight(alpha):
    """``<alpha> = |alpha| + alpha_4``."""
    if len(alpha) != 5 or any(int(a) < 0 for a in alpha):
        raise ValueError(f"multi-index must have five nonnegative entries, got {alpha}")
    return int(sum(alpha)) + int(alpha[4])


def multi_indices(m):
    """All 5-indices of weight at most ``m`` in lexicographic order."""
    out = []
    for a in itertools.product(range(m + 1), repeat=5):
        if weight(a) <= m:
            out.append(a)
    return out


MAX_ORDER = 4


def dstar_apply(u, alpha, grid, max_order=MAX_ORDER):
    """Apply ``d_t^a0 (sigma d_1)^a1 d_2^a2 d_3^a3 d_1^a4`` right to left."""
    if weight(alpha) > max_order:
        raise ValueError(f"order {weight(alpha)} exceeds the configured cap {max_order}")
    if grid.nt_total < 3:
        raise ValueError("insufficient history")
    a0, a1, a2, a3, a4 = (int(a) for a in alpha)
    s = sigma(grid.x1)[:, None, None]
    out = np.asarray(u, dtype=float)
    for _ in range(a4):
        out = grid.d(out, 1)
    for _ in range(a3):
        out = grid.d(out, 3)
    for _ in range(a2):
        out = grid.d(out, 2)
    for _ in range(a1):
        out = s * grid.d(out, 1)
    for _ in range(a0):
        out = grid.d(out, 0)
    return out


def _hstar_density(u, m, grid, max_order):
    total = 0.0
    for alpha in multi_indices(m):
        du = dstar_apply(u, alpha, grid, max_order)
        sq = du**2
        total = total + (np.sum(sq, axis=tuple(range(sq.ndim - 4))) if sq.ndim > 4 else sq)
    return total


def hstar_norm(u, m, grid, upto=None, max_order=MAX_ORDER):
    """Discrete ``H*^m`` norm over ``[0, t_upto] x slab``; all components summed."""
    if m > max_order:
        raise ValueError(f"order {m} exceeds the configured cap {max_order}")
    return float(np.sqrt(grid.integrate(_hstar_density(u, m, grid, max_order), upto)))


def hstar_trace(u, m, grid, max_order=MAX_ORDER):
    """``H*^m`` norms over ``[0, t_l]`` for every level ``l``."""
    return np.sqrt(grid.integrate_levels(_hstar_density(u, m, grid, max_order)))


def sobolev_norm(u, m, grid, upto=None):
    """Plain discrete ``H^m`` norm (all space-time derivatives of order <= m)."""
    total = 0.0
    for order in range(m + 1):
        for axes in itertools.combinations_with_replacement(range(4), order):
            du = np.asarray(u, dtype=float)
            for a in axes:
                du = grid.d(du, a)
            sq = du**2
            total = total + (np.sum(sq, axis=tuple(range(sq.ndim - 4))) if sq.ndim > 4 else sq)
    return float(np.sqrt(grid.integrate(total, upto)))


def _boundary_density(psi, s, grid):
    """Fourier-weighted density per time level for ``H^s(Sigma_T)``."""
    psi = np.asarray(psi, dtype=float)
    k2 = 2 * np.pi * np.fft.fftfreq(grid.n2, d=grid.h2)
    k3 = 2 * np.pi * np.fft.fftfreq(grid.n3, d=grid.h3)
    ksq = k2[:, None] ** 2 + k3[None, :] ** 2
    npts = grid.n2 * grid.n3
    dens = 0.0
    dj = psi
    for j in range(s + 1):
        if j:
            dj = grid.db(dj, 0)
        hat = np.fft.fft2(dj, axes=(-2, -1))
        w = (1.0 + ksq) ** (s - j)
        per = np.sum(w * np.abs(hat) ** 2, axis=(-2, -1)) / npts
        dens = dens + (np.sum(per, axis=tuple(range(per.ndim - 1))) if per.ndim > 1 else per)
    return dens  # per level, already summed over x' (times 1/(h2 h3) in spacing units)


def boundary_sobolev_norm(psi, s, grid, upto=None, max_order=MAX_ORDER):
    """``H^s(Sigma_t)``: Fourier weights in x', discrete time derivatives."""
    if s > max_order:
        raise ValueError(f"order {s} exceeds the configured cap {max_order}")
    grid.check(psi, boundary=True)
    per_level = _boundary_density(psi, s, grid) * grid.h2 * grid.h3
    return float(np.sqrt(np.dot(per_level, grid.time_weights(upto))))


def boundary_sobolev_trace(psi, s, grid):
    per_level = _boundary_density(psi, s, grid) * grid.h2 * grid.h3
    return np.sqrt(_cumulative_trapezoid(per_level, grid.dt, grid.n_past))


def tangential_gradient(psi, grid):
    return np.stack([grid.db(psi, 2), grid.db(psi, 3)])
