"""Smoothing operators ``S_theta`` for the Nash-Moser iteration.

Tangential directions use a smooth spectral cut-off (pass ``|k| <= theta``,
stop ``|k| >= 2 theta``).  Time and the normal direction use one-sided
mollifiers whose discrete moments of orders 1..3 vanish: the time kernel
only looks into the past, so fields vanishing before some instant still do
after smoothing, and the normal kernel only looks inward from ``x1 = 0``.
Kernel widths are ``extent / (2 pi theta)``; when a width holds too few grid
nodes the kernel collapses to the identity.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import SlabGrid, _smooth_step

MOMENTS = 3
MIN_NODES = 6


def cutoff_symbol(r):
    """1 on ``[0, 1]``, 0 on ``[2, inf)``, smooth in between."""
    r = np.asarray(r, dtype=float)
    return 1.0 - _smooth_step(np.clip(r - 1.0, 0.0, 1.0))


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    si = s[inside]
    out[inside] = np.exp(-1.0 / (si * (1.0 - si)))
    return out


@lru_cache(maxsize=256)
def one_sided_kernel(width_in_cells: float, moments=MOMENTS):
    """Weights on offsets ``0, 1, ..., K`` (in cells) with unit mass and
    vanishing moments of orders ``1..moments``; ``(1.0,)`` if too narrow."""
    K = int(np.floor(width_in_cells))
    if K < 1:
        return (1.0,)
    s = np.arange(K + 1) / width_in_cells
    b = _bump(s)
    if np.count_nonzero(b) < max(MIN_NODES, moments + 1):
        return (1.0,)
    i = np.arange(K + 1, dtype=float)
    V = np.stack([b * i**p for p in range(moments + 1)])  # columns: b_i * i^p
    M = np.stack([V @ i**k for k in range(moments + 1)])  # moments of each basis
    rhs = np.zeros(moments + 1)
    rhs[0] = 1.0
    c = np.linalg.solve(M, rhs)
    return tuple(float(x) for x in c @ V)


def _apply_kernel(u, w, axis, causal):
    """``sum_i w_i u[n - i]`` (causal) or ``sum_i w_i u[n + i]`` along ``axis``;
    values outside the array count as zero (causal) or shrink the kernel."""
    w = np.asarray(w)
    if len(w) == 1:
        return u.copy()
    u = np.moveaxis(u, axis, 0)
    n = u.shape[0]
    out = np.zeros_like(u)
    if causal:
        for i, wi in enumerate(w):
            if i >= n:
                break
            out[i:] += wi * u[:n - i]
    else:
        K = len(w) - 1
        for j in range(n):
            avail = n - 1 - j
            if avail >= K:
                out[j] = np.tensordot(w, u[j:j + K + 1], axes=(0, 0))
            else:
                out[j] = u[j]
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True)
class SmoothingFamily:
    """``S_theta`` on slab fields ``(..., nt, n1, n2, n3)`` and boundary fields
    ``(..., nt, n2, n3)`` of one grid."""

    grid: SlabGrid
    ratio: float = 2.0
    moments: int = MOMENTS

    def _tangential_multiplier(self, theta):
        g = self.grid
        k2 = 2 * np.pi * np.fft.fftfreq(g.n2, d=g.h2)
        k3 = 2 * np.pi * np.fft.fftfreq(g.n3, d=g.h3)
        kk = np.sqrt(k2[:, None] ** 2 + k3[None, :] ** 2)
        return cutoff_symbol(kk / theta)

    def time_kernel(self, theta):
        g = self.grid
        return one_sided_kernel(float(g.t_final / (2 * np.pi * theta) / g.dt), self.moments)

    def normal_kernel(self, theta):
        g = self.grid
        return one_sided_kernel(float(g.x1_extent / (2 * np.pi * theta) / g.h1), self.moments)

    def tangential(self, u, theta):
        m = self._tangential_multiplier(theta)
        return np.real(np.fft.ifft2(np.fft.fft2(u, axes=(-2, -1)) * m, axes=(-2, -1)))

    def smooth(self, u, theta, boundary=False):
        """``S_theta u``; raises for ``theta < 1``."""
        if not theta >= 1.0:
            raise ValueError(f"smoothing parameter must be >= 1, got {theta}")
        u = np.asarray(u, dtype=float)
        self.grid.check(u, boundary=boundary)
        out = self.tangential(u, theta)
        taxis = -3 if boundary else -4
        out = _apply_kernel(out, self.time_kernel(theta), taxis, causal=True)
        if not boundary:
            out = _apply_kernel(out, self.normal_kernel(theta), -3, causal=False)
        return out

    def dtheta(self, u, theta, boundary=False, rel=1e-4):
        """Centered difference in ``theta`` of ``S_theta u``."""
        h = rel * theta
        return (self.smooth(u, theta + h, boundary) - self.smooth(u, theta - h, boundary)) / (2 * h)


def tangential_sobolev(u, s, grid):
    """Spectral tangential ``H^s`` norm of a boundary-shaped field, summed over leading axes."""
    k2 = 2 * np.pi * np.fft.fftfreq(grid.n2, d=grid.h2)
    k3 = 2 * np.pi * np.fft.fftfreq(grid.n3, d=grid.h3)
    w = (1.0 + k2[:, None] ** 2 + k3[None, :] ** 2) ** s
    uh = np.fft.fft2(u, axes=(-2, -1)) / (grid.n2 * grid.n3)
    area = grid.tangential_extent**2
    return float(np.sqrt(area * np.sum(w * np.abs(uh) ** 2)))


def schedule(theta0, n):
    """``theta_n = sqrt(theta0^2 + n)`` and ``Delta_n = theta_{n+1} - theta_n``."""
    th = np.sqrt(theta0**2 + n)
    return th, np.sqrt(theta0**2 + n + 1) - th
