"""Equation of state and the admissibility window for the density.

The closure is a stiffened gamma law

    p + p_inf = K * exp(S) * rho**gamma,

with ``K = entropy_scale``.  For ``p_inf = 0`` and ``K = 1`` this is the
plain law ``p = exp(S) rho**gamma``.  A positive offset lets a liquid sit at
zero pressure with finite density, which a free surface with zero total
pressure needs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EOSDomainError(ValueError):
    """Raised when a pressure lies outside the domain of the closure."""


@dataclass(frozen=True)
class ThermoModel:
    gamma: float = 5.0 / 3.0
    rho_floor: float = 0.1
    rho_ceil: float = 10.0
    entropy_scale: float = 1.0
    p_inf: float = 0.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"eos.gamma must exceed 1, got {self.gamma}")
        if not 0.0 <= self.rho_floor < self.rho_ceil:
            raise ValueError(
                f"need 0 <= eos.rho_floor < eos.rho_ceil, got {self.rho_floor}, {self.rho_ceil}")
        if not self.entropy_scale > 0.0:
            raise ValueError("eos.entropy_scale must be positive")
        if self.p_inf < 0.0:
            raise ValueError("eos.p_inf must be nonnegative")

    # forward map
    def pressure(self, rho, S):
        """Pressure as a function of density and entropy."""
        rho = np.asarray(rho, dtype=float)
        return self.entropy_scale * np.exp(S) * rho**self.gamma - self.p_inf

    def density(self, p, S):
        """Density from pressure and entropy.

        Raises
        ------
        EOSDomainError
            If ``p + p_inf <= 0`` anywhere.
        """
        shifted = np.asarray(p, dtype=float) + self.p_inf
        if not np.all(shifted > 0.0):
            raise EOSDomainError("outside-EOS-domain: p + p_inf must be positive")
        # log form keeps tiny pressures finite
        return np.exp((np.log(shifted) - np.log(self.entropy_scale) - S) / self.gamma)

    def sound_speed(self, p, S):
        """Sound speed ``sqrt(dp/drho)`` at fixed entropy."""
        rho = self.density(p, S)
        shifted = np.asarray(p, dtype=float) + self.p_inf
        return np.sqrt(self.gamma * shifted / rho)

    def rho_a2(self, p):
        """``rho * a**2``, which for this closure only depends on the pressure."""
        return self.gamma * (np.asarray(p, dtype=float) + self.p_inf)

    def hyperbolicity_margin(self, U):
        """Distance of the density of ``U`` to the edges of the window.

        ``U`` holds the primary unknowns (q, v, H, S) along axis 0.  Positive
        output means admissible.  States outside the EOS domain get ``-inf``.
        """
        U = np.asarray(U, dtype=float)
        p = U[0] - 0.5 * np.sum(U[4:7] ** 2, axis=0)
        shifted = p + self.p_inf
        out = np.full(np.shape(p), -np.inf)
        ok = shifted > 0.0
        if np.any(ok):
            rho = np.exp((np.log(np.where(ok, shifted, 1.0)) - np.log(self.entropy_scale)
                          - U[7]) / self.gamma)
            m = np.minimum(rho - self.rho_floor, self.rho_ceil - rho)
            out = np.where(ok, m, out)
        return out if out.ndim else float(out)
