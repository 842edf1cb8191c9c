"""Steady-state scattering on the discretized wire.

The semi-infinite field-free leads enter through their analytic surface
self-energies, so every energy costs one tridiagonal solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack
from scipy.optimize import brentq

from .core import DomainError, Grid, PhysicalContext
from .fields import BarrierSpec


class ConfigurationError(ValueError):
    pass


class EvanescentEnergyError(DomainError):
    """Energy outside the propagating band (0, 4t') of the leads."""


class NumericalError(RuntimeError):
    pass


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscreteHamiltonian:
    onsite: np.ndarray
    hopping: float
    grid: Grid

    @property
    def potential(self) -> np.ndarray:
        return self.onsite - 2.0 * self.hopping

    def dense(self) -> np.ndarray:
        """Closed-chain matrix (no leads); for small checks only."""
        n = self.onsite.size
        h = np.diag(self.onsite).astype(float)
        h[np.arange(n - 1), np.arange(1, n)] = -self.hopping
        h[np.arange(1, n), np.arange(n - 1)] = -self.hopping
        return h


def build_hamiltonian(ctx: PhysicalContext, grid: Grid, potential) -> DiscreteHamiltonian:
    """Three-point kinetic stencil plus the potential energy ``potential`` (eV)."""
    v = np.asarray(potential, dtype=float)
    if v.shape != (grid.count,):
        raise ConfigurationError(f"potential has shape {v.shape}, grid has {grid.count} sites")
    if v[0] != 0.0 or v[-1] != 0.0:
        raise ConfigurationError("potential must vanish at the lead-attachment sites")
    tp = ctx.hopping(grid.spacing)
    return DiscreteHamiltonian(onsite=2.0 * tp + v, hopping=tp, grid=grid)


def lead_phase(t_prime: float, energy: float) -> float:
    """ka in (0, pi) of the lead state at ``energy``."""
    if not 0.0 < energy < 4.0 * t_prime:
        raise EvanescentEnergyError(
            f"energy {energy} eV outside the lead band (0, {4.0 * t_prime}) eV")
    return float(np.arccos(1.0 - energy / (2.0 * t_prime)))


def lead_self_energy(t_prime: float, energy: float) -> complex:
    """Retarded surface self-energy -t' exp(ika) of a semi-infinite chain."""
    return -t_prime * np.exp(1j * lead_phase(t_prime, energy))


def broadening(t_prime: float, energy: float) -> float:
    """Gamma = i (Sigma - Sigma^*) = 2 t' sin(ka)."""
    return 2.0 * t_prime * np.sin(lead_phase(t_prime, energy))


def _solve_open(H: DiscreteHamiltonian, energy: float, rhs: np.ndarray) -> np.ndarray:
    sigma = lead_self_energy(H.hopping, energy)
    diag = (energy - H.onsite).astype(complex)
    diag[0] -= sigma
    diag[-1] -= sigma
    off = np.full(diag.size - 1, H.hopping, dtype=complex)
    *_, x, info = lapack.zgtsv(off, diag, off.copy(), rhs.astype(complex))
    if info != 0:
        raise NumericalError(f"singular open-system matrix at E = {energy} eV (info={info})")
    return x


def transmission(H: DiscreteHamiltonian, energy: float) -> float:
    """Fisher-Lee transmission Gamma_L |G^R_{1N}|^2 Gamma_R."""
    e_last = np.zeros(H.onsite.size)
    e_last[-1] = 1.0
    g_1n = _solve_open(H, energy, e_last)[0]
    gamma = broadening(H.hopping, energy)
    return float(gamma * gamma * abs(g_1n) ** 2)


def scattering_state(H: DiscreteHamiltonian, energy: float) -> np.ndarray:
    """Left-incident scattering state with unit incident amplitude exp(ikx)."""
    ka = lead_phase(H.hopping, energy)
    k = ka / H.grid.spacing
    src = np.zeros(H.onsite.size, dtype=complex)
    src[0] = 1j * broadening(H.hopping, energy) * np.exp(1j * k * H.grid.x0)
    return _solve_open(H, energy, src)


@dataclass(frozen=True)
class TransmissionCurve:
    energies: np.ndarray
    values: np.ndarray


def transmission_curve(H: DiscreteHamiltonian, energies) -> TransmissionCurve:
    energies = np.asarray(energies, dtype=float)
    return TransmissionCurve(energies, np.array([transmission(H, e) for e in energies]))


def barrier_hamiltonian(ctx: PhysicalContext, grid: Grid, barrier: BarrierSpec) -> DiscreteHamiltonian:
    lo, hi = barrier.support
    grid.check_support(lo, hi)
    v = ctx.charge * barrier.site_values(grid.x, grid.spacing)
    return build_hamiltonian(ctx, grid, v)


def height_scan(ctx: PhysicalContext, grid: Grid, barrier: BarrierSpec, energy: float,
                heights) -> np.ndarray:
    return np.array([transmission(barrier_hamiltonian(ctx, grid, barrier.with_height(h)), energy)
                     for h in heights])


def calibrate_barrier(ctx: PhysicalContext, grid: Grid, barrier: BarrierSpec, energy: float,
                      target: float, tol: float = 1e-6, n_scan: int = 161,
                      monotone_tol: float = 1e-2) -> float:
    """Barrier height phi_max (V) giving transmission ``target`` at ``energy``.

    The bracket [0, 20 E/e] is scanned first; the root is then refined by
    Brent's method inside the first scan interval where T drops below the
    target. A scan that rises by more than ``monotone_tol`` anywhere up to
    that interval is rejected, since the root would then be ambiguous.
    """
    if not 0.0 < target <= 1.0:
        raise CalibrationError(f"target transmission must lie in (0, 1], got {target}")
    if target == 1.0:
        return 0.0
    top = 20.0 * energy / ctx.charge
    heights = np.linspace(0.0, top, n_scan)
    t_scan = height_scan(ctx, grid, barrier, energy, heights)
    below = np.nonzero(t_scan <= target)[0]
    if below.size == 0:
        raise CalibrationError(
            f"T stays above {target} for phi_max up to {top} V (min T = {t_scan.min():.3g})")
    j = int(below[0])
    rise = np.diff(t_scan[: j + 1])
    if rise.size and rise.max() > monotone_tol:
        raise CalibrationError(
            f"T(phi_max) rises by {rise.max():.3g} before the crossing; root is ambiguous")

    def excess(h):
        return transmission(barrier_hamiltonian(ctx, grid, barrier.with_height(h)), energy) - target

    phi = brentq(excess, heights[j - 1], heights[j], xtol=1e-15, rtol=1e-15, maxiter=200)
    if abs(excess(phi)) > tol:
        raise CalibrationError(f"calibration reached |T - target| = {abs(excess(phi)):.3g} > {tol}")
    return float(phi)
