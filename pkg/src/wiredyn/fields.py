"""Excitation builders: switched scalar barrier, laser vector potential,
and the ponderomotive potential derived from the pulse envelope.

All profiles are vectorized over position and time and return exact zeros
outside their support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import SPEED_OF_LIGHT, PhysicalContext


@dataclass(frozen=True)
class BarrierSpec:
    """Static spatial profile of the scalar potential.

    ``shape="smooth"`` is the sin^2-ramped plateau (ramps occupy the outer
    tenths of the support). ``shape="rect"`` is a hard-walled box used to
    compare against closed-form tunneling results.
    """

    phi_max: float
    length: float
    x_start: float = 0.0
    shape: str = "smooth"

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"barrier length must be positive, got {self.length}")
        if self.shape not in ("smooth", "rect"):
            raise ValueError(f"unknown barrier shape {self.shape!r}")

    @property
    def support(self) -> tuple[float, float]:
        return self.x_start, self.x_start + self.length

    def with_height(self, phi_max: float) -> "BarrierSpec":
        return replace(self, phi_max=float(phi_max))

    def __call__(self, x):
        return barrier_profile(self, x)

    def site_values(self, x, spacing: float) -> np.ndarray:
        """Potential sampled on lattice sites.

        The smooth profile is sampled pointwise. The rectangular box is
        averaged over each site's cell so its walls need not sit on sites.
        """
        x = np.asarray(x, dtype=float)
        if self.shape == "smooth":
            return barrier_profile(self, x)
        lo, hi = self.support
        overlap = (np.minimum(x + spacing / 2, hi) - np.maximum(x - spacing / 2, lo))
        return self.phi_max * np.clip(overlap, 0.0, spacing) / spacing


def barrier_profile(spec: BarrierSpec, x):
    x = np.asarray(x, dtype=float)
    L = spec.length
    u = x - spec.x_start
    inside = (u >= 0.0) & (u <= L)
    if spec.shape == "rect":
        return np.where(inside, spec.phi_max, 0.0)
    ramp_up = spec.phi_max * np.sin(5.0 * np.pi * u / L) ** 2
    ramp_down = spec.phi_max * (1.0 - np.sin(5.0 * np.pi * u / L - 4.5 * np.pi) ** 2)
    out = np.where(u < 0.1 * L, ramp_up,
                   np.where(u <= 0.9 * L, spec.phi_max, ramp_down))
    return np.where(inside, out, 0.0)


@dataclass(frozen=True)
class SwitchSpec:
    """sin^2 switch-on, plateau, optional sin^2 switch-off (all in fs).

    ``plateau=None`` keeps the potential on forever.
    """

    ramp_on: float = 5.0
    plateau: float | None = None
    ramp_off: float | None = None

    def __post_init__(self):
        if not self.ramp_on > 0:
            raise ValueError(f"ramp_on must be positive, got {self.ramp_on}")
        if self.plateau is None:
            if self.ramp_off is not None:
                raise ValueError("ramp_off requires a finite plateau")
        else:
            if self.plateau < 0:
                raise ValueError("plateau duration must be non-negative")
            if self.ramp_off is None:
                object.__setattr__(self, "ramp_off", self.ramp_on)
            if not self.ramp_off > 0:
                raise ValueError("ramp_off must be positive")

    @property
    def end(self) -> float:
        """Time after which the envelope is identically zero (inf if never)."""
        if self.plateau is None:
            return math.inf
        return self.ramp_on + self.plateau + self.ramp_off

    def __call__(self, t):
        return switch_envelope(self, t)


def switch_envelope(spec: SwitchSpec, t):
    t = np.asarray(t, dtype=float)
    on = np.sin(0.5 * np.pi * t / spec.ramp_on) ** 2
    out = np.where(t < spec.ramp_on, on, 1.0)
    if spec.plateau is not None:
        t_off = spec.ramp_on + spec.plateau
        off = np.cos(0.5 * np.pi * (t - t_off) / spec.ramp_off) ** 2
        out = np.where(t <= t_off, out, np.where(t < spec.end, off, 0.0))
    out = np.where(t > 0.0, out, 0.0)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PulseSpec:
    """Localized few-cycle pulse in the velocity gauge.

    A(x, t) = a0 sin^2(pi (x - x_start)/L) sin^2(pi t/tau) sin(omega0 t) on the
    support, with a0 = f0 / omega0. ``uniform=True`` drops the spatial
    factor everywhere (the dipole limit).
    """

    f0: float = 1.0
    lambda0: float = 800.0
    tau: float = 10 * 800.0 / SPEED_OF_LIGHT
    length: float = 160.0
    x_start: float = 0.0
    uniform: bool = False

    gauge = "velocity"

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @classmethod
    def from_cycles(cls, n_cycles: int, lambda0: float = 800.0, **kw) -> "PulseSpec":
        return cls(lambda0=lambda0, tau=n_cycles * lambda0 / SPEED_OF_LIGHT, **kw)

    @property
    def omega0(self) -> float:
        return 2.0 * np.pi * SPEED_OF_LIGHT / self.lambda0

    @property
    def a0(self) -> float:
        return self.f0 / self.omega0

    @property
    def support(self) -> tuple[float, float] | None:
        if self.uniform:
            return None
        return self.x_start, self.x_start + self.length

    @property
    def end(self) -> float:
        return self.tau

    def dipole(self) -> "PulseSpec":
        return replace(self, uniform=True)

    def spatial_factor(self, x, spacing: float | None = None):
        return self.spatial(x)

    def temporal_factor(self, t):
        """a0 sin^2(pi t/tau) sin(omega0 t); A(x, t) = spatial * temporal."""
        return self.a0 * self.temporal_envelope(t) * np.sin(self.omega0 * np.asarray(t, dtype=float))

    def spatial(self, x):
        x = np.asarray(x, dtype=float)
        if self.uniform:
            return np.ones_like(x)
        u = x - self.x_start
        inside = (u >= 0.0) & (u <= self.length)
        return np.where(inside, np.sin(np.pi * u / self.length) ** 2, 0.0)

    def temporal_envelope(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.tau)
        return np.where(inside, np.sin(np.pi * t / self.tau) ** 2, 0.0)


def vector_potential(spec: PulseSpec, x, t):
    t = np.asarray(t, dtype=float)
    return spec.a0 * spec.spatial(x) * spec.temporal_envelope(t) * np.sin(spec.omega0 * t)


def electric_field(spec: PulseSpec, x, t):
    """Exact -dA/dt, keeping the envelope-derivative term."""
    t = np.asarray(t, dtype=float)
    inside = (t >= 0.0) & (t <= spec.tau)
    w = np.pi / spec.tau
    dA_dt = (w * np.sin(2.0 * w * t) * np.sin(spec.omega0 * t)
             + np.sin(w * t) ** 2 * spec.omega0 * np.cos(spec.omega0 * t))
    return -spec.a0 * spec.spatial(x) * np.where(inside, dA_dt, 0.0)


def ponderomotive_profile(spec: PulseSpec, ctx: PhysicalContext, x, t):
    """U_p = e^2 E0^2 / (4 m omega0^2) with E0 the local field envelope (eV)."""
    amplitude = spec.f0 * spec.spatial(x) * spec.temporal_envelope(t)
    return (ctx.charge * amplitude) ** 2 / (4.0 * ctx.mass * spec.omega0**2)


@dataclass(frozen=True)
class SwitchedBarrier:
    """Scalar-gauge excitation Phi(x, t) = phi(x) chi(t)."""

    barrier: BarrierSpec
    switch: SwitchSpec

    gauge = "scalar"

    @property
    def support(self) -> tuple[float, float]:
        return self.barrier.support

    @property
    def end(self) -> float:
        return self.switch.end

    def spatial_factor(self, x, spacing: float | None = None):
        if spacing is None:
            return barrier_profile(self.barrier, x)
        return self.barrier.site_values(x, spacing)

    def temporal_factor(self, t):
        return switch_envelope(self.switch, t)

    def scalar_potential(self, x, t):
        return barrier_profile(self.barrier, x) * switch_envelope(self.switch, t)
