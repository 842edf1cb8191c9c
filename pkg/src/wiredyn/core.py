"""Unit system, lattice geometry and the incident plane wave.

Everything is expressed in nm, fs and eV. With the elementary charge set to
one, a field in V/nm is a force in eV/nm and a vector potential in V*fs/nm is a
momentum in eV*fs/nm, so no further conversion factors appear downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HBAR_EV_FS = 0.6582119569
ELECTRON_MASS = 5.685630  # eV fs^2 / nm^2
SPEED_OF_LIGHT = 299.792458  # nm / fs


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a physical relation."""


@dataclass(frozen=True)
class PhysicalContext:
    hbar: float = HBAR_EV_FS
    mass: float = ELECTRON_MASS
    charge: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise DomainError(f"hbar must be positive, got {self.hbar}")
        if not self.mass > 0:
            raise DomainError(f"mass must be positive, got {self.mass}")

    def hopping(self, spacing: float) -> float:
        """Tight-binding hopping t' = hbar^2 / (2 m a^2) in eV."""
        return self.hbar**2 / (2.0 * self.mass * spacing**2)


@dataclass(frozen=True)
class PlaneWave:
    k: float
    energy: float
    omega: float
    velocity: float


def dispersion(ctx: PhysicalContext, k: float) -> PlaneWave:
    """Parabolic band E(k) = hbar^2 k^2 / 2m and its derived quantities."""
    k = float(k)
    if not k > 0:
        raise DomainError(f"wavenumber must be positive, got {k}")
    energy = ctx.hbar**2 * k**2 / (2.0 * ctx.mass)
    return PlaneWave(k=k, energy=energy, omega=energy / ctx.hbar,
                     velocity=ctx.hbar * k / ctx.mass)


def wavenumber_from_energy(ctx: PhysicalContext, energy: float) -> float:
    energy = float(energy)
    if not energy > 0:
        raise DomainError(f"energy must be positive, got {energy}")
    return np.sqrt(2.0 * ctx.mass * energy) / ctx.hbar


def lattice_energy(ctx: PhysicalContext, k, spacing: float):
    """Band energy 2t'(1 - cos ka) of the discretized free Hamiltonian."""
    return 2.0 * ctx.hopping(spacing) * (1.0 - np.cos(np.asarray(k) * spacing))


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform lattice x_i = x0 + i * spacing, i = 0 .. count-1.

    ``region2`` is the closed index interval [i1, i2] inside which an
    excitation may be nonzero; excitations must vanish at both ends of it.
    """

    x0: float
    spacing: float
    count: int
    region2: tuple[int, int]
    probes: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.spacing > 0:
            raise GridError(f"spacing must be positive, got {self.spacing}")
        if self.count < 3:
            raise GridError(f"need at least 3 sites, got {self.count}")
        i1, i2 = self.region2
        if not 0 <= i1 < i2 < self.count:
            raise GridError(f"region2 {self.region2} not inside [0, {self.count})")
        object.__setattr__(self, "region2", (int(i1), int(i2)))
        object.__setattr__(self, "probes", tuple(float(p) for p in self.probes))
        for p in self.probes:
            if not self.x0 <= p <= self.x[-1]:
                raise GridError(f"probe {p} nm lies outside the grid")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.spacing * np.arange(self.count)

    @property
    def length(self) -> float:
        return self.spacing * (self.count - 1)

    def index(self, x: float) -> int:
        """Index of the site nearest to ``x``."""
        i = int(round((x - self.x0) / self.spacing))
        if not 0 <= i < self.count:
            raise GridError(f"position {x} nm lies outside the grid")
        return i

    def check_support(self, lo: float, hi: float) -> None:
        """Reject an excitation supported on [lo, hi] that reaches sites i1 or i2."""
        i1, i2 = self.region2
        x = self.x
        if not (x[i1] < lo and hi < x[i2]):
            raise GridError(
                f"excitation support [{lo}, {hi}] nm must lie strictly inside "
                f"region II [{x[i1]}, {x[i2]}] nm")

    def refined(self) -> "Grid":
        """Same physical box with the spacing halved (convergence checks)."""
        i1, i2 = self.region2
        return Grid(self.x0, self.spacing / 2, 2 * self.count - 1,
                    (2 * i1, 2 * i2), self.probes)

    @classmethod
    def around(cls, lo: float, hi: float, spacing: float = 0.05,
               pad: float | None = None, margin: float | None = None,
               probes=()) -> "Grid":
        """Build a grid around the support [lo, hi].

        ``pad`` is the field-free length on each side of the support (default
        four times the support length); region II extends ``margin`` beyond
        the support (default a twentieth of the pad, at least two sites).
        """
        width = hi - lo
        if pad is None:
            pad = 4.0 * width
        if margin is None:
            margin = max(pad / 20.0, 2 * spacing)
        n_pad = int(np.ceil(pad / spacing))
        n_sup = int(np.ceil(width / spacing))
        count = 2 * n_pad + n_sup + 1
        x0 = lo - n_pad * spacing
        n_margin = int(np.ceil(margin / spacing))
        i1 = max(n_pad - n_margin, 0)
        i2 = min(n_pad + n_sup + n_margin, count - 1)
        return cls(x0, spacing, count, (i1, i2), tuple(probes))
