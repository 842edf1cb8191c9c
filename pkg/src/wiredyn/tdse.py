"""Time-dependent propagation of the scattered wave.

The total wavefunction is split as psi = psi0 + delta, where psi0 = exp(i(kx -
phase(t))) is the incident plane wave, carried analytically, and delta is the
part generated by the excitation. delta obeys

    i hbar d(delta)/dt = H(t) delta + (H(t) - H0) psi0,

which is integrated with Crank-Nicolson on the lattice. Two closures of the
finite box are available for delta: exact discrete transparent boundaries
(a memory convolution over past boundary values) and, once the excitation
is over, spectral free flight on a zero-padded periodic box.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft
import scipy.sparse as sp
from scipy.linalg import lapack
from scipy.sparse.linalg import splu

from .core import Grid, PhysicalContext, PlaneWave, lattice_energy
from .negf import NumericalError


class ExtensionError(ValueError):
    """The scattered wave is not yet confined away from the box edges."""


@dataclass(frozen=True)
class WaveField:
    """Scattered amplitude ``delta`` on ``grid`` at ``time``.

    The incident wave is exp(i(k x - phase)); ``incident=None`` means no
    plane wave is carried and ``delta`` is the whole wavefunction.
    """

    delta: np.ndarray
    grid: Grid
    incident: PlaneWave | None
    time: float = 0.0
    phase: float = 0.0
    gauge: str = "scalar"

    @classmethod
    def initial(cls, grid: Grid, incident: PlaneWave | None, gauge: str = "scalar",
                time: float = 0.0) -> "WaveField":
        return cls(np.zeros(grid.count, dtype=complex), grid, incident, time,
                   0.0 if incident is None else incident.omega * time, gauge)

    def incident_values(self, x=None) -> np.ndarray:
        x = self.grid.x if x is None else np.asarray(x, dtype=float)
        if self.incident is None:
            return np.zeros(x.shape, dtype=complex)
        return np.exp(1j * (self.incident.k * x - self.phase))

    def total(self) -> np.ndarray:
        return self.incident_values() + self.delta


def cn_frequency(ctx: PhysicalContext, energy: float, dt: float) -> float:
    """Phase advance per unit time of an energy eigenstate under Crank-Nicolson."""
    return 2.0 * math.atan(0.5 * dt * energy / ctx.hbar) / dt


# -- coupling ---------------------------------------------------------------

class Coupling:
    """Lattice form of H(t) - H0 for a separable excitation.

    For an excitation f(x) g(t) the perturbation is g W1 + g^2 W2 with W1, W2
    Hermitian tridiagonal. Scalar gauge: W1 = diag(e phi). Velocity gauge:
    the symmetric centered discretization of -(e/2m)(pA + Ap) + e^2 A^2/2m.
    Each W is stored as (diag, upper); upper[j] couples site j to j+1 and the
    last entry is the wrap-around bond used only by periodic boxes.
    """

    def __init__(self, ctx: PhysicalContext, grid: Grid, excitation):
        self.excitation = excitation
        n = grid.count
        zero = (np.zeros(n), np.zeros(n, dtype=complex))
        if excitation is None:
            self.w1, self.w2 = zero, zero
            return
        f = np.asarray(excitation.spatial_factor(grid.x, grid.spacing), dtype=float)
        e = ctx.charge
        if excitation.gauge == "scalar":
            self.w1 = (e * f, np.zeros(n, dtype=complex))
            self.w2 = zero
        elif excitation.gauge == "velocity":
            bond = f + np.roll(f, -1)
            self.w1 = (np.zeros(n), 1j * ctx.hbar * e * bond / (4.0 * ctx.mass * grid.spacing))
            self.w2 = (e * e * f * f / (2.0 * ctx.mass), np.zeros(n, dtype=complex))
        else:
            raise ValueError(f"unknown gauge {excitation.gauge!r}")

    def factor(self, t: float) -> float:
        if self.excitation is None:
            return 0.0
        return float(self.excitation.temporal_factor(t))

    def combine(self, g1: float, g2: float):
        return (g1 * self.w1[0] + g2 * self.w2[0], g1 * self.w1[1] + g2 * self.w2[1])


def _tridiag_apply(diag, upper, v, left_ghost=0.0, right_ghost=0.0, wrap=None):
    """(M v) for Hermitian tridiagonal M = (diag, upper).

    Ghost values extend ``v`` beyond the ends; ``wrap`` is the Bloch twist of
    a periodic box (ghosts are then taken from the opposite end).
    """
    out = diag * v
    out[:-1] += upper[:-1] * v[1:]
    out[1:] += np.conj(upper[:-1]) * v[:-1]
    if wrap is not None:
        out[-1] += upper[-1] * wrap * v[0]
        out[0] += np.conj(upper[-1] * wrap) * v[-1]
    else:
        out[-1] += upper[-1] * right_ghost
        out[0] += np.conj(upper[-1]) * left_ghost
    return out


def source_term(ctx: PhysicalContext, grid: Grid, excitation, incident: PlaneWave,
                t: float, phase: float | None = None) -> np.ndarray:
    """Inhomogeneity (H(t) - H0) psi0(t) on the lattice.

    ``phase`` defaults to omega(k) t. The lattice operator is applied to the
    plane wave exactly, so a uniform vector potential yields an
    x-independent multiple of psi0.
    """
    coupling = Coupling(ctx, grid, excitation)
    g = coupling.factor(t)
    diag, upper = coupling.combine(g, g * g)
    if phase is None:
        phase = incident.omega * t
    psi0 = np.exp(1j * (incident.k * grid.x - phase))
    ghosts = np.exp(1j * (incident.k * (grid.x[[0, -1]] + [-grid.spacing, grid.spacing]) - phase))
    return _tridiag_apply(diag, upper, psi0, ghosts[0], ghosts[1])


# -- transparent boundary kernel ---------------------------------------------

def _kernel_coefficients(t_prime: float, dt: float, hbar: float, count: int) -> np.ndarray:
    """Coefficients l_n of the exterior map delta_ghost = sum_n l_n delta_edge.

    In the field-free exterior the Z-transform of the Crank-Nicolson recursion
    gives l + 1/l = 2 + q(z), q = -2i hbar (z-1) / (t' dt (z+1)), with |l| < 1
    selecting the decaying solution. The coefficients are the inverse
    Z-transform, evaluated by a DFT on the circle |z| = r > 1. Aliasing is
    suppressed by r^M = 1e16 and roundoff stays below ~1e-12 for n <= M/4.
    """
    m = 1 << max(int(math.ceil(math.log2(4 * count))), 4)
    r = 10.0 ** (16.0 / m)
    z = r * np.exp(2j * np.pi * np.arange(m) / m)
    q = -2j * hbar * (z - 1.0) / (t_prime * dt * (z + 1.0))
    b = 1.0 + 0.5 * q
    s = np.sqrt(b * b - 1.0)
    small = np.where(np.abs(b - s) < np.abs(b + s), b - s, b + s)
    n = np.arange(count)
    return np.fft.ifft(small)[:count] * r**n


class BoundaryKernel:
    """Memory of the two open ends for transparent Crank-Nicolson steps.

    Holds the convolution coefficients (which depend only on t', dt and hbar)
    and, per side, the history of edge values of delta and of the implied
    first exterior ("ghost") values.
    """

    def __init__(self, t_prime: float, dt: float, hbar: float, capacity: int = 1024):
        self.t_prime, self.dt, self.hbar = t_prime, dt, hbar
        self.coefficients = _kernel_coefficients(t_prime, dt, hbar, capacity + 2)
        self.edge = np.zeros((2, capacity + 1), dtype=complex)
        self.ghost = np.zeros((2, capacity + 1), dtype=complex)
        self.steps = 0

    @property
    def capacity(self) -> int:
        return self.edge.shape[1] - 1

    def reserve(self, steps: int) -> None:
        if steps <= self.capacity:
            return
        new = max(steps, 2 * self.capacity)
        self.coefficients = _kernel_coefficients(self.t_prime, self.dt, self.hbar, new + 2)
        for name in ("edge", "ghost"):
            old = getattr(self, name)
            grown = np.zeros((2, new + 1), dtype=complex)
            grown[:, : old.shape[1]] = old
            setattr(self, name, grown)

    def start(self, delta: np.ndarray) -> None:
        """Begin a run; the exterior is assumed quiescent at this instant."""
        self.edge[:, 0] = delta[0], delta[-1]
        self.ghost[:, 0] = 0.0
        self.steps = 0

    def memory(self) -> np.ndarray:
        """History part of the next ghost values, sum_{p<=n} l_{n+1-p} edge_p."""
        n = self.steps
        c = self.coefficients[n + 1:0:-1]
        return self.edge[:, : n + 1] @ c

    def record(self, delta: np.ndarray, memory: np.ndarray) -> None:
        n = self.steps + 1
        self.reserve(n)
        self.edge[:, n] = delta[0], delta[-1]
        self.ghost[:, n] = self.coefficients[0] * self.edge[:, n] + memory
        self.steps = n


# -- Crank-Nicolson engine -----------------------------------------------------

class CrankNicolson:
    """Fixed-step Crank-Nicolson propagator for delta on one grid.

    ``boundary`` is ``"transparent"`` (discrete transparent boundary),
    ``"reflecting"`` (delta = 0 beyond the ends) or ``"periodic"`` (Bloch
    periodic with the incident wave's twist exp(ikNa)).
    """

    def __init__(self, ctx: PhysicalContext, grid: Grid, excitation, incident: PlaneWave | None,
                 dt: float, boundary: str = "transparent"):
        if not dt > 0:
            raise ValueError("dt must be positive")
        if boundary not in ("transparent", "reflecting", "periodic"):
            raise ValueError(f"unknown boundary {boundary!r}")
        if excitation is not None and boundary != "periodic":
            support = excitation.support
            if support is None:
                raise ValueError("a spatially uniform excitation needs a periodic box")
            grid.check_support(*support)
        self.ctx, self.grid, self.excitation, self.incident = ctx, grid, excitation, incident
        self.dt, self.boundary = dt, boundary
        self.t_prime = ctx.hopping(grid.spacing)
        self.coupling = Coupling(ctx, grid, excitation)
        self.g = 1j * dt / (2.0 * ctx.hbar)
        if incident is not None:
            self.energy = float(lattice_energy(ctx, incident.k, grid.spacing))
            self.omega = cn_frequency(ctx, self.energy, dt)
            self.twist = np.exp(1j * incident.k * grid.spacing * grid.count)
        else:
            self.energy = self.omega = 0.0
            self.twist = 1.0
        self.kernel = (BoundaryKernel(self.t_prime, dt, ctx.hbar)
                       if boundary == "transparent" else None)
        self._factors = None
        self._factor_key = None
        self._x = grid.x
        self._plane = None if incident is None else np.exp(1j * incident.k * self._x)
        self._window = self._active_window()

    def _active_window(self):
        """Slice holding every nonzero coupling entry, padded so its ends are free.

        None when the coupling reaches the box ends (then full arrays are used).
        """
        w1, w2 = self.coupling.w1, self.coupling.w2
        used = (w1[0] != 0) | (w2[0] != 0) | (w1[1] != 0) | (w2[1] != 0)
        if self.boundary == "periodic":
            return None
        idx = np.nonzero(used)[0]
        if idx.size == 0:
            return slice(0, 0)
        a, b = idx[0] - 2, idx[-1] + 3
        if a < 0 or b > self.grid.count:
            return None
        return slice(int(a), int(b))

    def reserve(self, steps: int) -> None:
        if self.kernel is not None:
            self.kernel.reserve(steps)

    def start(self, state: WaveField) -> None:
        if self.kernel is not None:
            self.kernel.start(state.delta)

    def _factorize(self, key):
        """LU factors of 1 + i dt Hbar / 2 hbar, cached while the coupling factors repeat."""
        if self._factor_key == key and self._factors is not None:
            return self._factors
        diag, upper = self.coupling.combine(*key)
        n = self.grid.count
        g, tp = self.g, self.t_prime
        main = 1.0 + g * (2.0 * tp + diag)
        up = g * (-tp + upper[:-1])
        lo = g * (-tp + np.conj(upper[:-1]))
        if self.boundary == "transparent":
            c0 = self.kernel.coefficients[0]
            main = main.astype(complex)
            main[0] -= g * tp * c0
            main[-1] -= g * tp * c0
        if self.boundary == "periodic":
            wrap = g * (-tp + upper[-1]) * self.twist
            m = sp.diags([lo, main, up], [-1, 0, 1], shape=(n, n), format="lil", dtype=complex)
            m[n - 1, 0] = wrap
            m[0, n - 1] = g * np.conj((-tp + upper[-1]) * self.twist)
            self._factors = ("splu", splu(m.tocsc()))
        else:
            dl, d, du, du2, ipiv, info = lapack.zgttrf(lo, main, up)
            if info != 0:
                raise NumericalError(f"Crank-Nicolson matrix is singular (info={info})")
            self._factors = ("gtt", (dl, d, du, du2, ipiv))
        self._factor_key = key
        return self._factors

    def _solve(self, factors, rhs):
        kind, f = factors
        if kind == "splu":
            return f.solve(rhs)
        x, info = lapack.zgttrs(*f, rhs)
        if info != 0:
            raise NumericalError(f"tridiagonal solve failed (info={info})")
        return x

    def step(self, state: WaveField, step_index: int | None = None) -> WaveField:
        t = state.time
        g0, g1 = self.coupling.factor(t), self.coupling.factor(t + self.dt)
        key = (0.5 * (g0 + g1), 0.5 * (g0 * g0 + g1 * g1))
        if self._window is None:
            rhs = self._rhs_full(state, key)
        else:
            rhs = self._rhs_windowed(state, key)
        memory = None
        if self.boundary == "transparent":
            memory = self.kernel.memory()
            gtp = self.g * self.t_prime
            rhs[0] += gtp * memory[0]
            rhs[-1] += gtp * memory[1]
        try:
            new = self._solve(self._factorize(key), rhs)
        except NumericalError as exc:
            where = "" if step_index is None else f" at step {step_index}"
            raise NumericalError(f"{exc}{where}") from exc
        if memory is not None:
            self.kernel.record(new, memory)
        return replace(state, delta=new, time=t + self.dt, phase=state.phase + self.omega * self.dt)

    def _phase_average(self, state: WaveField) -> complex:
        # mean of the incident phase factor at t and t + dt
        return np.exp(-1j * state.phase) * 0.5 * (1.0 + np.exp(-1j * self.omega * self.dt))

    def _rhs_windowed(self, state: WaveField, key) -> np.ndarray:
        """(1 - i dt Hbar / 2 hbar) delta minus the source, touching only the coupled window."""
        g, tp = self.g, self.t_prime
        d = state.delta
        gtp = g * tp
        rhs = (1.0 - 2.0 * gtp) * d
        rhs[:-1] += gtp * d[1:]
        rhs[1:] += gtp * d[:-1]
        if self.boundary == "transparent":
            ghosts = self.kernel.ghost[:, self.kernel.steps]
            rhs[0] += gtp * ghosts[0]
            rhs[-1] += gtp * ghosts[1]
        w = self._window
        if key == (0.0, 0.0) or w.stop == w.start:
            return rhs
        c = self.coupling
        diag = key[0] * c.w1[0][w] + key[1] * c.w2[0][w]
        upper = key[0] * c.w1[1][w] + key[1] * c.w2[1][w]
        rhs[w] -= g * _tridiag_apply(diag, upper, d[w])
        if state.incident is not None:
            rhs[w] -= 2.0 * g * self._phase_average(state) * _tridiag_apply(diag, upper, self._plane[w])
        return rhs

    def _rhs_full(self, state: WaveField, key) -> np.ndarray:
        g, tp = self.g, self.t_prime
        diag, upper = self.coupling.combine(*key)
        d = state.delta
        full_diag = 2.0 * tp + diag
        if self.boundary == "periodic":
            hd = _tridiag_apply(full_diag, upper - tp, d, wrap=self.twist)
        elif self.boundary == "transparent":
            ghosts = self.kernel.ghost[:, self.kernel.steps]
            hd = _tridiag_apply(full_diag, np.append(upper[:-1] - tp, -tp), d, ghosts[0], ghosts[1])
        else:
            hd = _tridiag_apply(full_diag, np.append(upper[:-1] - tp, -tp), d)
        rhs = d - g * hd
        if state.incident is not None and key != (0.0, 0.0):
            k, a = state.incident.k, self.grid.spacing
            phase_avg = self._phase_average(state)
            psi0 = self._plane * phase_avg
            if self.boundary == "periodic":
                src = _tridiag_apply(diag, upper, psi0, wrap=self.twist)
            else:
                ghost_l = np.exp(1j * k * (self._x[0] - a)) * phase_avg
                ghost_r = np.exp(1j * k * (self._x[-1] + a)) * phase_avg
                src = _tridiag_apply(diag, upper, psi0, ghost_l, ghost_r)
            rhs = rhs - 2.0 * g * src
        return rhs


def step_cn(state: WaveField, engine: CrankNicolson) -> WaveField:
    """Advance ``state`` by one step of ``engine`` (whose kernel keeps the memory)."""
    return engine.step(state)


# -- spectral free flight ------------------------------------------------------

@dataclass
class SpectralField:
    """Zero-padded periodic representation of delta for exact free evolution.

    ``offset`` is the index of the original grid's first site inside the
    extended box. Modes evolve with the lattice dispersion 2t'(1 - cos k a),
    and the incident phase continues at the matching exact rate.
    """

    coefficients: np.ndarray
    wavenumbers: np.ndarray
    energies: np.ndarray
    grid: Grid
    original: Grid
    offset: int
    time: float
    phase: float
    incident: PlaneWave | None
    omega: float
    hbar: float
    gauge: str = "velocity"
    _active: np.ndarray | None = field(default=None, repr=False)

    def phase_at(self, t: float) -> float:
        return self.phase + self.omega * (t - self.time)

    def at(self, t: float) -> WaveField:
        """Scattered wave on the extended grid at time ``t``."""
        u = np.exp(-1j * self.energies * (t - self.time) / self.hbar)
        delta = scipy.fft.ifft(self.coefficients * u)
        return WaveField(delta, self.grid, self.incident, t, self.phase_at(t), self.gauge)

    def frames(self, t0: float, dt: float):
        """Iterator of :meth:`at` for t0, t0+dt, ... using a per-mode phase recurrence."""
        c = self.coefficients * np.exp(-1j * self.energies * (t0 - self.time) / self.hbar)
        u = np.exp(-1j * self.energies * dt / self.hbar)
        t = t0
        while True:
            yield WaveField(scipy.fft.ifft(c), self.grid, self.incident, t, self.phase_at(t),
                            self.gauge)
            c = c * u
            t = t + dt

    def original_window(self, state: WaveField) -> WaveField:
        """Restrict an extended-box field back to the original grid."""
        sl = slice(self.offset, self.offset + self.original.count)
        return WaveField(state.delta[sl].copy(), self.original, self.incident, state.time,
                         state.phase, state.gauge)

    def sampler(self, indices, t0: float, dt: float, tol: float = 1e-14):
        """Iterator of delta at extended-box ``indices`` for t0, t0+dt, ...

        Each value is a direct sum over the modes that carry weight above
        ``tol`` relative to the largest, advanced by a per-mode phase
        recurrence.
        """
        idx = np.asarray(indices)
        mag = np.abs(self.coefficients)
        keep = mag > tol * mag.max() if mag.max() > 0 else np.zeros(mag.shape, bool)
        c = self.coefficients[keep] / self.coefficients.size
        kx = self.wavenumbers[keep][None, :] * (idx[:, None] * self.grid.spacing)
        basis = np.exp(1j * kx)
        e = self.energies[keep]
        c = c * np.exp(-1j * e * (t0 - self.time) / self.hbar)
        u = np.exp(-1j * e * dt / self.hbar)
        while True:
            yield basis @ c
            c = c * u


def free_flight_extend(state: WaveField, ctx: PhysicalContext, factor: int = 10,
                       edge_fraction: float = 0.05, edge_tol: float = 1e-8) -> SpectralField:
    """Zero-pad ``state.delta`` to ``factor`` times the box and go to k-space.

    The extended length is rounded up to the next size with small prime
    factors so the transforms stay fast. Refuses when the norm of delta within ``edge_fraction`` of either box
    edge exceeds ``edge_tol`` times its total norm.
    """
    if factor < 2 or int(factor) != factor:
        raise ValueError(f"extension factor must be an integer >= 2, got {factor}")
    grid = state.grid
    n = grid.count
    d = state.delta
    total = np.linalg.norm(d)
    w = max(int(math.ceil(edge_fraction * n)), 1)
    edge = max(np.linalg.norm(d[:w]), np.linalg.norm(d[-w:]))
    if total > 0 and edge > edge_tol * total:
        raise ExtensionError(
            f"scattered wave reaches the box edge: edge norm ratio {edge / total:.3e} "
            f"> {edge_tol:.1e}")
    m = scipy.fft.next_fast_len(int(factor) * n)
    offset = (m - n) // 2
    padded = np.zeros(m, dtype=complex)
    padded[offset: offset + n] = d
    a = grid.spacing
    ext = Grid(grid.x0 - offset * a, a, m, (offset + grid.region2[0], offset + grid.region2[1]))
    kx = 2.0 * np.pi * np.fft.fftfreq(m, a)
    energies = lattice_energy(ctx, kx, a)
    # fft phases refer to index 0 of the extended box
    coeff = scipy.fft.fft(padded)
    omega = 0.0
    if state.incident is not None:
        omega = float(lattice_energy(ctx, state.incident.k, a)) / ctx.hbar
    return SpectralField(coeff, kx, energies, ext, grid, offset, state.time, state.phase,
                         state.incident, omega, ctx.hbar, state.gauge)


# -- orchestration -------------------------------------------------------------

def default_time_step(ctx: PhysicalContext, incident: PlaneWave | None, excitation,
                      fraction: float = 0.1, per_period: int = 40) -> float:
    """Step resolving the physical energy and time scales of a run.

    Uses fraction * hbar / E_max over the incident energy and the largest
    potential energy, capped at 1/per_period of the fastest imposed time
    scale (carrier period or switching ramp).
    """
    energies = [incident.energy if incident is not None else 0.0]
    scales = []
    if excitation is not None:
        if excitation.gauge == "scalar":
            energies.append(abs(ctx.charge * excitation.barrier.phi_max))
            scales.append(excitation.switch.ramp_on)
            if excitation.switch.ramp_off is not None:
                scales.append(excitation.switch.ramp_off)
        else:
            energies.append(ctx.hbar * excitation.omega0)
            scales.append(2.0 * np.pi / excitation.omega0)
    e_max = max(energies)
    dt = fraction * ctx.hbar / e_max if e_max > 0 else math.inf
    if scales:
        dt = min(dt, min(scales) / per_period)
    if not math.isfinite(dt):
        raise ValueError("cannot choose a time step without an energy or time scale")
    return dt


@dataclass(frozen=True)
class Sampling:
    """What to record during a run.

    Traces are recorded every ``stride`` steps at every probe; density rows
    every ``density_stride`` steps on sites within ``window`` (nm), thinned
    by ``site_stride``.
    """

    probes: tuple[float, ...] = ()
    stride: int = 1
    density_stride: int | None = None
    window: tuple[float, float] | None = None
    site_stride: int = 1


@dataclass
class PropagationResult:
    density: "DensityMap"
    canonical: list
    physical: list
    final: WaveField
    timings: dict
    switch_time: float | None = None


def propagate(ctx: PhysicalContext, grid: Grid, excitation, incident: PlaneWave | None,
              t_end: float, dt: float | None = None, sampling: Sampling = Sampling(),
              engine: str = "cn_only", boundary: str = "transparent",
              extend_factor: int = 10, initial: WaveField | None = None) -> PropagationResult:
    """Run one scenario from t = 0 to ``t_end``.

    ``engine="cn_then_spectral"`` switches to spectral free flight on the
    first step at or after the end of the excitation.
    """
    from .observables import CurrentTrace, DensityMap, current_canonical, current_gauge_invariant

    if engine not in ("cn_only", "cn_then_spectral"):
        raise ValueError(f"unknown engine policy {engine!r}")
    if dt is None:
        dt = default_time_step(ctx, incident, excitation)
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    gauge = getattr(excitation, "gauge", "scalar")
    state = initial if initial is not None else WaveField.initial(grid, incident, gauge)
    cn = CrankNicolson(ctx, grid, excitation, incident, dt, boundary)

    switch_step = None
    if engine == "cn_then_spectral":
        end = excitation.end if excitation is not None else 0.0
        if not math.isfinite(end):
            raise ValueError("spectral free flight needs an excitation that ends")
        switch_step = min(int(math.ceil(end / dt - 1e-9)), n_steps)
    cn_steps = n_steps if switch_step is None else switch_step
    cn.reserve(cn_steps + 1)
    cn.start(state)

    x = grid.x
    if sampling.window is None:
        sites = np.arange(0, grid.count, sampling.site_stride)
    else:
        lo, hi = sampling.window
        sites = np.nonzero((x >= lo) & (x <= hi))[0][:: sampling.site_stride]
    probe_idx = [grid.index(p) for p in sampling.probes]
    for p, i in zip(sampling.probes, probe_idx):
        if not 0 < i < grid.count - 1:
            raise ValueError(f"probe {p} nm needs a neighbour on both sides")

    trace_steps = list(range(0, n_steps + 1, sampling.stride))
    dens_steps = ([] if sampling.density_stride is None
                  else list(range(0, n_steps + 1, sampling.density_stride)))
    canon = np.zeros((len(probe_idx), len(trace_steps)))
    phys = np.zeros_like(canon)
    rows = []
    dens_set = set(dens_steps)

    def record(st: WaveField, n: int):
        if n % sampling.stride == 0:
            col = n // sampling.stride
            for j, p in enumerate(sampling.probes):
                canon[j, col] = current_canonical(st, p, ctx)
                phys[j, col] = current_gauge_invariant(st, excitation, p, ctx)
        if n in dens_set:
            psi = st.incident_values(x[sites]) + st.delta[sites]
            rows.append(np.abs(psi) ** 2)

    timings = {}
    tic = _time.perf_counter()
    record(state, 0)
    for n in range(cn_steps):
        state = cn.step(state, n)
        state = replace(state, time=(n + 1) * dt)
        record(state, n + 1)
    timings["cn"] = _time.perf_counter() - tic

    if switch_step is not None and switch_step < n_steps:
        tic = _time.perf_counter()
        spec = free_flight_extend(state, ctx, extend_factor)
        later = [n for n in trace_steps if n > switch_step]
        if later and probe_idx:
            ext_idx = np.concatenate([[spec.offset + i - 1, spec.offset + i, spec.offset + i + 1]
                                      for i in probe_idx])
            gen = spec.sampler(ext_idx, later[0] * dt, sampling.stride * dt)
            for n in later:
                vals = next(gen)
                t = n * dt
                for j, p in enumerate(sampling.probes):
                    local = vals[3 * j: 3 * j + 3]
                    st = _probe_state(spec, probe_idx[j], local, t)
                    canon[j, n // sampling.stride] = current_canonical(st, p, ctx)
                    phys[j, n // sampling.stride] = current_gauge_invariant(st, excitation, p, ctx)
        later = [n for n in dens_steps if n > switch_step]
        if later:
            frames = spec.frames(later[0] * dt, sampling.density_stride * dt)
            for n in later:
                st = spec.original_window(next(frames))
                st = replace(st, time=n * dt, phase=spec.phase_at(n * dt))
                psi = st.incident_values(x[sites]) + st.delta[sites]
                rows.append(np.abs(psi) ** 2)
        state = spec.original_window(spec.at(n_steps * dt))
        timings["spectral"] = _time.perf_counter() - tic

    times = np.array(trace_steps) * dt
    canonical = [CurrentTrace(p, times, canon[j]) for j, p in enumerate(sampling.probes)]
    physical = [CurrentTrace(p, times, phys[j]) for j, p in enumerate(sampling.probes)]
    density = DensityMap(np.array(dens_steps) * dt, x[sites],
                         np.array(rows) if rows else np.zeros((0, sites.size)))
    return PropagationResult(density, canonical, physical, state, timings,
                             None if switch_step is None else switch_step * dt)


def _probe_state(spec: SpectralField, i: int, local: np.ndarray, t: float) -> WaveField:
    """A three-site WaveField around original-grid site ``i`` for observables."""
    g = spec.original
    sub = Grid(g.x[i] - g.spacing, g.spacing, 3, (0, 2))
    return WaveField(local, sub, spec.incident, t, spec.phase_at(t), spec.gauge)
