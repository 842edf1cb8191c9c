"""Static transmission through a barrier.

Starts from a rectangular barrier, where the lattice Green's function result
can be set against the textbook closed form, then calibrates a smooth barrier
so that half of an incident 54 meV electron gets through.

    python demos/tunnelling.py
"""

import math

import numpy as np

from wiredyn import BarrierSpec, Grid, PhysicalContext
from wiredyn.core import dispersion, lattice_energy, wavenumber_from_energy
from wiredyn.negf import barrier_hamiltonian, calibrate_barrier, scattering_state, transmission

ctx = PhysicalContext()

# A 60 meV, 10 nm hard-walled barrier on a 0.01 nm lattice.
V, w = 0.06, 10.0
grid = Grid.around(0.0, w, 0.01, pad=5.0, margin=1.0)
H = barrier_hamiltonian(ctx, grid, BarrierSpec(V, w, shape="rect"))


def closed_form(E):
    if E < V:
        kappa = math.sqrt(2 * ctx.mass * (V - E)) / ctx.hbar
        return 1 / (1 + V**2 * math.sinh(kappa * w) ** 2 / (4 * E * (V - E)))
    q = math.sqrt(2 * ctx.mass * (E - V)) / ctx.hbar
    return 1 / (1 + V**2 * math.sin(q * w) ** 2 / (4 * E * (E - V)))


print("E (meV)   T lattice      T closed form")
for E in (0.030, 0.054, 0.080, 0.120):
    print(f"{E * 1e3:6.0f}   {transmission(H, E):.6e}   {closed_form(E):.6e}")

# Smooth 2 nm barrier: find the height that transmits half of a 54 meV wave.
k = wavenumber_from_energy(ctx, 0.054)
grid = Grid.around(0.0, 2.0, 0.05, pad=20.0, margin=5.0)
E_lat = float(lattice_energy(ctx, k, grid.spacing))
phi = calibrate_barrier(ctx, grid, BarrierSpec(0.0, 2.0), E_lat, 0.5)
H = barrier_hamiltonian(ctx, grid, BarrierSpec(phi, 2.0))
print(f"\nsmooth 2 nm barrier: phi_max = {phi * 1e3:.3f} mV gives T = {transmission(H, E_lat):.8f}")

rho = np.abs(scattering_state(H, E_lat)) ** 2
left, right = rho[grid.x < -3.0], rho[grid.x > 5.0]
print(f"steady density: left fringes between {left.min():.3f} and {left.max():.3f}, "
      f"right side flat at {right.mean():.4f} (= T)")
print(f"incident group velocity {dispersion(ctx, k).velocity:.4f} nm/fs")
