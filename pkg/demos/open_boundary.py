"""Open boundaries and the free-flight hand-off.

A Gaussian packet leaves a 60 nm box through exact discrete transparent
boundaries; practically nothing is reflected. The same packet is then
propagated by free flight on a ten-times larger periodic box, and the two
engines are compared on the original box.

    python demos/open_boundary.py    (a few seconds)
"""

import numpy as np

from wiredyn import Grid, PhysicalContext
from wiredyn.tdse import CrankNicolson, WaveField, free_flight_extend, step_cn

ctx = PhysicalContext()
grid = Grid(-30.0, 0.05, 1201, (10, 1190))
x = grid.x
packet = np.exp(-(x**2) / 16.0 + 3j * x)
norm0 = np.sum(np.abs(packet) ** 2)

dt = 0.05
cn = CrankNicolson(ctx, grid, None, None, dt, "transparent")
state = WaveField(packet, grid, None)
cn.reserve(8001)
cn.start(state)
spectral = free_flight_extend(state, ctx, factor=10)
print(f"extended box: {spectral.grid.count} sites")
for n in range(1, 8001):
    state = step_cn(state, cn)
    if n % 1000 == 0:
        left = np.sum(np.abs(state.delta) ** 2) / norm0
        ff = spectral.original_window(spectral.at(n * dt))
        gap = np.max(np.abs(np.abs(state.delta) ** 2 - np.abs(ff.delta) ** 2))
        print(f"t = {n * dt:5.0f} fs  norm in box {left:.3e}  |CN - free flight| {gap:.1e}")
