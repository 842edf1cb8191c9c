import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wiredyn.core import Grid, PhysicalContext, lattice_energy, wavenumber_from_energy
from wiredyn.fields import BarrierSpec
from wiredyn.negf import (CalibrationError, ConfigurationError, EvanescentEnergyError,
                          barrier_hamiltonian, broadening, build_hamiltonian, calibrate_barrier,
                          lead_self_energy, scattering_state, transmission, transmission_curve)


def rect_transmission(ctx, V, w, E):
    """Closed-form transmission through a rectangular barrier of height V, width w."""
    if E < V:
        kappa = math.sqrt(2 * ctx.mass * (V - E)) / ctx.hbar
        return 1.0 / (1.0 + V**2 * math.sinh(kappa * w) ** 2 / (4 * E * (V - E)))
    kp = math.sqrt(2 * ctx.mass * (E - V)) / ctx.hbar
    return 1.0 / (1.0 + V**2 * math.sin(kp * w) ** 2 / (4 * E * (E - V)))


def rect_hamiltonian(ctx, spacing, V=0.06, w=10.0):
    grid = Grid.around(0.0, w, spacing, pad=5.0, margin=1.0)
    return barrier_hamiltonian(ctx, grid, BarrierSpec(V, w, 0.0, shape="rect"))


def test_hopping(ctx):
    g = Grid(0.0, 0.05, 10, (1, 8))
    H = build_hamiltonian(ctx, g, np.zeros(10))
    assert H.hopping == pytest.approx(15.239, abs=1e-3)
    np.testing.assert_allclose(H.onsite, 2 * H.hopping)


def test_closed_chain_band(ctx):
    g = Grid(0.0, 0.05, 60, (1, 58))
    H = build_hamiltonian(ctx, g, np.zeros(60))
    ev = np.linalg.eigvalsh(H.dense())
    assert ev.min() >= 0 and ev.max() <= 4 * H.hopping
    np.testing.assert_allclose(H.dense(), H.dense().T)


def test_constant_shift(ctx):
    g = Grid(0.0, 0.05, 20, (1, 18))
    v = np.zeros(20)
    v[1:-1] = 0.3
    H0 = build_hamiltonian(ctx, g, np.zeros(20))
    H1 = build_hamiltonian(ctx, g, v)
    np.testing.assert_allclose(H1.onsite - H0.onsite, v)


def test_potential_at_leads_rejected(ctx):
    g = Grid(0.0, 0.05, 20, (1, 18))
    v = np.zeros(20)
    v[0] = 0.1
    with pytest.raises(ConfigurationError):
        build_hamiltonian(ctx, g, v)


class TestSelfEnergy:
    tp = 15.0

    def test_band_bottom(self):
        assert lead_self_energy(self.tp, 1e-12) == pytest.approx(-self.tp, abs=1e-4)

    def test_band_centre(self):
        assert lead_self_energy(self.tp, 2 * self.tp) == pytest.approx(-1j * self.tp, abs=1e-12)

    @given(st.floats(1e-6, 59.999))
    def test_retarded_branch(self, e):
        s = lead_self_energy(self.tp, e)
        assert s.imag < 0
        gamma = broadening(self.tp, e)
        assert gamma == pytest.approx(-2 * s.imag, rel=1e-12)

    def test_broadening_is_velocity(self, ctx):
        a = 0.05
        tp = ctx.hopping(a)
        for e in (0.01, 1.0, 20.0):
            ka = math.acos(1 - e / (2 * tp))
            v = 2 * tp * a * math.sin(ka) / ctx.hbar
            assert broadening(tp, e) == pytest.approx(ctx.hbar * v / a, rel=1e-12)

    @pytest.mark.parametrize("e", [0.0, -0.1, 60.0, 100.0])
    def test_out_of_band(self, e):
        with pytest.raises(EvanescentEnergyError):
            lead_self_energy(self.tp, e)


def test_perfect_wire(ctx):
    g = Grid(0.0, 0.05, 400, (1, 398))
    H = build_hamiltonian(ctx, g, np.zeros(400))
    ka = np.linspace(0.05, math.pi - 0.05, 200)
    energies = 2 * H.hopping * (1 - np.cos(ka))
    curve = transmission_curve(H, energies)
    assert np.max(np.abs(curve.values - 1)) < 1e-10


@pytest.mark.parametrize("E", [0.030, 0.054, 0.080])
def test_rectangular_barrier_oracle(ctx, E):
    H = rect_hamiltonian(ctx, 0.01)
    exact = rect_transmission(ctx, 0.06, 10.0, E)
    assert transmission(H, E) == pytest.approx(exact, rel=1e-3)


def test_rectangular_second_order(ctx):
    E = 0.054
    exact = rect_transmission(ctx, 0.06, 10.0, E)
    errs = [abs(transmission(rect_hamiltonian(ctx, a), E) - exact) for a in (0.04, 0.02, 0.01)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.0 < r < 5.0 for r in ratios), ratios


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=40), st.floats(0.005, 2.0))
def test_transmission_bounded(v, E):
    ctx = PhysicalContext()
    n = len(v) + 2
    g = Grid(0.0, 0.1, n, (0, n - 1))
    H = build_hamiltonian(ctx, g, np.concatenate([[0.0], v, [0.0]]))
    t = transmission(H, E)
    assert -1e-12 <= t <= 1 + 1e-12


def test_scattering_state_free(ctx):
    g = Grid(0.0, 0.05, 200, (1, 198))
    H = build_hamiltonian(ctx, g, np.zeros(200))
    psi = scattering_state(H, 0.054)
    np.testing.assert_allclose(np.abs(psi) ** 2, 1.0, atol=1e-10)


@pytest.fixture(scope="module")
def half_barrier():
    ctx = PhysicalContext()
    grid = Grid.around(0.0, 2.0, 0.05, pad=30.0, margin=5.0)
    shape = BarrierSpec(0.0, 2.0)
    k = wavenumber_from_energy(ctx, 0.054)
    e = float(lattice_energy(ctx, k, grid.spacing))
    phi = calibrate_barrier(ctx, grid, shape, e, 0.5)
    return ctx, grid, shape.with_height(phi), e


def test_calibration_hits_target(half_barrier):
    ctx, grid, barrier, e = half_barrier
    assert barrier.phi_max > 0
    H = barrier_hamiltonian(ctx, grid, barrier)
    assert abs(transmission(H, e) - 0.5) < 1e-6


def test_calibration_deterministic(half_barrier):
    ctx, grid, barrier, e = half_barrier
    again = calibrate_barrier(ctx, grid, BarrierSpec(0.0, 2.0), e, 0.5)
    assert again == barrier.phi_max


def test_scattering_state_consistency(half_barrier):
    ctx, grid, barrier, e = half_barrier
    H = barrier_hamiltonian(ctx, grid, barrier)
    t = transmission(H, e)
    rho = np.abs(scattering_state(H, e)) ** 2
    right = grid.x > barrier.support[1] + 1.0
    np.testing.assert_allclose(rho[right], t, atol=1e-8)
    assert np.max(np.abs(rho[right] - 0.5)) < 1e-6


def test_reflection_fringes(half_barrier):
    ctx, grid, barrier, e = half_barrier
    H = barrier_hamiltonian(ctx, grid, barrier)
    rho = np.abs(scattering_state(H, e)) ** 2
    left = grid.x < -1.0
    r = math.sqrt(0.5)
    assert rho[left].max() == pytest.approx((1 + r) ** 2, rel=1e-3)
    assert rho[left].min() == pytest.approx((1 - r) ** 2, rel=2e-2)
    # fringe period pi / k
    k = math.acos(1 - e / (2 * H.hopping)) / grid.spacing
    x = grid.x[left]
    peaks = x[1:-1][(rho[left][1:-1] > rho[left][:-2]) & (rho[left][1:-1] >= rho[left][2:])]
    assert np.mean(np.diff(peaks)) == pytest.approx(math.pi / k, rel=2e-2)


def test_calibration_monotone_scan(half_barrier):
    ctx, grid, barrier, e = half_barrier
    shape = BarrierSpec(0.0, 2.0)
    heights = np.linspace(0, barrier.phi_max, 30)
    ts = [transmission(barrier_hamiltonian(ctx, grid, shape.with_height(h)), e) for h in heights]
    assert np.all(np.diff(ts) <= 1e-12)


def test_calibration_trivial_target(ctx):
    grid = Grid.around(0.0, 2.0, 0.05, pad=10.0, margin=2.0)
    assert calibrate_barrier(ctx, grid, BarrierSpec(0.0, 2.0), 0.054, 1.0) == 0.0


def test_calibration_without_bracket(ctx):
    grid = Grid.around(0.0, 0.1, 0.05, pad=5.0, margin=1.0)
    with pytest.raises(CalibrationError):
        calibrate_barrier(ctx, grid, BarrierSpec(0.0, 0.1), 0.5, 1e-6)


def test_support_must_fit_region(ctx):
    grid = Grid.around(0.0, 2.0, 0.05, pad=10.0, margin=1.0)
    from wiredyn.core import GridError
    with pytest.raises(GridError):
        barrier_hamiltonian(ctx, grid, BarrierSpec(0.1, 4.0))
