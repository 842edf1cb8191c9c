import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wiredyn.core import (DomainError, Grid, GridError, PhysicalContext, dispersion,
                          lattice_energy, wavenumber_from_energy)

HBAR = 0.6582119569
MASS = 5.685630


def test_defaults(ctx):
    assert ctx.hbar == HBAR
    assert ctx.mass == MASS
    assert ctx.charge == 1.0


@pytest.mark.parametrize("kw", [{"hbar": 0.0}, {"mass": -1.0}, {"hbar": float("nan")}])
def test_context_rejects_nonpositive(kw):
    with pytest.raises(DomainError):
        PhysicalContext(**kw)


def test_hopping_at_default_spacing(ctx):
    # t' = hbar^2 / (2 m a^2)
    assert ctx.hopping(0.05) == pytest.approx(HBAR**2 / (2 * MASS * 0.05**2), rel=1e-14)
    assert ctx.hopping(0.05) == pytest.approx(15.2399, abs=1e-4)


def test_54mev_wave(ctx):
    k = wavenumber_from_energy(ctx, 0.054)
    assert k == pytest.approx(math.sqrt(2 * MASS * 0.054) / HBAR, rel=1e-14)
    assert k == pytest.approx(1.1905, abs=1e-4)
    w = dispersion(ctx, k)
    assert w.velocity == pytest.approx(HBAR * k / MASS, rel=1e-14)
    assert w.velocity == pytest.approx(0.1378, abs=1e-4)
    assert w.omega == pytest.approx(0.054 / HBAR, rel=1e-12)


def test_unit_wavenumber(ctx):
    e = ctx.hbar**2 / (2 * ctx.mass)
    assert wavenumber_from_energy(ctx, e) == pytest.approx(1.0, rel=1e-14)


def test_doubling_k(ctx):
    a, b = dispersion(ctx, 0.7), dispersion(ctx, 1.4)
    assert b.energy == pytest.approx(4 * a.energy, rel=1e-14)
    assert b.velocity == pytest.approx(2 * a.velocity, rel=1e-14)


def test_band_bottom(ctx):
    w = dispersion(ctx, 1e-9)
    assert w.energy < 1e-18 and w.velocity < 1e-9


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_domain_errors(ctx, bad):
    with pytest.raises(DomainError):
        dispersion(ctx, bad)
    with pytest.raises(DomainError):
        wavenumber_from_energy(ctx, bad)


@given(st.floats(1e-3, 10.0))
def test_roundtrip(k):
    ctx = PhysicalContext()
    assert wavenumber_from_energy(ctx, dispersion(ctx, k).energy) == pytest.approx(k, rel=1e-12)


@given(st.floats(1e-3, 10.0), st.floats(0.2, 5.0))
def test_dispersion_invariants(k, mass):
    ctx = PhysicalContext(mass=mass)
    w = dispersion(ctx, k)
    assert w.k > 0
    assert w.energy == pytest.approx(ctx.hbar**2 * k**2 / (2 * mass), rel=1e-13)
    assert w.omega == pytest.approx(w.energy / ctx.hbar, rel=1e-13)


def test_lattice_energy_small_ka(ctx):
    k = 1.19
    cont = dispersion(ctx, k).energy
    lat = float(lattice_energy(ctx, k, 0.05))
    # 2t'(1 - cos ka) = E (1 - (ka)^2 / 12 + ...)
    assert lat == pytest.approx(cont * (1 - (k * 0.05) ** 2 / 12), rel=1e-6)


class TestGrid:
    def test_basic(self):
        g = Grid(-1.0, 0.5, 5, (1, 3), probes=(0.5,))
        np.testing.assert_allclose(g.x, [-1.0, -0.5, 0.0, 0.5, 1.0])
        assert g.length == 2.0
        assert g.index(0.26) == 3

    @pytest.mark.parametrize("args", [
        (0.0, 0.0, 5, (1, 3)),
        (0.0, 1.0, 2, (0, 1)),
        (0.0, 1.0, 5, (3, 3)),
        (0.0, 1.0, 5, (0, 5)),
    ])
    def test_invalid(self, args):
        with pytest.raises(GridError):
            Grid(*args)

    def test_probe_outside(self):
        with pytest.raises(GridError):
            Grid(0.0, 1.0, 5, (1, 3), probes=(10.0,))

    def test_support_must_be_strictly_inside(self):
        g = Grid(0.0, 1.0, 11, (2, 8))
        g.check_support(2.5, 7.5)
        for lo, hi in [(2.0, 7.0), (3.0, 8.0), (1.0, 5.0)]:
            with pytest.raises(GridError):
                g.check_support(lo, hi)

    def test_around_defaults(self):
        g = Grid.around(0.0, 160.0, 0.05)
        assert g.count == 2 * 12800 + 3200 + 1
        assert g.x[0] == pytest.approx(-640.0)
        i1, i2 = g.region2
        assert g.x[i1] == pytest.approx(-32.0) and g.x[i2] == pytest.approx(192.0)
        g.check_support(0.0, 160.0)

    def test_refined_keeps_box(self):
        g = Grid.around(0.0, 2.0, 0.05, pad=10.0, margin=1.0)
        r = g.refined()
        assert r.spacing == g.spacing / 2
        assert r.x[-1] == pytest.approx(g.x[-1])
        assert r.x[r.region2[1]] == pytest.approx(g.x[g.region2[1]])
