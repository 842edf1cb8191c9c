"""Densities, currents and the quantities derived from them.

Currents follow j = (hbar/m) Im[psi* d(psi)/dx]. The derivative of the carried
plane wave is taken analytically (ik psi0); the scattered part uses centered
differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from .core import PhysicalContext, PlaneWave


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class CurrentTrace:
    probe_x: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.times) != np.shape(self.values):
            raise GridMismatchError("times and values differ in length")


@dataclass(frozen=True)
class DensityMap:
    times: np.ndarray
    positions: np.ndarray
    rho: np.ndarray


@dataclass(frozen=True)
class Spectrum:
    omegas: np.ndarray
    power: np.ndarray
    meta: dict = field(default_factory=dict)


def density(state) -> np.ndarray:
    return np.abs(state.total()) ** 2


def _local(state, probe: float):
    g = state.grid
    i = g.index(probe)
    if not 0 < i < g.count - 1:
        raise ValueError(f"probe {probe} nm needs a neighbour on both sides")
    x = g.x[i]
    psi0 = state.incident_values(np.array([x]))[0]
    k = 0.0 if state.incident is None else state.incident.k
    d = state.delta
    psi = psi0 + d[i]
    dpsi = 1j * k * psi0 + (d[i + 1] - d[i - 1]) / (2.0 * g.spacing)
    return x, psi, dpsi


def current_canonical(state, probe: float, ctx: PhysicalContext) -> float:
    _, psi, dpsi = _local(state, probe)
    return float(ctx.hbar / ctx.mass * np.imag(np.conj(psi) * dpsi))


def current_gauge_invariant(state, excitation, probe: float, ctx: PhysicalContext) -> float:
    """Canonical current minus (e/m) A rho; identical to it wherever A = 0."""
    x, psi, dpsi = _local(state, probe)
    j = ctx.hbar / ctx.mass * np.imag(np.conj(psi) * dpsi)
    if excitation is None or excitation.gauge != "velocity":
        return float(j)
    a = excitation.spatial_factor(x) * excitation.temporal_factor(state.time)
    if a == 0.0:
        return float(j)
    return float(j - ctx.charge / ctx.mass * a * abs(psi) ** 2)


def current_profile(state, ctx: PhysicalContext, excitation=None) -> np.ndarray:
    """Gauge-invariant current at every interior site (ends are NaN)."""
    g = state.grid
    psi0 = state.incident_values()
    k = 0.0 if state.incident is None else state.incident.k
    d = state.delta
    dpsi = 1j * k * psi0
    dpsi[1:-1] += (d[2:] - d[:-2]) / (2.0 * g.spacing)
    psi = psi0 + d
    j = ctx.hbar / ctx.mass * np.imag(np.conj(psi) * dpsi)
    if excitation is not None and excitation.gauge == "velocity":
        a = excitation.spatial_factor(g.x) * excitation.temporal_factor(state.time)
        j = j - ctx.charge / ctx.mass * a * np.abs(psi) ** 2
    j[[0, -1]] = np.nan
    return j


def continuity_residual(before, now, after, ctx: PhysicalContext, excitation=None) -> np.ndarray:
    """Centered-difference residual of d(rho)/dt + dj/dx at the middle state."""
    dt = 0.5 * (after.time - before.time)
    a = now.grid.spacing
    drho = (density(after) - density(before)) / (2.0 * dt)
    j = current_profile(now, ctx, excitation)
    res = np.full(j.shape, np.nan)
    res[2:-2] = drho[2:-2] + (j[3:-1] - j[1:-3]) / (2.0 * a)
    return res


def transmission_td(trace: CurrentTrace, incident: PlaneWave) -> CurrentTrace:
    """T(x, t) = j / j0 with j0 = hbar k / m; not bounded by 1 during transients."""
    return CurrentTrace(trace.probe_x, trace.times, trace.values / incident.velocity)


def distance_D(rho_map: DensityMap, rho_s, domain: tuple[float, float] | None = None,
               l1: bool = False) -> np.ndarray:
    """Integral of rho_s - rho(t) over ``domain`` (nm) for every row of the map.

    The signed form is the default; ``l1=True`` integrates the absolute
    difference instead, which cannot vanish by cancellation.
    """
    rho_s = np.asarray(rho_s, dtype=float)
    if rho_s.shape != rho_map.positions.shape:
        raise GridMismatchError(
            f"steady density has {rho_s.shape} points, map has {rho_map.positions.shape}")
    x = rho_map.positions
    steps = np.diff(x)
    if steps.size == 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise GridMismatchError("density positions must be uniformly spaced")
    mask = np.ones(x.shape, bool) if domain is None else (x >= domain[0]) & (x <= domain[1])
    diff = rho_s[mask][None, :] - np.atleast_2d(rho_map.rho)[:, mask]
    if l1:
        diff = np.abs(diff)
    return diff.sum(axis=1) * steps[0]


def settle_time(times, values, fraction: float = 0.05) -> float:
    """Earliest time after which |values| stays below ``fraction`` * |values[0]|.

    Returns inf when the last sample is still above the threshold.
    """
    times = np.asarray(times, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    above = np.nonzero(v >= fraction * v[0])[0]
    if above.size == 0:
        return float(times[0])
    last = above[-1]
    return float(times[last + 1]) if last + 1 < times.size else float("inf")


def depletion_front(rho_map: DensityMap, level: float = 0.9, start: float | None = None) -> np.ndarray:
    """Leading edge of a density depletion travelling to the right.

    For every row, scanning from ``start`` (nm) rightwards, the front is the
    first position where rho climbs back to ``level`` after having dropped
    below it. Leading fringes that never dip below the level do not count.
    Rows without a depletion give NaN.
    """
    x = rho_map.positions
    sel = np.ones(x.shape, bool) if start is None else x >= start
    xs = x[sel]
    out = np.full(len(rho_map.times), np.nan)
    for n, row in enumerate(np.atleast_2d(rho_map.rho)[:, sel]):
        below = np.nonzero(row < level)[0]
        if below.size == 0:
            continue
        back = np.nonzero(row[below[0]:] >= level)[0]
        if back.size:
            out[n] = xs[below[0] + back[0]]
    return out


def front_speed(times, fronts, t_min: float, t_max: float) -> float:
    """Least-squares slope of front position against time on (t_min, t_max)."""
    times = np.asarray(times, dtype=float)
    fronts = np.asarray(fronts, dtype=float)
    ok = (times > t_min) & (times < t_max) & np.isfinite(fronts)
    if ok.sum() < 2:
        raise ValueError("fewer than two front positions inside the fit window")
    return float(np.polyfit(times[ok], fronts[ok], 1)[0])


def power_spectrum(trace: CurrentTrace, baseline: float | None = None, window: str = "none",
                   pad_factor: int = 4) -> Spectrum:
    """|j(omega)|^2 of a uniformly sampled trace.

    The transform is dt * sum_n y_n exp(i omega t_n) over non-negative angular
    frequencies, with y = j - baseline, optionally Hann-windowed, zero-padded
    to ``pad_factor`` times its length (at least 4).
    """
    t = np.asarray(trace.times, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two samples")
    steps = np.diff(t)
    dt = steps[0]
    if not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
        raise ValueError("power spectrum needs uniformly sampled times")
    y = np.asarray(trace.values, dtype=float)
    if baseline is not None:
        y = y - baseline
    if window == "hann":
        y = y * np.hanning(y.size)
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")
    n_pad = max(int(pad_factor), 4) * y.size
    spec = dt * np.fft.rfft(y, n_pad)
    omegas = 2.0 * np.pi * np.fft.rfftfreq(n_pad, dt)
    meta = {"dt_fs": float(dt), "samples": int(y.size), "padded": int(n_pad),
            "d_omega": float(omegas[1]), "window": window,
            "baseline": None if baseline is None else float(baseline)}
    return Spectrum(omegas, np.abs(spec) ** 2, meta)


def parseval_sums(trace: CurrentTrace, spectrum: Spectrum) -> tuple[float, float]:
    """(time-domain energy, frequency-domain energy) of the analysed signal."""
    meta = spectrum.meta
    y = np.asarray(trace.values, dtype=float)
    if meta["baseline"] is not None:
        y = y - meta["baseline"]
    if meta["window"] == "hann":
        y = y * np.hanning(y.size)
    time_side = float(np.sum(y * y) * meta["dt_fs"])
    p = spectrum.power
    weights = np.full(p.size, 2.0)
    weights[0] = 1.0
    if meta["padded"] % 2 == 0:
        weights[-1] = 1.0
    freq_side = float(np.sum(weights * p) * meta["d_omega"] / (2.0 * np.pi))
    return time_side, freq_side


def dominant_peaks(spectrum: Spectrum, count: int = 2, min_fraction: float = 0.02):
    """Indices of the ``count`` strongest local maxima, strongest first.

    The zero-frequency bin counts as a maximum when it exceeds its neighbour.
    Maxima weaker than ``min_fraction`` of the strongest are ignored.
    """
    p = spectrum.power
    padded = np.concatenate([[p[1]], p])
    idx, _ = find_peaks(padded)
    idx = idx - 1
    if idx.size == 0:
        return np.array([], dtype=int)
    idx = idx[p[idx] >= min_fraction * p[idx].max()]
    order = np.argsort(p[idx])[::-1]
    return idx[order][:count]


def spectral_peaks(spectrum: Spectrum, resolution: float, prominence: float = 2.0,
                   floor: float = 1e-14):
    """Indices of the spectral humps that stand out on a logarithmic scale.

    The power is first averaged over a sliding window ``resolution`` wide
    (rad/fs), which merges fringes narrower than the physical linewidth. A hump
    counts when its log10 prominence reaches ``prominence`` decades; the
    zero-frequency edge may host one. Each hump is reported by the strongest
    raw bin between its bases, strongest hump first. Humps weaker than
    ``floor`` times the strongest one sit in round-off noise and are dropped.
    """
    p = spectrum.power
    d_omega = spectrum.omegas[1] - spectrum.omegas[0]
    width = max(1, int(round(resolution / d_omega)))
    smooth = uniform_filter1d(p, width, mode="nearest")
    # the running sum can dip a few ulps below zero
    logp = np.log10(np.maximum(smooth, np.finfo(float).tiny))
    # mirror the first bins so a maximum at omega = 0 is detectable
    padded = np.concatenate([logp[:0:-1], logp])
    idx, props = find_peaks(padded, prominence=prominence)
    shift = p.size - 1
    out = []
    for i, lb, rb in zip(idx, props["left_bases"], props["right_bases"]):
        lo = max(lb - shift, 0)
        hi = min(rb - shift, p.size - 1)
        if i - shift < 0:
            continue
        seg = slice(lo, hi + 1)
        out.append(lo + int(np.argmax(p[seg])))
    out = np.unique(np.asarray(out, dtype=int))
    if out.size:
        out = out[p[out] >= floor * p[out].max()]
    return out[np.argsort(p[out])[::-1]]


def superpose_currents(traces, weights) -> CurrentTrace:
    traces = list(traces)
    weights = np.asarray(list(weights), dtype=float)
    if not traces:
        raise ValueError("no traces to superpose")
    if weights.shape != (len(traces),):
        raise GridMismatchError(f"{len(traces)} traces but {weights.size} weights")
    first = traces[0]
    for tr in traces[1:]:
        if tr.probe_x != first.probe_x:
            raise GridMismatchError("traces were recorded at different probes")
        if np.shape(tr.times) != np.shape(first.times) or not np.array_equal(tr.times, first.times):
            raise GridMismatchError("traces do not share a time grid")
    total = np.zeros_like(np.asarray(first.values, dtype=float))
    for w, tr in zip(weights, traces):
        total = total + w * np.asarray(tr.values, dtype=float)
    return CurrentTrace(first.probe_x, np.asarray(first.times), total)
