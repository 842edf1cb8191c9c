"""Configured end-to-end runs: static scans, switched barriers, laser pulses.

A configuration is a nested mapping (normally read from YAML). Every key
carries its unit in its name, unknown keys are rejected, and exactly one of
the ``barrier`` and ``pulse`` blocks must be given. Each run writes CSV files
plus ``manifest.yaml``, the fully resolved configuration, which can be fed
back in to reproduce the CSV files byte for byte.
"""

from __future__ import annotations

import copy
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .core import (HBAR_EV_FS, ELECTRON_MASS, DomainError, Grid, PhysicalContext, PlaneWave,
                   dispersion, lattice_energy, wavenumber_from_energy)
from .fields import BarrierSpec, PulseSpec, SwitchedBarrier, SwitchSpec, vector_potential
from .io import read_yaml, write_checkpoint, write_csv, write_raster, write_yaml
from .negf import (ConfigurationError, barrier_hamiltonian, calibrate_barrier, scattering_state,
                   transmission, transmission_curve)
from .observables import (DensityMap, depletion_front, distance_D, front_speed,
                          power_spectrum, settle_time, spectral_peaks, superpose_currents,
                          transmission_td)
from .tdse import Sampling, default_time_step, propagate

MEV = 1e-3

DEFAULTS = {
    "context": {
        "hbar_eV_fs": HBAR_EV_FS,
        "mass_eV_fs2_per_nm2": ELECTRON_MASS,
        "charge_e": 1.0,
    },
    "grid": {
        "spacing_nm": 0.05,
        "pad_nm": None,       # field-free length per side; None -> 4 x support
        "margin_nm": None,    # region II beyond the support; None -> pad / 20
    },
    "incident": {
        "energy_meV": 54.0,   # number or list (scan)
    },
    "barrier": {
        "phi_max_V": None,    # None -> calibrate to target_T
        "length_nm": 160.0,
        "x_start_nm": 0.0,
        "shape": "smooth",
        "target_T": 0.5,
        "calibration_tol": 1e-6,
    },
    "switch": {
        "ramp_on_fs": 5.0,
        "plateau_fs": None,   # None -> stays on
        "ramp_off_fs": None,  # None -> same as ramp_on when the plateau is finite
    },
    "pulse": {
        "f0_V_per_nm": 1.0,
        "lambda0_nm": 800.0,
        "cycles": 10,
        "tau_fs": None,       # overrides cycles when given
        "length_nm": 160.0,   # number or list (scan)
        "x_start_nm": 0.0,
        "uniform": False,
    },
    "static": {
        "e_min_meV": 1.0,
        "e_max_meV": 200.0,
        "points": 400,
    },
    "run": {
        "t_end_fs": None,
        "dt_fs": None,
        "engine": "auto",
        "boundary": "transparent",
        "extend_factor": 10,
        "trace_stride_fs": 0.2,
        "density_stride_fs": 10.0,
        "probes_nm": None,
        "workers": 1,
    },
    "spectrum": {
        "baseline": True,
        "window": "none",
        "pad_factor": 4,
        "peak_prominence_decades": 2.0,
    },
    "superpose": {
        "weights": None,
    },
    "output": {
        "directory": "out",
        "raster_time_stride_fs": 10.0,
        "raster_site_stride_nm": 0.5,
        "checkpoint": False,
    },
}

EXCITATION_BLOCKS = ("barrier", "pulse")
_CHOICES = {
    ("barrier", "shape"): ("smooth", "rect"),
    ("run", "engine"): ("auto", "cn_only", "cn_then_spectral"),
    ("run", "boundary"): ("transparent", "reflecting"),
    ("spectrum", "window"): ("none", "hann"),
}
_LISTS = {("incident", "energy_meV"), ("pulse", "length_nm"), ("run", "probes_nm"),
          ("superpose", "weights")}


class ConfigError(ConfigurationError):
    pass


# -- configuration ---------------------------------------------------------------

def _coerce(section: str, key: str, value, default):
    where = f"{section}.{key}"
    if (section, key) in _LISTS:
        if value is None:
            return None
        items = value if isinstance(value, (list, tuple)) else [value]
        try:
            return [float(v) for v in items]
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number or a list of numbers, got {value!r}")
    if value is None:
        return None
    if (section, key) in _CHOICES:
        if value not in _CHOICES[section, key]:
            raise ConfigError(f"{where}: {value!r} is not one of {_CHOICES[section, key]}")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not float(value).is_integer():
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, str):
        return str(value)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}")


def resolve_config(raw: dict | None) -> dict:
    """Validate ``raw`` and fill in defaults.

    The result has every section and key. ``excitation`` names the one
    excitation block that was supplied; the other block is dropped.
    """
    raw = copy.deepcopy(raw or {})
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping of sections")
    raw.pop("manifest", None)
    unknown = set(raw) - set(DEFAULTS) - {"excitation"}
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    given = [b for b in EXCITATION_BLOCKS if b in raw]
    declared = raw.pop("excitation", None)
    if declared is not None and given and declared != given[0]:
        raise ConfigError(f"excitation says {declared!r} but the {given[0]!r} block is given")
    if declared is not None and not given:
        given = [declared]
    if len(given) != 1:
        raise ConfigError("give exactly one excitation block: 'barrier' or 'pulse'")
    exc = given[0]
    if exc not in EXCITATION_BLOCKS:
        raise ConfigError(f"unknown excitation {exc!r}")
    if "switch" in raw and exc != "barrier":
        raise ConfigError("'switch' only applies to a barrier excitation")

    out = {"excitation": exc}
    for section, defaults in DEFAULTS.items():
        if section in EXCITATION_BLOCKS and section != exc:
            continue
        if section == "switch" and exc != "barrier":
            continue
        block = raw.get(section) or {}
        if not isinstance(block, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        bad = set(block) - set(defaults)
        if bad:
            raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(bad))}")
        out[section] = {k: _coerce(section, k, block.get(k, d), d) for k, d in defaults.items()}
    _check_values(out)
    return out


def _check_values(cfg: dict) -> None:
    def positive(section, key, allow_none=False):
        v = cfg[section][key]
        if v is None and allow_none:
            return
        if v is None or not v > 0:
            raise ConfigError(f"{section}.{key} must be positive, got {v}")

    positive("context", "hbar_eV_fs")
    positive("context", "mass_eV_fs2_per_nm2")
    positive("grid", "spacing_nm")
    positive("grid", "pad_nm", allow_none=True)
    energies = cfg["incident"]["energy_meV"]
    if not energies or any(not e > 0 for e in energies):
        raise ConfigError(f"incident.energy_meV must be positive, got {energies}")
    if cfg["excitation"] == "barrier":
        positive("barrier", "length_nm")
        t = cfg["barrier"]["target_T"]
        if cfg["barrier"]["phi_max_V"] is None and not (t is not None and 0 < t <= 1):
            raise ConfigError(f"barrier.target_T must lie in (0, 1], got {t}")
        positive("switch", "ramp_on_fs")
        positive("switch", "plateau_fs", allow_none=True)
        positive("switch", "ramp_off_fs", allow_none=True)
    else:
        positive("pulse", "lambda0_nm")
        positive("pulse", "tau_fs", allow_none=True)
        if cfg["pulse"]["tau_fs"] is None and cfg["pulse"]["cycles"] < 1:
            raise ConfigError("pulse.cycles must be at least 1")
        if any(not L > 0 for L in cfg["pulse"]["length_nm"]):
            raise ConfigError("pulse.length_nm must be positive")
    for key in ("t_end_fs", "dt_fs"):
        positive("run", key, allow_none=True)
    positive("run", "trace_stride_fs")
    positive("run", "density_stride_fs")
    if cfg["run"]["extend_factor"] < 2:
        raise ConfigError("run.extend_factor must be at least 2")
    if cfg["run"]["workers"] < 1:
        raise ConfigError("run.workers must be at least 1")
    if cfg["static"]["points"] < 1 or not cfg["static"]["e_min_meV"] > 0 \
            or cfg["static"]["e_max_meV"] < cfg["static"]["e_min_meV"]:
        raise ConfigError("static energies need 0 < e_min_meV <= e_max_meV and points >= 1")
    w = cfg["superpose"]["weights"]
    if w is not None and len(w) != len(energies):
        raise ConfigError(f"superpose.weights has {len(w)} entries for {len(energies)} energies")


def apply_overrides(raw: dict | None, overrides) -> dict:
    """Apply ``section.key=value`` strings; values are parsed as YAML scalars or lists."""
    raw = copy.deepcopy(raw or {})
    raw.pop("manifest", None)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        path, text = item.split("=", 1)
        parts = path.strip().split(".")
        if len(parts) != 2 or not all(parts):
            raise ConfigError(f"override key {path!r} must look like section.key")
        section, key = parts
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse value of {path}: {exc}")
        block = raw.setdefault(section, {})
        if not isinstance(block, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        block[key] = value
    return raw


VERB_EXCITATION = {"static-scan": "barrier", "calibrate": "barrier", "switch": "barrier",
                   "pulse": "pulse", "superpose": "pulse"}


def load_config(path=None, overrides=(), verb: str | None = None) -> dict:
    """Read, override and resolve a configuration.

    With ``verb`` given and no excitation block present, the block the verb
    needs is assumed with all defaults.
    """
    raw = {} if path is None else read_yaml(path)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    raw = apply_overrides(raw, overrides)
    if verb in VERB_EXCITATION and not any(b in raw for b in EXCITATION_BLOCKS) \
            and "excitation" not in raw:
        raw[VERB_EXCITATION[verb]] = {}
    return resolve_config(raw)


# -- building blocks -------------------------------------------------------------

def context_from(cfg) -> PhysicalContext:
    c = cfg["context"]
    return PhysicalContext(c["hbar_eV_fs"], c["mass_eV_fs2_per_nm2"], c["charge_e"])


def incident_for(ctx: PhysicalContext, energy_meV: float) -> PlaneWave:
    return dispersion(ctx, wavenumber_from_energy(ctx, energy_meV * MEV))


def barrier_from(cfg, phi_max: float = 0.0) -> BarrierSpec:
    b = cfg["barrier"]
    return BarrierSpec(phi_max, b["length_nm"], b["x_start_nm"], b["shape"])


def switch_from(cfg) -> SwitchSpec:
    s = cfg["switch"]
    return SwitchSpec(s["ramp_on_fs"], s["plateau_fs"], s["ramp_off_fs"])


def pulse_from(cfg, length: float) -> PulseSpec:
    p = cfg["pulse"]
    kw = dict(f0=p["f0_V_per_nm"], length=length, x_start=p["x_start_nm"], uniform=p["uniform"])
    if p["tau_fs"] is not None:
        return PulseSpec(lambda0=p["lambda0_nm"], tau=p["tau_fs"], **kw)
    return PulseSpec.from_cycles(p["cycles"], p["lambda0_nm"], **kw)


def grid_for(cfg, lo: float, hi: float, probes=()) -> Grid:
    g = cfg["grid"]
    return Grid.around(lo, hi, g["spacing_nm"], g["pad_nm"], g["margin_nm"], probes)


def _tag(energy_meV=None, length_nm=None) -> str:
    parts = []
    if length_nm is not None:
        parts.append(f"L{length_nm:g}nm")
    if energy_meV is not None:
        parts.append(f"E{energy_meV:g}meV")
    return "_".join(parts)


def _stride(interval: float, dt: float) -> int:
    return max(1, int(round(interval / dt)))


@dataclass
class RunResult:
    """Files written by a run and the headline numbers behind them."""

    verb: str
    directory: Path
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _finish(result: RunResult, cfg: dict) -> RunResult:
    """Write the manifest: resolved config plus hashes of every CSV written."""
    files = sorted(set(result.files))
    hashes = {}
    for name in files:
        hashes[name] = hashlib.sha256((result.directory / name).read_bytes()).hexdigest()
    doc = copy.deepcopy(cfg)
    doc["manifest"] = {"verb": result.verb, "version": __version__, "outputs": hashes,
                       "summary": _plain(result.summary)}
    write_yaml(result.directory / "manifest.yaml", doc)
    result.files = files
    return result


def _plain(obj):
    """Recursively convert numpy scalars so the manifest stays plain YAML."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _out(cfg) -> Path:
    return Path(cfg["output"]["directory"])


def _write(result: RunResult, name: str, header, columns):
    write_csv(result.directory / name, header, columns)
    result.files.append(name)


def _raster(result: RunResult, cfg, name: str, dmap, dt_rows: float, spacing: float):
    o = cfg["output"]
    ts = _stride(o["raster_time_stride_fs"], dt_rows) if len(dmap.times) > 1 else 1
    ss = _stride(o["raster_site_stride_nm"], spacing)
    write_raster(result.directory / name, dmap, ts, ss)
    result.files.append(name)


# -- static scattering -----------------------------------------------------------

def _static_grid(cfg) -> Grid:
    lo, hi = barrier_from(cfg).support
    return grid_for(cfg, lo, hi)


def _calibrated_height(cfg, ctx, grid, barrier, energy_meV) -> float:
    """Configured phi_max, or the height giving target_T at the lattice energy of k."""
    b = cfg["barrier"]
    if b["phi_max_V"] is not None:
        return b["phi_max_V"]
    inc = incident_for(ctx, energy_meV)
    e_lat = float(lattice_energy(ctx, inc.k, grid.spacing))
    return calibrate_barrier(ctx, grid, barrier, e_lat, b["target_T"], b["calibration_tol"])


def run_calibrate(cfg) -> RunResult:
    """Barrier height for target_T at every configured incident energy."""
    _need(cfg, "barrier")
    ctx = context_from(cfg)
    grid = _static_grid(cfg)
    barrier = barrier_from(cfg)
    res = RunResult("calibrate", _out(cfg))
    rows = []
    for e in cfg["incident"]["energy_meV"]:
        inc = incident_for(ctx, e)
        e_lat = float(lattice_energy(ctx, inc.k, grid.spacing))
        b = cfg["barrier"]
        if b["phi_max_V"] is not None:
            raise ConfigError("calibrate needs barrier.phi_max_V unset (it is the unknown)")
        phi = calibrate_barrier(ctx, grid, barrier, e_lat, b["target_T"], b["calibration_tol"])
        t = transmission(barrier_hamiltonian(ctx, grid, barrier.with_height(phi)), e_lat)
        rows.append((e * MEV, e_lat, phi, t))
        res.summary[_tag(e)] = {"phi_max_V": phi, "T": t, "lattice_energy_eV": e_lat}
    rows = np.array(rows)
    _write(res, "calibration.csv", ["energy_eV", "lattice_energy_eV", "phi_max_V", "T"], rows.T)
    return _finish(res, cfg)


def run_static_scan(cfg) -> RunResult:
    """T(E) over the static energy grid, the barrier profile and rho_s(x) per energy."""
    _need(cfg, "barrier")
    ctx = context_from(cfg)
    grid = _static_grid(cfg)
    res = RunResult("static-scan", _out(cfg))
    s = cfg["static"]
    energies = np.linspace(s["e_min_meV"], s["e_max_meV"], s["points"]) * MEV
    first = cfg["incident"]["energy_meV"][0]
    phi = _calibrated_height(cfg, ctx, grid, barrier_from(cfg), first)
    barrier = barrier_from(cfg, phi)
    H = barrier_hamiltonian(ctx, grid, barrier)
    curve = transmission_curve(H, energies)
    _write(res, "transmission.csv", ["energy_eV", "T"], [curve.energies, curve.values])
    _write(res, "barrier_profile.csv", ["x_nm", "phi_V"], [grid.x, barrier(grid.x)])
    res.summary["phi_max_V"] = phi
    for e in cfg["incident"]["energy_meV"]:
        inc = incident_for(ctx, e)
        e_lat = float(lattice_energy(ctx, inc.k, grid.spacing))
        psi = scattering_state(H, e_lat)
        _write(res, f"steady_density_{_tag(e)}.csv", ["x_nm", "rho"], [grid.x, np.abs(psi) ** 2])
        res.summary[_tag(e)] = {"T": transmission(H, e_lat)}
    return _finish(res, cfg)


def _need(cfg, block: str) -> None:
    if cfg["excitation"] != block:
        raise ConfigError(f"this run needs a {block!r} block, the config has {cfg['excitation']!r}")


# -- switched barrier --------------------------------------------------------------

def _switch_single(cfg, energy_meV: float):
    ctx = context_from(cfg)
    inc = incident_for(ctx, energy_meV)
    shape = barrier_from(cfg)
    lo, hi = shape.support
    grid = grid_for(cfg, lo, hi)
    i1, i2 = grid.region2
    x1, x2 = grid.x[i1], grid.x[i2]
    probes = cfg["run"]["probes_nm"] or [float(x2)]
    grid = grid_for(cfg, lo, hi, probes)

    phi = _calibrated_height(cfg, ctx, grid, shape, energy_meV)
    barrier = shape.with_height(phi)
    e_lat = float(lattice_energy(ctx, inc.k, grid.spacing))
    H = barrier_hamiltonian(ctx, grid, barrier)
    t_static = transmission(H, e_lat)
    rho_s = np.abs(scattering_state(H, e_lat)) ** 2

    exc = SwitchedBarrier(barrier, switch_from(cfg))
    run = cfg["run"]
    dt = run["dt_fs"] or default_time_step(ctx, inc, exc)
    exit_time = (x2 - hi) / inc.velocity
    t_end = run["t_end_fs"]
    if t_end is None:
        t_end = (exc.end if math.isfinite(exc.end) else 0.0) + 8.0 * exit_time
    engine = run["engine"]
    if engine == "auto":
        engine = "cn_only"
    sampling = Sampling(tuple(probes), _stride(run["trace_stride_fs"], dt),
                        _stride(run["density_stride_fs"], dt))
    out = propagate(ctx, grid, exc, inc, t_end, dt, sampling, engine, run["boundary"],
                    run["extend_factor"])
    return dict(energy=energy_meV, inc=inc, grid=grid, barrier=barrier, phi=phi,
                t_static=t_static, rho_s=rho_s, dt=dt, result=out, exit_time=exit_time,
                region=(x1, x2), t_end=t_end)


def run_switch(cfg) -> RunResult:
    """Switched-barrier runs: density raster, D(t), T(x, t) and steady density per energy."""
    _need(cfg, "barrier")
    res = RunResult("switch", _out(cfg))
    energies = cfg["incident"]["energy_meV"]
    runs = _map(_switch_single, [(cfg, e) for e in energies], cfg["run"]["workers"])
    for r in runs:
        tag = _tag(r["energy"])
        out, grid, inc = r["result"], r["grid"], r["inc"]
        x1, x2 = r["region"]
        dmap = out.density
        row_dt = dmap.times[1] - dmap.times[0] if len(dmap.times) > 1 else r["dt"]
        mask = (grid.x >= x1) & (grid.x <= x2)
        region = DensityMap(dmap.times, dmap.positions[mask], dmap.rho[:, mask])
        D = distance_D(region, r["rho_s"][mask])
        D1 = distance_D(region, r["rho_s"][mask], l1=True)
        _write(res, f"D_{tag}.csv", ["t_fs", "D", "D_l1"], [dmap.times, D, D1])
        _raster(res, cfg, f"density_{tag}.csv", dmap, row_dt, grid.spacing)
        _write(res, f"steady_density_{tag}.csv", ["x_nm", "rho"], [grid.x, r["rho_s"]])
        summary = {"phi_max_V": r["phi"], "T_static": r["t_static"], "dt_fs": r["dt"],
                   "t_end_fs": r["t_end"], "velocity_nm_per_fs": inc.velocity,
                   "exit_time_fs": r["exit_time"], "D0": float(D[0]), "D0_l1": float(D1[0]),
                   "settle_time_fs": settle_time(dmap.times, D),
                   "settle_time_l1_fs": settle_time(dmap.times, D1)}
        for trace in out.canonical:
            T = transmission_td(trace, inc)
            name = f"transmission_td_{tag}_x{trace.probe_x:g}nm.csv"
            _write(res, name, ["t_fs", "T"], [T.times, T.values])
            late = T.times >= 0.9 * T.times[-1]
            summary[f"T_late_x{trace.probe_x:g}nm"] = float(T.values[-1])
            summary[f"T_late_spread_x{trace.probe_x:g}nm"] = float(
                np.max(np.abs(T.values[late] - r["t_static"])))
        front = depletion_front(dmap, 0.9, r["barrier"].support[1] + 5.0)
        _write(res, f"front_{tag}.csv", ["t_fs", "x_nm"], [dmap.times, front])
        speed = _front_fit(dmap.times, front, r["barrier"].support[1], grid.x[-1], inc.velocity)
        if speed is not None:
            summary["front_speed_nm_per_fs"] = speed
        res.summary[tag] = summary
    grid = runs[0]["grid"]
    _write(res, "barrier_profile.csv", ["x_nm", "phi_V"], [grid.x, runs[0]["barrier"](grid.x)])
    t = np.arange(0.0, runs[0]["t_end"] + 1e-9, runs[0]["dt"])
    _write(res, "switch_envelope.csv", ["t_fs", "chi"], [t, switch_from(cfg)(t)])
    return _finish(res, cfg)


def _front_fit(times, front, start: float, edge: float, velocity: float):
    """Front speed fitted while the front crosses the middle of the right lead.

    The window spans from 15% to 70% of the way between the barrier and the
    box edge, which skips the switch-on transient and stays clear of the
    boundary. None when the front never covers that stretch.
    """
    lo = start + 0.15 * (edge - start)
    hi = start + 0.70 * (edge - start)
    ok = np.isfinite(front)
    inside = ok & (front >= lo) & (front <= hi)
    if inside.sum() < 3:
        return None
    t_in = times[inside]
    return front_speed(times, front, t_in[0] - 1e-9, t_in[-1] + 1e-9)


# -- laser pulse -------------------------------------------------------------------

def _pulse_single(cfg, length: float, energy_meV: float):
    ctx = context_from(cfg)
    inc = incident_for(ctx, energy_meV)
    pulse = pulse_from(cfg, length)
    x_start = cfg["pulse"]["x_start_nm"]
    probes = cfg["run"]["probes_nm"] or [x_start + 2.0 * length]
    g = cfg["grid"]
    pad = g["pad_nm"] if g["pad_nm"] is not None else 4.0 * length
    grid = Grid.around(x_start, x_start + length, g["spacing_nm"], pad, g["margin_nm"], probes)
    if not pulse.uniform:
        grid.check_support(*pulse.support)
    run = cfg["run"]
    dt = run["dt_fs"] or default_time_step(ctx, inc, pulse)
    t_end = run["t_end_fs"]
    if t_end is None:
        t_end = pulse.tau + 2.0 * (max(probes) - x_start) / inc.velocity
    engine = run["engine"]
    if engine == "auto":
        engine = "cn_then_spectral"
    site_stride = _stride(cfg["output"]["raster_site_stride_nm"], grid.spacing)
    sampling = Sampling(tuple(probes), _stride(run["trace_stride_fs"], dt),
                        _stride(run["density_stride_fs"], dt), None, site_stride)
    boundary = "periodic" if pulse.uniform else run["boundary"]
    out = propagate(ctx, grid, pulse, inc, t_end, dt, sampling, engine, boundary,
                    run["extend_factor"])
    if cfg["output"]["checkpoint"]:
        name = f"checkpoint_{_tag(energy_meV, length)}.bin"
        write_checkpoint(_out(cfg) / name, out.final.delta, out.final.time)
    return dict(length=length, energy=energy_meV, inc=inc, pulse=pulse, grid=grid, dt=dt,
                t_end=t_end, result=out)


def analyse_spectrum(spectrum, pulse: PulseSpec, incident: PlaneWave, prominence: float = 2.0) -> dict:
    """Locate the carrier and low-frequency humps of a pulse-response spectrum.

    Humps are found on a log scale after smoothing over half the pulse
    bandwidth. The carrier hump must lie within 20% of omega0, the
    low-frequency one below three times the envelope frequency 2 pi / tau.
    """
    w, p = spectrum.omegas, spectrum.power
    peaks = spectral_peaks(spectrum, np.pi / pulse.tau, prominence)
    low_cut = 3.0 * 2.0 * np.pi / pulse.tau
    carrier = [i for i in peaks if abs(w[i] - pulse.omega0) <= 0.2 * pulse.omega0]
    low = [i for i in peaks if w[i] < low_cut]
    info = {"n_peaks": int(len(peaks)), "peak_omegas": [float(w[i]) for i in peaks],
            "power_at_omega_k": float(np.interp(incident.omega, w, p))}
    if carrier:
        info["carrier_omega"] = float(w[carrier[0]])
        info["carrier_power"] = float(p[carrier[0]])
    if low:
        info["low_omega"] = float(w[low[0]])
        info["low_power"] = float(p[low[0]])
    return info


def _pulse_job(cfg, length, energy):
    return _pulse_single(cfg, length, energy)


def _pulse_outputs(res: RunResult, cfg, r) -> dict:
    tag = _tag(r["energy"], r["length"])
    out, inc, pulse, grid = r["result"], r["inc"], r["pulse"], r["grid"]
    dmap = out.density
    row_dt = dmap.times[1] - dmap.times[0] if len(dmap.times) > 1 else r["dt"]
    _raster(res, cfg, f"density_{tag}.csv", dmap, row_dt, dmap.positions[1] - dmap.positions[0]
            if len(dmap.positions) > 1 else grid.spacing)
    sp_cfg = cfg["spectrum"]
    summary = {"dt_fs": r["dt"], "t_end_fs": r["t_end"], "sites": grid.count,
               "omega0_per_fs": pulse.omega0, "omega_k_per_fs": inc.omega,
               "timings_s": {k: float(v) for k, v in out.timings.items()}}
    for canon, phys in zip(out.canonical, out.physical):
        px = f"x{canon.probe_x:g}nm"
        _write(res, f"trace_{tag}_{px}.csv", ["t_fs", "j_nm_per_fs", "j_phys_nm_per_fs"],
               [canon.times, canon.values, phys.values])
        spec = power_spectrum(phys, inc.velocity if sp_cfg["baseline"] else None,
                              sp_cfg["window"], sp_cfg["pad_factor"])
        _write(res, f"spectrum_{tag}_{px}.csv", ["omega_per_fs", "power"],
               [spec.omegas, spec.power])
        summary[px] = analyse_spectrum(spec, pulse, inc, sp_cfg["peak_prominence_decades"])
    return summary


def run_pulse(cfg) -> RunResult:
    """Pulse runs over every (length, energy) pair: raster, probe traces, spectra."""
    _need(cfg, "pulse")
    res = RunResult("pulse", _out(cfg))
    jobs = [(cfg, L, e) for L in cfg["pulse"]["length_nm"] for e in cfg["incident"]["energy_meV"]]
    for r in _map(_pulse_job, jobs, cfg["run"]["workers"]):
        res.summary[_tag(r["energy"], r["length"])] = _pulse_outputs(res, cfg, r)
    _pulse_profiles(res, cfg)
    return _finish(res, cfg)


def _pulse_profiles(res: RunResult, cfg):
    for L in cfg["pulse"]["length_nm"]:
        pulse = pulse_from(cfg, L)
        x = pulse.x_start + np.linspace(-0.25 * L, 1.25 * L, 1201)
        t = np.linspace(0.0, pulse.tau, 2001)
        _write(res, f"pulse_spatial_L{L:g}nm.csv", ["x_nm", "envelope"], [x, pulse.spatial(x)])
        _write(res, f"pulse_temporal_L{L:g}nm.csv", ["t_fs", "A_V_fs_per_nm"],
               [t, vector_potential(pulse, pulse.x_start + 0.5 * L, t)])


def run_superpose(cfg) -> RunResult:
    """Per-energy probe currents for one pulse and their weighted sum."""
    _need(cfg, "pulse")
    weights = cfg["superpose"]["weights"]
    if weights is None:
        raise ConfigError("superpose needs superpose.weights, one per incident energy")
    lengths = cfg["pulse"]["length_nm"]
    if len(lengths) != 1:
        raise ConfigError("superpose works on a single pulse length")
    L = lengths[0]
    res = RunResult("superpose", _out(cfg))
    shared = copy.deepcopy(cfg)
    if shared["run"]["t_end_fs"] is None:
        # one end time for all energies: long enough for the slowest
        ctx = context_from(cfg)
        slowest = incident_for(ctx, min(cfg["incident"]["energy_meV"])).velocity
        x_start = cfg["pulse"]["x_start_nm"]
        reach = max(cfg["run"]["probes_nm"] or [x_start + 2.0 * L]) - x_start
        shared["run"]["t_end_fs"] = pulse_from(cfg, L).tau + 2.0 * reach / slowest
    jobs = [(shared, L, e) for e in cfg["incident"]["energy_meV"]]
    runs = _map(_pulse_job, jobs, cfg["run"]["workers"])
    steps = {round(r["dt"], 15) for r in runs}
    if len(steps) != 1 or len({r["result"].canonical[0].times.size for r in runs}) != 1:
        raise ConfigError("superposed runs need a common time grid; set run.dt_fs and run.t_end_fs")
    for r in runs:
        res.summary[_tag(r["energy"], L)] = _pulse_outputs(res, shared, r)
    n_probes = len(runs[0]["result"].physical)
    for j in range(n_probes):
        total = superpose_currents([r["result"].physical[j] for r in runs], weights)
        _write(res, f"superposed_L{L:g}nm_x{total.probe_x:g}nm.csv", ["t_fs", "j_nm_per_fs"],
               [total.times, total.values])
    return _finish(res, cfg)


RUNNERS = {
    "static-scan": run_static_scan,
    "calibrate": run_calibrate,
    "switch": run_switch,
    "pulse": run_pulse,
    "superpose": run_superpose,
}


def run(verb: str, cfg: dict) -> RunResult:
    try:
        runner = RUNNERS[verb]
    except KeyError:
        raise ConfigError(f"unknown verb {verb!r}")
    try:
        return runner(cfg)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
