"""File formats: CSV tables, wavefunction checkpoints, YAML documents.

Every writer goes through a temporary file in the target directory followed
by an atomic rename, so readers never observe half-written output.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np
import yaml

FLOAT_FORMAT = "%.8e"  # nine significant digits


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def _atomic_write(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_umask())  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_csv(header, columns) -> str:
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    if len(header) != len(cols):
        raise ValueError(f"{len(header)} column names for {len(cols)} columns")
    n = cols[0].size if cols else 0
    if any(c.size != n for c in cols):
        raise ValueError("columns differ in length")
    lines = [",".join(header)]
    if n:
        table = np.column_stack(cols)
        row = ",".join([FLOAT_FORMAT] * len(cols))
        lines.extend(row % tuple(r) for r in table)
    return "\n".join(lines) + "\n"


def write_csv(path, header, columns) -> Path:
    """Write equal-length numeric ``columns`` under ``header`` names."""
    return _atomic_write(path, format_csv(header, columns).encode("ascii"))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    if len(lines) == 1:
        return header, np.zeros((0, len(header)))
    return header, np.loadtxt(lines[1:], delimiter=",", ndmin=2)


def write_raster(path, density_map, time_stride: int = 1, site_stride: int = 1) -> Path:
    """Long-format (t_fs, x_nm, rho) table of a density map, optionally thinned."""
    t = np.asarray(density_map.times)[::time_stride]
    x = np.asarray(density_map.positions)[::site_stride]
    rho = np.asarray(density_map.rho)[::time_stride, ::site_stride]
    tt, xx = np.meshgrid(t, x, indexing="ij")
    return write_csv(path, ["t_fs", "x_nm", "rho"], [tt, xx, rho])


def read_raster(path):
    """Inverse of :func:`write_raster`: (times, positions, rho[t, x])."""
    _, data = read_csv(path)
    times = np.unique(data[:, 0])
    positions = np.unique(data[:, 1])
    rho = data[:, 2].reshape(times.size, positions.size)
    return times, positions, rho


# checkpoint: int64 site count, float64 time, then re/im pairs, little-endian
_HEAD = struct.Struct("<qd")


def write_checkpoint(path, delta, time: float) -> Path:
    delta = np.asarray(delta, dtype=np.complex128)
    body = np.empty(2 * delta.size, dtype="<f8")
    body[0::2] = delta.real
    body[1::2] = delta.imag
    return _atomic_write(path, _HEAD.pack(delta.size, float(time)) + body.tobytes())


def read_checkpoint(path) -> tuple[np.ndarray, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    count, time = _HEAD.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEAD.size)
    if body.size != 2 * count:
        raise ValueError(f"{path}: expected {count} sites, found {body.size / 2:g}")
    return body[0::2] + 1j * body[1::2], time


def dump_yaml(data) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False)


def write_yaml(path, data) -> Path:
    return _atomic_write(path, dump_yaml(data).encode("utf-8"))


def read_yaml(path):
    with open(path) as fh:
        return yaml.safe_load(fh)
