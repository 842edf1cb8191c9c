"""SVG figures re-rendered from the CSV output of a run.

Nothing here feeds back into computation. Rendering is deterministic: the
SVG hash salt is fixed and no creation date is embedded.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import read_csv, read_raster  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "wiredyn"


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_raster(csv_path, svg_path=None) -> Path:
    times, positions, rho = read_raster(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    mesh = ax.pcolormesh(positions, times, rho, shading="auto", cmap="viridis", rasterized=True)
    fig.colorbar(mesh, ax=ax, label="density")
    ax.set_xlabel("x (nm)")
    ax.set_ylabel("t (fs)")
    return _save(fig, Path(svg_path or Path(csv_path).with_suffix(".svg")))


def plot_columns(csv_path, svg_path=None, logy: bool = False) -> Path:
    """First column against every other column."""
    header, data = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for j in range(1, len(header)):
        y = data[:, j]
        if logy:
            y = np.where(y > 0, y, np.nan)
        ax.plot(data[:, 0], y, lw=1, label=header[j])
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(header[0])
    if len(header) > 2:
        ax.legend()
    else:
        ax.set_ylabel(header[1])
    return _save(fig, Path(svg_path or Path(csv_path).with_suffix(".svg")))


def render_directory(directory) -> list[Path]:
    """Render every recognised CSV file of an output directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    written = []
    for path in sorted(directory.glob("*.csv")):
        name = path.name
        if name.startswith("density_"):
            written.append(plot_raster(path))
        elif name.startswith("spectrum_"):
            written.append(plot_columns(path, logy=True))
        elif name.startswith("calibration"):
            continue
        else:
            written.append(plot_columns(path))
    return written
