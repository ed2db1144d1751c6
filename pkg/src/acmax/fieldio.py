"""Field dump formats: indexed CSV and flat little-endian binary.

Binary layout: a 16-byte header -- magic ``ACMX``, ``uint32 n``,
``uint32 N``, four reserved bytes -- followed by the ``N^{2n}`` float64
values in C order.  CSV carries one row per grid point with the axis
indices followed by the value.  The format is selected by file extension
(``.bin``/``.dat`` vs ``.csv``).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import GridMismatch
from .grid import Grid, ScalarField, make_grid

__all__ = ["write_field", "read_field", "MAGIC"]

MAGIC = b"ACMX"
_HEADER = struct.Struct("<4sII4x")  # magic, n, N, 4 reserved bytes = 16 bytes


def write_field(path, field: ScalarField) -> None:
    """Write a scalar field; format chosen by the file extension."""
    path = Path(path)
    if path.suffix == ".csv":
        _write_csv(path, field)
    else:
        _write_binary(path, field)


def read_field(path, grid: Grid | None = None) -> ScalarField:
    """Read a field dump back; ``grid`` overrides the default grid metadata.

    Dumps store only ``n`` and ``N``; box length and stencil order fall back
    to the defaults unless a grid is supplied (which must match in shape).
    """
    path = Path(path)
    if path.suffix == ".csv":
        return _read_csv(path, grid)
    return _read_binary(path, grid)


def _write_binary(path: Path, field: ScalarField) -> None:
    grid = field.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.half_dim, grid.points_per_axis))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def _read_binary(path: Path, grid: Grid | None) -> ScalarField:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, n, N = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a field dump (bad magic {magic!r})")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if grid is None:
        grid = make_grid(int(n), int(N))
    elif (grid.half_dim, grid.points_per_axis) != (int(n), int(N)):
        raise GridMismatch(f"{path}: dump is n={n}, N={N}")
    return ScalarField(grid, data.reshape(grid.shape).copy())


def _write_csv(path: Path, field: ScalarField) -> None:
    grid = field.grid
    dim = grid.dim
    header = ",".join(f"i{a}" for a in range(dim)) + ",value"
    idx = np.indices(grid.shape).reshape(dim, -1).T
    vals = field.values.reshape(-1, 1)
    table = np.hstack([idx.astype(float), vals])
    fmt = ["%d"] * dim + ["%.17g"]
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt=fmt)


def _read_csv(path: Path, grid: Grid | None) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[-1] != "value" or not header[0].startswith("i"):
        raise ValueError(f"{path}: unexpected CSV header {header}")
    dim = len(header) - 1
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    idx = table[:, :dim].astype(int)
    vals = table[:, dim]
    N = int(idx.max()) + 1
    if grid is None:
        grid = make_grid(dim // 2, N)
    if grid.dim != dim or grid.points_per_axis != N:
        raise GridMismatch(f"{path}: dump is dim={dim}, N={N}")
    out = np.empty(grid.shape)
    out[tuple(idx.T)] = vals
    return ScalarField(grid, out)
