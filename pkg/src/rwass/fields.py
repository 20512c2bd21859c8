"""Regular-grid scalar fields: container, file formats, neighborhoods.

Grids are 1-, 2-, or 3-dimensional with unit spacing.  Vertices are
addressed by flat row-major index (last axis fastest), which is also the
tie-break order of the symbolic perturbation used everywhere downstream.
"""

from __future__ import annotations

import csv
import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, InputError

MAGIC = b"RSF1"

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_NAMES = {"f32": 0, "f64": 1}


@dataclass
class ScalarGrid:
    """Scalar values sampled on a regular grid.

    ``values`` is kept flat (length ``prod(dims)``) so vertex ids double as
    array indices; use :meth:`shaped` for an axis-shaped view.
    """

    dims: tuple[int, ...]
    values: np.ndarray
    name: str = field(default="")
    spacing: tuple[float, ...] = field(default=None)

    def __post_init__(self):
        self.dims = tuple(int(e) for e in self.dims)
        if not 1 <= len(self.dims) <= 3:
            raise ContractError(f"grid must have 1..3 axes, got {len(self.dims)}")
        if any(e < 1 for e in self.dims):
            raise ContractError(f"grid extents must be positive, got {self.dims}")
        if self.spacing is None:
            self.spacing = (1.0,) * len(self.dims)
        else:
            self.spacing = tuple(float(s) for s in self.spacing)
            if len(self.spacing) != len(self.dims) or any(
                s <= 0 for s in self.spacing
            ):
                raise ContractError(f"bad spacing {self.spacing} for dims {self.dims}")
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        n = int(np.prod(self.dims))
        if vals.size != n:
            raise ContractError(
                f"value count {vals.size} does not match extents {self.dims}"
            )
        if not np.all(np.isfinite(vals)):
            raise InputError("grid values must be finite")
        self.values = vals

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def shaped(self) -> np.ndarray:
        return self.values.reshape(self.dims)

    def value_range(self) -> float:
        return float(self.values.max() - self.values.min())


def vertex_coords(grid: ScalarGrid, v: int) -> tuple[int, ...]:
    """Axis coordinates of flat vertex id ``v``."""
    return tuple(int(c) for c in np.unravel_index(v, grid.dims))


def vertex_index(grid: ScalarGrid, coords) -> int:
    """Flat vertex id for axis coordinates."""
    return int(np.ravel_multi_index(tuple(int(c) for c in coords), grid.dims))


def sweep_order(grid: ScalarGrid, kind: str) -> np.ndarray:
    """Total vertex order used by the sweep.

    ``kind="min"`` sorts ascending by (value, vertex id); ``kind="max"``
    is exactly that order reversed, so both directions share one symbolic
    perturbation and ties never depend on sort internals.
    """
    order = np.argsort(grid.values, kind="stable")
    if kind == "max":
        return order[::-1].copy()
    if kind != "min":
        raise ContractError(f"kind must be 'min' or 'max', got {kind!r}")
    return order


def freudenthal_offsets(ndim: int) -> np.ndarray:
    """Neighbor offsets of the Freudenthal triangulation, shape (k, ndim).

    These are the nonzero 0/1 vectors and their negations: 2 offsets in
    1D, 6 in 2D, 14 in 3D.  The listing order is fixed so every consumer
    iterates neighborhoods identically.
    """
    if not 1 <= ndim <= 3:
        raise ContractError(f"ndim must be 1..3, got {ndim}")
    pos = [off for off in itertools.product((0, 1), repeat=ndim) if any(off)]
    offs = pos + [tuple(-c for c in off) for off in pos]
    return np.array(offs, dtype=np.int64)


def neighbor_matrix(grid: ScalarGrid) -> np.ndarray:
    """Dense neighbor table, shape (size, k), -1 where the offset leaves
    the domain."""
    dims = grid.dims
    offs = freudenthal_offsets(grid.ndim)
    coords = np.stack(
        np.unravel_index(np.arange(grid.size), dims), axis=1
    )  # (n, d)
    out = np.empty((grid.size, len(offs)), dtype=np.int64)
    for j, off in enumerate(offs):
        shifted = coords + off
        ok = np.all((shifted >= 0) & (shifted < np.array(dims)), axis=1)
        idx = np.full(grid.size, -1, dtype=np.int64)
        if ok.any():
            idx[ok] = np.ravel_multi_index(shifted[ok].T, dims)
        out[:, j] = idx
    return out


def neighbors(grid: ScalarGrid, v: int) -> list[int]:
    """Freudenthal neighbors of one vertex, domain-clipped."""
    if not 0 <= v < grid.size:
        raise ContractError(f"vertex id {v} out of range for grid of size {grid.size}")
    base = np.array(vertex_coords(grid, v))
    dims = np.array(grid.dims)
    out = []
    for off in freudenthal_offsets(grid.ndim):
        c = base + off
        if np.all((c >= 0) & (c < dims)):
            out.append(int(np.ravel_multi_index(c, grid.dims)))
    return out


def save_rsf(grid: ScalarGrid, path, dtype: str = "f64") -> None:
    """Write the binary grid format.

    Layout: magic ``RSF1``, u8 axis count, per-axis u32 extents, u8 value
    type (0 = f32, 1 = f64), then the values little-endian row-major with
    the last axis fastest.
    """
    if dtype not in _DTYPE_NAMES:
        raise ContractError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
    code = _DTYPE_NAMES[dtype]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", grid.ndim))
        fh.write(struct.pack(f"<{grid.ndim}I", *grid.dims))
        fh.write(struct.pack("<B", code))
        fh.write(np.ascontiguousarray(grid.values, dtype=_DTYPE_CODES[code]).tobytes())


def load_rsf(path) -> ScalarGrid:
    """Read the binary grid format; errors name the failing byte offset."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise InputError(f"{path}: bad magic at byte 0, expected {MAGIC!r}")
    if len(raw) < 5:
        raise InputError(f"{path}: truncated header at byte 4")
    ndim = raw[4]
    if not 1 <= ndim <= 3:
        raise InputError(f"{path}: axis count {ndim} at byte 4 not in 1..3")
    head = 5 + 4 * ndim
    if len(raw) < head + 1:
        raise InputError(f"{path}: truncated extent list at byte 5")
    dims = struct.unpack(f"<{ndim}I", raw[5:head])
    if any(e < 1 for e in dims):
        raise InputError(f"{path}: zero extent at byte 5")
    code = raw[head]
    if code not in _DTYPE_CODES:
        raise InputError(f"{path}: unknown value type {code} at byte {head}")
    dt = _DTYPE_CODES[code]
    payload = head + 1
    n = int(np.prod(dims))
    expect = n * dt.itemsize
    if len(raw) - payload != expect:
        raise InputError(
            f"{path}: payload at byte {payload} holds {len(raw) - payload} bytes, "
            f"expected {expect}"
        )
    vals = np.frombuffer(raw, dtype=dt, count=n, offset=payload).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        off = payload + int(bad[0]) * dt.itemsize
        raise InputError(f"{path}: non-finite value at byte {off}")
    name = getattr(path, "stem", None) or str(path)
    return ScalarGrid(dims=tuple(dims), values=vals, name=name)


def load_csv(path) -> ScalarGrid:
    """Read a 2D grid from CSV; rows map to the first axis."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no data rows")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise InputError(
                f"{path}: row {i + 1} has {len(row)} columns, expected {width}"
            )
    vals = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise InputError(f"{path}: non-finite value")
    name = getattr(path, "stem", None) or str(path)
    return ScalarGrid(dims=vals.shape, values=vals.reshape(-1), name=name)


def synth_hills(dims, hills=None, seed: int = 0, n_hills: int = 3) -> ScalarGrid:
    """Sum of Gaussian bumps on a grid.

    ``hills`` is a list of ``(center, height, width)`` with centers in index
    coordinates; when omitted, ``n_hills`` bumps are drawn from ``seed``.
    Deterministic for fixed arguments.
    """
    dims = tuple(int(e) for e in dims)
    if hills is None:
        rng = np.random.default_rng(seed)
        span = max(dims)
        hills = []
        for _ in range(n_hills):
            center = tuple(rng.uniform(0, e - 1) if e > 1 else 0.0 for e in dims)
            height = rng.uniform(0.5, 2.0)
            width = rng.uniform(0.1, 0.35) * span
            hills.append((center, height, width))
    axes = np.meshgrid(*[np.arange(e, dtype=np.float64) for e in dims], indexing="ij")
    out = np.zeros(dims, dtype=np.float64)
    for center, height, width in hills:
        center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        if center.size != len(dims):
            raise ContractError(
                f"hill center {tuple(center)} does not match {len(dims)} axes"
            )
        if width <= 0:
            raise ContractError("hill width must be positive")
        d2 = np.zeros(dims, dtype=np.float64)
        for ax, c in zip(axes, center):
            d2 += (ax - c) ** 2
        out += float(height) * np.exp(-d2 / (float(width) ** 2))
    return ScalarGrid(dims=dims, values=out.reshape(-1), name=f"hills-{seed}")


def add_noise(grid: ScalarGrid, eps: float, seed: int = 0) -> ScalarGrid:
    """Uniform noise in [-eps, eps] added pointwise; deterministic per seed."""
    if eps < 0:
        raise ContractError(f"eps must be nonnegative, got {eps}")
    rng = np.random.default_rng(seed)
    noisy = grid.values + rng.uniform(-eps, eps, size=grid.size)
    return ScalarGrid(dims=grid.dims, values=noisy, name=grid.name)
