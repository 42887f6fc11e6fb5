"""Binary snapshots and CSV diagnostics.

Snapshot layout (little-endian)::

    magic  b"MPF1"
    u32    version (1)
    u32    dim, N, n
    f64    t
    f64    weights[n], masses[n]
    f64    rho[n][N^dim]            row-major node order
    f64    u[n][dim][N^dim]
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .dynamics import DiagnosticsRow, FlowState
from .errors import SnapshotError
from .spectral import Grid
from .state import MultiDensity, MultiVelocity, QuadratureSet

MAGIC = b"MPF1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


def snapshot_bytes(state: FlowState) -> bytes:
    g = state.grid
    quad = state.rho.quad
    head = _HEADER.pack(MAGIC, VERSION, g.dim, g.n, quad.n, float(state.t))
    body = [
        np.ascontiguousarray(a, dtype="<f8").tobytes()
        for a in (quad.weights, quad.masses, state.rho.rho, state.u.u)
    ]
    return head + b"".join(body)


def write_snapshot(state: FlowState, path) -> None:
    Path(path).write_bytes(snapshot_bytes(state))


def parse_snapshot(data: bytes) -> FlowState:
    if len(data) < _HEADER.size:
        raise SnapshotError(f"snapshot truncated: {len(data)} bytes is shorter than the header")
    magic, version, dim, n_pts, n, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    try:
        grid = Grid(dim, n_pts)
    except Exception as exc:
        raise SnapshotError(f"invalid grid in snapshot header: {exc}") from exc
    if n < 1:
        raise SnapshotError("snapshot has no phases")
    cells = n_pts**dim
    counts = (n, n, n * cells, n * dim * cells)
    expect = _HEADER.size + 8 * sum(counts)
    if len(data) != expect:
        raise SnapshotError(f"snapshot length {len(data)} does not match {expect} bytes implied by the header")
    off = _HEADER.size
    arrays = []
    for c in counts:
        arrays.append(np.frombuffer(data, dtype="<f8", count=c, offset=off).astype(float))
        off += 8 * c
    w, c, rho, u = arrays
    quad = QuadratureSet(w, c)
    dens = MultiDensity(grid, quad, rho.reshape((n, *grid.shape)))
    vel = MultiVelocity(grid, quad, u.reshape((n, dim, *grid.shape)), dens)
    return FlowState(t, dens, vel)


def read_snapshot(path) -> FlowState:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    return parse_snapshot(data)


def format_float(x: float) -> str:
    return f"{x:.17g}"


class DiagnosticsWriter:
    """Append-only CSV writer with a fixed header."""

    def __init__(self, path, n: int):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(DiagnosticsRow.header(n))
        self.last_t = None

    def write(self, row: DiagnosticsRow) -> None:
        if self.last_t is not None and not row.t > self.last_t:
            raise ValueError("diagnostics rows must be strictly increasing in t")
        self._w.writerow([format_float(v) for v in row.values()])
        self._fh.flush()
        self.last_t = row.t

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(x) for x in r] for r in body]).reshape(len(body), len(header))
