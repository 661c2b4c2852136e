"""Legacy VTK structured-points output, ledger CSV and run manifests.

Snapshots use the classic ASCII structured-points layout with one scalar
block each for rho and chi and one vector block each for u and B, floats
printed with 9 significant digits.  Values are written x-fastest as the
format requires.  The reader accepts exactly what the writer emits, which
is also how snapshot initial data enter a run.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .energy import LEDGER_COLUMNS, EnergyLedger
from .grid import Grid, ScalarField, VectorField
from .rigid import Box, RigidState, Sphere
from .state import SimState

__all__ = [
    "write_snapshot",
    "read_snapshot",
    "LedgerWriter",
    "TrajectoryManifest",
]

_FLOAT = "%.9g"


def _format_scalar(name: str, values: np.ndarray) -> str:
    out = [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
    out.extend(_FLOAT % v for v in values.ravel(order="F"))
    return "\n".join(out)


def _format_vector(name: str, values: np.ndarray) -> str:
    out = [f"VECTORS {name} double"]
    vx = values[0].ravel(order="F")
    vy = values[1].ravel(order="F")
    vz = values[2].ravel(order="F")
    out.extend(
        f"{_FLOAT % a} {_FLOAT % b} {_FLOAT % c}" for a, b, c in zip(vx, vy, vz)
    )
    return "\n".join(out)


def write_snapshot(path: str | Path, state: SimState, title: str = "penalmhd snapshot") -> None:
    grid = state.rho.grid
    n, h = grid.n, grid.h
    parts = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {n} {n} {n}",
        "ORIGIN 0 0 0",
        f"SPACING {_FLOAT % h} {_FLOAT % h} {_FLOAT % h}",
        f"POINT_DATA {n**3}",
        _format_scalar("rho", state.rho.values),
        _format_scalar("chi", state.chi.values),
        _format_vector("u", state.u.values),
        _format_vector("B", state.B.values),
    ]
    Path(path).write_text("\n".join(parts) + "\n")


def read_snapshot(path: str | Path) -> tuple[Grid, dict]:
    """Read a snapshot written by :func:`write_snapshot`.

    Returns the grid and a dict with ScalarFields rho, chi and
    VectorFields u, B.
    """
    lines = Path(path).read_text().splitlines()
    if len(lines) < 8 or lines[0] != "# vtk DataFile Version 3.0":
        raise ValueError(f"{path}: not a legacy VTK snapshot")
    if lines[2] != "ASCII" or lines[3] != "DATASET STRUCTURED_POINTS":
        raise ValueError(f"{path}: unexpected VTK layout")
    dims = lines[4].split()
    if dims[0] != "DIMENSIONS":
        raise ValueError(f"{path}: missing DIMENSIONS")
    n = int(dims[1])
    if dims[2] != str(n) or dims[3] != str(n):
        raise ValueError(f"{path}: grid must be cubic")
    spacing = lines[6].split()
    h = float(spacing[1])
    grid = Grid(n, h * n)
    count = n**3
    fields: dict = {}
    i = 8
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        head = line.split()
        if head[0] == "SCALARS":
            name = head[1]
            i += 2  # skip LOOKUP_TABLE
            vals = np.array([float(lines[i + k]) for k in range(count)])
            i += count
            fields[name] = ScalarField(
                grid, vals.reshape((n, n, n), order="F")
            )
        elif head[0] == "VECTORS":
            name = head[1]
            i += 1
            rows = np.array(
                [[float(tok) for tok in lines[i + k].split()] for k in range(count)]
            )
            i += count
            comps = [rows[:, a].reshape((n, n, n), order="F") for a in range(3)]
            fields[name] = VectorField(grid, np.stack(comps))
        else:
            raise ValueError(f"{path}: unexpected block {line!r}")
    for required in ("rho", "chi", "u", "B"):
        if required not in fields:
            raise ValueError(f"{path}: snapshot lacks field {required!r}")
    return grid, fields


class LedgerWriter:
    """Streams one CSV row per step, 17 significant digits."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh: io.TextIOBase | None = self.path.open("w")
        self._fh.write("step,time," + ",".join(LEDGER_COLUMNS) + "\n")

    def write(self, step: int, time: float, ledger: EnergyLedger) -> None:
        assert self._fh is not None
        row = [str(step), "%.17g" % time]
        row.extend("%.17g" % v for v in ledger.row())
        self._fh.write(",".join(row) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class TrajectoryManifest:
    """Body poses and snapshot bookkeeping for a run directory.

    One line per stored snapshot: step, time, filename, then the pose
    (center, rotation rows, velocity, angular velocity).  The header
    records grid and stepping so interpolation can be reconstructed
    offline.
    """

    def __init__(self, n: int, L: float, dt: float, cadence: int):
        self.n, self.L, self.dt, self.cadence = n, L, dt, cadence
        self.rows: list[str] = []

    def add(self, step: int, time: float, filename: str, body: RigidState) -> None:
        nums = [
            *body.center,
            *body.rotation.ravel(),
            *body.velocity,
            *body.angular_velocity,
        ]
        shape = (
            f"sphere {_FLOAT % body.shape.radius}"
            if isinstance(body.shape, Sphere)
            else "box " + " ".join(_FLOAT % e for e in body.shape.half_extents)
        )
        self.rows.append(
            f"{step} {'%.17g' % time} {filename} {shape} "
            + " ".join("%.17g" % v for v in nums)
        )

    def write(self, path: str | Path) -> None:
        head = f"# penalmhd trajectory n={self.n} L={'%.17g' % self.L} dt={'%.17g' % self.dt} cadence={self.cadence}"
        Path(path).write_text("\n".join([head, *self.rows]) + "\n")

    @staticmethod
    def read(path: str | Path) -> tuple[dict, list[dict]]:
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("# penalmhd trajectory"):
            raise ValueError(f"{path}: not a trajectory manifest")
        meta = {}
        for tok in lines[0].split()[3:]:
            key, val = tok.split("=")
            meta[key] = int(val) if key in ("n", "cadence") else float(val)
        entries = []
        for line in lines[1:]:
            if not line.strip():
                continue
            toks = line.split()
            step, time, filename, shape_kind = int(toks[0]), float(toks[1]), toks[2], toks[3]
            if shape_kind == "sphere":
                shape: Sphere | Box = Sphere(float(toks[4]))
                rest = [float(t) for t in toks[5:]]
            else:
                shape = Box((float(toks[4]), float(toks[5]), float(toks[6])))
                rest = [float(t) for t in toks[7:]]
            body = RigidState(
                shape,
                center=np.array(rest[0:3]),
                rotation=np.array(rest[3:12]).reshape(3, 3),
                velocity=np.array(rest[12:15]),
                angular_velocity=np.array(rest[15:18]),
            )
            entries.append({"step": step, "time": time, "file": filename, "body": body})
        return meta, entries
