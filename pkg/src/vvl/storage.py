"""File formats: binary field snapshots, CSV tables and JSON reports."""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .field import GridSpec, SpectralField, VelocityField

MAGIC = b"VVL1"
KIND_SCALAR = b"SCAL"
KIND_VECTOR = b"VEC2"
_HEADER = struct.Struct("<4sQ4s")


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(path, f) -> Path:
    """Header (magic, n as uint64 LE, kind tag) then row-major float64 LE planes."""
    path = Path(path)
    if isinstance(f, VelocityField):
        kind, planes = KIND_VECTOR, (f.u_x.values, f.u_y.values)
    else:
        kind, planes = KIND_SCALAR, (f.values,)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, f.grid.n, kind))
        for p in planes:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return path


def read_snapshot(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError("truncated header")
    magic, n, kind = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    planes = {KIND_SCALAR: 1, KIND_VECTOR: 2}.get(kind)
    if planes is None:
        raise SnapshotFormatError(f"unknown kind tag {kind!r}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != planes * n * n:
        raise SnapshotFormatError(f"payload holds {body.size} values, expected {planes * n * n}")
    grid = GridSpec(int(n))
    arrays = body.reshape(planes, n, n).astype(float)
    if planes == 1:
        return SpectralField.from_values(grid, arrays[0])
    return VelocityField.from_values(grid, arrays[0], arrays[1])


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return path


def write_ledger(path, ledger) -> Path:
    return write_csv(path, ledger.COLUMNS, ledger.rows())


def read_ledger(path, nu: float):
    from .solver import RunLedger

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != RunLedger.COLUMNS:
        raise ValueError(f"unexpected ledger header {rows[0]}")
    cols = np.array(rows[1:], dtype=float).reshape(-1, len(RunLedger.COLUMNS)).T
    return RunLedger(nu, *cols)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def write_rate_table(directory, table) -> list[Path]:
    d = Path(directory)
    rows = [(dt, err, "" if o is None else _fmt(o)) for dt, err, o in table.rows()]
    return [write_csv(d / "rates.csv", ("dt", "error", "order_local"), rows),
            write_json(d / "rates.json", table.summary())]


def write_pairing_table(path, rows) -> Path:
    """Rows of (nu, test name, integrated pairing)."""
    return write_csv(path, ("nu", "test", "pairing"), rows)


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
