"""
Reading and writing VXS1 snapshot files.

Layout: the magic ``b"VXSNAP01"``, a little-endian uint64 byte count, a UTF-8
JSON header ``{n1, n2, n3, L1, L2, L3, time, fields}``, then one block of
little-endian float64 values per named scalar field, x1 varying fastest.
A velocity snapshot stores ``v1, v2, v3`` and optionally ``p``.
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import SnapshotFormatError
from .fields import GridSpec, ScalarField, VectorField

MAGIC = b"VXSNAP01"
VELOCITY_FIELDS = ("v1", "v2", "v3")


def write_fields(path, grid: GridSpec, time: float, fields: dict):
    """Write named scalar blocks (arrays shaped like the grid) to ``path``."""
    header = dict(grid.to_header(), time=float(time), fields=list(fields))
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name, values in fields.items():
            values = np.asarray(values, dtype=float)
            if values.shape != grid.shape:
                raise SnapshotFormatError(f"field {name!r} has shape {values.shape}")
            fh.write(values.ravel(order="F").astype("<f8").tobytes())


def read_fields(path):
    """Return ``(grid, time, {name: array})`` from a VXS1 file."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {data[:8]!r}")
    if len(data) < 16:
        raise SnapshotFormatError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<Q", data[8:16])
    try:
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
        grid = GridSpec((header["n1"], header["n2"], header["n3"]),
                        (header["L1"], header["L2"], header["L3"]))
        time = float(header["time"])
        names = list(header["fields"])
    except (ValueError, KeyError, TypeError) as exc:
        raise SnapshotFormatError(f"{path}: malformed header ({exc})") from None
    block = grid.size * 8
    offset = 16 + hlen
    expected = offset + block * len(names)
    if len(data) < expected:
        short = names[max(0, len(data) - offset) // block] if len(data) >= offset else names[0]
        raise SnapshotFormatError(
            f"{path}: field {short!r} is truncated (expected {expected} bytes, found {len(data)})")
    if len(data) > expected:
        last = names[-1] if names else "header"
        raise SnapshotFormatError(
            f"{path}: {len(data) - expected} trailing bytes after field {last!r}")
    out = {}
    for i, name in enumerate(names):
        raw = np.frombuffer(data, dtype="<f8", count=grid.size, offset=offset + i * block)
        values = raw.reshape(grid.shape, order="F").astype(float)
        if not np.all(np.isfinite(values)):
            raise SnapshotFormatError(f"{path}: field {name!r} has non-finite values")
        out[name] = values
    return grid, time, out


def write_snapshot(path, v: VectorField, pressure: ScalarField | None = None):
    fields = {name: v.components[i] for i, name in enumerate(VELOCITY_FIELDS)}
    if pressure is not None:
        fields["p"] = pressure.values
    write_fields(path, v.grid, v.time, fields)


def read_snapshot(path):
    """Velocity snapshot and (if stored) pressure from a VXS1 file."""
    grid, time, fields = read_fields(path)
    missing = [n for n in VELOCITY_FIELDS if n not in fields]
    if missing:
        raise SnapshotFormatError(f"{path}: missing velocity fields {missing}")
    v = VectorField(grid, np.stack([fields[n] for n in VELOCITY_FIELDS]), time)
    p = ScalarField(grid, fields["p"], time) if "p" in fields else None
    return v, p


def snapshot_name(index):
    return f"snap_{index:05d}.vxs"


def list_snapshots(directory):
    """VXS1 files in ``directory`` sorted by name."""
    d = Path(directory)
    if not d.is_dir():
        raise SnapshotFormatError(f"{directory}: not a directory")
    files = sorted(p for p in d.iterdir() if p.suffix == ".vxs")
    if not files:
        raise SnapshotFormatError(f"{directory}: no .vxs snapshots")
    return files


def read_series(source):
    """Read a snapshot series from a directory or a list of files, sorted by time."""
    if isinstance(source, (str, os.PathLike)) and Path(source).is_dir():
        files = list_snapshots(source)
    elif isinstance(source, (str, os.PathLike)):
        files = [Path(source)]
    else:
        files = [Path(f) for f in source]
    pairs = [read_snapshot(f) for f in files]
    pairs.sort(key=lambda vp: vp[0].time)
    return [v for v, _ in pairs], [p for _, p in pairs]
