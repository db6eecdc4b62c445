"""Atomic file output: snapshot binaries, CSV tables and JSON sidecars.

Snapshot layout: b"KRG1", uint32 d, uint32 N per axis, uint32 count, then
count * prod(N) little-endian float64 values in row-major order.  Times,
run metadata, config hash and schema version go to ``<file>.json``.
"""
from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
import time
from pathlib import Path

import numpy as np

from .errors import InputValidationError
from .solver import GridSpec, SolutionField

MAGIC = b"KRG1"
SCHEMA_VERSION = 1


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode())


def fmt(v) -> str:
    """Deterministic cell text: shortest round-trip repr for floats."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def csv_text(header, rows, config_hash: str = "", schema_version: int = SCHEMA_VERSION) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version={schema_version} config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, config_hash: str = "", schema_version: int = SCHEMA_VERSION) -> Path:
    return atomic_write_text(path, csv_text(header, rows, config_hash, schema_version))


def read_csv(path):
    """(header comment fields, header, rows as strings)."""
    lines = Path(path).read_text().splitlines()
    info = {}
    if lines and lines[0].startswith("#"):
        info = dict(kv.split("=", 1) for kv in lines[0][1:].split())
        lines = lines[1:]
    rows = list(csv.reader(lines))
    return info, rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def snapshot_bytes(snapshots: np.ndarray) -> bytes:
    arr = np.asarray(snapshots, dtype="<f8")
    count, shape = arr.shape[0], arr.shape[1:]
    header = MAGIC + struct.pack(f"<{len(shape) + 2}I", len(shape), *shape, count)
    return header + np.ascontiguousarray(arr).tobytes()


def write_snapshots(path, solution: SolutionField, config_hash: str = "",
                    schema_version: int = SCHEMA_VERSION) -> Path:
    path = Path(path)
    atomic_write_bytes(path, snapshot_bytes(solution.snapshots))
    side = {
        "schema_version": schema_version,
        "config_hash": config_hash,
        "times": [float(t) for t in solution.times],
        "meta": _jsonable(solution.meta),
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    atomic_write_text(sidecar_path(path), json.dumps(side, indent=1, sort_keys=True))
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def parse_snapshot_bytes(data: bytes) -> np.ndarray:
    if data[:4] != MAGIC:
        raise InputValidationError("not a snapshot file (bad magic)")
    (d,) = struct.unpack_from("<I", data, 4)
    if d not in (1, 2, 3):
        raise InputValidationError(f"implausible dimension {d} in snapshot header")
    dims = struct.unpack_from(f"<{d + 1}I", data, 8)
    shape, count = dims[:d], dims[d]
    offset = 8 + 4 * (d + 1)
    n = count * int(np.prod(shape))
    if len(data) != offset + 8 * n:
        raise InputValidationError("snapshot payload length does not match header")
    return np.frombuffer(data, dtype="<f8", offset=offset).reshape((count,) + tuple(shape)).astype(float)


def read_snapshots(path) -> SolutionField:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputValidationError(f"cannot read snapshot file {path}: {exc}") from exc
    snaps = parse_snapshot_bytes(data)
    side = {}
    if sidecar_path(path).exists():
        side = json.loads(sidecar_path(path).read_text())
    meta = side.get("meta", {})
    meta["config_hash"] = side.get("config_hash", "")
    nx = snaps.shape[1]
    grid = GridSpec(d=snaps.ndim - 1, nx=nx, box=float(meta.get("box", 1.0)),
                    T=float(meta.get("T", 1.0)), cfl=float(meta.get("cfl", 0.4)),
                    dt=float(meta.get("dt", 1.0)), steps=int(meta.get("steps", 1)))
    times = np.asarray(side.get("times", np.arange(snaps.shape[0], dtype=float)))
    return SolutionField(grid=grid, times=times, snapshots=snaps, meta=meta)
