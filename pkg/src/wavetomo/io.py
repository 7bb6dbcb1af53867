"""WTF1 binary fields, JSON sidecars, CSV tables and PGM slices."""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import UsageError
from .grid import KINDS, Box, Face, ScalarField

MAGIC = b"WTF1"


def write_wtf(path, field: ScalarField, T, lengths, R, meta=None):
    """Write ``field`` as WTF1 plus ``<path>.json`` with the box and extra metadata."""
    path = Path(path)
    values = np.ascontiguousarray(field.values)
    is_complex = np.iscomplexobj(values)
    head = MAGIC + struct.pack("<BBB", KINDS.index(field.kind), int(is_complex), values.ndim)
    head += struct.pack(f"<{values.ndim}Q", *values.shape)
    lengths = tuple(float(v) for v in lengths)
    head += struct.pack(f"<{2 + len(lengths)}d", float(T), *lengths, float(R))
    if is_complex:
        body = values.astype("<c16").view("<f8").tobytes()
    else:
        body = values.astype("<f8").tobytes()
    path.write_bytes(head + body)
    side = {
        "origin": list(field.box.origin),
        "spacing": list(field.box.spacing),
        "n_lengths": len(lengths),
        "face": field.face.label if field.face is not None else None,
        "time": field.time,
    }
    if meta:
        side["meta"] = meta
    Path(str(path) + ".json").write_text(json.dumps(side, indent=1, sort_keys=True) + "\n")
    return path


def read_wtf(path):
    """Return (field, header dict).  The sidecar supplies the box origin/spacing."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise UsageError(f"{path} is not a WTF1 file")
    kind, cplx, ndim = struct.unpack_from("<BBB", data, 4)
    pos = 7
    dims = struct.unpack_from(f"<{ndim}Q", data, pos)
    pos += 8 * ndim
    side_path = Path(str(path) + ".json")
    side = json.loads(side_path.read_text()) if side_path.exists() else {}
    nl = side.get("n_lengths", ndim - 1 if KINDS[kind] == "space_time" else ndim)
    meta = struct.unpack_from(f"<{2 + nl}d", data, pos)
    pos += 8 * (2 + nl)
    count = int(np.prod(dims))
    if cplx:
        vals = np.frombuffer(data, dtype="<f8", count=2 * count, offset=pos).view("<c16")
    else:
        vals = np.frombuffer(data, dtype="<f8", count=count, offset=pos)
    vals = vals.reshape(dims).copy()
    origin = side.get("origin", [0.0] * ndim)
    spacing = side.get("spacing", [1.0] * ndim)
    face = Face.parse(side["face"]) if side.get("face") else None
    field = ScalarField(Box(origin, spacing, dims), vals, KINDS[kind], face=face, time=side.get("time"))
    header = {"T": meta[0], "L": list(meta[1:-1]), "R": meta[-1], "meta": side.get("meta", {})}
    return field, header


def fmt(x):
    """Shortest round-trip text for numbers; keeps CSV output reproducible."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_pgm(path, image):
    """8-bit binary PGM of a 2-D real array, min/max recorded in a sidecar."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise UsageError("PGM slices must be 2-D")
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        scaled = np.round(255.0 * (img - lo) / (hi - lo))
    else:
        scaled = np.zeros_like(img)
    raw = scaled.astype(np.uint8)
    path = Path(path)
    rows, cols = raw.shape
    path.write_bytes(f"P5\n{cols} {rows}\n255\n".encode("ascii") + raw.tobytes())
    Path(str(path) + ".json").write_text(json.dumps({"min": lo, "max": hi}, sort_keys=True) + "\n")
    return path


def read_pgm(path):
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise UsageError("not a binary PGM")
    cols, rows = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=rows * cols).reshape(rows, cols)


def sha256(path):
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
