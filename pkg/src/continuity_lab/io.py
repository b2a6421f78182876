"""Profile serialization and deterministic table writers.

Binary layout ("CALU", little-endian):

    4s   magic b"CALU"
    i8   version
    i8   N, n, k
    f8   a, b
    -- version 2 only --
    f8   stretch
    i8   cluster (0 = both ends, 1 = sigma = 0 only)
    f8 x N  psi

Version 1 is written for uniform grids, version 2 when the grid is mapped.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .profile import Grid, RadialProfile

MAGIC = b"CALU"
_HEAD_V1 = struct.Struct("<4sqqqqdd")
_HEAD_V2_EXTRA = struct.Struct("<dq")
_CLUSTER_CODES = {"both": 0, "left": 1}


class ProfileFormatError(ValueError):
    pass


def save_binary(path, u: RadialProfile, n: int) -> None:
    g = u.grid
    version = 1 if g.stretch == 0.0 else 2
    parts = [_HEAD_V1.pack(MAGIC, version, g.N, n, g.k, u.a, u.b)]
    if version == 2:
        parts.append(_HEAD_V2_EXTRA.pack(float(g.stretch), _CLUSTER_CODES[g.cluster]))
    parts.append(np.asarray(u.psi, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_binary(path) -> tuple[RadialProfile, int]:
    """Returns (profile, n)."""
    data = Path(path).read_bytes()
    if len(data) < _HEAD_V1.size:
        raise ProfileFormatError("file too short for a CALU header")
    magic, version, N, n, k, a, b = _HEAD_V1.unpack_from(data, 0)
    if magic != MAGIC:
        raise ProfileFormatError(f"bad magic {magic!r}")
    offset = _HEAD_V1.size
    stretch, cluster = 0.0, "both"
    if version == 2:
        stretch, code = _HEAD_V2_EXTRA.unpack_from(data, offset)
        offset += _HEAD_V2_EXTRA.size
        cluster = {v: c for c, v in _CLUSTER_CODES.items()}.get(code)
        if cluster is None:
            raise ProfileFormatError(f"unknown cluster code {code}")
    elif version != 1:
        raise ProfileFormatError(f"unsupported version {version}")
    if len(data) != offset + 8 * N:
        raise ProfileFormatError(f"expected {N} psi values, file has {(len(data) - offset) / 8:g}")
    psi = np.frombuffer(data, dtype="<f8", count=N, offset=offset).astype(float)
    return RadialProfile(Grid(N, k, stretch, cluster), a, b, psi), n


def profile_to_dict(u: RadialProfile, n: int, **extra) -> dict:
    g = u.grid
    doc = {"n": n, "k": g.k, "a": u.a, "b": u.b, "N": g.N,
           "stretch": float(g.stretch), "cluster": g.cluster}
    doc.update(extra)
    doc["psi"] = [float(x) for x in u.psi]
    return doc


def profile_from_dict(doc: dict) -> tuple[RadialProfile, int]:
    try:
        grid = Grid(int(doc["N"]), int(doc["k"]), float(doc.get("stretch", 0.0)),
                    doc.get("cluster", "both"))
        return RadialProfile(grid, float(doc["a"]), float(doc["b"]), np.array(doc["psi"])), int(doc["n"])
    except (KeyError, TypeError) as exc:
        raise ProfileFormatError(f"malformed profile document: {exc}") from exc


def save_json(path, u: RadialProfile, n: int, **extra) -> None:
    Path(path).write_text(json.dumps(profile_to_dict(u, n, **extra)) + "\n", encoding="utf-8")


def load_json(path) -> tuple[RadialProfile, int, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    u, n = profile_from_dict(doc)
    return u, n, {k: v for k, v in doc.items() if k != "psi"}


def load_profile(path) -> tuple[RadialProfile, int, dict]:
    """Either format, chosen by extension; binary files carry no extra fields."""
    path = Path(path)
    if path.suffix == ".bin":
        u, n = load_binary(path)
        return u, n, {}
    return load_json(path)


def fmt(x) -> str:
    """Shortest round-tripping text for numbers; stable across runs."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    return obj


def write_json(path, doc) -> None:
    """Sorted keys and no timestamps, so identical inputs give identical bytes."""
    Path(path).write_text(json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")
