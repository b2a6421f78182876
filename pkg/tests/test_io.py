import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from continuity_lab import io
from continuity_lab.profile import Grid, RadialProfile

from conftest import smooth_psi


def _profile(N=129, k=1, stretch=0.0, cluster="both", seed=0):
    g = Grid(N, k, stretch, cluster)
    rng = np.random.default_rng(seed)
    return RadialProfile(g, 1.25, 3.5, rng.standard_normal(N) * 1e-3 + smooth_psi(g.sigma))


@pytest.mark.parametrize("stretch,cluster", [(0.0, "both"), (3.0, "both"), (8.0, "left")])
def test_binary_round_trip_is_exact(tmp_path, stretch, cluster):
    u = _profile(stretch=stretch, cluster=cluster)
    io.save_binary(tmp_path / "p.bin", u, 4)
    v, n = io.load_binary(tmp_path / "p.bin")
    assert n == 4 and v.grid == u.grid
    assert v.a == u.a and v.b == u.b
    assert v.psi.tobytes() == u.psi.tobytes()


def test_binary_layout(tmp_path):
    u = _profile(N=65)
    io.save_binary(tmp_path / "p.bin", u, 3)
    data = (tmp_path / "p.bin").read_bytes()
    magic, version, N, n, k, a, b = struct.unpack_from("<4sqqqqdd", data)
    assert (magic, version, N, n, k, a, b) == (b"CALU", 1, 65, 3, 1, 1.25, 3.5)
    assert len(data) == struct.calcsize("<4sqqqqdd") + 8 * 65


def test_binary_rejects_garbage(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"nope")
    with pytest.raises(io.ProfileFormatError):
        io.load_binary(tmp_path / "x.bin")
    u = _profile(N=65)
    io.save_binary(tmp_path / "p.bin", u, 3)
    data = (tmp_path / "p.bin").read_bytes()
    (tmp_path / "short.bin").write_bytes(data[:-8])
    with pytest.raises(io.ProfileFormatError):
        io.load_binary(tmp_path / "short.bin")
    (tmp_path / "magic.bin").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(io.ProfileFormatError):
        io.load_binary(tmp_path / "magic.bin")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k=st.integers(1, 4))
def test_json_round_trip(tmp_path_factory, seed, k):
    path = tmp_path_factory.mktemp("j") / "p.json"
    u = _profile(k=k, seed=seed)
    io.save_json(path, u, 2, t=0.125)
    v, n, extra = io.load_json(path)
    assert n == 2 and extra["t"] == 0.125
    assert np.max(np.abs(v.psi - u.psi)) <= 1e-15
    assert (v.a, v.b, v.grid) == (u.a, u.b, u.grid)


def test_json_document_fields(tmp_path):
    u = _profile(N=65)
    io.save_json(tmp_path / "p.json", u, 3)
    doc = json.loads((tmp_path / "p.json").read_text())
    assert {"n", "k", "a", "b", "N", "psi"} <= set(doc)
    with pytest.raises(io.ProfileFormatError):
        io.profile_from_dict({"n": 3})


def test_csv_is_rfc4180_and_round_trips(tmp_path):
    io.write_csv(tmp_path / "t.csv", ["x", "y"], [[0.1, 1], [1e-300, float("inf")], [True, "a,b"]])
    raw = (tmp_path / "t.csv").read_bytes()
    assert raw.count(b"\r\n") == 4 and b'"a,b"' in raw
    header, rows = io.read_csv(tmp_path / "t.csv")
    assert header == ["x", "y"] and float(rows[0][0]) == 0.1 and float(rows[1][0]) == 1e-300


def test_json_writer_is_deterministic(tmp_path):
    doc = {"b": np.float64(0.1), "a": [np.int64(2), np.bool_(True), float("nan")]}
    io.write_json(tmp_path / "a.json", doc)
    io.write_json(tmp_path / "b.json", dict(reversed(list(doc.items()))))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
