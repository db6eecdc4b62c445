import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinreg import coeffs, config, io, solver
from kinreg.errors import ConfigError, InputValidationError


def test_defaults_validate():
    cfg = config.from_dict({})
    assert cfg.schema_version == config.SCHEMA_VERSION
    assert cfg["grid"]["nx"] == 128 and cfg["model"]["family"] == "powerlaw"


def test_schema_errors_name_key_paths():
    with pytest.raises(ConfigError) as exc:
        config.from_dict({"grid": {"nx": -4, "cfl": "fast"}, "bogus": {}, "noise": {"colour": 1}})
    keys = {k for k, _ in exc.value.issues}
    assert {"grid.nx", "grid.cfl", "bogus", "noise.colour"} <= keys
    assert exc.value.code == "E_CONFIG"


def test_cross_checks():
    with pytest.raises(ConfigError, match="nondeg.delta_min"):
        config.from_dict({"nondeg": {"delta_min": 0.5, "delta_max": 0.1}})
    with pytest.raises(ConfigError, match="model.table_path"):
        config.from_dict({"model": {"family": "table"}})
    with pytest.raises(ConfigError, match="grid.d"):
        config.from_dict({"model": {"family": "burgers"}, "grid": {"d": 2}})
    with pytest.raises(ConfigError, match="regularity.fit_hi"):
        config.from_dict({"regularity": {"fit_lo": 2}})
    with pytest.raises(ConfigError, match="output.formats"):
        config.from_dict({"output": {"formats": "csv,hdf5"}})


def test_ini_roundtrip_and_hash_stability():
    text = "[grid]\nnx = 64\nT = 0.1\n\n[model]\nl = 2  # comment\n"
    a = config.parse_text(text)
    b = config.parse_text(config.dumps(a))
    assert a.values == b.values and a.hash == b.hash
    assert a["model"]["l"] == 2 and a["grid"]["T"] == 0.1
    c = a.with_overrides(config.parse_override("grid.nx=32"))
    assert c["grid"]["nx"] == 32 and c.hash != a.hash
    # identical content, different source order
    d = config.parse_text("[model]\nl = 2\n[grid]\nT = 0.1\nnx = 64\n")
    assert d.hash == a.hash


def test_malformed_override():
    with pytest.raises(ConfigError):
        config.parse_override("nx=32")


def test_build_all_defaults():
    cfg = config.from_dict({"grid": {"nx": 32}})
    model, grid, u0, nm = config.build_all(cfg)
    assert nm is None and grid.shape == (32, 32) and u0.shape == grid.shape
    assert model.interval[1] >= np.abs(u0).max()


def test_stochastic_interval_has_margin():
    cfg = config.from_dict({"grid": {"nx": 32}, "noise": {"modes": 4}})
    model, grid, u0, nm = config.build_all(cfg)
    assert nm is not None and nm.modes == 4
    assert model.interval[1] >= np.abs(u0).max() + 4 * config.noise_sigma_bound(cfg) - 1e-12


def test_model_from_meta_rebuilds_builtin():
    for m in (coeffs.powerlaw(2, 1, 1.5), coeffs.burgers(2.0), coeffs.heat(0.5, 2)):
        g = solver.make_grid(m, 16, 1.0, 0.01)
        meta = solver.solve(m, g, np.zeros(g.shape)).meta
        r = config.model_from_meta(meta)
        assert r.name == m.name and tuple(r.interval) == tuple(m.interval)


def small_solution():
    m = coeffs.powerlaw(1, 1)
    g = solver.make_grid(m, 16, 1.0, 0.02)
    return solver.solve(m, g, solver.initial_bump(g, 0.7, 0.6), stride=3)


def test_snapshot_roundtrip(tmp_path):
    sol = small_solution()
    path = io.write_snapshots(tmp_path / "s.krg", sol, "abc", 1)
    raw = path.read_bytes()
    assert raw[:4] == b"KRG1"
    assert len(raw) == 4 + 4 * 4 + 8 * sol.snapshots.size
    back = io.read_snapshots(path)
    assert np.array_equal(back.snapshots, sol.snapshots)
    assert np.array_equal(back.times, sol.times)
    assert back.grid.nx == 16 and back.grid.d == 2 and back.grid.box == sol.grid.box
    assert back.meta["config_hash"] == "abc"


def test_snapshot_header_validation():
    with pytest.raises(InputValidationError):
        io.parse_snapshot_bytes(b"NOPE" + bytes(16))
    good = io.snapshot_bytes(np.zeros((2, 3)))
    with pytest.raises(InputValidationError):
        io.parse_snapshot_bytes(good[:-8])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_floats_round_trip(values):
    text = io.csv_text(["v"], [[v] for v in values], "h")
    rows = text.splitlines()[2:]
    assert [float(r) for r in rows] == [float(v) for v in values]


def test_csv_deterministic(tmp_path):
    rows = [[1, 0.1, True, None, "x"], [2, 1e-300, False, 3.0, "y"]]
    a = io.write_csv(tmp_path / "a.csv", ["i", "f", "b", "n", "s"], rows, "h1")
    b = io.write_csv(tmp_path / "b.csv", ["i", "f", "b", "n", "s"], rows, "h1")
    assert a.read_bytes() == b.read_bytes()
    info, header, body = io.read_csv(a)
    assert info == {"schema_version": "1", "config_hash": "h1"}
    assert header == ["i", "f", "b", "n", "s"]
    assert body[0] == ["1", "0.1", "true", "", "x"]


def test_atomic_write_leaves_no_temp_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.bin"
    target.write_bytes(b"old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        io.atomic_write_bytes(target, b"new")
    assert target.read_bytes() == b"old"
    assert [p.name for p in tmp_path.iterdir()] == ["out.bin"]
