"""Experiment configuration: INI sections with a published schema.

Every key is typed and range-checked; unknown sections or keys are
rejected.  The resolved configuration (defaults included) is hashed so
that emitted files can be traced back to the exact run settings.
"""
from __future__ import annotations

import configparser
import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import coeffs, noise, solver
from .errors import ConfigError

SCHEMA_VERSION = 1


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _one_of(*choices):
    def check(v):
        return v in choices
    check.choices = choices
    return check


# section -> key -> (type, default, check, description of the check)
SCHEMA = {
    "meta": {
        "schema_version": (int, SCHEMA_VERSION, lambda v: v == SCHEMA_VERSION, f"must equal {SCHEMA_VERSION}"),
    },
    "model": {
        "family": (str, "powerlaw", _one_of("powerlaw", "burgers", "heat", "table"), "powerlaw|burgers|heat|table"),
        "l": (int, 1, lambda v: v >= 1, "must be >= 1"),
        "n": (int, 1, lambda v: v >= 1, "must be >= 1"),
        "c": (float, 1.0, _pos, "must be > 0"),
        "M": (float, 0.0, _nonneg, "must be >= 0 (0 means sup|u0|)"),
        "table_path": (str, "", None, ""),
        "interval_margin": (float, -1.0, None, ""),
    },
    "grid": {
        "d": (int, 2, _one_of(1, 2), "must be 1 or 2"),
        "nx": (int, 128, lambda v: v >= 4, "must be >= 4"),
        "box": (float, 2.0, _pos, "must be > 0"),
        "T": (float, 0.25, _pos, "must be > 0"),
        "cfl": (float, 0.4, lambda v: 0 < v <= 0.5, "must lie in (0, 0.5]"),
    },
    "init": {
        "kind": (str, "bump", _one_of("riemann", "bump", "sine", "file"), "riemann|bump|sine|file"),
        "amplitude": (float, 1.0, None, ""),
        "radius": (float, 1.0, _pos, "must be > 0"),
        "left": (float, 1.0, None, ""),
        "right": (float, 0.0, None, ""),
        "x0": (float, 0.0, None, ""),
        "k": (int, 1, lambda v: v >= 1, "must be >= 1"),
        "path": (str, "", None, ""),
    },
    "noise": {
        "modes": (int, 0, _nonneg, "must be >= 0"),
        "decay": (float, 0.5, lambda v: 0 < v < 1, "must lie in (0, 1)"),
        "psi": (str, "bounded_linear", _one_of(*noise.PSI_PROFILES), "|".join(noise.PSI_PROFILES)),
        "seed": (int, 0, _nonneg, "must be >= 0"),
        "paths": (int, 0, _nonneg, "must be >= 0"),
    },
    "lp": {
        "preset": (str, "deterministic", _one_of("stochastic", "deterministic"), "stochastic|deterministic"),
        "nu": (float, 0.45, lambda v: 0 < v < 0.5, "must lie in (0, 1/2)"),
        "order": (int, 6, lambda v: v >= 1, "must be >= 1"),
    },
    "nondeg": {
        "sphere_samples": (int, 256, lambda v: v >= 64, "must be >= 64"),
        "lambda_grid": (int, 4096, lambda v: v >= 256, "must be >= 256"),
        "delta_min": (float, 1e-4, _pos, "must be > 0"),
        "delta_max": (float, 1e-1, lambda v: 0 < v <= 1, "must lie in (0, 1]"),
        "delta_points": (int, 12, lambda v: v >= 6, "must be >= 6"),
        "variant": (str, "squared", _one_of("squared", "mixed"), "squared|mixed"),
        "seed": (int, 0, _nonneg, "must be >= 0"),
    },
    "regularity": {
        "q": (str, "auto", None, ""),
        "mode": (str, "spacetime", _one_of("space", "time", "spacetime"), "space|time|spacetime"),
        "field": (str, "u", _one_of("u", "average"), "u|average"),
        "rho": (str, "one", _one_of("one", "poly2", "bump"), "one|poly2|bump"),
        "n_lambda": (int, 256, lambda v: v >= 2, "must be >= 2"),
        "fit_lo": (int, 0, _nonneg, "must be >= 0 (0 means default window)"),
        "fit_hi": (int, 0, _nonneg, "must be >= 0 (0 means default window)"),
    },
    "output": {
        "dir": (str, "kinreg_out", None, ""),
        "stride": (int, 20, lambda v: v >= 1, "must be >= 1"),
        "formats": (str, "csv,bin", None, ""),
    },
}


def defaults() -> dict:
    return {sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()}


def _coerce(typ, raw):
    if isinstance(raw, typ) and not (typ is int and isinstance(raw, bool)):
        return raw
    if typ is int:
        if isinstance(raw, float) and raw.is_integer():
            return int(raw)
        return int(str(raw).strip())
    if typ is float:
        v = float(str(raw).strip())
        if not math.isfinite(v):
            raise ValueError("not finite")
        return v
    return str(raw).strip()


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getitem__(self, section) -> dict:
        return self.values[section]

    def get(self, section, key):
        return self.values[section][key]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.values)

    def canonical_json(self) -> str:
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        merged = self.to_dict()
        for sec, keys in overrides.items():
            merged.setdefault(sec, {}).update(keys)
        return from_dict(merged)

    @property
    def schema_version(self) -> int:
        return self.values["meta"]["schema_version"]


def from_dict(raw: dict) -> ExperimentConfig:
    """Validate a nested {section: {key: value}} mapping, filling defaults."""
    issues = []
    out = defaults()
    for sec, keys in raw.items():
        if sec not in SCHEMA:
            issues.append((sec, "unknown section"))
            continue
        for key, val in keys.items():
            path = f"{sec}.{key}"
            if key not in SCHEMA[sec]:
                issues.append((path, "unknown key"))
                continue
            typ, _, check, desc = SCHEMA[sec][key]
            try:
                v = _coerce(typ, val)
            except (TypeError, ValueError):
                issues.append((path, f"expected {typ.__name__}, got {val!r}"))
                continue
            if check is not None and not check(v):
                issues.append((path, f"{v!r} {desc}" if desc.startswith("must") else f"{v!r} not in {desc}"))
                continue
            out[sec][key] = v
    issues.extend(_cross_checks(out))
    if issues:
        raise ConfigError(issues)
    return ExperimentConfig(out)


def _cross_checks(v) -> list:
    issues = []
    nd = v["nondeg"]
    if nd["delta_min"] >= nd["delta_max"]:
        issues.append(("nondeg.delta_min", "must be below nondeg.delta_max"))
    if v["model"]["family"] == "table" and not v["model"]["table_path"]:
        issues.append(("model.table_path", "required when model.family = table"))
    if v["init"]["kind"] == "file" and not v["init"]["path"]:
        issues.append(("init.path", "required when init.kind = file"))
    if v["model"]["family"] in ("powerlaw",) and v["grid"]["d"] != 2:
        issues.append(("grid.d", "powerlaw family is two-dimensional"))
    if v["model"]["family"] == "burgers" and v["grid"]["d"] != 1:
        issues.append(("grid.d", "burgers family is one-dimensional"))
    q = v["regularity"]["q"]
    if q != "auto":
        try:
            if float(q) < 1:
                issues.append(("regularity.q", "must be >= 1 or 'auto'"))
        except ValueError:
            issues.append(("regularity.q", f"expected a number or 'auto', got {q!r}"))
    lo, hi = v["regularity"]["fit_lo"], v["regularity"]["fit_hi"]
    if (lo == 0) != (hi == 0):
        issues.append(("regularity.fit_hi", "set both fit_lo and fit_hi, or neither"))
    elif lo and hi - lo + 1 < 4:
        issues.append(("regularity.fit_hi", "fit window needs at least 4 blocks"))
    for fmt in filter(None, v["output"]["formats"].split(",")):
        if fmt.strip() not in ("csv", "bin"):
            issues.append(("output.formats", f"unknown format {fmt.strip()!r}"))
    return issues


def parse_text(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (model.M)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([("", f"malformed config: {exc}")]) from exc
    return from_dict({sec: dict(cp[sec]) for sec in cp.sections()})


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc}")]) from exc
    return parse_text(text)


def dumps(cfg: ExperimentConfig) -> str:
    lines = []
    for sec, keys in cfg.values.items():
        lines.append(f"[{sec}]")
        lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in keys.items()]
        lines.append("")
    return "\n".join(lines)


def parse_override(text: str) -> dict:
    """'grid.nx=64' -> {'grid': {'nx': '64'}}."""
    key, sep, val = text.partition("=")
    sec, dot, name = key.strip().partition(".")
    if not sep or not dot:
        raise ConfigError([(key.strip(), "override must look like section.key=value")])
    return {sec: {name: val.strip()}}


# -- builders -----------------------------------------------------------------

def _provisional_grid(cfg: ExperimentConfig) -> solver.GridSpec:
    g = cfg["grid"]
    # geometry only; the time step is fixed once the model is known
    return solver.GridSpec(d=g["d"], nx=g["nx"], box=g["box"], T=g["T"], cfl=g["cfl"], dt=g["T"], steps=1)


def build_initial(cfg: ExperimentConfig, grid: solver.GridSpec | None = None) -> np.ndarray:
    grid = grid or _provisional_grid(cfg)
    i = cfg["init"]
    kind = i["kind"]
    if kind == "riemann":
        return solver.initial_riemann(grid, i["left"], i["right"], i["x0"])
    if kind == "bump":
        return solver.initial_bump(grid, i["amplitude"], i["radius"])
    if kind == "sine":
        return solver.initial_sine(grid, i["k"], i["amplitude"])
    from .io import read_snapshots
    u = read_snapshots(i["path"]).snapshots[-1]
    if u.shape != grid.shape:
        raise ConfigError([("init.path", f"snapshot shape {u.shape} does not match grid {grid.shape}")])
    return u


def noise_sigma_bound(cfg: ExperimentConfig) -> float:
    n = cfg["noise"]
    if n["modes"] == 0:
        return 0.0
    amps = n["decay"] ** np.arange(1, n["modes"] + 1)
    return float(np.sqrt(cfg["grid"]["T"] * np.sum(amps ** 2)))


def state_bound(cfg: ExperimentConfig, u0: np.ndarray) -> float:
    """M of I = [-M, M]: explicit model.M, else sup|u0|, widened for stochastic runs."""
    m = cfg["model"]
    M = m["M"] if m["M"] > 0 else float(np.max(np.abs(u0)))
    M = M if M > 0 else 1.0
    if cfg["noise"]["modes"] > 0:
        margin = m["interval_margin"] if m["interval_margin"] >= 0 else 4.0 * noise_sigma_bound(cfg)
        M += margin
    return M


def build_model(cfg: ExperimentConfig, u0: np.ndarray | None = None) -> coeffs.CoefficientModel:
    m = cfg["model"]
    if u0 is None:
        u0 = build_initial(cfg)
    M = state_bound(cfg, u0)
    fam = m["family"]
    if fam == "powerlaw":
        return coeffs.powerlaw(m["l"], m["n"], M)
    if fam == "burgers":
        return coeffs.burgers(M)
    if fam == "heat":
        return coeffs.heat(m["c"], cfg["grid"]["d"], M)
    model = coeffs.load_table(m["table_path"])
    if model.d != cfg["grid"]["d"]:
        raise ConfigError([("grid.d", f"table model has d={model.d}")])
    if m["M"] > 0 or cfg["noise"]["modes"] > 0:
        model = model.with_interval(-M, M)
    return model


def build_grid(cfg: ExperimentConfig, model) -> solver.GridSpec:
    g = cfg["grid"]
    return solver.make_grid(model, g["nx"], g["box"], g["T"], g["cfl"], g["d"])


def build_noise(cfg: ExperimentConfig, grid: solver.GridSpec) -> noise.NoiseModel | None:
    n = cfg["noise"]
    if n["modes"] == 0:
        return None
    amps = n["decay"] ** np.arange(1, n["modes"] + 1, dtype=float)
    return noise.NoiseModel(modes=n["modes"], amplitudes=amps, psi=n["psi"], d=grid.d,
                            half_width=grid.box, seed=n["seed"])


def build_all(cfg: ExperimentConfig):
    """(model, grid, u0, noise model or None)."""
    u0 = build_initial(cfg)
    model = build_model(cfg, u0)
    grid = build_grid(cfg, model)
    return model, grid, u0, build_noise(cfg, grid)


def model_from_meta(meta: dict) -> coeffs.CoefficientModel | None:
    """Rebuild a built-in model from snapshot metadata; None for tabulated models."""
    params = meta.get("model_params", {})
    lo, hi = meta.get("interval", (-1.0, 1.0))
    fam = params.get("family")
    if fam == "powerlaw":
        model = coeffs.powerlaw(int(params["l"]), int(params["n"]))
    elif fam == "burgers":
        model = coeffs.burgers()
    elif fam == "heat":
        model = coeffs.heat(float(params["c"]), int(params["d"]))
    else:
        return None
    return model.with_interval(lo, hi)
