"""Command-line entry point ``kinreg``.

Exit codes: 0 success, 1 validation error, 2 runtime or numerical failure.
Diagnostics go to stderr as ``error code=<E_...> key=<path> msg=<text>``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import coeffs, config as cfgmod, harness, io, kinetic, nondeg, regularity
from .errors import (CFLError, ConfigError, DomainError, InputValidationError, InsufficientResolution,
                     KinregError, RangeError, ShapeError)

VALIDATION_ERRORS = (ConfigError, InputValidationError, DomainError, RangeError, ShapeError)


def _load_config(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(args.config) if getattr(args, "config", None) else cfgmod.from_dict({})
    for item in getattr(args, "set", None) or []:
        cfg = cfg.with_overrides(cfgmod.parse_override(item))
    return cfg


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _emit(path, header, rows, cfg_hash="", stream=None):
    if path:
        io.write_csv(path, header, rows, cfg_hash)
    else:
        (stream or sys.stdout).write(io.csv_text(header, rows, cfg_hash))


# -- subcommands ------------------------------------------------------------------

def cmd_exponents(args):
    pair = nondeg.exponents(args.alpha, args.d, args.deterministic)
    print(pair.format())
    return 0


def _model_from_args(args):
    if args.model == "powerlaw":
        return coeffs.powerlaw(args.l, args.n, args.M)
    if args.model == "burgers":
        return coeffs.burgers(args.M)
    if args.model == "heat":
        return coeffs.heat(args.c, args.dim, args.M)
    if not args.table:
        raise InputValidationError("--table is required for --model table")
    return coeffs.load_table(args.table)


def cmd_nondeg(args):
    model = _model_from_args(args)
    fit = nondeg.estimate_alpha(model, args.sphere_samples, (args.delta_min, args.delta_max),
                                args.delta_points, args.lambda_grid, args.seed, args.variant)
    _emit(args.output, ["delta", "sup_measure"], harness.nondeg_rows(fit))
    print(fit.summary())
    return 0


def cmd_solve(args):
    cfg = _load_config(args)
    out = Path(args.output_dir or cfg["output"]["dir"])
    sols = harness.run_solution(cfg)
    for path in harness.write_solution(out, sols, cfg):
        print(path)
    return 0


def _resolve_model(args, meta):
    if getattr(args, "config", None):
        cfg = _load_config(args)
        return cfgmod.build_model(cfg)
    return cfgmod.model_from_meta(meta)


def cmd_kinetic(args):
    sol = io.read_snapshots(args.input)
    model = _resolve_model(args, sol.meta)
    interval = tuple(sol.meta.get("interval", model.interval if model else (-1.0, 1.0)))
    variant = {"plus": "chi_plus", "minus": "chi_minus", "chi": "chi"}[args.variant]
    avg = kinetic.averaged(sol, interval, kinetic.RHO[args.rho], args.n_lambda, variant)
    out = Path(args.output_dir) if args.output_dir else Path(args.input).parent
    cfg_hash = sol.meta.get("config_hash", "")
    axes = ["x", "y"][: sol.grid.d]
    io.write_csv(out / "averaged.csv", ["t", *axes, "average"], harness.averaged_rows(sol, avg), cfg_hash)
    print(out / "averaged.csv")
    if model is not None:
        D = kinetic.dissipation_field(sol, model).integral(sol.grid.dx, sol.grid.d)
        io.write_csv(out / "dissipation.csv", ["t", "dissipation"],
                     [[float(t), float(v)] for t, v in zip(sol.times, D)], cfg_hash)
        print(out / "dissipation.csv")
    return 0


def cmd_regularity(args):
    sol = io.read_snapshots(args.input)
    d = sol.grid.d
    deterministic = not sol.meta.get("noise_modes")
    if args.alpha == "fit":
        model = _resolve_model(args, sol.meta)
        if model is None:
            raise InputValidationError("--alpha fit needs a built-in model in the metadata or --config")
        fit = nondeg.estimate_alpha(model)
        if fit.alpha is None:
            raise InsufficientResolution("non-degeneracy fit failed; pass --alpha explicitly")
        alpha = fit.alpha
    else:
        alpha = nondeg.as_rational(args.alpha)
    pair = nondeg.exponents(alpha, d, deterministic)
    q = float(pair.q_star) if args.q is None else args.q
    window = tuple(args.fit_window) if args.fit_window else None
    rep = regularity.spacetime_regularity(sol, q, args.mode, s_star=pair.s_limit, fit_window=window)
    _emit(args.output, ["J", "block_norm"], harness.block_rows(rep), sol.meta.get("config_hash", ""))
    print(rep.summary())
    return 0


def cmd_sweep(args):
    cfg = _load_config(args)
    out = Path(args.output_dir or cfg["output"]["dir"])
    rows = harness.sweep(cfg, args.l, args.n, out, args.workers)
    sys.stdout.write((out / "sweep.csv").read_text())
    failed = [r for r in rows if r["error"]]
    return 2 if failed else 0


def cmd_validate(args):
    cfg = _load_config(args)
    model, grid, _, nm = cfgmod.build_all(cfg)
    rep = coeffs.validate_model(model)
    for line in rep.lines():
        print(line)
    print(f"grid nx={grid.nx} dt={grid.dt!r} steps={grid.steps}")
    print(f"config ok hash={cfg.hash}")
    return 0 if rep.passed else 1


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kinreg", description="Regularity laboratory for degenerate "
                                "parabolic-hyperbolic equations with stochastic forcing.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("exponents", help="closed-form regularity exponents")
    e.add_argument("--alpha", required=True, help="non-degeneracy exponent (e.g. 0.5 or 1/2)")
    e.add_argument("--d", type=int, default=2)
    e.add_argument("--deterministic", action="store_true")
    e.set_defaults(func=cmd_exponents)

    n = sub.add_parser("nondeg", help="fit the non-degeneracy exponent")
    n.add_argument("--model", choices=["powerlaw", "burgers", "heat", "table"], default="powerlaw")
    n.add_argument("--l", type=int, default=1)
    n.add_argument("--n", type=int, default=1)
    n.add_argument("--c", type=float, default=1.0)
    n.add_argument("--dim", type=int, default=1, help="dimension of the heat model")
    n.add_argument("--M", type=float, default=1.0, help="state interval [-M, M]")
    n.add_argument("--table")
    n.add_argument("--delta-min", type=float, default=1e-4)
    n.add_argument("--delta-max", type=float, default=1e-1)
    n.add_argument("--delta-points", type=int, default=12)
    n.add_argument("--sphere-samples", type=int, default=256)
    n.add_argument("--lambda-grid", type=int, default=4096)
    n.add_argument("--variant", choices=["squared", "mixed"], default="squared")
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--output", help="CSV path (default: stdout)")
    n.set_defaults(func=cmd_nondeg)

    def with_config(sp, required):
        sp.add_argument("--config", required=required)
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a config key (repeatable)")

    s = sub.add_parser("solve", help="run the solver from a config")
    with_config(s, True)
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_solve)

    k = sub.add_parser("kinetic", help="velocity averages and dissipation of stored snapshots")
    k.add_argument("--input", required=True)
    k.add_argument("--rho", choices=sorted(kinetic.RHO), default="one")
    k.add_argument("--variant", choices=["plus", "minus", "chi"], default="chi")
    k.add_argument("--n-lambda", type=int, default=256)
    k.add_argument("--output-dir")
    with_config(k, False)
    k.set_defaults(func=cmd_kinetic)

    r = sub.add_parser("regularity", help="block-norm smoothness of stored snapshots")
    r.add_argument("--input", required=True)
    r.add_argument("--q", type=float, help="integrability exponent (default q_star)")
    r.add_argument("--mode", choices=regularity.MODES, default="spacetime")
    r.add_argument("--alpha", default="fit", help="'fit' or a value such as 1/2")
    r.add_argument("--fit-window", type=int, nargs=2, metavar=("J_LO", "J_HI"))
    r.add_argument("--output", help="CSV path (default: stdout)")
    with_config(r, False)
    r.set_defaults(func=cmd_regularity)

    w = sub.add_parser("sweep", help="(l, n) sweep of the power-law example")
    with_config(w, True)
    w.add_argument("--l", type=_int_list, default=[1, 2])
    w.add_argument("--n", type=_int_list, default=[1, 2])
    w.add_argument("--workers", type=int)
    w.add_argument("--output-dir")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="check a config and its coefficient model")
    with_config(v, True)
    v.set_defaults(func=cmd_validate)
    return p


def _diagnose(exc: KinregError | Exception) -> None:
    code = getattr(exc, "code", "E_RUNTIME")
    issues = getattr(exc, "issues", None) or [("", str(exc))]
    for key, msg in issues:
        print(f"error code={code} key={key or '-'} msg={msg}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        _diagnose(exc)
        return 1
    except (CFLError, InsufficientResolution, KinregError, FloatingPointError, OSError) as exc:
        _diagnose(exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
