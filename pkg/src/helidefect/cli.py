"""Command-line entry point: ``helidefect <command> [options]``.

Exit codes: 0 success, 2 usage or validation error, 3 failed verdict under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import (
    FACES,
    SlabDomain,
    boundary_helicity_flux,
    full_trace_estimate,
    helicity_budget,
    normal_trace_estimate,
    trace_pairing_limit,
)
from .calculus import curl
from .config import config_hash, load_config
from .errors import HelidefectError, InvalidParams
from .fields_lab import (
    ABC,
    Gradient,
    RotatedShear,
    SyntheticBesov,
    TaylorGreen,
    random_trig_field,
    sample_recipe,
)
from .grid import GridSpec, ScalarField, to_spectral
from .mollify import default_ladder, defect_ladder, verify_levi_civita_identities
from .regularity import (
    MC_MAX_N,
    BesovParams,
    besov_modulus,
    besov_seminorm,
    c0_proxy,
    gagliardo_seminorm_mc,
    h_half_seminorm_fourier,
    scaling_exponent,
)
from .reports import (
    BUDGET_COLUMNS,
    REGULARITY_COLUMNS,
    gnuplot_loglog,
    ladder_rows,
    markdown_table,
    write_csv,
    write_json,
)
from .vf3 import read_field, write_field

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3
SLAB = ("x", "y")


def _report(command, opts, seeds, results):
    return {
        "tool": "helidefect",
        "version": __version__,
        "command": command,
        "config": opts,
        "config_hash": config_hash(opts),
        "seeds": seeds,
        "results": results,
    }


def _out(args, name):
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / f"{args.prefix}_{name}"


# ---------------------------------------------------------------------------
# commands


def _recipe(opts):
    name = opts["recipe"]
    if name == "abc":
        return ABC(opts["recipe.A"], opts["recipe.B"], opts["recipe.C"])
    if name == "taylor_green":
        return TaylorGreen(opts["recipe.amplitude"])
    if name == "gradient":
        return Gradient(opts["recipe.amplitude"])
    if name == "besov":
        return SyntheticBesov(opts["recipe.theta"], opts["seed"], None, opts["recipe.c0"])
    if name == "shear":
        return RotatedShear()
    raise HelidefectError(f"unknown recipe {name!r}")


def cmd_synth(args, opts):
    recipe = _recipe(opts)
    n = opts["grid.n"]
    if isinstance(recipe, RotatedShear):
        grid = GridSpec.slab(n, n, opts["grid.nz"])
    else:
        grid = GridSpec.torus(n)
    u = sample_recipe(recipe, grid)
    write_field(u, args.out)
    print(f"wrote {args.out} ({Path(args.out).stat().st_size} bytes)")
    return EXIT_OK


def _ladder_from(spec, grid, rungs):
    if spec in (None, "default"):
        return default_ladder(grid, rungs=rungs)
    return [float(s) for s in spec.split(",") if s.strip()]


def cmd_analyze(args, opts):
    series = [read_field(p) for p in args.inputs]
    u = series[0] if len(series) == 1 else series
    grid = series[0].grid
    eps = _ladder_from(args.ladder, grid, opts["ladder.rungs"])
    dt = opts["series.dt"] if len(series) > 1 else None
    lad = defect_ladder(
        u,
        epsilons=eps,
        kernel=opts["ladder.kernel"],
        tol=opts["ladder.tol"],
        dealias=opts["ladder.dealias"],
        dt=dt,
        keep_fields=False,
    )
    header, rows = ladder_rows(lad)
    csv_path = _out(args, "ladder.csv")
    write_csv(csv_path, header, rows)
    _out(args, "ladder.gp").write_text(gnuplot_loglog(csv_path.name, 1, 2, "L1 norm of the defect density"))
    write_json(_out(args, "ladder.json"), _report("analyze", opts, {"seed": opts["seed"]}, lad.summary()))
    print(f"verdict: {lad.verdict} (slope {lad.fitted_slope:.3f}, R^2 {lad.r_squared:.3f})")
    return EXIT_FAILED if args.strict and lad.verdict != "vanishes" else EXIT_OK


def cmd_regularity(args, opts):
    f = read_field(args.inputs[0])
    params = BesovParams(opts["besov.theta"], opts["besov.p"])
    comps = [ScalarField(f.grid, c) for c in f.components]
    h_half = math.sqrt(sum(h_half_seminorm_fourier(c).value ** 2 for c in comps))
    results = {"h_half_fourier": h_half}
    rows = [("h_half_fourier", 0.0, h_half)]
    if max(f.grid.dims) <= MC_MAX_N:
        mc = [gagliardo_seminorm_mc(c, opts["mc.samples"], opts["seed"] + i) for i, c in enumerate(comps)]
        results["h_half_mc"] = math.sqrt(sum(r.value**2 for r in mc))
        results["h_half_mc_stderr_sq"] = math.sqrt(sum(r.mc_stderr**2 for r in mc))
        rows.append(("h_half_mc", 0.0, results["h_half_mc"]))
    bes = besov_seminorm(f, params)
    mod = besov_modulus(f, params)
    c0, ratio = c0_proxy(mod)
    rows += [("besov_ratio", r["h"], r["ratio"]) for r in bes.table]
    rows += [("besov_modulus", e, v) for e, v in mod]
    results.update({"besov_seminorm": bes.value, "c0_proxy": c0, "c0_ratio": ratio, "c0_is_proxy": True})
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = scaling_exponent(f, params.p)
    except InvalidParams as exc:
        # too few resolvable increments on small grids; report the rest
        fit = None
        results.update({"scaling_exponent": None, "scaling_note": str(exc)})
    if fit is not None:
        rows += [("increment_norm", h, v) for h, v in zip(fit.increments, fit.norms)]
        results.update(
            {"scaling_exponent": fit.exponent, "scaling_r_squared": fit.r_squared, "poor_fit": fit.poor_fit, "saturated": fit.saturated}
        )
    write_csv(_out(args, "regularity.csv"), REGULARITY_COLUMNS, rows)
    write_json(_out(args, "regularity.json"), _report("regularity", opts, {"seed": opts["seed"]}, results))
    if fit is not None:
        print(f"scaling exponent {fit.exponent:.3f} (R^2 {fit.r_squared:.3f}); besov seminorm {bes.value:.4g}")
    else:
        print(f"scaling exponent unavailable ({results['scaling_note']}); besov seminorm {bes.value:.4g}")
    failed = fit is None or fit.poor_fit
    return EXIT_FAILED if args.strict and failed else EXIT_OK


def _zero_pressure(grid):
    return ScalarField(grid, np.zeros(grid.dims))


def cmd_boundary(args, opts):
    u = read_field(args.inputs[0], SLAB)
    p = read_field(args.pressure[0], SLAB) if args.pressure else _zero_pressure(u.grid)
    d = SlabDomain(u.grid)
    traces = {}
    for face in FACES:
        t = normal_trace_estimate(u, face, d)
        traces[face] = {"normal_trace_mean": t.mean, "normal_trace_max": float(np.max(np.abs(t.values))), "residual": t.residual}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        flux = boundary_helicity_flux(u, p, d)
    pairing = trace_pairing_limit(u, ScalarField(u.grid, np.ones(u.grid.dims)), d=d)
    results = {
        "traces": traces,
        "flux": flux.value,
        "flux_untrusted": flux.untrusted,
        "tangent": flux.tangent,
        "trace_residual": flux.residual,
        "warnings": [str(w.message) for w in caught],
        "pairing": {
            "radii": pairing.radii,
            "lhs": pairing.lhs,
            "rhs": pairing.rhs,
            "gaps": pairing.gaps,
            "limit": pairing.limit,
            "final_gap": pairing.final_gap,
            "monotone": pairing.monotone,
            "passed": pairing.passed,
            "status": pairing.status,
        },
        "passed": (not flux.untrusted) and pairing.passed,
    }
    write_json(_out(args, "boundary.json"), _report("boundary", opts, {}, results))
    print(f"boundary flux {flux.value:.6g}; trace pairing gap {pairing.final_gap:.3g} ({pairing.status})")
    return EXIT_FAILED if args.strict and not results["passed"] else EXIT_OK


def cmd_budget(args, opts):
    us = [read_field(p, SLAB) for p in args.inputs]
    ps = [read_field(p, SLAB) for p in args.pressure] if args.pressure else [_zero_pressure(us[0].grid)] * len(us)
    dt = opts["series.dt"]
    if not dt > 0:
        raise HelidefectError("budget needs a positive --dt")
    rep = helicity_budget(us, ps, dt)
    write_csv(_out(args, "budget.csv"), BUDGET_COLUMNS, rep.rows())
    _out(args, "budget.gp").write_text(
        "set datafile separator ','\nplot '%s' using 1:2 skip 1 with lines title 'H', '' using 1:3 skip 1 with lines title 'flux'\n"
        % _out(args, "budget.csv").name
    )
    worst = float(np.max(np.abs(rep.normalized_residuals)))
    results = {
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "residuals": rep.residuals,
        "normalized_residuals": rep.normalized_residuals,
        "max_residual": worst,
        "untrusted": rep.untrusted,
        "passed": worst < opts["budget.tol"],
    }
    write_json(_out(args, "budget.json"), _report("budget", opts, {}, results))
    print(f"max normalised budget residual {worst:.3g}")
    return EXIT_FAILED if args.strict and not results["passed"] else EXIT_OK


def _suite_levi_civita(opts):
    grid = GridSpec.torus(opts["verify.n"])
    worst = 0.0
    for i in range(opts["verify.pairs"]):
        u = random_trig_field(grid, 1, kmax=grid.dims[0] // 4 - 1, seed=(opts["seed"], i, 0))
        R = random_trig_field(grid, 2, kmax=grid.dims[0] // 4 - 1, seed=(opts["seed"], i, 1))
        rep = verify_levi_civita_identities(u, R)
        worst = max(worst, rep.max)
    return worst


def _suite_beltrami(opts):
    u = sample_recipe(ABC(opts["recipe.A"], opts["recipe.B"], opts["recipe.C"]), GridSpec.torus(max(opts["verify.n"], 8)))
    return float(np.max(np.abs(curl(u).values - u.values)))


def _suite_parseval(opts):
    grid = GridSpec.torus(opts["verify.n"])
    rng = np.random.default_rng(opts["seed"])
    f = ScalarField(grid, rng.standard_normal(grid.dims))
    F = to_spectral(f).coeffs
    lhs = float(np.mean(f.values**2))
    return abs(float(np.sum(np.abs(F) ** 2)) - lhs) / lhs


SUITES = {"levi-civita": _suite_levi_civita, "beltrami": _suite_beltrami, "parseval": _suite_parseval}


def cmd_verify(args, opts):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    tol = opts["verify.tol"]
    residuals = {name: SUITES[name](opts) for name in names}
    results = {"residuals": residuals, "max_residual": max(residuals.values()), "tolerance": tol}
    results["passed"] = results["max_residual"] < tol
    if args.out_dir:
        write_json(_out(args, "verify.json"), _report("verify", opts, {"seed": opts["seed"]}, results))
    for name, r in residuals.items():
        print(f"{name}: max residual {r:.3e}")
    return EXIT_FAILED if args.strict and not results["passed"] else EXIT_OK


def cmd_report(args, opts):
    summaries = []
    for p in args.inputs:
        summaries.append((Path(p).name, json.loads(Path(p).read_text(encoding="utf-8"))))
    text = markdown_table(summaries)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

# flag destination -> config key
FLAG_KEYS = {
    "recipe": "recipe",
    "A": "recipe.A",
    "B": "recipe.B",
    "C": "recipe.C",
    "amplitude": "recipe.amplitude",
    "theta": "recipe.theta",
    "c0": "recipe.c0",
    "n": "grid.n",
    "nz": "grid.nz",
    "seed": "seed",
    "rungs": "ladder.rungs",
    "kernel": "ladder.kernel",
    "tol": "ladder.tol",
    "dealias": "ladder.dealias",
    "dt": "series.dt",
    "besov_theta": "besov.theta",
    "p": "besov.p",
    "samples": "mc.samples",
    "pairs": "verify.pairs",
}


def _common(sp, outputs=True):
    sp.add_argument("--config", help="key=value configuration file")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--strict", action="store_true", help="exit 3 when the verdict fails")
    if outputs:
        sp.add_argument("--out-dir", default=".", help="directory for CSV/JSON outputs")
        sp.add_argument("--prefix", default="helidefect")


def build_parser():
    parser = argparse.ArgumentParser(prog="helidefect", description="Helicity defect and regularity diagnostics.")
    parser.add_argument("--version", action="version", version=f"helidefect {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="write a recipe field to a VF3 file")
    _common(sp, outputs=False)
    sp.add_argument("--recipe", choices=("abc", "taylor_green", "gradient", "besov", "shear"))
    for name in ("A", "B", "C", "amplitude", "theta"):
        sp.add_argument(f"--{name}", type=float)
    sp.add_argument("--c0", action="store_const", const=True, help="log-decaying spectrum for besov")
    sp.add_argument("--n", type=int)
    sp.add_argument("--nz", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("analyze", help="defect ladder on one field or a time series")
    _common(sp)
    sp.add_argument("--in", dest="inputs", nargs="+", required=True)
    sp.add_argument("--ladder", default="default", help="'default' or comma-separated epsilons")
    sp.add_argument("--rungs", type=int)
    sp.add_argument("--kernel", choices=("bump", "gaussian"))
    sp.add_argument("--tol", type=float)
    sp.add_argument("--dealias", action="store_const", const=True)
    sp.add_argument("--dt", type=float)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("regularity", help="seminorms, Besov modulus and scaling exponent")
    _common(sp)
    sp.add_argument("--in", dest="inputs", nargs=1, required=True)
    sp.add_argument("--theta", dest="besov_theta", type=float)
    sp.add_argument("--p", type=float)
    sp.add_argument("--samples", type=int)
    sp.set_defaults(func=cmd_regularity)

    sp = sub.add_parser("boundary", help="traces, boundary flux and trace pairing on a slab field")
    _common(sp)
    sp.add_argument("--in", dest="inputs", nargs=1, required=True)
    sp.add_argument("--pressure", nargs=1)
    sp.set_defaults(func=cmd_boundary)

    sp = sub.add_parser("budget", help="total helicity budget on a slab time series")
    _common(sp)
    sp.add_argument("--in", dest="inputs", nargs="+", required=True)
    sp.add_argument("--pressure", nargs="+")
    sp.add_argument("--dt", type=float)
    sp.set_defaults(func=cmd_budget)

    sp = sub.add_parser("verify", help="exact identity suites")
    _common(sp)
    sp.set_defaults(out_dir=None)
    sp.add_argument("--suite", choices=("levi-civita", "beltrami", "parseval", "all"), default="all")
    sp.add_argument("--pairs", type=int)
    sp.add_argument("--n", type=int)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("report", help="merge JSON reports into a markdown table")
    sp.add_argument("--in", dest="inputs", nargs="+", required=True)
    sp.add_argument("--out")
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_report)
    return parser


def _n_key(command):
    return "verify.n" if command == "verify" else "grid.n"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    overrides = {}
    for dest, key in FLAG_KEYS.items():
        if hasattr(args, dest):
            if dest == "n":
                key = _n_key(args.command)
            overrides[key] = getattr(args, dest)
    try:
        opts = load_config(getattr(args, "config", None), overrides)
        return args.func(args, opts)
    except (HelidefectError, ValueError, OSError) as exc:
        print(f"helidefect {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
