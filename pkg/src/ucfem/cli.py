"""Command-line front end.

Subcommands: mesh-info, solve, convergence, condnum, probe.  Every run
echoes its resolved configuration to ``config.json`` in the output
directory, and outputs are deterministic for a fixed configuration and
seed (timings go to stderr only).  Exit codes: 0 on success, 2 on
configuration errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (CaseDefinition, NoiseModel, builtin_cases,
                          derive_source, estimate_rate, get_case,
                          polynomial_bump, run_case)
from .forms import ProblemSpec, constant_field, swirl_field, zero_field, \
    assemble_all
from .fem import interpolate
from .mesh import Region, build_unit_square_mesh
from .saddle import (NumericalFailure, build_system, estimate_condition_number,
                     exact_condition_number, solve)
from .stability import (ThreeBallConfig, audit_log_convexity,
                        harmonic_family_sweep, holder_exponent,
                        probe_fem_solution)


class ConfigError(Exception):
    """Invalid command configuration; maps to exit code 2."""


def _positive_int(text):
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _ladder(text):
    try:
        entries = tuple(int(tok) for tok in text.split(",") if tok)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad ladder {text!r}") from exc
    if not entries or any(n < 1 for n in entries):
        raise argparse.ArgumentTypeError(f"bad ladder {text!r}")
    return entries


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ucfem",
        description="Stabilized FEM data assimilation for convection-"
                    "diffusion problems on the unit square.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    mesh_p = sub.add_parser("mesh-info", help="mesh counts and size")
    mesh_p.add_argument("cells", type=_positive_int,
                        help="cells per side (>= 1)")
    mesh_p.add_argument("--out", default=None, help="output directory")

    def common(p, ladder_default=None):
        p.add_argument("--config", default=None,
                       help="JSON file with flag defaults")
        p.add_argument("--case", default="ex1-const",
                       help="benchmark case name")
        p.add_argument("--ladder", type=_ladder, default=ladder_default,
                       help="comma-separated mesh resolutions")
        p.add_argument("--seed", type=int, default=0, help="noise seed")
        p.add_argument("--noise", choices=["none", "sqrt_h", "h"],
                       default=None, help="override the case noise model")
        p.add_argument("--boundary-factor", type=float, default=None,
                       help="override the dual boundary weight factor")
        p.add_argument("--projection", choices=["l2", "nodal"], default="l2",
                       help="comparison function for the stabilizer norm")
        p.add_argument("--quad-degree", type=int, choices=[2, 4], default=4)
        p.add_argument("--out", default=".", help="output directory")

    solve_p = sub.add_parser("solve", help="solve one or more meshes")
    common(solve_p, ladder_default=(32,))
    solve_p.add_argument("--cond", choices=["none", "exact", "estimate"],
                         default="none")

    conv_p = sub.add_parser("convergence", help="run a mesh ladder")
    common(conv_p)
    conv_p.add_argument("--cond", choices=["none", "exact", "estimate"],
                        default="none")
    conv_p.add_argument("--h1", choices=["full", "semi"], default="full")

    cond_p = sub.add_parser("condnum", help="condition-number ladder")
    common(cond_p)
    cond_p.add_argument("--cond", choices=["exact", "estimate"],
                        default="estimate")
    cond_p.add_argument("--cond-tol", type=float, default=1e-3)
    cond_p.add_argument("--cond-cap", type=int, default=5000,
                        help="iteration cap for the estimator")

    probe_p = sub.add_parser("probe", help="stability probes")
    probe_p.add_argument("mode", choices=["audit", "kappa", "harmonic", "fem"])
    probe_p.add_argument("--config", default=None)
    probe_p.add_argument("--samples", type=int, default=10_000)
    probe_p.add_argument("--seed", type=int, default=2026)
    probe_p.add_argument("--radii", type=float, nargs=3,
                         default=(0.1, 0.2, 0.4))
    probe_p.add_argument("--center", type=float, nargs=2, default=(0.5, 0.5))
    probe_p.add_argument("--c3", type=float, default=1.0)
    probe_p.add_argument("--kmax", type=int, default=8)
    probe_p.add_argument("--norm", choices=["l2", "h1"], default="l2")
    probe_p.add_argument("--resolution", type=int, nargs=2, default=(96, 192))
    probe_p.add_argument("--case", default="ex1-const")
    probe_p.add_argument("--ladder", type=_ladder, default=(8, 16, 32))
    probe_p.add_argument("--out", default=".")
    commands = {"mesh-info": mesh_p, "solve": solve_p, "convergence": conv_p,
                "condnum": cond_p, "probe": probe_p}
    return parser, commands


def _apply_config_file(parser, commands, argv):
    """Use values from --config as argparse defaults; flags still win.

    Defaults are installed on every subparser as well: a subparser fills
    its own argument defaults into the shared namespace, so parent-level
    defaults alone would be overwritten.
    """
    if argv and "--config" in argv:
        idx = argv.index("--config")
        if idx + 1 >= len(argv):
            raise ConfigError("--config needs a path")
        path = argv[idx + 1]
        try:
            with open(path) as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
        clean = {}
        for key, val in values.items():
            dest = key.replace("-", "_")
            if dest == "ladder" and isinstance(val, (list, str)):
                val = _ladder(",".join(str(v) for v in val)
                              if isinstance(val, list) else val)
            if dest in ("radii", "center", "resolution") \
                    and isinstance(val, list):
                val = tuple(val)
            clean[dest] = val
        problem = clean.pop("problem", None)
        parser.set_defaults(**clean)
        for sub_parser in commands.values():
            sub_parser.set_defaults(**clean)
        return problem
    return None


def _region_from(payload) -> Region:
    return Region(payload.get("boxes", []), payload.get("holes", []))


def _field_from(payload):
    kind = payload.get("kind", "const")
    if kind == "const":
        return constant_field(*payload.get("value", (1.0, 0.0)))
    if kind == "swirl":
        return swirl_field(payload.get("scale", 100.0))
    if kind == "zero":
        return zero_field()
    raise ConfigError(f"unknown advection field kind {kind!r}")


def _case_from_problem(payload: dict) -> CaseDefinition:
    """Build a custom case from an inline problem description."""
    try:
        beta = _field_from(payload.get("beta", {}))
        exact = polynomial_bump()
        spec = ProblemSpec(
            mu=payload.get("mu", 1.0),
            beta=beta,
            omega=_region_from(payload["omega"]),
            target=_region_from(payload.get("target", {"boxes": [[0, 1, 0, 1]]})),
            f=None,
            beta_sup=payload.get("beta_sup"),
            gamma=payload.get("gamma", 1e-5),
            gamma_star=payload.get("gamma_star", 1.0),
            boundary_factor=payload.get("boundary_factor", 50.0),
        )
        spec = replace(spec, f=derive_source(exact, spec.mu, beta))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad inline problem: {exc}") from exc
    return CaseDefinition("custom", spec, exact)


def _resolve_case(args, problem) -> CaseDefinition:
    if problem is not None:
        case = _case_from_problem(problem)
    else:
        try:
            case = get_case(args.case)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    noise = case.noise
    if getattr(args, "noise", None) is not None:
        noise = {"none": None,
                 "sqrt_h": NoiseModel(0.5, args.seed),
                 "h": NoiseModel(1.0, args.seed)}[args.noise]
    elif noise is not None:
        noise = NoiseModel(noise.law, args.seed)
    spec = case.spec
    if getattr(args, "boundary_factor", None) is not None:
        try:
            spec = replace(spec, boundary_factor=args.boundary_factor)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    ladder = args.ladder if getattr(args, "ladder", None) else case.ladder
    return CaseDefinition(case.name, spec, case.exact, tuple(ladder), noise)


def _echo_config(args, out: Path):
    payload = {}
    for key, val in sorted(vars(args).items()):
        if key == "func":
            continue
        if isinstance(val, tuple):
            val = list(val)
        payload[key] = val
    payload["version"] = __version__
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _strip_timings(diag: dict) -> dict:
    return {k: v for k, v in diag.items() if not k.endswith("_seconds")}


def _cmd_mesh_info(args) -> int:
    mesh = build_unit_square_mesh(args.cells)
    text = json.dumps(mesh.summary(), indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "mesh.json").write_text(text + "\n")
    return 0


def _cmd_solve(args, case: CaseDefinition) -> int:
    out = Path(args.out)
    _echo_config(args, out)
    for n_cells in case.ladder:
        mesh = build_unit_square_mesh(n_cells)
        from .mesh import mesh_size
        from .experiments import apply_noise
        data = interpolate(case.exact.value, mesh)
        if case.noise is not None:
            data = apply_noise(data, case.noise, case.spec.omega,
                               mesh_size(mesh))
        blocks = assemble_all(case.spec, mesh, data, args.quad_degree)
        system = build_system(blocks.pde, blocks.primal, blocks.dual,
                              blocks.b_data, blocks.b_source)
        sol = solve(system, mesh)
        sol.u.to_csv(out / f"u_N{n_cells}.csv")
        sol.z.to_csv(out / f"z_N{n_cells}.csv")
        diag = _strip_timings(sol.diagnostics)
        diag["peclet"] = blocks.peclet
        if args.cond != "none":
            diag["cond"] = float(exact_condition_number(system)
                                 if args.cond == "exact"
                                 else estimate_condition_number(system).value)
        with open(out / f"diagnostics_N{n_cells}.json", "w") as fh:
            json.dump(diag, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"N={n_cells}: dim={sol.diagnostics['dimension']} "
              f"residual={sol.diagnostics['relative_residual']:.2e}")
        print(f"  factor {sol.diagnostics['factor_seconds']:.3f}s "
              f"solve {sol.diagnostics['solve_seconds']:.3f}s",
              file=sys.stderr)
    return 0


def _cmd_convergence(args, case: CaseDefinition) -> int:
    out = Path(args.out)
    _echo_config(args, out)
    table = run_case(case, cond=args.cond, projection=args.projection,
                     quad_degree=args.quad_degree, h1=args.h1)
    table.to_csv(out / "convergence.csv")
    with open(out / "rates.json", "w") as fh:
        json.dump(table.rates_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(table.to_csv_string(), end="")
    for name, fit in table.rates.items():
        print(f"rate[{name}] = {fit.slope:.3f}")
    return 0


def _cmd_condnum(args, case: CaseDefinition) -> int:
    out = Path(args.out)
    _echo_config(args, out)
    rows = []
    for n_cells in case.ladder:
        mesh = build_unit_square_mesh(n_cells)
        data = interpolate(case.exact.value, mesh)
        blocks = assemble_all(case.spec, mesh, data, args.quad_degree)
        system = build_system(blocks.pde, blocks.primal, blocks.dual,
                              blocks.b_data, blocks.b_source)
        from .mesh import mesh_size
        h = mesh_size(mesh)
        if args.cond == "exact":
            value, converged, bracket = exact_condition_number(system), True, None
        else:
            import warnings as _warnings
            with _warnings.catch_warnings():
                _warnings.simplefilter("ignore")
                est = estimate_condition_number(system, tol=args.cond_tol,
                                                max_iter=args.cond_cap)
            value, converged, bracket = est.value, est.converged, \
                list(est.bracket)
        rows.append({"N": n_cells, "h": h, "cond": value,
                     "converged": converged, "bracket": bracket})
        flag = "" if converged else "  (cap hit, bracket "f"{bracket})"
        print(f"N={n_cells}: cond={value:.6e}{flag}")

    with open(out / "condition.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "h", "cond"])
        for row in rows:
            writer.writerow([row["N"], repr(float(row["h"])),
                             repr(float(row["cond"]))])
    summary = {"rows": rows}
    if len(rows) >= 2 and all(r["cond"] > 0 for r in rows):
        fit = estimate_rate([(r["h"], r["cond"]) for r in rows])
        summary["slope"] = fit.slope
        summary["per_step"] = list(fit.per_step)
        print(f"slope = {fit.slope:.3f}; per-step = "
              + ", ".join(f"{s:.3f}" for s in fit.per_step))
    with open(out / "condition.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_probe(args) -> int:
    out = Path(args.out)
    _echo_config(args, out)
    if args.mode == "audit":
        report = audit_log_convexity(args.samples, args.seed)
        report = {k: v for k, v in report.items() if k != "worst_instance"}
        with open(out / "probe_audit.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(json.dumps(report, sort_keys=True))
        return 0 if report["violations"] == 0 else 3
    if args.mode == "kappa":
        value = holder_exponent(*args.radii, args.c3)
        payload = {"radii": list(args.radii), "c3": args.c3, "kappa": value}
        with open(out / "probe_kappa.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"kappa = {value}")
        return 0
    if args.mode == "harmonic":
        report = harmonic_family_sweep(tuple(args.center), tuple(args.radii),
                                       args.kmax, args.norm,
                                       tuple(args.resolution))
        with open(out / "probe_harmonic.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "ratio"])
            for k, ratio in enumerate(report["ratios"], start=1):
                writer.writerow([k, repr(float(ratio))])
        meta = {k: v for k, v in report.items() if k != "ratios"}
        with open(out / "probe_harmonic.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"kappa={report['kappa']:.6f} c3={report['c3']:.6f} "
              f"max ratio={report['max_ratio']:.6f}")
        return 0
    # fem
    try:
        case = get_case(args.case)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    kappa = holder_exponent(*args.radii, args.c3)
    config = ThreeBallConfig(tuple(args.center), tuple(args.radii), kappa,
                             args.norm)
    pairs = probe_fem_solution(case, config, tuple(args.resolution),
                               ladder=args.ladder)
    with open(out / "probe_fem.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "ratio"])
        for n_cells, ratio in pairs:
            writer.writerow([n_cells, repr(float(ratio))])
    for n_cells, ratio in pairs:
        print(f"N={n_cells}: ratio={ratio:.6f}")
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = _build_parser()
    try:
        problem = _apply_config_file(parser, commands, argv)
        args = parser.parse_args(argv)
        if args.command == "mesh-info":
            return _cmd_mesh_info(args)
        if args.command == "probe":
            return _cmd_probe(args)
        case = _resolve_case(args, problem)
        if args.command == "solve":
            return _cmd_solve(args, case)
        if args.command == "convergence":
            return _cmd_convergence(args, case)
        if args.command == "condnum":
            return _cmd_condnum(args, case)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}),
              file=sys.stderr)
        return 2
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        print(json.dumps({"error": "numerical", "detail": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
