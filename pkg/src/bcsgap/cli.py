"""Command-line pipeline: check | tc | solve | thermo | sweep.

Subcommands compose through files in the output directory; every artifact
is reproducible byte-for-byte for a fixed config and build. Exit codes are
a total function of the outcome category: 0 ok, 1 parse error,
2 hypothesis failure, 3 no transition, 4 non-convergence, 5 inconclusive
verdict.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_run_config
from .constant_gap import NoSolutionError, delta_const, tau
from .gap_operator import (
    GridSpec,
    SolveOptions,
    make_temperature_grid,
    solve_fixed_point,
    write_field_csv,
)
from .numerics import ConvergenceError, gauss_legendre
from .potentials import HypothesisError, check_smallness, compute_t0, slope_bound
from .thermodynamics import (
    NoTransitionError,
    critical_temperature,
    spectral_radius,
    thermo_curves,
    write_thermo_csv,
)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_HYPOTHESIS = 2
EXIT_NO_TRANSITION = 3
EXIT_NO_CONVERGENCE = 4
EXIT_INCONCLUSIVE = 5


def _limit_threads(n: int) -> None:
    if n <= 0:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:  # pragma: no cover
        os.environ.setdefault("OMP_NUM_THREADS", str(n))


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for key, value in payload.items():
            print(f"{key} = {value}")


def _prepare(cfg: RunConfig):
    """Shared pipeline head: potential, hypothesis report, tc, rule."""
    potential = cfg.build_potential()
    model = cfg.model
    rule = gauss_legendre(model.epsilon, model.debye, cfg.grid.quad_order)
    t0 = compute_t0(
        potential, model, safety=cfg.hypothesis.safety, x_points=cfg.hypothesis.x_points
    )
    report = check_smallness(potential, t0, model, x_points=cfg.hypothesis.x_points)
    tc = critical_temperature(potential, model, rule)
    return potential, model, rule, report, tc


def _solve(cfg: RunConfig, potential, model, rule, tc, initial_field=None):
    t_nodes = make_temperature_grid(
        t_min=cfg.grid.t_min_factor * tc,
        tc=tc,
        n_nodes=cfg.grid.t_nodes,
        tail_fraction=cfg.grid.tail_fraction,
        s_min=cfg.grid.s_min_factor * tc,
    )
    grid = GridSpec(t_nodes=t_nodes, x_rule=rule)
    options = SolveOptions(
        tol=cfg.solver.tol,
        tol_factor=cfg.solver.tol_factor,
        max_iters=cfg.solver.max_iters,
        damping_floor=cfg.solver.damping_floor,
        newton_accel=cfg.solver.newton_accel,
        initial_field=initial_field,
    )
    return solve_fixed_point(potential, grid, options)


def _outdir(cfg: RunConfig, out_override) -> str:
    # outputs resolve against the working directory; only data files named
    # inside the config (table CSVs) resolve against the config location
    directory = out_override or cfg.output.directory
    os.makedirs(directory, exist_ok=True)
    return os.path.abspath(directory)


def cmd_check(cfg: RunConfig, args) -> int:
    potential, model, rule, report, tc = _prepare(cfg)
    mt = slope_bound(potential, model, tc, delta_const(potential.u_max, 0.0, model, rule))
    payload = report.as_dict()
    payload.update({"tc": tc, "slope_bound": mt, "tau_u_min": tau(potential.u_min, model, rule)})
    _emit(payload, args.format or cfg.output.format)
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS


def cmd_tc(cfg: RunConfig, args) -> int:
    potential, model, rule, report, tc = _prepare(cfg)
    if not report.passed:
        return EXIT_HYPOTHESIS
    residual = spectral_radius(potential, tc, model, rule) - 1.0
    _emit({"tc": tc, "spectral_radius_residual": residual}, args.format or cfg.output.format)
    return EXIT_OK


def cmd_solve(cfg: RunConfig, args) -> int:
    potential, model, rule, report, tc = _prepare(cfg)
    if not report.passed:
        return EXIT_HYPOTHESIS
    outdir = _outdir(cfg, args.out)
    try:
        field, solve_report = _solve(cfg, potential, model, rule, tc)
    except ConvergenceError as exc:
        flag = os.path.join(outdir, "solve_report.json")
        with open(flag, "w") as fh:
            json.dump({"converged": False, "error": str(exc), "partial": True}, fh, indent=2, sort_keys=True)
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    write_field_csv(field, os.path.join(outdir, "gap_field.csv"))
    with open(os.path.join(outdir, "solve_report.json"), "w") as fh:
        json.dump(solve_report.as_dict(), fh, indent=2, sort_keys=True)
    _emit(
        {
            "tc": tc,
            "iterations": solve_report.iterations,
            "residual_sup": solve_report.residual_sup,
            "converged": solve_report.converged,
            "w_audit_passed": solve_report.w_audit.passed if solve_report.w_audit else None,
            "field_csv": os.path.join(outdir, "gap_field.csv"),
        },
        args.format or cfg.output.format,
    )
    return EXIT_OK


def cmd_thermo(cfg: RunConfig, args) -> int:
    potential, model, rule, report, tc = _prepare(cfg)
    if not report.passed:
        return EXIT_HYPOTHESIS
    outdir = _outdir(cfg, args.out)
    try:
        field, _ = _solve(cfg, potential, model, rule, tc)
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    curve = thermo_curves(
        field,
        potential,
        model,
        half_width=cfg.thermo.half_width_factor * tc,
        n_samples=cfg.thermo.n_samples,
        center=cfg.thermo.center_factor * tc,
    )
    write_thermo_csv(curve, os.path.join(outdir, "thermo_curve.csv"))
    with open(os.path.join(outdir, "verdict.json"), "w") as fh:
        json.dump(curve.verdict_dict(), fh, indent=2, sort_keys=True)
    _emit(curve.verdict_dict(), args.format or cfg.output.format)
    return EXIT_OK if curve.classification == "second_order" else EXIT_INCONCLUSIVE


def _sweep_config(cfg: RunConfig, parameter: str, value: float) -> RunConfig:
    if parameter == "coupling":
        spec = dict(cfg.potential_spec)
        if spec.get("kind") == "constant":
            spec["value"] = value
            return dataclasses.replace(cfg, potential_spec=spec)
        # non-constant kinds: rescale the kernel so its maximum equals value
        base = cfg.build_potential()
        factor = value / base.u_max
        if spec.get("kind") == "separable":
            spec["coeffs"] = [c * factor**0.5 for c in spec["coeffs"]]
        elif spec.get("kind") == "polynomial":
            spec["coeffs2d"] = [[c * factor for c in row] for row in spec["coeffs2d"]]
        else:
            raise ConfigError(f"coupling sweep unsupported for kind {spec.get('kind')!r}")
        return dataclasses.replace(cfg, potential_spec=spec)
    if parameter == "epsilon":
        return dataclasses.replace(cfg, model=dataclasses.replace(cfg.model, epsilon=value))
    if parameter == "debye":
        return dataclasses.replace(cfg, model=dataclasses.replace(cfg.model, debye=value))
    raise ConfigError(f"unknown sweep parameter {parameter!r}")


def cmd_sweep(cfg: RunConfig, args) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one value")
    outdir = _outdir(cfg, args.out)
    rows = []
    for value in values:
        row = {"value": value, "tc": "", "delta2_at_zero": "", "jump": "", "classification": "", "status": "ok"}
        try:
            sub = _sweep_config(cfg, args.parameter, value)
            potential, model, rule, report, tc = _prepare(sub)
            if not report.passed:
                raise HypothesisError("hypothesis check failed")
            d0 = delta_const(potential.u_max, 0.0, model, rule)
            field, _ = _solve(sub, potential, model, rule, tc)
            curve = thermo_curves(
                field,
                potential,
                model,
                half_width=sub.thermo.half_width_factor * tc,
                n_samples=sub.thermo.n_samples,
                center=sub.thermo.center_factor * tc,
            )
            row.update(
                tc=f"{tc:.17g}",
                delta2_at_zero=f"{d0:.17g}",
                jump=f"{curve.jump_at_tc:.17g}",
                classification=curve.classification,
            )
        except (ConfigError, ValueError, HypothesisError, NoTransitionError, ConvergenceError) as exc:
            row["status"] = f"failed: {type(exc).__name__}: {exc}"
        rows.append(row)
        print(f"value={value}: {row['status']}")
    path = os.path.join(outdir, "sweep.csv")
    with open(path, "w", newline="") as fh:
        fh.write("value,tc,delta2_at_zero,jump,classification,status\n")
        for row in rows:
            status = row["status"].replace(",", ";")
            fh.write(
                f"{row['value']:.17g},{row['tc']},{row['delta2_at_zero']},"
                f"{row['jump']},{row['classification']},{status}\n"
            )
    print(f"sweep written to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcsgap",
        description=(
            "Solve the gap equation for a function-valued potential and "
            "verify the second-order transition. Defaults (overridable in "
            "the config file): 64 temperature nodes, order-64 quadrature, "
            "t_min = 0.25*tc, solver tol = 1e-10*Delta2(0)^2, max 10000 "
            "sweeps, damping floor 1/16, thermo half-width 0.02*tc with 33 "
            "samples, hypothesis safety 1.001."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("check", cmd_check),
        ("tc", cmd_tc),
        ("solve", cmd_solve),
        ("thermo", cmd_thermo),
        ("sweep", cmd_sweep),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the run-config TOML")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help="stdout rendering (overrides config)")
        p.add_argument("--threads", type=int, default=0,
                       help="BLAS thread cap; 0 = automatic")
        p.set_defaults(func=fn)
        if name == "sweep":
            p.add_argument("--parameter", required=True, choices=("coupling", "epsilon", "debye"))
            p.add_argument("--values", required=True, help="comma-separated values")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _limit_threads(args.threads)
    try:
        cfg = load_run_config(args.config)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except HypothesisError as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (NoTransitionError, NoSolutionError) as exc:
        print(f"no transition: {exc}", file=sys.stderr)
        return EXIT_NO_TRANSITION
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


def run() -> None:  # console entry point
    sys.exit(main())


if __name__ == "__main__":
    run()
