"""Command-line entry point.

Exit codes: 0 success, 1 scenario failure, 2 usage error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from . import plotting
from .config import DEFAULTS_HELP, ConfigError, RunConfig, build_initial, load_config
from .energy import CSV_COLUMNS, choose_C0, full_report
from .experiments import SCENARIOS, run_scenarios
from .grid import Field, SpectralWorkspace
from .nonlinearity import (
    NonlinearitySpec,
    analyze_potential,
    check_kato,
    competing,
    cubic_quintic,
    exponential,
    gp,
    logarithmic,
    power,
    saturated,
    transiting,
)
from .snapshot import SnapshotError, read_snapshot, write_snapshot
from .solver import effective_steps, run

log = logging.getLogger("nlsfarf")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

CATALOG_EXAMPLES = (
    gp(),
    power(1.0, 1.5),
    power(-1.0, 1.0),
    competing(1.0, 1.2, 1.5, 0.5),
    competing(1.0, 0.5, 1.0, 1.5),
    cubic_quintic(1.0, 3.0, 2.0),
    saturated(1.0),
    exponential(1.0),
    transiting(0.5, 1.0),
    logarithmic(),
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="nlsfarf",
        description="Simulate and diagnose nonlinear Schroedinger equations with non-zero far field.",
        epilog=DEFAULTS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="evolve the configured initial data")
    r.add_argument("config")

    rs = sub.add_parser("resume", help="continue a run from a snapshot")
    rs.add_argument("snapshot")
    rs.add_argument("config")

    a = sub.add_parser("analyze", help="print the energy report of a snapshot as CSV")
    a.add_argument("snapshot")
    a.add_argument("--config", help="take the nonlinearity from this run config (default gp)")

    s = sub.add_parser("scenario", help="run a named scenario or 'all'")
    s.add_argument("name", help="scenario name or 'all': " + ", ".join(SCENARIOS))
    s.add_argument("--out", default="scenario_out", help="output directory (default scenario_out)")
    s.add_argument("--jobs", type=int, default=1, help="scenarios to run concurrently (default 1)")

    sub.add_parser("catalog", help="print structure reports for the nonlinearity catalog")
    return p


def _C0_for(spec: NonlinearitySpec) -> float | None:
    try:
        return choose_C0(analyze_potential(spec))
    except ValueError:
        return None


def _write_run_outputs(prefix: str, cfg: RunConfig, traj, start_time: float):
    out = cfg.output.directory
    out.mkdir(parents=True, exist_ok=True)
    rows = traj.rows()
    stride = cfg.output.csv_stride
    keep = [r for i, r in enumerate(rows) if i % stride == 0 or i == len(rows) - 1]
    with open(out / f"{prefix}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        w.writerows(keep)
    last = traj.reports[-1]
    with open(out / f"{prefix}.verdict", "w") as fh:
        fh.write(f"status = {traj.status}\n")
        fh.write(f"nonlinearity = {cfg.nonlinearity.label()}\n")
        fh.write(f"t_start = {start_time!r}\n")
        fh.write(f"t_final = {traj.times[-1]!r}\n")
        fh.write(f"final_step = {traj.final_step}\n")
        fh.write(f"E_final = {last.E!r}\n")
        fh.write(f"H_final = {last.H!r}\n")
        fh.write(f"blowup_E_threshold = {cfg.solver.blowup_E_threshold!r}\n")
        fh.write("note = blow-up is flagged by an energy threshold, never proven\n")
    series = {name: (traj.times, traj.series(name)) for name in ("E", "H", "M")}
    plotting.line_plot(out / f"{prefix}.png", series, title=f"{prefix}: {cfg.nonlinearity.label()}")


def _evolve(cfg: RunConfig, field0: Field, start_step: int, prefix: str) -> int:
    ws = SpectralWorkspace(field0.grid)
    out = cfg.output.directory
    out.mkdir(parents=True, exist_ok=True)

    def on_snapshot(step, t, f):
        write_snapshot(f, t, out / f"snap_{step:08d}.nlsf")

    traj = run(
        field0, cfg.nonlinearity, cfg.solver, ws, C0=_C0_for(cfg.nonlinearity), start_step=start_step,
        snapshot_every=cfg.output.snapshot_stride, on_snapshot=on_snapshot,
    )
    if traj.final is not None:
        _, dt = effective_steps(cfg.solver)
        write_snapshot(traj.final, traj.final_step * dt, out / f"{prefix}_final.nlsf")
    _, dt = effective_steps(cfg.solver)
    _write_run_outputs(prefix, cfg, traj, start_step * dt)
    print(f"status={traj.status} t={traj.times[-1]!r} E={traj.reports[-1].E!r}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    return _evolve(cfg, build_initial(cfg), 0, "run")


def _cmd_resume(args) -> int:
    cfg = load_config(args.config)
    field, t = read_snapshot(args.snapshot)
    n_steps, dt = effective_steps(cfg.solver)
    step = int(round(t / dt))
    if abs(step * dt - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= step <= n_steps:
        raise RuntimeError(f"snapshot time {t!r} is not a step of this configuration (dt={dt!r})")
    return _evolve(cfg, field, step, "resume")


def _cmd_analyze(args) -> int:
    field, t = read_snapshot(args.snapshot)
    spec = load_config(args.config).nonlinearity if args.config else gp()
    C0 = _C0_for(spec)
    if C0 is not None and field.farfield != 1.0:
        field = Field(field.grid, field.values * field.farfield.conjugate(), 1.0)
    rep = full_report(field, spec, C0, SpectralWorkspace(field.grid))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerow(rep.csv_row(t, "snapshot"))
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _cmd_scenario(args) -> int:
    if args.name == "all":
        names = list(SCENARIOS)
    elif args.name in SCENARIOS:
        names = [args.name]
    else:
        raise _UsageError(f"unknown scenario {args.name!r}; choose from all, {', '.join(SCENARIOS)}")
    results = run_scenarios(names, Path(args.out), jobs=args.jobs)
    for r in results:
        print(f"{r.name},{'pass' if r.passed else 'fail'}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _cmd_catalog(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["spec", "f_prime_one", "defocusing", "roots_of_f", "rho2", "F_positive_above_one",
                "window_delta", "kato_alpha", "kato_passed", "kato_max_ratio_f", "kato_max_ratio_rho_fprime"])
    for spec in CATALOG_EXAMPLES:
        st = analyze_potential(spec)
        k = check_kato(spec)
        w.writerow([
            spec.label(), repr(st.f_prime_one), st.defocusing,
            " ".join(f"{r:.12g}" for r in st.roots_of_f),
            "" if st.rho2 is None else f"{st.rho2:.12g}",
            st.F_positive_above_one,
            "" if st.convexity_window_delta is None else st.convexity_window_delta,
            k.alpha_used, k.passed, f"{k.max_ratio_f:.6g}", f"{k.max_ratio_rho_fprime:.6g}",
        ])
    return EXIT_OK


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nlsfarf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    handlers = {
        "run": _cmd_run,
        "resume": _cmd_resume,
        "analyze": _cmd_analyze,
        "scenario": _cmd_scenario,
        "catalog": _cmd_catalog,
    }
    try:
        return handlers[args.command](args)
    except _UsageError as exc:
        print(f"nlsfarf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"nlsfarf: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"nlsfarf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SnapshotError, OSError, RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"nlsfarf: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_main())
