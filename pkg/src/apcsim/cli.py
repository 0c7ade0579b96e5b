"""Command-line entry point: ``apcsim run|ode|validate|sweep``.

Exit codes: 0 success, 1 configuration (or I/O) error, 2 solver abort,
3 validation failure.  Every command prints the effective configuration
before doing any work.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import fieldio
from .errors import ConfigError, IntegrationError, SolverError
from .ode import OdeRun, conservation_report, integrate
from .scenario import BUILTIN, KEYS, echo, load, parse
from .simulation import RunResult, run

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3


def _common_overrides(args) -> list:
    """Translate convenience flags into ``section.key=value`` overrides."""
    out = list(args.set or [])
    if getattr(args, "grid", None):
        try:
            nx, ny = (int(v) for v in args.grid.split(","))
        except ValueError:
            raise ConfigError(f"--grid expects NX,NY, got {args.grid!r}") from None
        out += [f"geometry.nx={nx}", f"geometry.ny={ny}"]
    if getattr(args, "snapshots", None) is not None:
        out.append(f"run.snapshot_times={args.snapshots}")
    return out


def _out_dir(args, cfg) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get("APC_OUT_DIR") or cfg.output_dir) / cfg.name


def _print_config(cfg) -> None:
    print("# effective configuration")
    print(echo(cfg), end="")
    print(f"# digest {cfg.digest()}")


def write_run(res: RunResult, out: Path) -> list:
    """Write snapshots, time series, ledger, config echo and heatmaps."""
    out.mkdir(parents=True, exist_ok=True)
    digest = res.config.digest()
    written = []
    for f in res.snapshots:
        stem = f"snap_t{f.t:g}"
        written += fieldio.write_snapshot(f, out, stem, res.grid, digest)
        if res.config.heatmaps:
            for s in range(1, 6):
                path = out / f"{stem}_rho{s}.ppm"
                fieldio.render_heatmap(f, s, path)
                written.append(path)
    fieldio.write_timeseries(res.series, out / "timeseries.csv")
    fieldio.write_ledger(res.ledger, out / "ledger.json")
    (out / "config.txt").write_text(echo(res.config))
    return written + [out / "timeseries.csv", out / "ledger.json", out / "config.txt"]


def _print_summary(res: RunResult, out: Path) -> None:
    s = res.summary()
    print(f"final U          {s['U_final']:.10g}")
    print(f"exit outflow     {s['outflow_cum']:.10g}")
    print(f"mortality        {s['mortality_cum']:.10g}")
    print(f"ledger closure   {s['ledger_closure']:.3e}")
    print(f"max rho_tilde    {s['max_rhotilde']:.6g}")
    print(f"velocity clamps  {s['velocity_clamps']}")
    print(f"min density      {s['min_density']:.3e}")
    print(f"peak exit panic  {s['peak_exit_panic']:.6g}")
    print(f"steps            {s['steps']} (dt={s['dt']:.6g}, {s['wall_time_s']} s)")
    print(f"output           {out}")


def cmd_run(args) -> int:
    cfg = load(args.source, _common_overrides(args))
    _print_config(cfg)
    res = run(cfg, engine=args.engine)
    out = _out_dir(args, cfg)
    write_run(res, out)
    _print_summary(res, out)
    return EXIT_OK


def cmd_ode(args) -> int:
    text = BUILTIN.get(args.source, None) if args.source else ""
    if text is None:
        cfg = load(args.source, args.set or [])
    else:
        cfg = parse(text, args.set or [], origin=args.source or "defaults")
    _print_config(cfg)
    t_end = cfg.control.t_end if args.t_end is None else args.t_end
    traj = integrate(OdeRun(t1=t_end, dt=args.dt, method=args.method, store_every=args.store_every),
                     cfg.schedule, cfg.behavior)
    drift = conservation_report(traj)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        traj.write_csv(args.out)
    names = ("alert", "panic", "control", "daily", "post-event", "dead")
    print(f"t = {traj.times[-1]:g}")
    for name, v in zip(names, traj.final):
        print(f"  {name:<11}{v:.12g}")
    print(f"max conservation drift {drift:.3e}")
    if args.out:
        print(f"trajectory {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validate import run_suite

    print("# validation settings")
    print(f"inject_h_sign = {str(args.inject_h_sign).lower()}")
    print(f"cfl_safety = {args.cfl_safety!r}")
    checks = run_suite(inject_h_sign=args.inject_h_sign, cfl_safety=args.cfl_safety)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


def parse_grid(specs) -> list:
    """``["key=v1,v2", ...]`` -> list of override lists (cartesian product).

    Values are split on ``;`` when present (for list-valued keys),
    otherwise on ``,``.
    """
    axes = []
    for spec in specs or []:
        key, sep, raw = spec.partition("=")
        key = key.strip()
        if not sep or key not in KEYS:
            raise ConfigError(f"--param {spec!r}: expected section.key=v1,v2,... with a known key")
        values = [v.strip() for v in raw.split(";" if ";" in raw else ",") if v.strip()]
        if not values:
            raise ConfigError(f"--param {key} has no values")
        axes.append([f"{key}={v}" for v in values])
    if not axes:
        raise ConfigError("empty parameter grid: give at least one --param")
    return [list(p) for p in itertools.product(*axes)]


def _sweep_point(job):
    index, source, base, point, out, engine = job
    cfg = load(source, base + point)
    row = {"point": index, **dict(o.split("=", 1) for o in point)}
    try:
        res = run(cfg, engine=engine)
    except SolverError as exc:
        return {**row, "status": f"solver abort: {exc}", "U_final": "", "outflow_cum": "",
                "peak_exit_density": ""}
    write_run(res, Path(out))
    s = res.summary()
    return {**row, "status": "ok", "U_final": repr(s["U_final"]), "outflow_cum": repr(s["outflow_cum"]),
            "peak_exit_density": repr(s["peak_exit_panic"])}


def cmd_sweep(args) -> int:
    points = parse_grid(args.param)
    base = _common_overrides(args)
    cfg = load(args.source, base)
    _print_config(cfg)
    root = Path(args.out) if args.out else Path(os.environ.get("APC_OUT_DIR") or cfg.output_dir) / \
        f"{cfg.name}_sweep"
    jobs = []
    for i, point in enumerate(points):
        load(args.source, base + point)  # fail fast on a bad point
        jobs.append((i, args.source, base, point, str(root / f"point_{i:03d}"), args.engine))
    print(f"# sweep: {len(jobs)} points, {args.jobs} worker(s)")
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    root.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0].keys())
    with open(root / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(", ".join(f"{k}={r[k]}" for k in fields))
    print(f"summary {root / 'summary.csv'}")
    return EXIT_SOLVER if any(r["status"] != "ok" for r in rows) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="apcsim", description="Alert/panic/control crowd evacuation simulator")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    def overrides(p):
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config key (repeatable)")

    def scenario_flags(p):
        overrides(p)
        p.add_argument("--out", metavar="DIR", help="output directory (default $APC_OUT_DIR/<name>)")
        p.add_argument("--snapshots", metavar="T1,T2,...", help="snapshot times")
        p.add_argument("--grid", metavar="NX,NY", help="number of cells")
        p.add_argument("--engine", choices=("kernel", "numpy"), default="kernel")

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("source", help=f"config file or built-in name ({', '.join(BUILTIN)})")
    scenario_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ode", help="integrate the spatially homogeneous model")
    p.add_argument("source", nargs="?", default=None, help="optional config file or built-in name")
    overrides(p)
    p.add_argument("--t-end", type=float, default=None, help="final time (default run.t_end)")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--method", choices=("rk4", "euler"), default="rk4")
    p.add_argument("--store-every", type=int, default=1)
    p.add_argument("--out", metavar="FILE", help="trajectory CSV")
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("validate", help="run the invariant suite")
    p.add_argument("--inject-h-sign", action="store_true", help="debug: flip the sign of H in the panic equation")
    p.add_argument("--cfl-safety", type=float, default=0.5, help="debug: CFL safety of the positivity run")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="cartesian parameter sweep")
    p.add_argument("source", help="config file or built-in name")
    p.add_argument("--param", action="append", metavar="SECTION.KEY=V1,V2,...", help="sweep axis (repeatable)")
    p.add_argument("--jobs", type=int, default=1, help="points run in parallel")
    scenario_flags(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be >= 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, IntegrationError) as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
