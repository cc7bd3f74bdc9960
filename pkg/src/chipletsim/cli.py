"""Command line: run, sweep, cost, gen, validate.

Exit status: 0 success, 1 usage or configuration error, 2 simulation error,
3 watchdog timeout.
"""

from __future__ import annotations

import argparse
import json
import sys

import yaml

from . import cost as C
from . import energy as E
from .dataset import DatasetError, generate_rmat, write_csr
from .memhier import MemoryConfigError
from .execution import SimulationError, WatchdogTimeout
from .report import ReportError, SweepSpec, geomean_by, run_experiment, run_sweep
from .sysconfig import ConstraintViolation, apply_overrides, load_raw, system_from_raw
from .workloads import APPS, WorkloadError

EXIT_OK, EXIT_USAGE, EXIT_SIM, EXIT_WATCHDOG = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 means a simulation error here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_args(p):
    p.add_argument("--config", help="YAML file with tapeout/packaging/compile/energy/cost sections")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KNOB=VALUE",
                   help="override one knob (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="chipletsim", description="Tile/chiplet graph-accelerator simulator.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("run", help="simulate one application")
    p.add_argument("--app", required=True, help=f"one of {', '.join(APPS)}")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--rmat", help="RMAT graph as SCALExEDGEFACTOR, e.g. 12x16")
    g.add_argument("--dataset", help="path to a .csr file or a text edge list")
    p.add_argument("--seed", type=int, default=1, help="RMAT seed")
    _config_args(p)
    p.add_argument("--out", default="out", help="directory for the report and summary.csv")
    p.add_argument("--label", default="")
    p.add_argument("--root", type=int, help="BFS/SSSP source (default: highest out-degree vertex)")
    p.add_argument("--epochs", type=int, help="PageRank epochs")
    p.add_argument("--damping", type=float, help="PageRank damping")
    p.add_argument("--bin-width", type=int, help="Histogram bin width")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field")

    p = sub.add_parser("sweep", help="run a parameter sweep described by a YAML file")
    p.add_argument("spec", help="sweep file: axes, apps, datasets, mode, seeds")
    _config_args(p)
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("cost", help="standalone cost report for a configuration")
    _config_args(p)

    p = sub.add_parser("gen", help="write an RMAT graph to a binary CSR file")
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--edgefactor", type=int, default=16)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("validate", help="check a configuration against every rule")
    _config_args(p)
    return ap


def _raw(args) -> dict:
    try:
        raw = load_raw(args.config)
        return apply_overrides(raw, args.overrides)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_run(args) -> int:
    if args.app not in APPS:
        raise UsageError(f"unknown app {args.app!r}; choose from {', '.join(APPS)}")
    app_args = {k: v for k, v in (("root", args.root), ("epochs", args.epochs), ("damping", args.damping),
                                  ("bin_width", args.bin_width)) if v is not None}
    dataset = args.rmat if args.rmat else args.dataset
    rep = run_experiment(_raw(args), args.app, dataset, (), app_args, out_dir=args.out,
                         label=args.label, timestamp=not args.no_timestamp, dataset_seed=args.seed)
    mt = rep["metrics"]
    print(f"{args.app}: {mt['wall_cycles']} cycles, {mt['teps'] / 1e9:.4f} GTEPS, "
          f"{mt['energy_j'] * 1e3:.4f} mJ, hit rate {mt['hit_rate']:.3f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        with open(args.spec) as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise UsageError(str(exc)) from exc
    spec = SweepSpec.from_dict(data, base=_raw(args))
    rows = run_sweep(spec, workers=args.workers, out_path=args.out)
    failed = sum(1 for r in rows if r["status"] != "ok")
    print(f"{len(rows)} points, {failed} failed -> {args.out}")
    if len(spec.apps) > 1:
        for label, g in sorted(geomean_by(rows, "teps", "label").items()):
            print(f"  {label}: geomean TEPS {g:.4g}")
    return EXIT_OK


def cmd_cost(args) -> int:
    raw = _raw(args)
    system = system_from_raw(raw)
    rep = C.system_cost(system, C.constants_from_dict(raw.get("cost")))
    print(json.dumps(rep.as_dict(), indent=2))
    return EXIT_OK


def cmd_gen(args) -> int:
    ds = generate_rmat(args.scale, args.edgefactor, args.seed, weighted=not args.unweighted)
    write_csr(ds, args.output)
    print(f"wrote {args.output}: {ds.num_vertices} vertices, {ds.num_edges} edges")
    return EXIT_OK


def cmd_validate(args) -> int:
    raw = _raw(args)
    try:
        system_from_raw(raw)
    except ConstraintViolation as exc:
        for v in exc.violations:
            print(v)
        return EXIT_USAGE
    print("ok")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "cost": cmd_cost, "gen": cmd_gen, "validate": cmd_validate}


def _where(exc) -> str:
    return type(exc).__module__.rsplit(".", 1)[-1]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except WatchdogTimeout as exc:
        print(f"watchdog: {exc}", file=sys.stderr)
        return EXIT_WATCHDOG
    except (UsageError, ConstraintViolation, ReportError, DatasetError, MemoryConfigError,
            C.CostError, E.EnergyError, WorkloadError) as exc:
        print(f"error [{_where(exc)}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"simulation error [{_where(exc)}]: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
