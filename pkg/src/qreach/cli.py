"""Command-line entry point ``qreach``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
import warnings

from . import __version__
from . import closed_forms as cf
from .config import Config, load_config, parse_config
from .errors import ConfigError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

ORACLES = {
    "qubit": (cf.qubit_bound, ("theta", "phi", "kappa", "gamma", "u_bar")),
    "qutrit": (cf.qutrit_bound, ("theta", "phi", "kappa", "gamma", "u_bar")),
    "dicke": (cf.dicke_bound, ("l", "m", "kappa", "gamma", "u_bar")),
    "fock": (cf.fock_bound, ("n", "kappa", "gamma", "u_bar")),
    "bell": (cf.bell_bounds, ("gamma", "U")),
    "bell_local": (cf.bell_bounds_local, ("gamma", "U")),
    "plus": (cf.plus_product_bound, ("N", "gamma", "U")),
    "ghz": (cf.ghz_bound, ("N", "gamma", "U")),
    "css": (cf.coherent_spin_bound, ("N", "kappa", "gamma", "u_bar")),
    "dicke_center": (cf.dicke_center_bound, ("N", "gamma", "u_bar")),
}
_INTEGER_ARGS = {"n", "N"}


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qreach", description="Fidelity-reachability bounds and feedback simulations "
        "for controlled open quantum systems.", epilog=__doc__.splitlines()[2])
    parser.add_argument("--version", action="version", version=f"qreach {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True, outputs=True):
        p.add_argument("--config", required=config_required, help="YAML configuration file")
        if outputs:
            p.add_argument("--out", help="output directory for CSV files")
            p.add_argument("--plots", action="store_true", help="also render PNG plots from the CSV")

    p = sub.add_parser("bound", help="J* for an explicit system and target(s)")
    common(p)
    p = sub.add_parser("oracle", help="evaluate a closed-form bound, e.g. qubit theta=0.5 ...")
    p.add_argument("name", choices=sorted(ORACLES))
    p.add_argument("values", nargs="*", metavar="key=value")
    for name in ("simulate", "experiment"):
        p = sub.add_parser(name, help="run a master-equation or trajectory simulation"
                           if name == "simulate" else "reproduce a figure or limit")
        if name == "experiment":
            p.add_argument("id", nargs="?", help="experiment id (defaults for every setting)")
        common(p, config_required=name == "simulate")
        p.add_argument("--seed", type=_seed, help="override simulation.seed")
        p.add_argument("--threads", type=_positive, default=1,
                       help="worker threads; changes speed only, never results")
    p = sub.add_parser("validate", help="check a configuration and estimate its runtime")
    p.add_argument("--config", required=True)
    sub.add_parser("list", help="list the experiment catalog")
    return parser


def _with_seed(cfg: Config, seed):
    if seed is None:
        return cfg
    data = dict(cfg)
    data["simulation"] = dict(data.get("simulation", {}), seed=seed)
    return Config(data, cfg.lines, cfg.source)


def _experiment_config(args) -> Config:
    if args.config:
        cfg = load_config(args.config)
        if args.id and args.id != cfg.get("experiment"):
            raise ConfigError(f"experiment id {args.id!r} disagrees with the config",
                              field="experiment", line=cfg.line("experiment"))
        return cfg
    if not args.id:
        raise ConfigError("give an experiment id or --config")
    from .experiments import CATALOG

    if args.id not in CATALOG:
        raise ConfigError(f"unknown experiment id {args.id!r}; 'qreach list' shows the catalog",
                          field="experiment")
    return parse_config(f"schema_version: 1\nexperiment: {json.dumps(args.id)}\n", "<command line>")


def _emit(tables, cfg: Config, args, out=sys.stdout):
    directory = args.out or cfg.get("output", {}).get("dir") or "results"
    prefix = cfg.get("output", {}).get("prefix", "")
    experiment = tables[0].meta.get("experiment", "run")
    for table in tables:
        path = table.write(directory, f"{prefix}{experiment}_")
        print(path, file=out)
        if args.plots:
            from .plots import plot_csv

            try:
                print(plot_csv(path), file=out)
            except ImportError:
                raise ConfigError("--plots needs matplotlib (pip install 'artifact[plots]')") from None
            except ValueError as exc:
                print(f"note: {exc}", file=out)


def _parse_oracle_args(name, values):
    func, keys = ORACLES[name]
    given = {}
    for item in values:
        key, sep, val = item.partition("=")
        if not sep or key not in keys:
            raise ConfigError(f"expected key=value with key in {keys}, got {item!r}", field=key or None)
        try:
            given[key] = int(val) if key in _INTEGER_ARGS else float(val)
        except ValueError:
            raise ConfigError(f"not a number: {val!r}", field=key) from None
    missing = [k for k in keys if k not in given]
    if missing:
        raise ConfigError(f"missing oracle arguments {missing}", field=missing[0])
    return func, [given[k] for k in keys]


def _oracle(args, out):
    func, params = _parse_oracle_args(args.name, args.values)
    try:
        result = func(*params)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(str(exc)) from None
    if hasattr(result, "as_dict"):
        payload = result.as_dict()
    elif hasattr(result, "_asdict"):
        payload = result._asdict()
    else:
        payload = {"j_star": result}
    print(json.dumps({k: float(v) for k, v in payload.items()}, indent=2), file=out)


def _print_table(table, out):
    print(",".join(table.columns), file=out)
    for row in table.rows:
        print(",".join(format(x, ".17g") for x in row), file=out)


def _run(args, out):
    from . import experiments as ex

    if args.command == "list":
        for name, desc in ex.list_experiments():
            print(f"{name:12s} {desc}", file=out)
    elif args.command == "oracle":
        _oracle(args, out)
    elif args.command == "validate":
        cfg = load_config(args.config)
        if "experiment" in cfg:
            seconds = ex.estimate_runtime(cfg)
        else:
            from .config import build_system

            build_system(cfg)
            seconds = None
        msg = "ok" if seconds is None else f"ok (estimated runtime {seconds:.3g} s)"
        print(msg, file=out)
    elif args.command == "bound":
        cfg = load_config(args.config)
        tables = ex.run_bound(cfg)
        if args.out:
            _emit(tables, cfg, args, out)
        else:
            _print_table(tables[0], out)
    elif args.command == "simulate":
        cfg = _with_seed(load_config(args.config), args.seed)
        _emit(ex.run_simulation(cfg, threads=args.threads), cfg, args, out)
    else:
        cfg = _with_seed(_experiment_config(args), args.seed)
        _emit(ex.run_experiment(cfg, threads=args.threads), cfg, args, out)


def _origin(exc) -> str:
    tb = exc.__traceback__
    module = "qreach"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("qreach"):
            module = name
        tb = tb.tb_next
    return module


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning ({category.__name__}): {message}", file=sys.stderr)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.showwarning = _show_warning
            _run(args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure in {_origin(exc)}: {exc}", file=sys.stderr)
        if os.environ.get("QREACH_TRACEBACK"):
            traceback.print_exc()
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
