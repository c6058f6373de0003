"""Command line interface.

Subcommands:

* ``run``       full pipeline on a PQR file or the built-in sphere
* ``surface``   stage 1 only (surface + band diagnostics)
* ``area``      surface area only
* ``bench-ion`` single-ion error table over the grid/tau ladder

Configuration comes from an optional ``key = value`` text file plus
command line overrides.  Exit codes: 0 ok, 1 input/config error,
2 numerical failure.  The output directory defaults to $IBIMPB_OUTDIR
or the working directory.
"""

import argparse
import json
import os
import sys

from .errors import ConfigError, InputError, NumericalError
from .pipeline import RunConfig, bench_ion, run_full, run_surface_only

def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_CONFIG_TYPES = {
    "n": int, "h": float, "probe": float, "pad": float, "k0": float,
    "k1": float, "reinit_steps": int, "cavity_mode": str, "tau_ratio": float,
    "eps_int": float, "eps_ext": float, "kappa": float, "gmres_tol": float,
    "gmres_restart": int, "gmres_max_iter": int, "summation": str,
    "leaf_capacity": int, "order": int, "theta_mac": float, "tree_tol": float,
    "jacobian": str, "threads": int, "out_dir": str, "dump_vtk": _parse_bool,
    "dump_csv": _parse_bool, "input_path": str, "coulomb_constant": float,
}


def parse_config_file(path):
    """Read ``key = value`` lines; '#' starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in _CONFIG_TYPES:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            conv = _CONFIG_TYPES[key]
            try:
                values[key] = conv(val)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{path}:{line_no}: {exc}") from None
    return values


def _parse_sphere(tokens):
    spec = {"r": 1.0, "q": 1.0}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError(f"sphere spec must be k=v, got {tok!r}")
        k, _, v = tok.partition("=")
        if k not in ("r", "q"):
            raise ConfigError(f"sphere spec accepts r= and q=, got {k!r}")
        try:
            spec[k] = float(v)
        except ValueError:
            raise ConfigError(f"bad sphere value {tok!r}") from None
    return spec


def _add_run_options(p):
    p.add_argument("input", nargs="?", help="PQR file")
    p.add_argument("--sphere", nargs="+", metavar="K=V",
                   help="built-in single sphere, e.g. --sphere r=1 q=1")
    p.add_argument("--config", help="key = value config file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--grid", type=int, dest="n", help="nodes per axis")
    g.add_argument("--h", type=float, help="grid spacing (Angstrom)")
    p.add_argument("--probe", type=float)
    p.add_argument("--pad", type=float)
    p.add_argument("--tau-ratio", type=float, dest="tau_ratio")
    p.add_argument("--eps-int", type=float, dest="eps_int")
    p.add_argument("--eps-ext", type=float, dest="eps_ext")
    p.add_argument("--kappa", type=float)
    p.add_argument("--gmres-tol", type=float, dest="gmres_tol")
    p.add_argument("--summation", choices=("dense", "tree", "auto"))
    p.add_argument("--leaf-capacity", type=int, dest="leaf_capacity")
    p.add_argument("--order", type=int)
    p.add_argument("--theta-mac", type=float, dest="theta_mac")
    p.add_argument("--jacobian", choices=("one", "full"))
    p.add_argument("--cavity-mode", choices=("flood", "components"),
                   dest="cavity_mode")
    p.add_argument("--reinit-steps", type=int, dest="reinit_steps")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--dump-vtk", action="store_true", default=None,
                   dest="dump_vtk")
    p.add_argument("--no-csv", action="store_false", default=None,
                   dest="dump_csv")


def build_parser():
    ap = argparse.ArgumentParser(prog="ibimpb", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "surface", "area"):
        p = sub.add_parser(name)
        _add_run_options(p)
    b = sub.add_parser("bench-ion")
    b.add_argument("--grids", type=int, nargs="+", default=[64, 128, 256])
    b.add_argument("--tau-ratios", type=float, nargs="+", default=[1.0, 0.5])
    b.add_argument("--threads", type=int, default=2)
    b.add_argument("--summation", choices=("dense", "tree", "auto"),
                   default="auto")
    b.add_argument("--out", dest="out_dir")
    return ap


def config_from_args(args):
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for key in _CONFIG_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "input", None):
        values["input_path"] = args.input
    if getattr(args, "sphere", None):
        values["sphere"] = _parse_sphere(args.sphere)
        # the built-in sphere is its own excluded surface; no probe needed
        values.setdefault("probe", 0.0)
    if "out_dir" not in values:
        values["out_dir"] = os.environ.get("IBIMPB_OUTDIR", ".")
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bench-ion":
            out_dir = args.out_dir or os.environ.get("IBIMPB_OUTDIR", ".")
            bench_ion(grids=tuple(args.grids),
                      tau_ratios=tuple(args.tau_ratios), out_dir=out_dir,
                      threads=args.threads, summation=args.summation)
            return 0
        config = config_from_args(args)
        if args.command == "run":
            run_full(config)
        elif args.command == "surface":
            run_surface_only(config)
        elif args.command == "area":
            report, _ = run_surface_only(config, quiet=True)
            print(json.dumps({"area": report["area"]}, indent=2))
        return 0
    except InputError as exc:
        print(f"ibimpb: input error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"ibimpb: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
