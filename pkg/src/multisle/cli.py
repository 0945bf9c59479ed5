"""Command line interface.

Subcommands: constants, simulate, trace, hsiz, survival, experiment.
Options may come from a flat key=value config file (--config); explicit
flags override file entries.  Exit codes: 0 pass, 1 fail, 2 inconclusive,
3 usage or configuration error.  The default thread count is read from
MULTISLE_THREADS when --threads is not given.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .core import config_points, derived_parameters
from .density import j_constant, mehta_constant
from .errors import MultiSLEError
from .experiments import EXPERIMENT_NAMES, ExperimentConfig, emit_report, run_experiment
from .loewner import (
    hsiz_hcap_check,
    read_curve_csv,
    sample_driving,
    trace_curve,
    write_curve_csv,
)
from .partition import gff_partition, pure_pair_partition
from .sde import SimConfig, simulate, write_ensemble_binary, write_ensemble_csv

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 3

THREADS_ENV = "MULTISLE_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with code 3, not argparse's 2
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(";", ",").split(",") if v)
    except ValueError as exc:
        raise _UsageError(f"cannot parse number list {text!r}") from exc


def _load_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise _UsageError(f"{path}:{lineno}: expected key=value")
                key, val = line.split("=", 1)
                out[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise _UsageError(f"cannot read config file {path}: {exc}") from exc
    return out


def _merged(args: argparse.Namespace, parser_defaults: dict) -> argparse.Namespace:
    """File values fill in options the user left at their defaults."""
    if not getattr(args, "config", None):
        return args
    filevals = _load_config_file(args.config)
    for key, raw in filevals.items():
        if not hasattr(args, key):
            raise _UsageError(f"unknown config key {key!r}")
        if getattr(args, key) != parser_defaults.get(key):
            continue  # explicit flag wins
        cur = parser_defaults.get(key)
        if isinstance(cur, bool):
            val = raw.lower() in ("1", "true", "yes")
        elif isinstance(cur, int) and not isinstance(cur, bool):
            val = int(raw)
        elif isinstance(cur, float):
            val = float(raw)
        elif isinstance(cur, tuple) or key in ("t_grid", "r_grid", "x0", "store"):
            val = _float_list(raw)
        else:
            val = raw
        setattr(args, key, val)
    return args


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--format", default=None,
                    choices=("json", "csv", "markdown", "bin"))
    sp.add_argument("--config", default=None,
                    help="flat key=value option file; flags override it")


def build_parser() -> _Parser:
    parser = _Parser(prog="multisle",
                     description="Multichordal SLE / Dyson simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="normalization constants I and J")
    p.add_argument("--which", choices=("mehta", "j"), default="mehta")
    p.add_argument("--kappa", type=float, default=4.0)
    p.add_argument("--p", type=int, default=2, help="number of points (mehta)")
    p.add_argument("--n", type=int, default=1, help="number of chords (j)")
    p.add_argument("--z", choices=("pair", "gff"), default="pair")
    p.add_argument("--samples", type=int, default=2_000_000)
    _add_common(p)

    p = sub.add_parser("simulate", help="simulate a driving-function ensemble")
    p.add_argument("--variant", choices=("dyson", "pure", "gff"), default="pure")
    p.add_argument("--kappa", type=float, default=4.0)
    p.add_argument("--x0", type=_float_list, default=(0.0, 1.0))
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--t-end", dest="t_end", type=float, default=1.0)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--store", type=_float_list, default=())
    p.add_argument("--collision-eps", dest="collision_eps", type=float,
                   default=None)
    _add_common(p)

    p = sub.add_parser("trace", help="trace a Loewner curve")
    p.add_argument("--kappa", type=float, default=4.0)
    p.add_argument("--t-end", dest="t_end", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--driving", default=None,
                   help="CSV file t,w; default samples sqrt(kappa) B")
    _add_common(p)

    p = sub.add_parser("hsiz", help="ball-union area and hcap comparability")
    p.add_argument("--curve", required=True, help="curve CSV (t,re,im)")
    p.add_argument("--resolution", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("survival", help="survival probabilities on a t grid")
    p.add_argument("--variant", choices=("dyson", "pure", "gff"), default="pure")
    p.add_argument("--kappa", type=float, default=4.0)
    p.add_argument("--x0", type=_float_list, default=(0.0, 1.0))
    p.add_argument("--t-grid", dest="t_grid", type=_float_list,
                   default=(25.0, 50.0, 100.0, 200.0, 400.0))
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--paths", type=int, default=10_000)
    _add_common(p)

    p = sub.add_parser("experiment", help="run a named reproduction experiment")
    p.add_argument("name", choices=EXPERIMENT_NAMES)
    p.add_argument("--variant", choices=("dyson", "pure", "gff"), default="pure")
    p.add_argument("--kappa", type=float, default=4.0)
    p.add_argument("--x0", type=_float_list, default=None)
    p.add_argument("--t-grid", dest="t_grid", type=_float_list, default=None)
    p.add_argument("--r-grid", dest="r_grid", type=_float_list, default=None)
    p.add_argument("--s-time", dest="s_time", type=float, default=1.0)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--boxes", type=int, default=5)
    _add_common(p)

    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            with open(out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise MultiSLEError(f"cannot write output file {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _cmd_constants(args) -> int:
    params = derived_parameters(args.kappa)
    if args.which == "mehta":
        est = mehta_constant(args.p, params, samples=args.samples,
                             seed=args.seed)
        inputs = {"kappa": args.kappa, "p": args.p, "samples": args.samples}
        name = "mehta_I"
    else:
        z = gff_partition(args.n) if args.z == "gff" else \
            pure_pair_partition(params)
        est = j_constant(z, params, samples=args.samples, seed=args.seed)
        inputs = {"kappa": args.kappa, "n": args.n, "z": args.z,
                  "samples": args.samples}
        name = "J_alpha"
    _emit(_json({"name": name, "value": est.value, "std_error": est.std_error,
                 "method": est.method, "inputs": inputs}), args.out)
    return EXIT_PASS


def _make_spec(variant: str, kappa: float, p: int):
    from .sde import dyson_spec, gff_spec, pure_spec

    params = derived_parameters(kappa)
    if variant == "dyson":
        return dyson_spec(p, params)
    if variant == "gff":
        return gff_spec(p // 2)
    return pure_spec(pure_pair_partition(params), params)


def _cmd_simulate(args) -> int:
    pts = config_points(args.x0)
    spec = _make_spec(args.variant, args.kappa, pts.size)
    cfg = SimConfig(dt=args.dt, t_end=args.t_end, seed=args.seed,
                    paths=args.paths, store_times=tuple(args.store),
                    collision_eps=args.collision_eps)
    ens = simulate(spec, pts, cfg)
    if args.out:
        if args.format == "bin":
            write_ensemble_binary(ens, args.out)
        else:
            write_ensemble_csv(ens, args.out)
    finite = ens.lifetime[np.isfinite(ens.lifetime)]
    sys.stdout.write(_json({
        "paths": ens.paths,
        "survived_fraction": float(np.mean(np.isinf(ens.lifetime))),
        "absorbed_fraction": float(np.mean(ens.absorbed)),
        "mean_lifetime_of_dead": float(finite.mean()) if finite.size else None,
        "output": args.out,
    }))
    return EXIT_PASS


def _cmd_trace(args) -> int:
    if args.driving:
        data = np.loadtxt(args.driving, delimiter=",", skiprows=1, ndmin=2)
        times, values = data[:, 0], data[:, 1]
    else:
        times, values = sample_driving(args.kappa, args.t_end, args.steps,
                                       args.seed)
    curve = trace_curve(times, values, steps=args.steps, kappa=args.kappa)
    if args.out:
        write_curve_csv(curve, args.out)
    tip = curve.points[-1]
    sys.stdout.write(_json({
        "steps": curve.steps,
        "hcap": float(curve.capacity_times[-1]),
        "tip": [float(tip.real), float(tip.imag)],
        "output": args.out,
    }))
    return EXIT_PASS


def _cmd_hsiz(args) -> int:
    curve = read_curve_csv(args.curve)
    rep = hsiz_hcap_check(curve, args.resolution)
    _emit(_json(rep), args.out)
    return EXIT_PASS if (rep["lower_ok"] and rep["upper_ok"]) else EXIT_FAIL


def _cmd_survival(args) -> int:
    pts = config_points(args.x0)
    spec = _make_spec(args.variant, args.kappa, pts.size)
    cfg = SimConfig(dt=args.dt, t_end=max(args.t_grid), seed=args.seed,
                    paths=args.paths)
    ens = simulate(spec, pts, cfg)
    rows = [{"t": t, "survival": ens.survival_fraction(t),
             "std_error": math.sqrt(max(ens.survival_fraction(t)
                                        * (1 - ens.survival_fraction(t)),
                                        1.0 / args.paths) / args.paths)}
            for t in args.t_grid]
    _emit(_json({"x0": list(args.x0), "kappa": args.kappa,
                 "variant": args.variant, "paths": args.paths,
                 "rows": rows}), args.out)
    return EXIT_PASS


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig(
        name=args.name, kappa=args.kappa, variant=args.variant,
        x0=args.x0, t_grid=args.t_grid, r_grid=args.r_grid,
        s_time=args.s_time, paths=args.paths, dt=args.dt, seed=args.seed,
        boxes=args.boxes, out=args.out,
    )
    report = run_experiment(cfg)
    fmt = args.format if args.format in ("json", "csv", "markdown") else "json"
    _emit(emit_report(report, fmt), args.out)
    if report.status == "pass":
        return EXIT_PASS
    if report.status == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_FAIL


_COMMANDS = {
    "constants": _cmd_constants,
    "simulate": _cmd_simulate,
    "trace": _cmd_trace,
    "hsiz": _cmd_hsiz,
    "survival": _cmd_survival,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        defaults = {a.dest: a.default
                    for g in parser._subparsers._group_actions
                    for a in g.choices[args.command]._actions}
        args = _merged(args, defaults)
        threads = args.threads
        if threads is None and os.environ.get(THREADS_ENV):
            threads = int(os.environ[THREADS_ENV])
        if threads is not None:
            import numba

            numba.set_num_threads(max(1, threads))
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except MultiSLEError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
