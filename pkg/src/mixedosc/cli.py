"""Command-line front end.

Every subcommand prints a JSON summary on stdout.  Exit status is 0 on
success, 2 on usage errors and 1 on invalid configurations or numerical
failures (with a diagnostic JSON document).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from .dominance import Label, region_scan
from .exceptions import ConfigError, DegeneracyError, DivergenceError, InvalidInputError
from .fastslow import design_fs, predict_half_period
from .feedback import FeedbackConfig, estimate_oscillation, loop_tf, simulate
from .harmonic import beta_bar, design_hb, predict as hb_predict
from .twomass import TwoMassParams, net_displacement, simulate_locomotion

SUBCOMMANDS = ("region", "design-hb", "design-fs", "predict", "simulate", "two-mass",
               "validate")


def _clean(obj):
    """Make ``obj`` strict-JSON serializable (inf -> "inf", nan -> null)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _emit(doc, stream=None):
    stream = sys.stdout if stream is None else stream
    stream.write(json.dumps(_clean(doc), sort_keys=True) + "\n")


def parse_range(text: str) -> np.ndarray:
    """``lo:hi:count`` -> ``count`` evenly spaced values including both ends."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"range {text!r} must look like lo:hi:count")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"range {text!r} must look like lo:hi:count") from None
    if n < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"range {text!r}: need count >= 1 and lo <= hi")
    return np.linspace(lo, hi, n)


def validate_config(path) -> FeedbackConfig:
    """Load and check a configuration file; raises :class:`ConfigError`."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path} is not valid JSON: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ConfigError([f"{path}: top-level JSON value must be an object"])
    return FeedbackConfig.from_dict(doc)


def _load(args) -> FeedbackConfig:
    cfg = validate_config(args.config)
    changes = {n: getattr(args, n) for n in ("k", "beta", "r") if getattr(args, n, None) is not None}
    return cfg.replace(**changes) if changes else cfg


def _cmd_validate(args):
    cfg = validate_config(args.config)
    G = loop_tf(cfg)
    return {"config": cfg.to_dict(), "config_hash": cfg.digest(),
            "G": {"num": list(G.num.coeffs), "den": list(G.den.coeffs)}, "valid": True}


def _cmd_region(args):
    cfg = validate_config(args.config)
    grid = region_scan(cfg, args.k, args.beta)
    if args.out:
        grid.to_csv(args.out)
    return {"config_hash": cfg.digest(), "out": args.out, "shape": list(grid.labels.shape),
            "counts": {lab.value: grid.count(lab) for lab in Label}}


def _cmd_design_hb(args):
    cfg = _load(args)
    d = design_hb(cfg, args.omega)
    if d is None:
        raise ArithmeticError(f"no balance satisfies the phase condition at omega = {args.omega}")
    doc = d.to_dict()
    doc["config_hash"] = cfg.digest()
    return doc


def _cmd_design_fs(args):
    cfg = _load(args)
    d = design_fs(cfg, args.omega)
    if args.trace:
        d.trace_csv(args.trace)
    doc = d.to_dict()
    if not args.verbose:
        doc.pop("rejections")
    doc["config_hash"] = cfg.digest()
    doc["found"] = d.found
    return doc


def _cmd_predict(args):
    cfg = _load(args)
    hb = [asdict(p) for p in hb_predict(cfg)]
    fs = predict_half_period(cfg)
    return {"config_hash": cfg.digest(), "beta_bar": beta_bar(cfg), "harmonic_balance": hb,
            "fast_slow": {"h2": fs.h2, "h1": fs.h1, "omega": fs.omega,
                          "reason": None if fs.reason is None else fs.reason.value}}


def _cmd_simulate(args):
    cfg = _load(args)
    ts = simulate(cfg, T=args.T, dt=args.dt, stride=args.stride)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("t,y\n")
            for t, y in zip(ts.t, ts.y):
                fh.write("%.9g,%.9g\n" % (t, y))
    est = estimate_oscillation(ts)
    return {"config_hash": cfg.digest(), "out": args.out, "dt": ts.metadata["dt"],
            "oscillation": None if est is None else asdict(est)}


def _cmd_two_mass(args):
    params = TwoMassParams(epsilon=args.epsilon)
    tr = simulate_locomotion(params, k=args.k, beta=args.beta, tau_p=args.tau_p,
                             tau_n=args.tau_n, r=args.r or 0.0, friction=args.friction,
                             T=args.T, dt=args.dt)
    if args.out:
        tr.to_csv(args.out)
    est = tr.oscillation()
    return {"friction": args.friction, "k": args.k, "beta": args.beta, "out": args.out,
            "oscillation": None if est is None else asdict(est),
            "net_displacement": net_displacement(tr)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixedosc",
                                description="Mixed-feedback oscillator design toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp, overrides=True):
        sp.add_argument("--config", required=True, help="FeedbackConfig JSON file")
        if overrides:
            sp.add_argument("--k", type=float, help="override the gain")
            sp.add_argument("--beta", type=float, help="override the balance")
            sp.add_argument("--r", type=float, help="override the reference")
        return sp

    sp = with_config(sub.add_parser("validate", help="check a configuration"), False)
    sp.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("region", help="classify a (k, beta) grid")
    sp.add_argument("--config", required=True)
    sp.add_argument("--k", type=parse_range, required=True, help="lo:hi:count")
    sp.add_argument("--beta", type=parse_range, required=True, help="lo:hi:count")
    sp.add_argument("--out", help="CSV output path")
    sp.set_defaults(func=_cmd_region)

    for name, func, default in (("design-hb", _cmd_design_hb, 1.0),
                                ("design-fs", _cmd_design_fs, 0.1)):
        sp = with_config(sub.add_parser(name, help=f"{name} frequency design"))
        sp.add_argument("--omega", type=float, default=default, help="target rad/s")
        sp.set_defaults(func=func)
        if name == "design-fs":
            sp.add_argument("--trace", help="CSV dump of the beta sweep")
            sp.add_argument("--verbose", action="store_true", help="include rejection reasons")

    sp = with_config(sub.add_parser("predict", help="harmonic-balance and relay predictions"))
    sp.set_defaults(func=_cmd_predict)

    sp = with_config(sub.add_parser("simulate", help="simulate the closed loop"))
    sp.add_argument("--T", type=float, default=200.0)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--stride", type=int, default=1)
    sp.add_argument("--out", help="CSV output path (t,y)")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("two-mass", help="simulate the two-mass locomotion example")
    sp.add_argument("--k", type=float, default=20.0)
    sp.add_argument("--beta", type=float, default=0.1538)
    sp.add_argument("--tau-p", dest="tau_p", type=float, default=1.0)
    sp.add_argument("--tau-n", dest="tau_n", type=float, default=10.0)
    sp.add_argument("--r", type=float, default=0.0)
    sp.add_argument("--friction", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--epsilon", type=float, default=1e-2, help="friction smoothing")
    sp.add_argument("--T", type=float, default=200.0)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--out", help="CSV output path")
    sp.set_defaults(func=_cmd_two_mass)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        doc = args.func(args)
    except ConfigError as exc:
        _emit({"error": "invalid-config", "violations": exc.violations})
        return 1
    except (DivergenceError, DegeneracyError, ArithmeticError, InvalidInputError) as exc:
        _emit({"error": "numerical-failure", "type": type(exc).__name__, "message": str(exc)})
        return 1
    _emit(doc)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
