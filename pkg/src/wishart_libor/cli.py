"""Command-line entry point: ``wishart-libor <command> [config] [options]``.

Every command takes an optional JSON model config (the bundled benchmark when
omitted) and prints a JSON report carrying ``schema_version``. Exit codes:
0 success, 1 internal error, 2 domain or config error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
import traceback
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .affine import WishartParams
from .analytics import SCHEMA_VERSION, atm_swaption_surface, atm_term_structure, build_caplet_surface
from .caps import CapletSpec, CapSpec, FloorletSpec, price_cap, price_caplet, price_floorlet
from .errors import ConfigError, WishartLiborError
from .libor import fit_term_structure
from .oracle import dump_paths, mc_price, simulate_jump_ou, simulate_wishart
from .swaptions import SwaptionSpec, forward_swap_rate, price_swaption
from .verify import Context, run_suite

EXIT_OK, EXIT_INTERNAL, EXIT_DOMAIN, EXIT_VERIFY = 0, 1, 2, 3


def _load(args) -> cfgmod.ModelConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.default_config()
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg.mc = dataclasses.replace(cfg.mc, seed=seed)
    return cfg


def _family(cfg: cfgmod.ModelConfig):
    return fit_term_structure(cfg.model, cfg.curve, cfg.base_direction, auto_scale=cfg.auto_scale)


def _emit(report: dict, out=None):
    text = json.dumps({"schema_version": SCHEMA_VERSION, **report}, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _ints(text: str | None) -> list[int] | None:
    return None if text is None else [int(x) for x in text.split(",") if x.strip()]


def _floats(text: str | None) -> list[float] | None:
    return None if text is None else [float(x) for x in text.split(",") if x.strip()]


# ---------------------------------------------------------------- commands


def cmd_fit(args) -> int:
    cfg = _load(args)
    fam = _family(cfg)
    _emit({
        "command": "fit",
        "scale": fam.scale,
        "xis": [float(x) for x in fam.xis],
        "bond_ratios": [float(x) for x in cfg.curve.bond_ratios],
        "relative_residuals": [float(x) for x in fam.residuals],
        "max_relative_residual": float(np.max(np.abs(fam.residuals))),
    })
    return EXIT_OK


def _instrument(args, cfg, fam):
    curve = cfg.curve
    kind = args.instrument
    if kind in ("caplet", "floorlet"):
        k = args.k if args.k is not None else 1
        strike = args.strike if args.strike is not None else curve.forward_libor(k)
        cls = CapletSpec if kind == "caplet" else FloorletSpec
        return cls(k, strike, args.notional)
    if kind in ("cap", "floor"):
        k_first = args.k if args.k is not None else 1
        k_last = args.k_last if args.k_last is not None else curve.n_tenors - 1
        strike = args.strike if args.strike is not None else forward_swap_rate(curve, k_first, k_last + 1)
        return CapSpec(k_first, k_last, strike, args.notional, floor=kind == "floor")
    i = args.i if args.i is not None else 3
    m = args.m if args.m is not None else min(i + 3, curve.n_tenors)
    strike = args.strike if args.strike is not None else forward_swap_rate(curve, i, m)
    return SwaptionSpec(i, m, strike, args.side, args.notional)


def cmd_price(args) -> int:
    cfg = _load(args)
    fam = _family(cfg)
    spec = _instrument(args, cfg, fam)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if isinstance(spec, FloorletSpec):
            price = price_floorlet(cfg.model, fam, spec, cfg.fourier)
        elif isinstance(spec, CapletSpec):
            price = price_caplet(cfg.model, fam, spec, cfg.fourier)
        elif isinstance(spec, CapSpec):
            price = price_cap(cfg.model, fam, spec.k_first, spec.k_last, spec.strike, cfg.fourier,
                              spec.notional, spec.floor)
        else:
            price = price_swaption(cfg.model, fam, spec, cfg.order, cfg.dps)
    report = {"command": "price", "instrument": args.instrument,
              "spec": {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                       for k, v in dataclasses.asdict(spec).items()},
              "price": float(price), "warnings": sorted({str(w.message) for w in caught})}
    code = EXIT_OK
    if args.verify:
        mc = cfg.mc if args.paths is None else dataclasses.replace(cfg.mc, n_paths=args.paths)
        est = mc_price(spec, cfg.model, fam, mc)
        z = est.z_score(price)
        ok = abs(z) <= args.n_se
        report["verify"] = {"mc_price": est.mean, "std_error": est.std_error, "n_paths": est.n_paths,
                            "z": z, "n_se": args.n_se, "passed": ok}
        code = EXIT_OK if ok else EXIT_VERIFY
    _emit(report)
    return code


def _atm_term_text(cfg, fam, tenors, fmt) -> str:
    rows = []
    for (expiry, vol), k in zip(atm_term_structure(cfg.model, fam, tenors, cfg.fourier), tenors):
        rows.append({"k": k, "expiry": expiry, "forward": cfg.curve.forward_libor(k),
                     "implied_vol": None if not np.isfinite(vol) else vol})
    if fmt == "json":
        return json.dumps({"schema_version": SCHEMA_VERSION, "kind": "atm_term", "rows": rows},
                          indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION} table=implied_vols kind=atm_term\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "expiry", "forward", "implied_vol"])
    for r in rows:
        vol = "" if r["implied_vol"] is None else repr(float(r["implied_vol"]))
        w.writerow([r["k"], repr(float(r["expiry"])), repr(float(r["forward"])), vol])
    return buf.getvalue()


def cmd_surface(args) -> int:
    cfg = _load(args)
    fam = _family(cfg)
    n = cfg.curve.n_tenors
    if args.kind == "atm-term":
        tenors = _ints(args.tenors) or list(range(1, n))
        text = _atm_term_text(cfg, fam, tenors, args.format)
    else:
        if args.kind == "caplet":
            tenors = _ints(args.tenors) or list(range(1, n))
            strikes = _floats(args.strikes)
            if strikes is None:
                mid = float(np.mean(cfg.curve.libor_rates()))
                strikes = list(mid * np.linspace(0.9, 1.1, 9))
            grid = build_caplet_surface(cfg.model, fam, strikes, tenors, cfg.fourier)
        else:
            expiries = _ints(args.tenors) or [3, 6]
            lengths = _ints(args.lengths) or [3, 6]
            grid = atm_swaption_surface(cfg.model, fam, expiries, lengths, cfg.order)
        text = grid.to_json() if args.format == "json" else grid.to_csv(args.table)
    Path(args.out).write_text(text)
    _emit({"command": "surface", "kind": args.kind, "format": args.format, "out": str(args.out)})
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    mc = cfg.mc if args.paths is None else dataclasses.replace(cfg.mc, n_paths=args.paths)
    horizon = args.horizon if args.horizon is not None else float(cfg.curve.maturities[-1])
    times = _floats(args.times)
    sim = simulate_wishart if isinstance(cfg.model, WishartParams) else simulate_jump_ou
    paths = sim(cfg.model, horizon, mc, times)
    dump_paths(paths, args.out)
    _emit({"command": "simulate", "out": str(args.out), "n_paths": int(paths.states.shape[0]),
           "n_times": int(paths.times.size), "seed": int(mc.seed), "scheme": paths.scheme,
           "biased": bool(paths.biased)})
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    ctx = Context.from_config(cfg)

    def show(res):
        print(res.line(), file=sys.stderr, flush=True)

    results = run_suite(args.suite, ctx, _ints(args.criteria), report=show)
    _emit({"command": "verify", "suite": args.suite,
           "passed": all(r.passed for r in results),
           "criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "seconds": round(r.seconds, 3),
                         "checks": [dataclasses.asdict(c) for c in r.checks]} for r in results]})
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_default_config(args) -> int:
    text = cfgmod.default_config_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wishart-libor", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p, seed=False):
        p.add_argument("config", nargs="?", help="JSON model config (default: bundled benchmark)")
        if seed:
            p.add_argument("--seed", type=int, help="override the Monte Carlo seed")
        return p

    p = with_config(sub.add_parser("fit", help="fit the martingale family to the curve"))
    p.set_defaults(func=cmd_fit)

    p = with_config(sub.add_parser("price", help="price one instrument"), seed=True)
    p.add_argument("--instrument", choices=["caplet", "floorlet", "cap", "floor", "swaption"], default="caplet")
    p.add_argument("--k", type=int, help="caplet tenor index, or first caplet of a cap")
    p.add_argument("--k-last", type=int, help="last caplet of a cap")
    p.add_argument("--i", type=int, help="swaption expiry index")
    p.add_argument("--m", type=int, help="swaption final payment index")
    p.add_argument("--side", choices=["receiver", "payer"], default="receiver")
    p.add_argument("--strike", type=float, help="strike rate (default: at the money)")
    p.add_argument("--notional", type=float, default=1.0)
    p.add_argument("--verify", action="store_true", help="cross-check with Monte Carlo")
    p.add_argument("--paths", type=int, help="Monte Carlo paths for --verify")
    p.add_argument("--n-se", type=float, default=3.0, help="allowed standard errors for --verify")
    p.set_defaults(func=cmd_price)

    p = with_config(sub.add_parser("surface", help="write a price and implied-vol surface"))
    p.add_argument("--kind", choices=["caplet", "swaption-atm", "atm-term"], default="caplet")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--table", choices=["implied_vols", "prices"], default="implied_vols",
                   help="matrix written in CSV format")
    p.add_argument("--strikes", help="comma-separated caplet strikes")
    p.add_argument("--tenors", help="comma-separated tenor (or swaption expiry) indices")
    p.add_argument("--lengths", help="comma-separated swap lengths in periods")
    p.set_defaults(func=cmd_surface)

    p = with_config(sub.add_parser("simulate", help="dump simulated state paths to CSV"), seed=True)
    p.add_argument("--horizon", type=float)
    p.add_argument("--paths", type=int)
    p.add_argument("--times", help="comma-separated observation times (default: the step grid)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = with_config(sub.add_parser("verify", help="run the acceptance suite"), seed=True)
    p.add_argument("--suite", choices=["quick", "full"], default="quick")
    p.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("default-config", help="print the bundled benchmark config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_default_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        report = {"error": str(exc), "kind": "config", "path": exc.path, "line": exc.line}
        code = EXIT_DOMAIN
    except (WishartLiborError, ValueError, IndexError) as exc:
        report = {"error": str(exc), "kind": type(exc).__name__}
        code = EXIT_DOMAIN
    except Exception as exc:  # noqa: BLE001
        traceback.print_exc(file=sys.stderr)
        report = {"error": repr(exc), "kind": "internal"}
        code = EXIT_INTERNAL
    _emit({"command": args.command, **report})
    return code


if __name__ == "__main__":
    sys.exit(main())
