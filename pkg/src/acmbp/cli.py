"""Command line entry point: run, make-reference, sweep, selfcheck.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments as ex
from .steppers import StartupError

FLAG_KEYS = ("scheme", "tableau", "r", "nx", "nt", "T", "eps", "alpha", "c0", "out", "ref", "seed", "initial")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; flags override its entries")
    p.add_argument("--scheme", choices=["rk", "rk_plain", "sav"])
    p.add_argument("--tableau", choices=["gl1", "gl2", "gl3", "radau2", "radau3"])
    p.add_argument("--r", type=int, help="finite element degree")
    p.add_argument("--nx", type=int, help="number of elements, h = 2/nx")
    p.add_argument("--nt", type=int, help="number of time steps, tau = T/nt")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--eps", type=float, help="interface parameter")
    p.add_argument("--alpha", type=float, help="maximum bound")
    p.add_argument("--c0", type=float, help="SAV shift")
    p.add_argument("--initial", choices=["smooth", "printed"], help="initial state variant")
    p.add_argument("--out", help="output path (CSV)")
    p.add_argument("--ref", help="reference solution file")
    p.add_argument("--seed", type=int, help="random seed for property suites")


def _config(args, **defaults) -> ex.RunConfig:
    values = dict(defaults)
    if args.config:
        values.update(ex.read_config_file(args.config))
    for key in FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return ex.RunConfig(**values)


def _levels(text):
    if text is None:
        return None
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ex.ConfigError(f"bad --levels value {text!r}") from None


def cmd_run(args) -> int:
    cfg = _config(args).validate()
    ref = ex.load_reference(cfg.ref) if cfg.ref else None
    if ref is not None:
        ref.check_matches(cfg.T, cfg.eps, cfg.initial)
    art = ex.run(cfg, ref)
    worst = max(r.max_abs for r in art.records)
    print(f"steps={cfg.nt} tau={cfg.tau:.6g} max|u|={worst:.17g} max rho={max(r.rho for r in art.records):.3e}")
    if art.steps_path:
        print(f"wrote {art.steps_path}\nwrote {art.final_path}")
    return 0


def cmd_make_reference(args) -> int:
    cfg = _config(args, r=3, nx=400, nt=1000)
    if not cfg.out:
        raise ex.ConfigError("make-reference needs --out")
    ref = ex.make_reference(cfg.T, cfg.eps, cfg.out, r=cfg.r, nx=cfg.nx, nt=cfg.nt, alpha=cfg.alpha, c0=cfg.c0, initial=cfg.initial)
    print(f"wrote {cfg.out} (r={ref.meta['r']}, nx={ref.meta['nx']}, nt={ref.meta['nt']}, T={ref.T}, eps={ref.eps})")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args, tableau="gl3")
    if not cfg.ref:
        raise ex.ConfigError("sweep needs --ref; create one with `acmbp make-reference`")
    ref = ex.load_reference(cfg.ref)
    if args.axis == "time":
        cfg.r = int(ref.meta["r"]) if args.r is None else cfg.r
    res = ex.convergence_sweep(args.axis, cfg, ref, _levels(args.levels), cfg.out)
    t = res.table
    print("level      error       rate")
    for i, (lvl, err) in enumerate(zip(t.resolutions, t.errors)):
        rate = "" if i == 0 else f"{t.rates[i - 1]:.2f}"
        print(f"{int(lvl):5d}  {err:.3e}  {rate}")
    print(f"headline rate {t.headline:.2f}")
    if cfg.out:
        print(f"wrote {cfg.out}")
    return 0


def cmd_selfcheck(args) -> int:
    from .verification import run_all

    seed = args.seed if args.seed is not None else 1
    results = run_all(seed=seed, inject_fault=args.inject_fault)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acmbp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one simulation and write per-step and final CSVs")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("make-reference", help="compute a fine reference solution")
    _add_common(p)
    p.set_defaults(func=cmd_make_reference)

    p = sub.add_parser("sweep", help="spatial or temporal convergence study against a reference")
    _add_common(p)
    p.add_argument("--axis", choices=["space", "time"], required=True)
    p.add_argument("--levels", help="comma separated N_x (space) or N_t (time) values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("selfcheck", help="run the structural property suites")
    p.add_argument("--seed", type=int)
    p.add_argument("--inject-fault", action="store_true", help="perturb a tableau (negative control)")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except ex.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StartupError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
