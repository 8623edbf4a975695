"""Command line entry point: ``phaseilt <subcommand> [--config FILE] [--seed N] [--out DIR]``.

Exit status is 0 on success, 2 for invalid input and 3 for numerical
failures.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from ..errors import NumericalError, ValidationError
from . import fieldio
from .config import ExperimentConfig, GridSection, RunSection, load_config
from . import experiments as ex

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
GRADCHECK_TOL = 1e-4

logger = logging.getLogger("phaseilt")


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    run_kw = {}
    if args.seed is not None:
        run_kw["seed"] = args.seed
    if args.out is not None:
        run_kw["output_dir"] = args.out
    if run_kw:
        cur = {k: getattr(cfg.run, k) for k in RunSection.__dataclass_fields__}
        cur.update(run_kw)
        cfg = cfg.replace(run=RunSection(**cur))
    return cfg


def _hvars(args, cfg):
    if getattr(args, "hvar", None):
        return tuple(float(v) for v in args.hvar.split(","))
    return cfg.run.hvar_list


def cmd_tcc(args, cfg):
    model, hit = ex.build_model(cfg)
    out = cfg.run.output_dir
    root = fieldio.save_socs(model, os.path.join(out, "socs"), cfg.optics.build(), cfg.grid.build())
    print(f"{'loaded' if hit else 'computed'} {model.n0} modes on a {model.n}x{model.n} grid -> {root}")
    for i, s in enumerate(model.sigma):
        print(f"sigma_{i + 1} = {s:.12e}")
    return EXIT_OK


def cmd_optimize(args, cfg):
    out = cfg.run.output_dir
    fieldio.atomic_write_text(os.path.join(out, "config.json"),
                              json.dumps(cfg.to_dict(), indent=2) + "\n")
    trace, report, _ = ex.run_optimization(cfg, out)
    pf = report["phase_field"]
    print(f"initial pixel error {report['initial_pixel_err']}, final {pf['pixel_err']}, "
          f"d_min {pf['d_min_pct']:.3f}%  ({len(trace.records)} iterations, outputs in {out})")
    return EXIT_OK


def cmd_gradcheck(args, cfg):
    n = args.n or 16
    grid_cfg = cfg.replace(grid=GridSection(n, cfg.grid.dx_nm))
    model, _ = ex.build_model(grid_cfg)
    errs = ex.gradient_check(model, seed=cfg.run.seed)
    worst = 0.0
    for name, err in errs.items():
        print(f"{name:20s} rel. l2 error {err:.3e}")
        worst = max(worst, err)
    if not worst <= GRADCHECK_TOL:
        print(f"gradient check failed: {worst:.3e} > {GRADCHECK_TOL:g}")
        return EXIT_NUMERICAL
    return EXIT_OK


def _load_mask(path, n):
    if path.endswith(".field"):
        u = fieldio.read_field(path, (n, n))[0]
        if np.iscomplexobj(u):
            raise ValidationError("mask field must be real")
        return u
    raw = fieldio.read_raster(path)
    if raw.shape != (n, n):
        raise ValidationError(f"mask raster is {raw.shape}, grid is {n}x{n}")
    return raw.astype(float) if path.endswith(".pbm") else raw / 255.0


def cmd_analyze(args, cfg):
    setup = ex.prepare(cfg)
    u = _load_mask(args.mask, setup.model.n)
    rows = ex.analyze_mask(setup, u, (0.0,))
    row = rows[0]
    report = {"mask": args.mask, "threshold_h": setup.h, **row}
    path = os.path.join(cfg.run.output_dir, "analysis.json")
    fieldio.atomic_write_text(path, json.dumps(report, indent=2) + "\n")
    print(json.dumps(report))
    return EXIT_OK


def cmd_sweep(args, cfg):
    setup = ex.prepare(cfg)
    u = _load_mask(args.mask, setup.model.n)
    rows = ex.analyze_mask(setup, u, _hvars(args, cfg))
    cols = ("hvar", "pixel_err", "d_min_pct", "components", "holes", "holes_in_largest")
    lines = [",".join(cols)] + [",".join(repr(r[c]) for c in cols) for r in rows]
    path = os.path.join(cfg.run.output_dir, "sweep.csv")
    fieldio.atomic_write_text(path, "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_gen_target(args, cfg):
    target = ex.build_target(cfg)
    path = os.path.join(cfg.run.output_dir, f"{cfg.run.target.kind}.pbm")
    fieldio.write_pbm(path, target.indicator > 0.5)
    print(f"{path}: area {target.area:.0f} px, perimeter {target.perimeter:.3f} px")
    return EXIT_OK


COMMANDS = {
    "tcc": (cmd_tcc, "build (or load from cache) the SOCS decomposition"),
    "optimize": (cmd_optimize, "run the full continuation schedule"),
    "gradcheck": (cmd_gradcheck, "compare analytic gradients with finite differences"),
    "analyze": (cmd_analyze, "exposure metrics of a stored mask"),
    "sweep": (cmd_sweep, "threshold-perturbation table of a stored mask"),
    "gen-target": (cmd_gen_target, "write the configured target as a PBM raster"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="phaseilt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--seed", type=int, help="overrides run.seed")
        p.add_argument("--out", help="output directory (overrides run.output_dir)")
        if name in ("analyze", "sweep"):
            p.add_argument("mask", help="mask as .field, .pgm or .pbm")
        if name == "sweep":
            p.add_argument("--hvar", help="comma separated threshold shifts in percent")
        if name == "gradcheck":
            p.add_argument("--n", type=int, help="grid size (default 16)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = _config(args)
        return func(args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
