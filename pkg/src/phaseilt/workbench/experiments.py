"""Glue between an :class:`ExperimentConfig` and the numerical modules.

These helpers are what the command line tool runs; they are also handy
in scripts and tests that want the standard pipeline without the file
output.
"""

from dataclasses import dataclass
import logging
import os

import numpy as np

from .. import functionals as fn
from .. import gradients as gr
from .. import optimizer as opt
from ..analysis import (TargetPattern, default_threshold, expose, pixel_error,
                        stability_metric, threshold_sweep)
from ..forward_model import intensity
from ..optics import GridSpec
from . import fieldio
from .config import cache_dir_for
from .targets import generate_target

logger = logging.getLogger(__name__)


@dataclass
class Setup:
    """Everything a run needs: threshold-normalized model, target and threshold."""

    model: object
    raw_model: object
    target: TargetPattern
    h: float
    functional: fn.FunctionalConfig
    schedule: opt.Schedule
    cache_hit: bool = False


def build_model(cfg):
    sys = cfg.optics.build()
    grid = cfg.grid.build()
    return fieldio.cached_socs(sys, grid, cfg.socs.n0, cache_dir_for(cfg), cfg.socs.method)


def build_target(cfg, grid=None):
    grid = grid or cfg.grid.build()
    spec = cfg.run.target
    return generate_target(spec.kind, grid, spec.rects)


def prepare(cfg):
    raw, hit = build_model(cfg)
    target = build_target(cfg, raw.grid)
    h = default_threshold(raw, target, cfg.functional.threshold_fraction)
    return Setup(raw.rescaled(1.0 / h), raw, target, h, cfg.functional.build(),
                 cfg.schedule.build(), hit)


def initial_guess(cfg, target):
    spec = cfg.run.initial_guess
    u = opt.make_initial_guess(spec.kind, target, blur_px=spec.blur_px, level=spec.level,
                               amplitude=spec.amplitude, period_px=spec.period_px)
    if spec.noise > 0:
        rng = np.random.default_rng(cfg.run.seed)
        u = opt.project(u + spec.noise * rng.uniform(-1.0, 1.0, u.shape))
    return u


def support_mask(cfg, target):
    r = cfg.run.support_radius_px
    return None if r is None else opt.support_from_target(target, r)


def final_report(setup, u, hvar_list, initial_pixel_err=None):
    """Metrics of the final phase field and of its binarization ``{u > 1/2}``."""
    out = {"threshold_h": setup.h, "initial_pixel_err": initial_pixel_err}
    for label, field in (("phase_field", u), ("binarized", (u > 0.5).astype(float))):
        bundle = intensity(setup.model, field)
        _, dmin = stability_metric(bundle)
        out[label] = {
            "pixel_err": pixel_error(expose(bundle, 1.0), setup.target),
            "d_min_pct": dmin,
            "sweep": [rep.row() for rep in threshold_sweep(bundle, 1.0, hvar_list, setup.target)],
        }
    return out


def run_optimization(cfg, out_dir=None, setup=None):
    """Full run; with ``out_dir`` every artifact is written there.

    Returns ``(trace, report, setup)``.
    """
    setup = setup or prepare(cfg)
    target = setup.target
    u0 = initial_guess(cfg, target)
    support = support_mask(cfg, target)

    def checkpoint(stage, u, trace):
        if out_dir:
            fieldio.write_field(os.path.join(out_dir, "checkpoints", f"stage_{stage:02d}.field"),
                                u, setup.model.grid.dx_nm)

    trace = opt.run(u0, setup.model, target, setup.functional, setup.schedule,
                    support_mask=support, callback=checkpoint)
    report = final_report(setup, trace.u, cfg.run.hvar_list, trace.initial_pixel_err)
    if out_dir:
        write_run_outputs(out_dir, setup, trace, report)
    return trace, report, setup


def write_run_outputs(out_dir, setup, trace, report):
    import json
    dx = setup.model.grid.dx_nm
    exposed = expose(intensity(setup.model, trace.u), 1.0)
    fieldio.write_field(os.path.join(out_dir, "u_final.field"), trace.u, dx)
    fieldio.write_pgm(os.path.join(out_dir, "mask.pgm"), trace.u)
    fieldio.write_pbm(os.path.join(out_dir, "mask.pbm"), trace.mask)
    fieldio.write_pbm(os.path.join(out_dir, "exposed.pbm"), exposed)
    fieldio.write_pbm(os.path.join(out_dir, "target.pbm"), setup.target.indicator > 0.5)
    fieldio.write_difference(os.path.join(out_dir, "difference.pgm"), exposed, setup.target.indicator)
    fieldio.write_trace(os.path.join(out_dir, "trace.csv"), trace.records)
    fieldio.atomic_write_text(os.path.join(out_dir, "report.json"),
                              json.dumps(report, indent=2) + "\n")


def analyze_mask(setup, u, hvar_list):
    """Sweep rows for a stored mask or phase field."""
    bundle = intensity(setup.model, np.asarray(u, dtype=float))
    return [rep.row() for rep in threshold_sweep(bundle, 1.0, hvar_list, setup.target)]


def gradient_check(raw_model, seed=0, step=1e-6):
    """Relative l2 errors of every analytic gradient against central differences.

    A random phase field in (0.1, 0.9) is drawn from ``seed``; the model is
    normalized by the median intensity so the smoothed threshold band is
    populated, and the regularizer band is placed between half the smallest
    ``d`` and its median so the barrier is finite and active.
    """
    n = raw_model.n
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.1, 0.9, (n, n))
    chi = np.zeros((n, n))
    chi[n // 4:3 * n // 4, n // 4 + 1:3 * n // 4 - 1] = 1.0
    target = TargetPattern.from_indicator(raw_model.grid, chi)
    model = raw_model.rescaled(1.0 / float(np.median(intensity(raw_model, u).intensity)))
    bundle = intensity(model, u)
    d, _ = stability_metric(bundle)
    prof = fn.RegProfile.from_band(0.5 * float(d.min()), float(np.median(d)))

    def rel(a, b):
        return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))

    def fd(f):
        return gr.fd_oracle(f, u, step)

    out = {}
    ones = np.ones_like(u)
    out["pointwise"] = rel(gr.grad_pointwise_of_intensity(bundle, model, ones),
                           fd(lambda x: intensity(model, x).intensity.sum()))
    out["gradient_composite"] = rel(gr.grad_gradient_composite(bundle, model, ones, 0 * ones),
                                    fd(lambda x: intensity(model, x).grad_sq.sum()))
    cases = {
        "regularizer": fn.FunctionalConfig(weight_mm=0, weight_reg=1.0, eta=0.5, reg_profile=prof),
        "misfit_a0": fn.FunctionalConfig(weight_mm=0, eta=0.5),
        "misfit_a0.5": fn.FunctionalConfig(weight_mm=0, eta=0.5, weight_perim_diff=0.5),
        "total": fn.FunctionalConfig(weight_mm=2e-4, eps=0.5, eta=0.5, weight_perim_diff=0.5,
                                     weight_reg=5e-4, reg_profile=prof),
    }
    for name, c in cases.items():
        if name == "regularizer":
            ga = gr.grad_regularizer(bundle, model, c)
            ref = fd(lambda x: fn.regularizer(intensity(model, x), c))
        else:
            ga = gr.grad_total(u, model, target, c)
            ref = fd(lambda x: fn.total_objective(x, model, target, c).total)
        out[name] = rel(ga, ref)
    c = fn.FunctionalConfig(eps=0.7)
    out["modica_mortola"] = rel(gr.grad_modica_mortola(u, c), fd(lambda x: fn.modica_mortola(x, c)))
    return out
