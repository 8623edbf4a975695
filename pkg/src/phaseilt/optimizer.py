"""Projected steepest descent with a continuation schedule over (eps, eta, gamma).

The functional is minimized in stages.  Stage ``s`` uses
``eps0 / rate_eps**s`` (and likewise for eta and gamma); each stage runs a
fixed number of accepted projected-gradient steps and warm-starts from the
previous stage's result.  Step sizes come from Armijo backtracking on the
projected path, which makes the objective non-increasing inside a stage.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.ndimage as ndi

from . import functionals as fn
from .analysis import expose, pixel_error, stability_metric
from .errors import NonFiniteObjective, ValidationError
from .gradients import gradient_from_bundle
from .forward_model import intensity

logger = logging.getLogger(__name__)

ARMIJO_SIGMA = 1e-4
NONBINARY_TOL = 1e-3


@dataclass(frozen=True)
class Schedule:
    eps0: float = 0.002
    eta0: float = 0.2
    gamma0: float = 0.03
    rate_eps: float = 1.2
    rate_eta: float = 1.2
    rate_gamma: float = 1.05
    iters_per_stage: int = 60
    total_iters: int = 1080

    def __post_init__(self):
        if self.iters_per_stage < 1 or self.total_iters < 1:
            raise ValidationError("iteration counts must be positive")
        if self.total_iters % self.iters_per_stage:
            raise ValidationError("total_iters must be a multiple of iters_per_stage")
        for name in ("rate_eps", "rate_eta", "rate_gamma"):
            if not getattr(self, name) >= 1:
                raise ValidationError(f"{name} must be >= 1")
        if not (self.eps0 > 0 and self.eta0 > 0 and self.gamma0 >= 0):
            raise ValidationError("eps0, eta0 must be positive and gamma0 non-negative")

    @classmethod
    def slow(cls, **kw):
        """Rates (1.2, 1.2, 1.05), 1080 iterations: 18 stages."""
        return cls(**kw)

    @classmethod
    def fast(cls, **kw):
        """Rates (1.5, 1.5, 1.1), 780 iterations: 13 stages."""
        base = dict(rate_eps=1.5, rate_eta=1.5, rate_gamma=1.1, total_iters=780)
        base.update(kw)
        return cls(**base)

    @property
    def n_stages(self):
        return self.total_iters // self.iters_per_stage

    def params(self, stage):
        """``(eps, eta, gamma)`` for a 0-based stage index."""
        return (self.eps0 * self.rate_eps ** (-stage),
                self.eta0 * self.rate_eta ** (-stage),
                self.gamma0 * self.rate_gamma ** (-stage))


@dataclass
class TraceRecord:
    iter: int
    stage: int
    eps: float
    eta: float
    gamma: float
    F_total: float
    F_misfit: float
    F_perimdiff: float
    F_mm: float
    F_reg: float
    step: float
    pixel_err: int
    d_min_pct: float
    nonbinary_px: int


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    u: np.ndarray = None
    mask: np.ndarray = None
    initial_pixel_err: int = None

    def objectives(self, stage=None):
        return np.array([r.F_total for r in self.records if stage is None or r.stage == stage])

    @property
    def final(self):
        return self.records[-1] if self.records else None


def project(u, support_mask=None):
    """Clamp to [0, 1] and zero outside ``support_mask`` when given."""
    out = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    if support_mask is not None:
        out = np.where(np.asarray(support_mask, dtype=bool), out, 0.0)
    return out


def support_from_target(target, radius_px):
    """Target dilated by a disk of ``radius_px`` pixels."""
    r = int(np.ceil(radius_px))
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    disk = xx * xx + yy * yy <= radius_px * radius_px
    return ndi.binary_dilation(target.indicator > 0, structure=disk)


def make_initial_guess(kind, target, blur_px=2.0, level=0.7, amplitude=0.25, period_px=None):
    """Starting phase field.

    ``perturbed_target``: Gaussian-blurred target indicator.
    ``diffuse``: a cosine lattice of blobs around ``level``, unrelated to
    the target.  ``period_px`` defaults to ``n / 4``.
    """
    chi = target.indicator
    n = chi.shape[0]
    if kind == "perturbed_target":
        u = ndi.gaussian_filter(chi.astype(float), blur_px, mode="constant") if blur_px > 0 else chi.copy()
    elif kind == "diffuse":
        period = period_px or n / 4.0
        i = np.arange(n) + 0.5
        c = np.cos(2.0 * np.pi * i / period)
        u = level + amplitude * np.outer(c, c)
    else:
        raise ValidationError(f"unknown initial guess kind {kind!r}")
    return project(u)


def _record(it, stage, sched_params, br, step, bundle, u, target, cfg):
    exposed = expose(bundle, cfg.threshold)
    _, dmin = stability_metric(bundle, cfg.threshold)
    nonbin = int(np.count_nonzero((u > NONBINARY_TOL) & (u < 1.0 - NONBINARY_TOL)))
    eps, eta, gamma = sched_params
    return TraceRecord(it, stage, eps, eta, gamma, br.total, br.misfit, br.perim_diff, br.mm,
                       br.reg, step, pixel_error(exposed, target), dmin, nonbin)


class _Evaluator:
    """Objective and gradient of one stage's functional."""

    def __init__(self, model, target, cfg):
        self.model, self.target, self.cfg = model, target, cfg

    def value(self, u):
        bundle = intensity(self.model, u)
        return fn.objective_from_bundle(u, bundle, self.target, self.cfg), bundle

    def gradient(self, u, bundle):
        return gradient_from_bundle(u, bundle, self.model, self.target, self.cfg)


def run(u_init, model, target, cfg, schedule, support_mask=None, callback=None,
        max_backtracks=60):
    """Minimize the functional through every stage of ``schedule``.

    ``model`` must be threshold-normalized so that ``cfg.threshold`` is the
    exposure level (normally 1).  ``callback(stage, u, trace)`` is called
    after each stage.  Returns a :class:`RunTrace` whose ``mask`` is
    ``{u > 1/2}``.
    """
    u = np.asarray(u_init, dtype=float)
    if u.shape != target.indicator.shape:
        raise ValidationError("initial guess does not match the target grid")
    if np.any(u < 0) or np.any(u > 1):
        raise ValidationError("initial guess must take values in [0, 1]")
    u = project(u, support_mask)
    trace = RunTrace()
    t = None
    it = 0
    for stage in range(schedule.n_stages):
        eps, eta, gamma = schedule.params(stage)
        scfg = cfg.with_params(eps=eps, eta=eta, gamma=gamma)
        ev = _Evaluator(model, target, scfg)
        br, bundle = ev.value(u)
        if not np.isfinite(br.total):
            raise NonFiniteObjective(
                f"objective is {br.total} at the start of stage {stage}; use gamma > 0 or a feasible start")
        if stage == 0:
            trace.initial_pixel_err = pixel_error(expose(bundle, scfg.threshold), target)
        for _ in range(schedule.iters_per_stage):
            grad = ev.gradient(u, bundle)
            if t is None:
                t = 1.0 / max(float(np.max(np.abs(grad))), 1e-12)
            else:
                t = 2.0 * t
            step = 0.0
            for _bt in range(max_backtracks):
                cand = project(u - t * grad, support_mask)
                dec = float(np.sum(grad * (u - cand)))
                if dec <= 0.0:
                    break
                cbr, cbundle = ev.value(cand)
                if cbr.total <= br.total - ARMIJO_SIGMA * dec:
                    u, br, bundle, step = cand, cbr, cbundle, t
                    break
                t *= 0.5
            else:
                logger.debug("stage %d: backtracking exhausted at t=%.3e", stage, t)
            if step == 0.0 and t < 1e-300:
                t = 1.0
            it += 1
            trace.records.append(_record(it, stage, (eps, eta, gamma), br, step, bundle, u, target, scfg))
        logger.info("stage %d done: F=%.6g pixel_err=%d", stage, br.total, trace.records[-1].pixel_err)
        if callback is not None:
            callback(stage, u, trace)
    trace.u = u
    trace.mask = u > 0.5
    return trace
