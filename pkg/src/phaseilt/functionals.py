"""Energy terms of the phase-field mask functional.

All terms work in normalized units: intensities are divided by the
exposure threshold (so the threshold is 1 unless ``cfg.threshold`` says
otherwise) and lengths are measured in pixels, so sums over the window
carry a unit area weight.

The functional minimized by :mod:`phaseilt.optimizer` is::

    F = sum |phi_eta(I) - chi_0|^p + a * sabs(TV(phi_eta(I)) - P(target))
        + b * P_eps(u) + c * R_gamma(u)

with ``P_eps`` the Modica-Mortola perimeter approximation and ``R_gamma``
the threshold-stability barrier evaluated on ``|grad I|^2 - varphi(I)``.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
import scipy.integrate

from ._fields import grad2
from .errors import GridMismatch, ValidationError
from .forward_model import intensity


@dataclass(frozen=True)
class RegProfile:
    """Shape of the barrier ``f`` and the bump ``varphi(s) = -phi_a (s-h)^2 + phi_b``.

    The default (``from_band(0.05, 0.07)``) gives ``g = d^2 - d_hard^2``
    where ``d`` is the distance of ``(I, d1 I, d2 I)`` from ``(h, 0, 0)``:
    the barrier is infinite for ``d <= d_hard`` and zero for ``d >= d_soft``.
    """

    delta0: float = 0.07 ** 2 - 0.05 ** 2
    alpha: float = 1.0
    phi_a: float = 1.0
    phi_b: float = 0.05 ** 2
    d_hard: float = 0.05
    d_soft: float = 0.07

    def __post_init__(self):
        if not self.delta0 > 0:
            raise ValidationError("delta0 must be positive")
        if not 0 < self.alpha <= 1:
            raise ValidationError("alpha must lie in (0, 1]")
        if not (self.phi_a > 0 and self.phi_b > 0):
            raise ValidationError("phi_a and phi_b must be positive")

    @classmethod
    def from_band(cls, d_hard=0.05, d_soft=0.07, alpha=1.0):
        if not 0 < d_hard < d_soft:
            raise ValidationError("need 0 < d_hard < d_soft")
        return cls(delta0=d_soft ** 2 - d_hard ** 2, alpha=alpha, phi_a=1.0,
                   phi_b=d_hard ** 2, d_hard=d_hard, d_soft=d_soft)

    def varphi(self, s, h=1.0):
        return -self.phi_a * (np.asarray(s) - h) ** 2 + self.phi_b

    def varphi_prime(self, s, h=1.0):
        return -2.0 * self.phi_a * (np.asarray(s) - h)

    def structural_check(self, h=1.0):
        """``(varphi(h) > 0, varphi(0) < -delta0)``; unimodality holds by construction."""
        return bool(self.varphi(h, h) > 0), bool(self.varphi(0.0, h) < -self.delta0)

    def band_constant(self, delta, h=1.0):
        """``c1 = min varphi`` on ``[h - delta, h + delta]`` (diagnostic)."""
        return float(self.varphi(h + delta, h))


@dataclass(frozen=True)
class FunctionalConfig:
    """Weights and smoothing parameters of the functional.

    ``drop_cp`` omits the Modica-Mortola constant, so ``weight_mm`` plays
    the role of ``b / c_p``.  ``smooth_abs_mu=None`` means
    ``1e-6 * target.perimeter`` at evaluation time.
    """

    weight_perim_diff: float = 0.0
    weight_mm: float = 2e-4
    weight_reg: float = 0.0
    threshold: float = 1.0
    misfit_exponent: int = 2
    mm_exponent: float = 2.0
    dw: str = "s(1-s)"
    eps: float = 0.002
    eta: float = 0.2
    gamma: float = 0.03
    reg_profile: RegProfile = field(default_factory=RegProfile)
    smooth_abs_mu: float = None
    drop_cp: bool = True

    def __post_init__(self):
        for name in ("weight_perim_diff", "weight_mm", "weight_reg"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be >= 0")
        if not (self.eps > 0 and self.eta > 0 and self.threshold > 0):
            raise ValidationError("eps, eta and threshold must be positive")
        if not self.gamma >= 0:
            raise ValidationError("gamma must be >= 0")
        if int(self.misfit_exponent) != self.misfit_exponent or self.misfit_exponent < 1:
            raise ValidationError("misfit_exponent must be an integer >= 1")
        if not self.mm_exponent > 1:
            raise ValidationError("mm_exponent must be > 1")
        if self.dw != "s(1-s)":
            raise ValidationError(f"unsupported double well {self.dw!r}")
        if self.smooth_abs_mu is not None and not self.smooth_abs_mu > 0:
            raise ValidationError("smooth_abs_mu must be positive")

    def with_params(self, **kw):
        return replace(self, **kw)

    def mu_for(self, target):
        if self.smooth_abs_mu is not None:
            return self.smooth_abs_mu
        return max(1e-6 * target.perimeter, 1e-12)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    total: float
    misfit: float
    misfit_lp: float
    perim_diff: float
    mm: float
    reg: float


# -- barrier ---------------------------------------------------------------

def reg_barrier_f(s, profile):
    """``exp(-d0^2/(d0^2 - s^2)) s^(-2/alpha)`` on ``(0, d0)``; +inf below, 0 above."""
    s = np.asarray(s, dtype=float)
    d0 = profile.delta0
    out = np.zeros_like(s)
    out[s <= 0] = np.inf
    inside = (s > 0) & (s < d0)
    si = s[inside]
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        out[inside] = np.exp(-d0 * d0 / (d0 * d0 - si * si)) * si ** (-2.0 / profile.alpha)
    return out if out.ndim else float(out)


def _inv_f(s, profile):
    # 1/f on (0, d0), evaluated without forming f (which overflows near 0)
    d0 = profile.delta0
    with np.errstate(over="ignore"):
        return np.exp(d0 * d0 / (d0 * d0 - s * s)) * s ** (2.0 / profile.alpha)


def _log_f_prime(s, profile):
    d0 = profile.delta0
    return -2.0 * d0 * d0 * s / (d0 * d0 - s * s) ** 2 - 2.0 / (profile.alpha * s)


def reg_barrier_f_prime(s, profile):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    out[s <= 0] = np.nan
    inside = (s > 0) & (s < profile.delta0)
    si = s[inside]
    out[inside] = reg_barrier_f(si, profile) * _log_f_prime(si, profile)
    return out if out.ndim else float(out)


def reg_barrier_f_gamma(s, gamma, profile):
    """``f / (1 + gamma f)``, equal to ``1/gamma`` where ``f = +inf``."""
    if not gamma > 0:
        raise ValidationError("gamma must be positive for the capped barrier")
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    out[s <= 0] = 1.0 / gamma
    inside = (s > 0) & (s < profile.delta0)
    f = reg_barrier_f(s[inside], profile)
    with np.errstate(over="ignore"):
        big = ~np.isfinite(f)
    # f/(1 + gamma f) rounds to a value <= f; the reciprocal form only where f overflows
    val = np.where(big, 0.0, f) / (1.0 + gamma * np.where(big, 0.0, f))
    if big.any():
        val[big] = 1.0 / (_inv_f(s[inside][big], profile) + gamma)
    out[inside] = val
    return out if out.ndim else float(out)


def reg_barrier_f_gamma_prime(s, gamma, profile):
    """Derivative of :func:`reg_barrier_f_gamma` in ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0) & (s < profile.delta0)
    si = s[inside]
    inv = _inv_f(si, profile)
    # d/ds [1/(1/f + gamma)] = (ln f)' (1/f) / (1/f + gamma)^2
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ratio = 1.0 / (inv + 2.0 * gamma + gamma * gamma / inv)
        val = _log_f_prime(si, profile) * ratio
    out[inside] = np.where(np.isfinite(inv) & np.isfinite(val), val, 0.0)
    return out if out.ndim else float(out)


def regularizer_argument(bundle, cfg):
    """``g = |grad I|^2 - varphi(I)`` per pixel."""
    return bundle.grad_sq - cfg.reg_profile.varphi(bundle.intensity, cfg.threshold)


def regularizer(bundle, cfg):
    """Sum over pixels of ``f_gamma(g)`` (``f`` itself when ``gamma == 0``)."""
    g = regularizer_argument(bundle, cfg)
    if cfg.gamma > 0:
        return float(np.sum(reg_barrier_f_gamma(g, cfg.gamma, cfg.reg_profile)))
    return float(np.sum(reg_barrier_f(g, cfg.reg_profile)))


def regularizer_band_variant(bundle, cfg, delta):
    """Regularizer plus ``1 / #{h - delta <= I <= h + delta}`` (pixel area 1)."""
    if not delta > 0:
        raise ValidationError("delta must be positive")
    h = cfg.threshold
    count = int(np.count_nonzero((bundle.intensity >= h - delta) & (bundle.intensity <= h + delta)))
    base = regularizer(bundle, cfg)
    if count == 0:
        return math.inf
    return base + 1.0 / count


# -- smooth step -----------------------------------------------------------

def _unit_step(x):
    # quintic smoothstep on [-1/2, 1/2]; C^2, symmetric about 0
    s = np.clip(np.asarray(x, dtype=float) + 0.5, 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _unit_step_prime(x):
    s = np.clip(np.asarray(x, dtype=float) + 0.5, 0.0, 1.0)
    return 30.0 * s * s * (1.0 - s) ** 2


def _unit_step_second(x):
    s = np.clip(np.asarray(x, dtype=float) + 0.5, 0.0, 1.0)
    return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)


def smooth_step(t, h, eta):
    """Nondecreasing step: 0 for ``t <= h - eta/2``, 1 for ``t >= h + eta/2``, 1/2 at h."""
    out = _unit_step((np.asarray(t, dtype=float) - h) / eta)
    return out if out.ndim else float(out)


def smooth_step_prime(t, h, eta):
    out = _unit_step_prime((np.asarray(t, dtype=float) - h) / eta) / eta
    return out if out.ndim else float(out)


def smooth_step_second(t, h, eta):
    out = _unit_step_second((np.asarray(t, dtype=float) - h) / eta) / (eta * eta)
    return out if out.ndim else float(out)


def smooth_abs(x, mu):
    return np.sqrt(np.asarray(x) ** 2 + mu * mu) - mu


def smooth_abs_prime(x, mu):
    x = np.asarray(x)
    return x / np.sqrt(x * x + mu * mu)


# -- misfit ----------------------------------------------------------------

def _check_target(field_, target):
    if np.shape(field_) != target.indicator.shape:
        raise GridMismatch(f"field shape {np.shape(field_)} != target shape {target.indicator.shape}")


def total_variation(d1, d2, mu):
    """``sum (sqrt(d1^2 + d2^2 + mu^2) - mu)`` over the window."""
    return float(np.sum(smooth_abs(np.sqrt(d1 * d1 + d2 * d2), mu)))


def misfit_from_fields(pattern, d1, d2, target, cfg):
    """Misfit from a smoothed pattern and its two derivative fields.

    Returns ``(total, lp_part, perimeter_difference)`` where
    ``total = lp_part + a * smooth_abs(TV - P(target))``.
    """
    _check_target(pattern, target)
    p = cfg.misfit_exponent
    lp = float(np.sum(np.abs(pattern - target.indicator) ** p))
    if cfg.weight_perim_diff == 0:
        return lp, lp, 0.0
    mu = cfg.mu_for(target)
    pdiff = float(smooth_abs(total_variation(d1, d2, mu) - target.perimeter, mu))
    return lp + cfg.weight_perim_diff * pdiff, lp, pdiff


def smoothed_pattern(bundle, cfg):
    """``(Phi, d1 Phi, d2 Phi)`` with the derivatives taken by the chain rule."""
    h, eta = cfg.threshold, cfg.eta
    phi = smooth_step(bundle.intensity, h, eta)
    dphi = smooth_step_prime(bundle.intensity, h, eta)
    return phi, dphi * bundle.grad_x1, dphi * bundle.grad_x2


def misfit(bundle, target, cfg):
    """Distance between the smoothed exposed pattern of ``bundle`` and the target."""
    phi, d1, d2 = smoothed_pattern(bundle, cfg)
    return misfit_from_fields(phi, d1, d2, target, cfg)[0]


# -- Modica-Mortola --------------------------------------------------------

def double_well(s):
    s = np.asarray(s, dtype=float)
    return s * (1.0 - s)


def double_well_prime(s):
    return 1.0 - 2.0 * np.asarray(s, dtype=float)


def modica_mortola_constant(p=2.0):
    """``c_p = (int_0^1 W(s)^(1/p') ds)^(-1)`` for ``W(s) = s(1-s)``."""
    q = 1.0 - 1.0 / p  # 1/p'
    if p == 2.0:
        return 8.0 / math.pi
    val, _ = scipy.integrate.quad(lambda s: (s * (1.0 - s)) ** q, 0.0, 1.0)
    return 1.0 / val


def modica_mortola(u, cfg):
    """``c/(p' eps) sum W(u) + c eps^(p-1)/p sum |grad u|^p``, ``c = 1`` if ``drop_cp``."""
    u = np.asarray(u, dtype=float)
    p = cfg.mm_exponent
    pc = p / (p - 1.0)
    cp = 1.0 if cfg.drop_cp else modica_mortola_constant(p)
    d1, d2 = grad2(u)
    gnorm = np.sqrt(d1 * d1 + d2 * d2)
    well = np.sum(double_well(u)) / (pc * cfg.eps)
    grad_term = cfg.eps ** (p - 1.0) / p * np.sum(gnorm ** p)
    return float(cp * (well + grad_term))


# -- assembly --------------------------------------------------------------

def objective_from_bundle(u, bundle, target, cfg):
    """:class:`ObjectiveBreakdown` for ``u`` given its precomputed bundle."""
    _check_target(u, target)
    phi, d1, d2 = smoothed_pattern(bundle, cfg)
    mis, lp, pdiff = misfit_from_fields(phi, d1, d2, target, cfg)
    mm = modica_mortola(u, cfg) if cfg.weight_mm > 0 else 0.0
    reg = regularizer(bundle, cfg) if cfg.weight_reg > 0 else 0.0
    total = mis + cfg.weight_mm * mm + (cfg.weight_reg * reg if cfg.weight_reg > 0 else 0.0)
    return ObjectiveBreakdown(total, mis, lp, pdiff, mm, reg)


def total_objective(u, model, target, cfg):
    """Evaluate the full functional at ``u`` on a threshold-normalized model."""
    return objective_from_bundle(u, intensity(model, u), target, cfg)
