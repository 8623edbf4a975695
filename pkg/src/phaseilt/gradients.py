"""Analytic gradients of every term with respect to the phase field.

Every intensity-dependent term reduces to one of two shapes:

* pointwise composites ``sum f(I(u))``, whose gradient is
  ``2 Re sum_n sigma_n W_n * (f'(I) (V_n*u))``;
* gradient composites ``sum g(|grad I|^2, I)`` (and the smoothed-pattern
  total variation, which has the same structure), which additionally
  need the reflected derivative kernels ``Z_n,l``.

Both are assembled by :func:`_adjoint_sum`, which accumulates the
per-mode products in Fourier space and does a single inverse FFT.
Gradients are per pixel (unit pixel area), matching
:mod:`phaseilt.functionals`.
"""

import numpy as np

from . import functionals as fn
from ._fields import grad2, central_diff
from .errors import GridMismatch, NonFiniteObjective
from .forward_model import intensity


def _adjoint_sum(model, w=None, z1=None, z2=None):
    """``2 Re sum_n sigma_n (W_n * w_n + Z_n,1 * z1_n + Z_n,2 * z2_n)``."""
    conv = model.conv
    spec = model.spectra
    acc = None
    for name, fields in (("w", w), ("dz1", z1), ("dz2", z2)):
        if fields is None:
            continue
        term = np.einsum("n,nij->ij", model.sigma, spec[name] * conv.field_spectrum(fields))
        acc = term if acc is None else acc + term
    if acc is None:
        return np.zeros((model.n, model.n))
    return 2.0 * conv.adjoint_from_spectra(acc, 1.0).real


def _check(bundle, model, *fields):
    shape = (model.n, model.n)
    if bundle.intensity.shape != shape:
        raise GridMismatch("bundle grid does not match the model")
    for f in fields:
        if np.shape(f) != shape:
            raise GridMismatch(f"field of shape {np.shape(f)} does not match grid {shape}")


def _pointwise_terms(bundle, fprime):
    return fprime * bundle.mode_convs


def _gradient_composite_terms(bundle, g1, g2):
    d1, d2 = bundle.mode_dconvs
    q1 = 2.0 * g1 * bundle.grad_x1
    q2 = 2.0 * g1 * bundle.grad_x2
    cc = np.conj(bundle.mode_convs)
    w = q1 * d1 + q2 * d2 + g2 * bundle.mode_convs
    return w, q1 * cc, q2 * cc


def grad_pointwise_of_intensity(bundle, model, fprime):
    """Gradient of ``sum f(I(u))`` given ``fprime = f'(I(u))`` per pixel."""
    _check(bundle, model, fprime)
    return _adjoint_sum(model, w=_pointwise_terms(bundle, np.asarray(fprime, dtype=float)))


def grad_gradient_composite(bundle, model, g1, g2):
    """Gradient of ``sum g(|grad I|^2, I)`` given the partials ``g1``, ``g2`` per pixel."""
    _check(bundle, model, g1, g2)
    w, z1, z2 = _gradient_composite_terms(bundle, np.asarray(g1, float), np.asarray(g2, float))
    return _adjoint_sum(model, w=w, z1=z1, z2=z2)


def regularizer_partials(bundle, cfg):
    """``(g1, g2)`` for ``g(a, b) = f_gamma(a - varphi(b))``."""
    if not cfg.gamma > 0:
        raise NonFiniteObjective("regularizer gradient needs gamma > 0")
    prof = cfg.reg_profile
    s = fn.regularizer_argument(bundle, cfg)
    fp = fn.reg_barrier_f_gamma_prime(s, cfg.gamma, prof)
    return fp, -fp * prof.varphi_prime(bundle.intensity, cfg.threshold)


def grad_regularizer(bundle, model, cfg):
    g1, g2 = regularizer_partials(bundle, cfg)
    return grad_gradient_composite(bundle, model, g1, g2)


def _misfit_terms(bundle, cfg, target):
    """Adjoint fields ``(w, z1, z2)`` of the misfit (the ``z`` ones may be None)."""
    h, eta, p = cfg.threshold, cfg.eta, cfg.misfit_exponent
    inten = bundle.intensity
    phi = fn.smooth_step(inten, h, eta)
    dphi = fn.smooth_step_prime(inten, h, eta)
    diff = phi - target.indicator
    if p == 1:
        outer = np.sign(diff)
    else:
        outer = p * np.abs(diff) ** (p - 1) * np.sign(diff)
    w = (outer * dphi) * bundle.mode_convs
    if cfg.weight_perim_diff == 0:
        return w, None, None

    mu = cfg.mu_for(target)
    p1 = dphi * bundle.grad_x1
    p2 = dphi * bundle.grad_x2
    tv = fn.total_variation(p1, p2, mu)
    scale = cfg.weight_perim_diff * float(fn.smooth_abs_prime(tv - target.perimeter, mu))
    norm = np.sqrt(p1 * p1 + p2 * p2 + mu * mu)
    ft1 = scale * p1 / norm
    ft2 = scale * p2 / norm
    ddphi = fn.smooth_step_second(inten, h, eta)
    d1, d2 = bundle.mode_dconvs
    c = bundle.mode_convs
    cc = np.conj(c)
    a_coef = ft1 * ddphi * bundle.grad_x1 + ft2 * ddphi * bundle.grad_x2
    w = w + a_coef * c + (ft1 * dphi) * d1 + (ft2 * dphi) * d2
    return w, (ft1 * dphi) * cc, (ft2 * dphi) * cc


def grad_smoothed_pattern_composite(bundle, model, cfg, target):
    """Gradient of the misfit ``sum |Phi - chi|^p + a sabs(TV(Phi) - P)``."""
    _check(bundle, model, target.indicator)
    w, z1, z2 = _misfit_terms(bundle, cfg, target)
    return _adjoint_sum(model, w=w, z1=z1, z2=z2)


def grad_modica_mortola(u, cfg):
    """``c (W'(u)/(p' eps) + eps^(p-1) sum_l D_l^T(|grad u|^(p-2) D_l u))``."""
    u = np.asarray(u, dtype=float)
    p = cfg.mm_exponent
    pc = p / (p - 1.0)
    cp = 1.0 if cfg.drop_cp else fn.modica_mortola_constant(p)
    d1, d2 = grad2(u)
    if p == 2.0:
        flux1, flux2 = d1, d2
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            wgt = np.where((d1 == 0) & (d2 == 0), 0.0, np.hypot(d1, d2) ** (p - 2.0))
        flux1, flux2 = wgt * d1, wgt * d2
    # D_l^T = -D_l for the central stencil
    div = central_diff(flux1, -2) + central_diff(flux2, -1)
    return cp * (fn.double_well_prime(u) / (pc * cfg.eps) - cfg.eps ** (p - 1.0) * div)


def gradient_from_bundle(u, bundle, model, target, cfg):
    """Total gradient at ``u`` reusing an already computed intensity bundle."""
    w, z1, z2 = _misfit_terms(bundle, cfg, target)
    if cfg.weight_reg > 0:
        g1, g2 = regularizer_partials(bundle, cfg)
        rw, rz1, rz2 = _gradient_composite_terms(bundle, cfg.weight_reg * g1, cfg.weight_reg * g2)
        w = w + rw
        z1 = rz1 if z1 is None else z1 + rz1
        z2 = rz2 if z2 is None else z2 + rz2
    grad = _adjoint_sum(model, w=w, z1=z1, z2=z2)
    if cfg.weight_mm > 0:
        grad = grad + cfg.weight_mm * grad_modica_mortola(u, cfg)
    return grad


def objective_and_gradient(u, model, target, cfg):
    """``(breakdown, gradient, bundle)`` from a single intensity evaluation."""
    u = np.asarray(u, dtype=float)
    bundle = intensity(model, u)
    br = fn.objective_from_bundle(u, bundle, target, cfg)
    if not np.isfinite(br.total):
        raise NonFiniteObjective("objective is not finite")
    return br, gradient_from_bundle(u, bundle, model, target, cfg), bundle


def grad_total(u, model, target, cfg):
    """Gradient of :func:`phaseilt.functionals.total_objective`."""
    return objective_and_gradient(u, model, target, cfg)[1]


def fd_oracle(objective, u, step=1e-6):
    """Central finite differences ``(F(u + t e_i) - F(u - t e_i)) / 2t`` per pixel."""
    u = np.array(u, dtype=float)
    out = np.zeros_like(u)
    flat = u.reshape(-1)
    g = out.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        fp = objective(u)
        flat[i] = old - step
        fm = objective(u)
        flat[i] = old
        g[i] = (fp - fm) / (2.0 * step)
    return out
