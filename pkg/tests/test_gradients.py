import numpy as np
import pytest

from conftest import rel_err
from phaseilt import functionals as fn
from phaseilt import gradients as gr
from phaseilt._fields import direct_conv
from phaseilt.analysis import TargetPattern, stability_metric
from phaseilt.errors import NonFiniteObjective
from phaseilt.forward_model import intensity, intensity_only


def band_profile(bundle):
    """Barrier band between half the smallest d and its median: finite and active."""
    d, _ = stability_metric(bundle)
    return fn.RegProfile.from_band(0.5 * float(d.min()), float(np.median(d)))


def empty_target(model):
    return TargetPattern.from_indicator(model.grid, np.zeros((model.n, model.n)))


def test_pointwise_zero_at_origin(model16):
    z = np.zeros((16, 16))
    g = gr.grad_pointwise_of_intensity(intensity(model16, z), model16, np.ones_like(z))
    assert not g.any()


def test_pointwise_sum_intensity(norm16, u16):
    b = intensity(norm16, u16)
    ga = gr.grad_pointwise_of_intensity(b, norm16, np.ones_like(u16))
    fd = gr.fd_oracle(lambda x: intensity_only(norm16, x).sum(), u16)
    assert rel_err(ga, fd) <= 1e-6


def test_single_pixel_quadratic_form(model8):
    # brute force: sum_x I(u) = u^T M u with M = sum_n sigma_n Re(C_n^H C_n)
    n = 8
    cols = []
    for j in range(n * n):
        e = np.zeros(n * n)
        e[j] = 1
        cols.append([direct_conv(v, e.reshape(n, n)).ravel() for v in model8.v])
    c = np.array(cols)  # (pixel j, mode, x)
    m = np.einsum("n,jnx,knx->jk", model8.sigma, c.conj(), c).real
    for i in (0, 19, 36, 63):
        e = np.zeros((n, n))
        e.flat[i] = 1
        g = gr.grad_pointwise_of_intensity(intensity(model8, e), model8, np.ones((n, n)))
        np.testing.assert_allclose(g.ravel(), 2 * m[:, i], rtol=1e-10, atol=1e-12 * np.abs(m).max())
    np.testing.assert_allclose(m, m.T, atol=1e-14 * np.abs(m).max())


def test_gradient_composite_reduces_to_pointwise(norm16, u16):
    b = intensity(norm16, u16)
    one, zero = np.ones_like(u16), np.zeros_like(u16)
    np.testing.assert_allclose(gr.grad_gradient_composite(b, norm16, zero, one),
                               gr.grad_pointwise_of_intensity(b, norm16, one), rtol=1e-13, atol=1e-15)


def test_gradient_composite_sum_grad_sq(norm16, u16):
    b = intensity(norm16, u16)
    ga = gr.grad_gradient_composite(b, norm16, np.ones_like(u16), np.zeros_like(u16))
    fd = gr.fd_oracle(lambda x: intensity(norm16, x).grad_sq.sum(), u16)
    assert rel_err(ga, fd) <= 1e-5


def test_regularizer_gradient(norm16, u16):
    b = intensity(norm16, u16)
    cfg = fn.FunctionalConfig(reg_profile=band_profile(b))
    s = fn.regularizer_argument(b, cfg)
    assert np.any((s > 0) & (s < cfg.reg_profile.delta0))  # straddles the band
    ga = gr.grad_regularizer(b, norm16, cfg)
    fd = gr.fd_oracle(lambda x: fn.regularizer(intensity(norm16, x), cfg), u16)
    assert rel_err(ga, fd) <= 1e-4


def test_regularizer_partials_need_gamma(norm16, u16):
    with pytest.raises(NonFiniteObjective):
        gr.regularizer_partials(intensity(norm16, u16), fn.FunctionalConfig(gamma=0.0))


def test_misfit_gradient_zero_at_minimum(model16, u16):
    # threshold above every intensity: Phi = 0 = chi for an empty target
    t = empty_target(model16)
    cfg = fn.FunctionalConfig(weight_mm=0, threshold=1e9, weight_perim_diff=0.5)
    g = gr.grad_smoothed_pattern_composite(intensity(model16, u16), model16, cfg, t)
    assert not g.any()


@pytest.mark.parametrize("kw, tol", [
    (dict(), 1e-5),
    (dict(misfit_exponent=1), 1e-5),
    (dict(weight_perim_diff=0.5), 1e-4),
    (dict(weight_perim_diff=0.5, smooth_abs_mu=1e-3), 1e-4),
])
def test_misfit_gradient(norm16, u16, target16, kw, tol):
    cfg = fn.FunctionalConfig(weight_mm=0, eta=0.5, **kw)
    b = intensity(norm16, u16)
    ga = gr.grad_smoothed_pattern_composite(b, norm16, cfg, target16)
    fd = gr.fd_oracle(lambda x: fn.misfit(intensity(norm16, x), target16, cfg), u16)
    assert rel_err(ga, fd) <= tol


def test_mm_gradient_values():
    cfg = fn.FunctionalConfig(eps=0.002)
    # zero extension makes the rim see a jump; the interior (two-cell stencil reach) is exact
    np.testing.assert_array_equal(gr.grad_modica_mortola(np.full((8, 8), 0.5), cfg)[2:-2, 2:-2], 0.0)
    np.testing.assert_allclose(gr.grad_modica_mortola(np.zeros((8, 8)), cfg), 1 / (2 * 0.002))


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_mm_gradient_fd(u16, p):
    cfg = fn.FunctionalConfig(eps=0.7, mm_exponent=p)
    ga = gr.grad_modica_mortola(u16, cfg)
    fd = gr.fd_oracle(lambda x: fn.modica_mortola(x, cfg), u16)
    assert rel_err(ga, fd) <= 1e-6


def test_total_with_only_b(model16, u16):
    t = empty_target(model16)
    cfg = fn.FunctionalConfig(weight_mm=3e-3, threshold=1e9, eps=0.3)
    np.testing.assert_allclose(gr.grad_total(u16, model16, t, cfg),
                               3e-3 * gr.grad_modica_mortola(u16, cfg), rtol=1e-14)


def test_total_linear_in_b(norm16, u16, target16):
    base = dict(eta=0.5, eps=0.3)
    g = lambda b: gr.grad_total(u16, norm16, target16, fn.FunctionalConfig(weight_mm=b, **base))
    g0 = g(0.0)
    np.testing.assert_allclose(g(0.3) - g0, (g(0.1) - g0) + (g(0.2) - g0), atol=1e-12)


def test_total_gradient_fd(norm16, u16, target16):
    b = intensity(norm16, u16)
    cfg = fn.FunctionalConfig(weight_mm=2e-4, weight_reg=5e-4, weight_perim_diff=0.5, eta=0.5,
                              eps=0.5, reg_profile=band_profile(b))
    ga = gr.grad_total(u16, norm16, target16, cfg)
    fd = gr.fd_oracle(lambda x: fn.total_objective(x, norm16, target16, cfg).total, u16)
    assert rel_err(ga, fd) <= 1e-4


def test_objective_and_gradient_consistent(norm16, u16, target16):
    cfg = fn.FunctionalConfig(eta=0.5)
    br, g, bundle = gr.objective_and_gradient(u16, norm16, target16, cfg)
    assert br.total == fn.total_objective(u16, norm16, target16, cfg).total
    np.testing.assert_array_equal(bundle.intensity, intensity(norm16, u16).intensity)


def test_descent_direction(norm16, u16, target16):
    cfg = fn.FunctionalConfig(eta=0.5, eps=0.3)
    f0 = fn.total_objective(u16, norm16, target16, cfg).total
    g = gr.grad_total(u16, norm16, target16, cfg)
    t = 1.0
    while fn.total_objective(u16 - t * g, norm16, target16, cfg).total >= f0:
        t *= 0.5
        assert t > 1e-12
    assert fn.total_objective(u16 - t * g, norm16, target16, cfg).total < f0


def test_model_adjoint_identity(model16):
    rng = np.random.default_rng(9)
    x = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    y = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    conv = model16.conv
    for n in range(model16.n0):
        lhs = np.vdot(y, conv.forward(model16.v[n], x))
        rhs = np.vdot(conv.adjoint(model16.w[n], y), x)
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_fd_oracle_basics(model8):
    u = np.random.default_rng(1).uniform(size=(8, 8))
    np.testing.assert_array_equal(gr.fd_oracle(lambda x: 3.0, u), 0.0)
    np.testing.assert_allclose(gr.fd_oracle(lambda x: x.sum(), u), 1.0, rtol=1e-8)
    ga = gr.grad_pointwise_of_intensity(intensity(model8, u), model8, np.ones_like(u))
    # objective in units of its own scale so the absolute step is well conditioned
    scale = intensity_only(model8, u).sum()
    fd = gr.fd_oracle(lambda x: intensity_only(model8, x).sum() / scale, u) * scale
    assert rel_err(ga, fd) <= 1e-6
