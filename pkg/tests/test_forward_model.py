import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import rel_err
from phaseilt._fields import central_diff, direct_conv, grad2
from phaseilt.errors import GridMismatch
from phaseilt.forward_model import (directional_derivative, intensity, intensity_only,
                                    quadruple_sum_intensity)
from phaseilt.optics import GridSpec, OpticalSystem, socs_from

unit_fields = arrays(np.float64, (8, 8), elements=st.floats(0.0, 1.0))


def test_zero_mask(model8):
    b = intensity(model8, np.zeros((8, 8)))
    assert not b.intensity.any() and not b.grad_x1.any() and not b.grad_x2.any()


def test_quadratic_scaling(model16, u16):
    i = intensity_only(model16, u16)
    for c in (0.0, 0.3, 0.77, 1.0):
        np.testing.assert_allclose(intensity_only(model16, c * u16), c * c * i, rtol=1e-12, atol=1e-300)


def test_quadruple_sum_oracle(model8):
    h = model8.truncated_matrix()
    rng = np.random.default_rng(4)
    for _ in range(3):
        u = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
        ref = quadruple_sum_intensity(h, u)
        assert rel_err(intensity_only(model8, u), ref) <= 1e-10


def test_mode_cache_consistent(model8):
    u = np.random.default_rng(5).uniform(size=(8, 8))
    b = intensity(model8, u)
    for n in range(model8.n0):
        np.testing.assert_allclose(b.mode_convs[n], direct_conv(model8.v[n], u), atol=1e-13)
    recomputed = np.einsum("n,nij->ij", model8.sigma, np.abs(b.mode_convs) ** 2)
    np.testing.assert_allclose(b.intensity, recomputed, rtol=1e-13)


def test_gradient_fields_match_brute_force(model8):
    # oracle: stencil applied to each zero-extended window kernel, then direct convolution
    u = np.random.default_rng(6).uniform(size=(8, 8))
    b = intensity(model8, u)
    for axis, got in ((-2, b.grad_x1), (-1, b.grad_x2)):
        ref = np.zeros((8, 8))
        for s, v in zip(model8.sigma, model8.v):
            ref += 2 * s * (direct_conv(central_diff(v, axis), u) * np.conj(direct_conv(v, u))).real
        np.testing.assert_allclose(got, ref, rtol=1e-11, atol=1e-13 * np.abs(ref).max())


def _stencil_on_intensity_gap(n, dx):
    m = socs_from(OpticalSystem(), GridSpec(n, dx), 10)
    u = np.zeros((n, n))
    q = n // 4
    u[q:-q, q:-q] = np.random.default_rng(0).uniform(size=(n - 2 * q, n - 2 * q))
    b = intensity(m, u)
    s1, s2 = grad2(b.intensity)
    return rel_err(np.stack([b.grad_x1, b.grad_x2]), np.stack([s1, s2]))


def test_stencil_on_intensity_agrees_to_discretization_order():
    # the mode formula and the stencil applied to I differ by the discrete
    # product-rule remainder, which is second order in the pixel size
    coarse = _stencil_on_intensity_gap(16, 50.0)
    fine = _stencil_on_intensity_gap(32, 25.0)
    assert fine < 0.06
    assert coarse / fine > 3.0


def test_translation(model16):
    u = np.zeros((16, 16))
    u[5:10, 4:11] = np.random.default_rng(7).uniform(size=(5, 7))
    s = np.roll(np.roll(u, 1, 0), 1, 1)
    a, b = intensity(model16, u), intensity(model16, s)
    for fa, fb in ((a.intensity, b.intensity), (a.grad_x1, b.grad_x1), (a.grad_x2, b.grad_x2)):
        np.testing.assert_allclose(fb[1:, 1:], fa[:-1, :-1], atol=1e-12 * np.abs(fa).max())


def test_directional_derivative(model16, u16):
    i = intensity_only(model16, u16)
    np.testing.assert_allclose(directional_derivative(model16, u16, u16), 2 * i, rtol=1e-12)
    assert not directional_derivative(model16, u16, np.zeros_like(u16)).any()
    v = np.random.default_rng(8).uniform(-1, 1, u16.shape)
    t = 1e-6
    fd = (intensity_only(model16, u16 + t * v) - intensity_only(model16, u16 - t * v)) / (2 * t)
    np.testing.assert_allclose(fd, directional_derivative(model16, u16, v), rtol=1e-5)


def test_decay_towards_border(model16):
    u = np.zeros((16, 16))
    u[6:10, 6:10] = 1.0
    i = intensity_only(model16, u)
    rim = np.concatenate([i[:2].ravel(), i[-2:].ravel(), i[:, :2].ravel(), i[:, -2:].ravel()])
    assert rim.max() < i.max()


def test_grid_mismatch(model8):
    with pytest.raises(GridMismatch):
        intensity(model8, np.zeros((9, 9)))
    with pytest.raises(GridMismatch):
        directional_derivative(model8, np.zeros((8, 8)), np.zeros((8, 7)))


@settings(max_examples=30, deadline=None)
@given(unit_fields)
def test_nonnegative(model8, u):
    i = intensity_only(model8, u)
    assert i.min() >= -1e-12 * max(i.max(), 1e-300)


@settings(max_examples=30, deadline=None)
@given(unit_fields, unit_fields)
def test_parallelogram_law(model8, u, v):
    lhs = intensity_only(model8, u + v) + intensity_only(model8, u - v)
    rhs = 2 * intensity_only(model8, u) + 2 * intensity_only(model8, v)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(np.abs(rhs).max(), 1e-300)
