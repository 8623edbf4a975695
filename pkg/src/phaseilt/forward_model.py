"""Discrete aerial intensity of a phase field and its spatial derivatives.

For a real n x n field ``u`` (zero outside the window)::

    I(u) = sum_n sigma_n |V_n * u|^2
    d_l I(u) = 2 Re sum_n sigma_n (dV_n,l * u) conj(V_n * u)

where ``*`` is the zero-padded linear convolution of :mod:`phaseilt._fields`
and ``dV_n,l`` is the central-difference stencil applied to the mode
kernel.  The quadrature weight ``dx^2 dy^2`` is carried by the eigenvalues
(see :func:`phaseilt.optics.build_tcc`).  Intensities are in whatever
units the model's eigenvalues carry; use :meth:`SocsModel.rescaled` with
``1/h`` to work with threshold-normalized intensities.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch


@dataclass(frozen=True, eq=False)
class IntensityBundle:
    """Intensity, its two derivative fields and the per-mode convolutions.

    ``mode_convs[n] = V_n * u`` and ``mode_dconvs[l][n] = dV_n,l * u`` are
    kept so every gradient assembly can reuse them.
    """

    intensity: np.ndarray
    grad_x1: np.ndarray
    grad_x2: np.ndarray
    mode_convs: np.ndarray
    mode_dconvs: tuple

    @property
    def grad_sq(self):
        return self.grad_x1 ** 2 + self.grad_x2 ** 2


def check_field(model, u, name="u"):
    a = np.asarray(u, dtype=float)
    n = model.grid.n
    if a.shape != (n, n):
        raise GridMismatch(f"{name} has shape {a.shape}, model grid is {n}x{n}")
    return a


def mode_convolutions(model, u):
    """``V_n * u`` for every mode, shape ``(n0, n, n)``."""
    u = check_field(model, u)
    conv = model.conv
    return conv.forward_from_spectra(model.spectra["v"], conv.field_spectrum(u))


def assemble_intensity(model, mode_convs):
    return np.einsum("n,nij->ij", model.sigma, (mode_convs * np.conj(mode_convs)).real)


def intensity_gradient_fields(model, u, cache=None):
    """``(d_x1 I, d_x2 I, (dV1*u, dV2*u))`` from the mode formula.

    ``cache`` is the array of ``V_n * u`` for the same ``u``; it is
    recomputed when omitted.
    """
    u = check_field(model, u)
    if cache is None:
        cache = mode_convolutions(model, u)
    elif np.shape(cache) != (model.n0, model.n, model.n):
        raise GridMismatch("mode convolution cache does not match the model")
    conv = model.conv
    uspec = conv.field_spectrum(u)
    dconvs = (
        conv.forward_from_spectra(model.spectra["dv1"], uspec),
        conv.forward_from_spectra(model.spectra["dv2"], uspec),
    )
    cc = np.conj(cache)
    g1 = 2.0 * np.einsum("n,nij->ij", model.sigma, (dconvs[0] * cc).real)
    g2 = 2.0 * np.einsum("n,nij->ij", model.sigma, (dconvs[1] * cc).real)
    return g1, g2, dconvs


def intensity(model, u):
    """Evaluate ``I(u)`` and its derivative fields as an :class:`IntensityBundle`."""
    u = check_field(model, u)
    convs = mode_convolutions(model, u)
    inten = assemble_intensity(model, convs)
    g1, g2, dconvs = intensity_gradient_fields(model, u, convs)
    return IntensityBundle(inten, g1, g2, convs, dconvs)


def intensity_only(model, u):
    """``I(u)`` without the derivative fields (cheaper)."""
    return assemble_intensity(model, mode_convolutions(model, u))


def directional_derivative(model, u, v):
    """Gateaux derivative ``DI(u)[v] = 2 Re sum sigma_n (V_n*u) conj(V_n*v)``."""
    u = check_field(model, u)
    v = check_field(model, v, "v")
    cu = mode_convolutions(model, u)
    cv = mode_convolutions(model, v)
    return 2.0 * np.einsum("n,nij->ij", model.sigma, (cu * np.conj(cv)).real)


def quadruple_sum_intensity(hmat, u):
    """Brute-force ``I(i) = sum_k sum_j u(i-k) H(k,j) u(i-j)`` (test oracle).

    ``hmat`` is an n^2 x n^2 TCC (already carrying the quadrature weight);
    index arithmetic follows the centred kernel convention.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    c = n // 2
    out = np.zeros((n, n))
    idx = np.arange(n)
    for i1 in range(n):
        for i2 in range(n):
            m1 = i1 + c - idx
            m2 = i2 + c - idx
            ok1 = (m1 >= 0) & (m1 < n)
            ok2 = (m2 >= 0) & (m2 < n)
            patch = np.zeros((n, n))
            patch[np.ix_(ok1, ok2)] = u[np.ix_(m1[ok1], m2[ok2])]
            p = patch.ravel()
            out[i1, i2] = np.real(p @ hmat @ p)
    return out
