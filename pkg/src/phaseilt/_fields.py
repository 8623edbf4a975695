"""Finite-difference stencil and zero-padded FFT convolution on n x n windows.

Every field lives on an n x n window and is implicitly zero outside it.
Kernels are n x n arrays whose cell ``k`` sits at offset ``k - (n-1)/2``
pixels from the origin, so a point reflection ``x -> -x`` is an exact
index flip ``k -> n-1-k``.  Convolutions are linear (not circular): the
FFT length is at least ``2n - 1`` per axis.
"""

import numpy as np
import scipy.fft


def central_diff(field, axis):
    """Central difference along ``axis`` in units of 1/pixel, zero extension.

    ``out[i] = (f[i+1] - f[i-1]) / 2`` with ``f = 0`` outside the window.
    Works on stacks: ``axis`` is counted from the end when negative.
    """
    f = np.asarray(field)
    out = np.zeros_like(f)
    ax = axis % f.ndim
    hi = [slice(None)] * f.ndim
    lo = [slice(None)] * f.ndim
    mid = [slice(None)] * f.ndim
    # interior and boundary handled together: out[i] += f[i+1]/2, out[i] -= f[i-1]/2
    mid[ax] = slice(0, -1)
    hi[ax] = slice(1, None)
    out[tuple(mid)] += 0.5 * f[tuple(hi)]
    out[tuple(hi)] -= 0.5 * f[tuple(mid)]
    return out


def grad2(field):
    """Both central-difference partials ``(d/dx1, d/dx2)`` of a 2-D field.

    ``x1`` runs along axis -2 (rows) and ``x2`` along axis -1 (columns).
    """
    return central_diff(field, -2), central_diff(field, -1)


def neg_laplacian(field):
    """``sum_l D_l^T D_l f`` for the central stencil (``D_l^T = -D_l``)."""
    d1, d2 = grad2(field)
    return -(central_diff(d1, -2) + central_diff(d2, -1))


def flip2(a):
    """Point reflection of the last two axes (``x -> -x`` on the kernel grid)."""
    return np.asarray(a)[..., ::-1, ::-1]


class FFTConvolver:
    """Linear convolution of n x n kernels with n x n fields, cropped to the window.

    ``forward`` is the convolution used for kernels sampled on the centred
    grid (``V_n``, ``dV_n``).  ``adjoint`` is the matching crop for the
    reflected kernels (``W_n``, ``Z_n``): with it,
    ``<forward(v, x), y> == <x, adjoint(flip(conj(v)), y)>`` exactly.
    """

    def __init__(self, n, size=None):
        self.n = int(n)
        m = scipy.fft.next_fast_len(2 * self.n - 1) if size is None else int(size)
        if m < 2 * self.n - 1:
            raise ValueError(f"padded size {m} is below 2n-1 = {2 * self.n - 1}")
        self.shape = (m, m)
        self.c_fwd = self.n // 2
        self.c_adj = self.n - 1 - self.c_fwd

    def spectrum(self, kernels):
        """FFT of a kernel (or a stack of kernels) at the padded size."""
        return scipy.fft.fft2(np.asarray(kernels), s=self.shape, axes=(-2, -1))

    def field_spectrum(self, field):
        return scipy.fft.fft2(np.asarray(field), s=self.shape, axes=(-2, -1))

    def _crop(self, full, c):
        n = self.n
        return full[..., c:c + n, c:c + n]

    def forward_from_spectra(self, kspec, fspec):
        return self._crop(scipy.fft.ifft2(kspec * fspec, axes=(-2, -1)), self.c_fwd)

    def adjoint_from_spectra(self, kspec, fspec):
        return self._crop(scipy.fft.ifft2(kspec * fspec, axes=(-2, -1)), self.c_adj)

    def forward(self, kernel, field):
        return self.forward_from_spectra(self.spectrum(kernel), self.field_spectrum(field))

    def adjoint(self, kernel, field):
        return self.adjoint_from_spectra(self.spectrum(kernel), self.field_spectrum(field))


def direct_conv(kernel, field, adjoint=False):
    """Brute-force version of :class:`FFTConvolver` (test oracle, O(n^4))."""
    kernel = np.asarray(kernel)
    field = np.asarray(field)
    n = field.shape[-1]
    c = n // 2 if not adjoint else n - 1 - n // 2
    out = np.zeros((n, n), dtype=np.result_type(kernel, field, complex))
    for i1 in range(n):
        for i2 in range(n):
            acc = 0j
            for k1 in range(n):
                m1 = i1 + c - k1
                if not 0 <= m1 < n:
                    continue
                for k2 in range(n):
                    m2 = i2 + c - k2
                    if 0 <= m2 < n:
                        acc += kernel[k1, k2] * field[m1, m2]
            out[i1, i2] = acc
    return out
