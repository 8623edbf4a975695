"""Optical kernels, the Hopkins TCC operator and its truncated SOCS decomposition.

Lengths are in nanometres.  The coherent point spread function is the
Jinc kernel of a circular pupil of radius ``k*NA``; partial coherence is
modelled by a Gaussian mutual-intensity function whose Fourier profile is
``exp(-beta*|xi|^2) / (pi*(k*sigma*NA)^2)``.

The TCC ``H(k, j) = K(x_k) J(x_j - x_k) conj(K(x_j)) * dx^2 dy^2`` is
sampled at the cell centres of an n x n window centred on the origin and
is zero outside the window.  Its dominant eigenpairs give the
sum-of-coherent-systems model used by :mod:`phaseilt.forward_model`.
"""

from dataclasses import dataclass, field
from functools import cached_property
import logging
import math

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.special
from scipy.sparse.linalg import LinearOperator, eigsh, ArpackNoConvergence

from ._fields import FFTConvolver, central_diff, flip2
from .errors import CapacityExceeded, ConvergenceFailure, ValidationError, NumericalError

logger = logging.getLogger(__name__)

DENSE_MAX_N = 48
PSD_TOL = 1e-10
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class OpticalSystem:
    """Wavelength (nm), numerical aperture and coherency coefficient."""

    lambda_nm: float = 193.0
    na: float = 1.0
    sigma_c: float = 0.067

    def __post_init__(self):
        for name in ("lambda_nm", "na", "sigma_c"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be a positive number, got {value!r}")

    @property
    def k(self):
        """Wavenumber ``2*pi/lambda`` in 1/nm."""
        return 2.0 * math.pi / self.lambda_nm

    @property
    def cutoff(self):
        """Pupil radius ``k*NA`` in 1/nm."""
        return self.k * self.na

    @property
    def beta(self):
        """Gaussian width ``ln 2 / (k*sigma*NA)^2`` in nm^2."""
        return math.log(2.0) / (self.k * self.sigma_c * self.na) ** 2


@dataclass(frozen=True)
class GridSpec:
    """Square n x n window of square cells of side ``dx_nm``."""

    n: int = 128
    dx_nm: float = 12.5

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ValidationError(f"grid size n must be an integer >= 4, got {self.n!r}")
        if not (np.isfinite(self.dx_nm) and self.dx_nm > 0):
            raise ValidationError(f"dx_nm must be positive, got {self.dx_nm!r}")

    @property
    def extent_nm(self):
        return self.n * self.dx_nm

    @property
    def cell_area(self):
        return self.dx_nm * self.dx_nm

    def centers(self):
        """1-D cell-centre coordinates, symmetric about the origin."""
        return (np.arange(self.n) - (self.n - 1) / 2.0) * self.dx_nm

    def mesh(self):
        """``(x1, x2)`` coordinate arrays; ``x1`` varies along rows."""
        c = self.centers()
        return np.meshgrid(c, c, indexing="ij")


def eval_psf(sys, x):
    """Coherent point spread function ``K(x) = (kNA/2pi) J1(kNA|x|)/|x|``.

    ``x`` is a point (or array of points, last axis of length 2) or a
    non-negative radius array when ``x`` is not 2-vector shaped.  The
    removable singularity is filled with ``K(0) = (kNA)^2/(4pi)``.
    """
    r = _radius(x)
    kna = sys.cutoff
    out = np.empty_like(r, dtype=float)
    zero = r == 0
    rr = r[~zero]
    out[~zero] = kna / (2.0 * math.pi) * scipy.special.j1(kna * rr) / rr
    out[zero] = kna * kna / (4.0 * math.pi)
    return out if out.ndim else float(out)


def eval_mutual_intensity_approx(sys, x):
    """Closed-form inverse transform of the Gaussian mutual-intensity profile.

    ``J(x) = (1/(pi (k sigma NA)^2)) * (pi/beta) * exp(-|x|^2 / (4 beta))``;
    ``J(0) = 1/ln 2`` for every optical system.
    """
    r = _radius(x)
    ksn2 = (sys.k * sys.sigma_c * sys.na) ** 2
    beta = sys.beta
    out = (1.0 / (math.pi * ksn2)) * (math.pi / beta) * np.exp(-(r * r) / (4.0 * beta))
    return out if out.ndim else float(out)


def _radius(x):
    a = np.asarray(x, dtype=float)
    if a.ndim >= 1 and a.shape[-1] == 2:
        return np.hypot(a[..., 0], a[..., 1])
    return np.abs(a)


class TccOperator:
    """Hopkins TCC on an n x n window, held in factored form.

    ``H = w * diag(K) . Jmat . diag(conj K)`` with ``Jmat[k, j] = J(x_j - x_k)``
    and ``w = dx^2 dy^2``.  ``matvec`` applies H through one FFT convolution
    with the sampled J, so H never needs to be stored; ``to_dense`` builds
    the n^2 x n^2 matrix for small grids.
    """

    def __init__(self, grid, psf_samples, mutual_offsets, weight):
        self.grid = grid
        self.psf = np.asarray(psf_samples)
        # J sampled on integer pixel offsets d in [-(n-1), n-1]^2, index d + n - 1
        self.mutual = np.asarray(mutual_offsets)
        self.weight = float(weight)
        n = grid.n
        self._m = scipy.fft.next_fast_len(3 * n - 2)
        # J(x_j - x_k) as a convolution kernel in (k - j): flip of the offset table
        self._jspec = scipy.fft.fft2(flip2(self.mutual), s=(self._m, self._m))

    @property
    def n(self):
        return self.grid.n

    @property
    def size(self):
        return self.grid.n ** 2

    @property
    def dtype(self):
        return np.result_type(self.psf, self.mutual, float)

    def matvec(self, v):
        """Apply H to a flattened (or n x n) field."""
        n = self.n
        shape = np.shape(v)
        y = np.conj(self.psf) * np.reshape(v, (n, n))
        full = scipy.fft.ifft2(self._jspec * scipy.fft.fft2(y, s=(self._m, self._m)))
        z = full[n - 1:2 * n - 1, n - 1:2 * n - 1]
        if np.isrealobj(self.psf) and np.isrealobj(self.mutual) and np.isrealobj(v):
            z = z.real
        return np.reshape(self.weight * self.psf * z, shape)

    def to_dense(self, force=False):
        """Materialize H as an n^2 x n^2 matrix (only for n <= 48 unless forced)."""
        n = self.n
        if n > DENSE_MAX_N and not force:
            raise CapacityExceeded(
                f"dense TCC requested for n={n}; limit is n <= {DENSE_MAX_N}")
        idx = np.arange(n)
        i1, i2 = np.meshgrid(idx, idx, indexing="ij")
        i1 = i1.ravel()
        i2 = i2.ravel()
        # offset x_j - x_k in pixels, shifted into the table index
        d1 = i1[None, :] - i1[:, None] + n - 1
        d2 = i2[None, :] - i2[:, None] + n - 1
        kf = self.psf.ravel()
        return self.weight * kf[:, None] * self.mutual[d1, d2] * np.conj(kf)[None, :]


def build_tcc(sys, grid, coherent=False, dense=None):
    """Sample the Hopkins TCC for ``sys`` on ``grid``.

    ``coherent=True`` replaces J by the constant 1 (rank-one operator).
    ``dense=True`` eagerly checks that dense materialization is allowed
    (raising :class:`CapacityExceeded` for n > 48); the operator itself is
    always returned in factored form.
    """
    n = grid.n
    if dense and n > DENSE_MAX_N:
        raise CapacityExceeded(f"dense TCC requested for n={n}; limit is n <= {DENSE_MAX_N}")
    x1, x2 = grid.mesh()
    psf = eval_psf(sys, np.stack([x1, x2], axis=-1))
    d = np.arange(-(n - 1), n) * grid.dx_nm
    d1, d2 = np.meshgrid(d, d, indexing="ij")
    if coherent:
        mutual = np.ones_like(d1)
    else:
        mutual = eval_mutual_intensity_approx(sys, np.stack([d1, d2], axis=-1))
    return TccOperator(grid, psf, mutual, grid.cell_area ** 2)


@dataclass(frozen=True, eq=False)
class SocsModel:
    """Truncated eigen-decomposition ``H ~ sum_n sigma_n v_n conj(v_n)^T``.

    ``v`` has shape ``(n0, n, n)``; ``sigma`` is sorted in decreasing
    order.  The reflected kernels ``w_n(x) = conj(v_n(-x))``, the stencil
    derivatives ``dv_n`` and their reflections ``dz_n(x) = dv_n(-x)`` are
    derived on first use, together with their padded spectra.
    """

    grid: GridSpec
    sigma: np.ndarray
    v: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        v = np.asarray(self.v, dtype=complex)
        if v.ndim != 3 or v.shape[1:] != (self.grid.n, self.grid.n):
            raise ValidationError(f"mode array shape {v.shape} does not match grid n={self.grid.n}")
        if sigma.shape != (v.shape[0],):
            raise ValidationError("need one eigenvalue per mode")
        if np.any(np.diff(sigma) > 0) or np.any(sigma < 0):
            raise ValidationError("eigenvalues must be non-negative and non-increasing")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "v", v)

    @property
    def n0(self):
        return self.sigma.shape[0]

    @property
    def n(self):
        return self.grid.n

    @cached_property
    def w(self):
        return np.conj(flip2(self.v))

    @cached_property
    def dv(self):
        """``(dv_x1, dv_x2)``, each of shape ``(n0, n, n)``."""
        return central_diff(self.v, -2), central_diff(self.v, -1)

    @cached_property
    def dz(self):
        return flip2(self.dv[0]), flip2(self.dv[1])

    @cached_property
    def conv(self):
        return FFTConvolver(self.n)

    @cached_property
    def spectra(self):
        """Padded FFTs of every kernel family, keyed by name."""
        c = self.conv
        return {
            "v": c.spectrum(self.v),
            "w": c.spectrum(self.w),
            "dv1": c.spectrum(self.dv[0]),
            "dv2": c.spectrum(self.dv[1]),
            "dz1": c.spectrum(self.dz[0]),
            "dz2": c.spectrum(self.dz[1]),
        }

    def rescaled(self, factor):
        """Same modes with every eigenvalue multiplied by ``factor`` (> 0)."""
        if not factor > 0:
            raise ValidationError("rescale factor must be positive")
        return SocsModel(self.grid, self.sigma * factor, self.v, dict(self.meta))

    def truncated_matrix(self):
        """Dense ``H_trunc`` (n^2 x n^2); test/diagnostic use on small grids."""
        vf = self.v.reshape(self.n0, -1)
        return (vf.T * self.sigma) @ np.conj(vf)


def _phase_normalize(vecs):
    # make the largest-magnitude entry of each eigenvector real and positive
    idx = np.argmax(np.abs(vecs), axis=0)
    ph = vecs[idx, np.arange(vecs.shape[1])]
    ph = ph / np.abs(ph)
    return vecs / ph[None, :]


def decompose_socs(tcc, n0=10, method="auto"):
    """Top-``n0`` eigenpairs of the TCC as a :class:`SocsModel`.

    ``method`` is ``"dense"`` (Hermitian eigensolve of the materialized
    matrix, n <= 48), ``"iterative"`` (implicitly restarted Lanczos on the
    factored operator) or ``"auto"``.
    """
    n = tcc.n
    size = tcc.size
    if not 1 <= n0 <= size:
        raise ValidationError(f"n0 must be in [1, {size}], got {n0}")
    if method == "auto":
        method = "dense" if n <= DENSE_MAX_N else "iterative"
    if method == "iterative" and n0 >= size - 1:
        method = "dense"

    if method == "dense":
        hmat = tcc.to_dense()
        vals, vecs = scipy.linalg.eigh(hmat)
        order = np.argsort(vals)[::-1][:n0]
        vals = vals[order]
        vecs = vecs[:, order]
    elif method == "iterative":
        dtype = np.float64 if np.isrealobj(tcc.psf) and np.isrealobj(tcc.mutual) else np.complex128
        op = LinearOperator((size, size), matvec=tcc.matvec, dtype=dtype)
        v0 = np.ones(size, dtype=dtype)
        ncv = min(size, max(2 * n0 + 1, n0 + 20))
        try:
            vals, vecs = eigsh(op, k=n0, which="LA", v0=v0, ncv=ncv, tol=1e-13, maxiter=20 * size)
        except ArpackNoConvergence as exc:
            raise ConvergenceFailure(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(vals)[::-1]
        vals = vals[order]
        vecs = vecs[:, order]
        hmat = None
    else:
        raise ValidationError(f"unknown eigensolver method {method!r}")

    vecs = _phase_normalize(vecs.astype(complex))
    sigma1 = vals[0]
    if not sigma1 > 0:
        raise NumericalError("TCC has no positive eigenvalue")
    if vals[-1] < -PSD_TOL * sigma1:
        raise NumericalError(f"TCC is not positive semi-definite: eigenvalue {vals[-1]:.3e}")
    resid = 0.0
    for i in range(vecs.shape[1]):
        hv = hmat @ vecs[:, i] if hmat is not None else tcc.matvec(vecs[:, i])
        resid = max(resid, np.linalg.norm(hv - vals[i] * vecs[:, i]))
    if resid > RESIDUAL_TOL * sigma1:
        raise ConvergenceFailure(f"eigen residual {resid:.3e} exceeds {RESIDUAL_TOL}*sigma_1")
    vals = np.clip(vals, 0.0, None)
    logger.debug("SOCS: n=%d n0=%d sigma_1=%.6e residual=%.2e", n, n0, sigma1, resid)
    modes = vecs.T.reshape(n0, n, n)
    return SocsModel(tcc.grid, vals, modes, {"method": method, "residual": float(resid)})


def socs_from(sys, grid, n0=10, method="auto"):
    """Convenience: build the TCC and decompose it in one call."""
    model = decompose_socs(build_tcc(sys, grid), n0, method=method)
    model.meta.update({
        "lambda_nm": sys.lambda_nm, "na": sys.na, "sigma_c": sys.sigma_c,
        "n": grid.n, "dx_nm": grid.dx_nm, "n0": n0,
    })
    return model
