"""Exposure extraction, pixel errors, threshold-stability metrics and topology."""

from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi

from ._fields import grad2
from .errors import DegenerateTarget, GridMismatch, ValidationError
from .forward_model import intensity_only

FOREGROUND_CONN = np.ones((3, 3), dtype=bool)
BACKGROUND_CONN = ndi.generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class TargetPattern:
    """Binary target ``chi_0`` with its discrete perimeter (pixel units)."""

    grid: object
    indicator: np.ndarray
    perimeter: float

    @classmethod
    def from_indicator(cls, grid, indicator):
        ind = np.asarray(indicator)
        if ind.shape != (grid.n, grid.n):
            raise GridMismatch(f"indicator shape {ind.shape} does not match grid n={grid.n}")
        if not np.all((ind == 0) | (ind == 1)):
            raise ValidationError("target indicator must be exactly 0/1")
        ind = ind.astype(float)
        return cls(grid, ind, discrete_perimeter(ind))

    @property
    def perimeter_nm(self):
        return self.perimeter * self.grid.dx_nm

    @property
    def area(self):
        return float(self.indicator.sum())


def discrete_perimeter(indicator):
    """Central-difference total variation of a field (pixel units)."""
    d1, d2 = grad2(np.asarray(indicator, dtype=float))
    return float(np.sum(np.hypot(d1, d2)))


@dataclass(frozen=True, eq=False)
class ExposureReport:
    hvar: float
    exposed: np.ndarray
    pixel_error: int
    d_field: np.ndarray
    d_min: float
    components: int
    holes: int
    holes_in_largest: int

    def row(self):
        return {
            "hvar": self.hvar, "pixel_err": self.pixel_error, "d_min_pct": self.d_min,
            "components": self.components, "holes": self.holes,
            "holes_in_largest": self.holes_in_largest,
        }


def expose(bundle_or_intensity, h, hvar_percent=0.0):
    """Indicator of ``{I > (1 + hvar/100) h}`` (strict)."""
    if not h > 0:
        raise ValidationError("threshold must be positive")
    inten = getattr(bundle_or_intensity, "intensity", bundle_or_intensity)
    return np.asarray(inten) > (1.0 + hvar_percent / 100.0) * h


def pixel_error(exposed, target):
    ind = target.indicator if isinstance(target, TargetPattern) else np.asarray(target)
    return int(np.sum(np.abs(np.asarray(exposed, dtype=int) - ind.astype(int))))


def default_threshold(model, target, fraction=0.4):
    """``0.4 * max I_0`` where ``I_0`` is the intensity of the target used as mask."""
    i0 = intensity_only(model, target.indicator)
    peak = float(np.max(i0))
    if not peak > 0:
        raise DegenerateTarget("target produces zero intensity")
    return fraction * peak


def stability_metric(bundle, h=1.0, level=1.0):
    """``d = |(I/h - level, d1 I/h, d2 I/h)|`` per pixel and its minimum in percent.

    ``level`` is the (normalized) threshold the distance is measured to;
    a sweep at ``hvar`` percent uses ``level = 1 + hvar/100``.
    """
    i = bundle.intensity / h
    d = np.sqrt((i - level) ** 2 + (bundle.grad_x1 / h) ** 2 + (bundle.grad_x2 / h) ** 2)
    return d, 100.0 * float(d.min())


def topology_summary(pattern):
    """``(components, holes)``: 8-connected foreground, 4-connected enclosed background."""
    pat = np.asarray(pattern, dtype=bool)
    _, ncomp = ndi.label(pat, structure=FOREGROUND_CONN)
    return ncomp, _count_holes(pat)


def _count_holes(pat):
    bg, nbg = ndi.label(~pat, structure=BACKGROUND_CONN)
    if nbg == 0:
        return 0
    border = np.unique(np.concatenate([bg[0], bg[-1], bg[:, 0], bg[:, -1]]))
    border = border[border > 0]
    return int(nbg - len(border))


def holes_in_largest_component(pattern):
    """Number of holes enclosed by the largest 8-connected foreground component."""
    pat = np.asarray(pattern, dtype=bool)
    lab, ncomp = ndi.label(pat, structure=FOREGROUND_CONN)
    if ncomp == 0:
        return 0
    sizes = ndi.sum(pat, lab, index=np.arange(1, ncomp + 1))
    biggest = lab == (1 + int(np.argmax(sizes)))
    return _count_holes(biggest)


def exposure_report(bundle, h, hvar_percent, target):
    exposed = expose(bundle, h, hvar_percent)
    d, dmin = stability_metric(bundle, h, 1.0 + hvar_percent / 100.0)
    comps, holes = topology_summary(exposed)
    return ExposureReport(hvar_percent, exposed, pixel_error(exposed, target), d, dmin,
                          comps, holes, holes_in_largest_component(exposed))


def threshold_sweep(bundle, h, hvar_list, target):
    """One :class:`ExposureReport` per threshold perturbation in ``hvar_list`` (percent)."""
    return [exposure_report(bundle, h, float(hv), target) for hv in hvar_list]
