"""Rectilinear target patterns.

The two built-in layouts are drawn in reference pixels of 12.5 nm on a
window centred at the origin (a 128 x 128 grid at 12.5 nm covers
+-64 reference pixels).  Rectangles are given as
``(r0, r1, c0, c1)`` half-open ranges along (rows, columns) and rasterized
by cell centre, so any grid covering the same physical window gets the
same geometry at its own resolution.

``target1_like``: a C-shaped outer feature (strokes 10 px) around a
13 px vertical bar, 12 px apart.  ``target2_like``: four features, the
largest a 36 x 36 px block, with widths down to 8 px and gaps down to 6 px.
"""

import numpy as np

from ..analysis import TargetPattern
from ..errors import GeometryOverflow, ValidationError

REFERENCE_PX_NM = 12.5

TARGET1_RECTS = (
    (-15, 15, -6, 7),     # inner vertical bar, 13 wide
    (-37, 37, -28, -18),  # left arm of the C, 10 wide, 12 from the bar
    (-37, -27, -18, 29),  # top arm, 12 above the bar
    (27, 37, -18, 29),    # bottom arm
)

TARGET2_RECTS = (
    (-27, 9, -34, 2),     # large block, 36 x 36
    (15, 23, -34, 18),    # horizontal bar, 8 tall, 6 below the block
    (-25, 9, 8, 16),      # vertical bar, 8 wide, 6 right of the block
    (-39, 23, 24, 34),    # long vertical bar, 10 wide, 8 right of the previous
)


def _rasterize(grid, rects_nm):
    c = grid.centers()
    half = grid.extent_nm / 2.0
    out = np.zeros((grid.n, grid.n))
    for r0, r1, c0, c1 in rects_nm:
        if min(r0, c0) < -half or max(r1, c1) > half:
            raise GeometryOverflow(f"rectangle {(r0, r1, c0, c1)} nm exceeds the {grid.extent_nm} nm window")
        rows = (c >= r0) & (c < r1)
        cols = (c >= c0) & (c < c1)
        out[np.ix_(rows, cols)] = 1.0
    if out[0].any() or out[-1].any() or out[:, 0].any() or out[:, -1].any():
        raise GeometryOverflow("target touches the window border")
    return out


def custom_rects(grid, rects):
    """Target from ``(i0, i1, j0, j1)`` half-open pixel-index rectangles."""
    out = np.zeros((grid.n, grid.n))
    for rect in rects:
        i0, i1, j0, j1 = (int(v) for v in rect)
        if i0 >= i1 or j0 >= j1:
            raise ValidationError(f"empty rectangle {rect}")
        if i0 < 1 or j0 < 1 or i1 > grid.n - 1 or j1 > grid.n - 1:
            raise GeometryOverflow(f"rectangle {rect} leaves the window interior")
        out[i0:i1, j0:j1] = 1.0
    return TargetPattern.from_indicator(grid, out)


def generate_target(kind, grid, rects=None):
    """Build a :class:`TargetPattern` (``target1_like``, ``target2_like`` or ``custom_rects``)."""
    if kind == "custom_rects":
        if not rects:
            raise ValidationError("custom_rects needs a rectangle list")
        return custom_rects(grid, rects)
    layouts = {"target1_like": TARGET1_RECTS, "target2_like": TARGET2_RECTS}
    if kind not in layouts:
        raise ValidationError(f"unknown target kind {kind!r}")
    s = REFERENCE_PX_NM
    rects_nm = [tuple(v * s for v in r) for r in layouts[kind]]
    return TargetPattern.from_indicator(grid, _rasterize(grid, rects_nm))
