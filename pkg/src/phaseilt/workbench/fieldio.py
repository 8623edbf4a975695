"""File formats: full-precision field files, PGM/PBM rasters, trace CSV and the SOCS cache.

Field files are plain text::

    LITHOFIELD 1 <rows> <cols> <dx_nm> <dy_nm> <real|complex>
    v v v ...          (one grid row per line, 17 significant digits)

Complex fields store interleaved ``re im`` pairs.  Every writer goes
through a temporary file in the destination directory followed by
``os.replace``, so readers never see a half-written file.
"""

from contextlib import contextmanager
import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import os
import tempfile

import numpy as np

from ..errors import DimensionMismatch, ParseError, ValidationError
from ..optics import GridSpec, SocsModel

MAGIC = "LITHOFIELD"
VERSION = "1"
TRACE_COLUMNS = ("iter", "stage", "eps", "eta", "gamma", "F_total", "F_misfit", "F_perimdiff",
                 "F_mm", "F_reg", "step", "pixel_err", "d_min_pct", "nonbinary_px")


# -- atomic writes -----------------------------------------------------------

@contextmanager
def _atomic(path, mode):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=folder)
    try:
        kw = {} if "b" in mode else {"encoding": "ascii", "newline": "\n"}
        with os.fdopen(fd, mode, **kw) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    with _atomic(path, "w") as fh:
        fh.write(text)


def atomic_write_bytes(path, data):
    with _atomic(path, "wb") as fh:
        fh.write(data)


# -- field files -------------------------------------------------------------

def _fmt(x):
    return "%.17g" % x


def format_field(values, dx_nm=1.0, dy_nm=None):
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise DimensionMismatch(f"fields are 2-D, got shape {arr.shape}")
    dy_nm = dx_nm if dy_nm is None else dy_nm
    cplx = np.iscomplexobj(arr)
    out = io.StringIO()
    out.write(f"{MAGIC} {VERSION} {arr.shape[0]} {arr.shape[1]} {_fmt(dx_nm)} {_fmt(dy_nm)} "
              f"{'complex' if cplx else 'real'}\n")
    for row in arr:
        if cplx:
            toks = [t for z in row for t in (_fmt(z.real), _fmt(z.imag))]
        else:
            toks = [_fmt(float(x)) for x in row]
        out.write(" ".join(toks))
        out.write("\n")
    return out.getvalue()


def write_field(path, values, dx_nm=1.0, dy_nm=None):
    atomic_write_text(path, format_field(values, dx_nm, dy_nm))


def parse_field(text, expect_shape=None):
    """Parse field-file text into ``(array, dx_nm, dy_nm)``.

    Raises :class:`ParseError` (with the 1-based line and 0-based column)
    for malformed content and :class:`DimensionMismatch` when the header
    disagrees with ``expect_shape``.
    """
    lines = text.split("\n")
    head = lines[0].split()
    if len(head) != 7 or head[0] != MAGIC:
        raise ParseError("missing LITHOFIELD header", line=1, offset=0)
    if head[1] != VERSION:
        raise ParseError(f"unsupported version {head[1]!r}", line=1, offset=lines[0].find(head[1]))
    try:
        rows, cols = int(head[2]), int(head[3])
        dx, dy = float(head[4]), float(head[5])
    except ValueError as exc:
        raise ParseError(f"bad header field: {exc}", line=1) from exc
    if rows < 1 or cols < 1:
        raise ParseError("grid dimensions must be positive", line=1)
    kind = head[6]
    if kind not in ("real", "complex"):
        raise ParseError(f"unknown value kind {kind!r}", line=1, offset=lines[0].rfind(kind))
    if expect_shape is not None and tuple(expect_shape) != (rows, cols):
        raise DimensionMismatch(f"file holds {rows}x{cols}, expected {tuple(expect_shape)}")
    per = 2 if kind == "complex" else 1
    need = rows * cols * per
    vals = []
    for lineno, line in enumerate(lines[1:], start=2):
        pos = 0
        for tok in line.split():
            col = line.index(tok, pos)
            pos = col + len(tok)
            try:
                vals.append(float(tok))
            except ValueError:
                raise ParseError(f"not a number: {tok!r}", line=lineno, offset=col) from None
            if len(vals) > need:
                raise ParseError(f"more than the {need} values declared", line=lineno, offset=col)
    if len(vals) != need:
        raise ParseError(f"header declares {need} values but {len(vals)} are present",
                         line=len(lines))
    arr = np.array(vals, dtype=float)
    if per == 2:
        cplx = np.empty(rows * cols, dtype=complex)
        cplx.real = arr[0::2]
        cplx.imag = arr[1::2]  # direct assignment keeps the sign of -0.0
        arr = cplx
    return arr.reshape(rows, cols), dx, dy


def read_field(path, expect_shape=None):
    with open(path, encoding="ascii") as fh:
        return parse_field(fh.read(), expect_shape)


# -- rasters -----------------------------------------------------------------

def to_gray(u):
    """``round(255 u)`` as uint8 (values must lie in [0, 1])."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise DimensionMismatch("rasters are 2-D")
    if np.any(~np.isfinite(u)) or u.min() < 0 or u.max() > 1:
        raise ValidationError("raster values must lie in [0, 1]")
    return np.rint(255.0 * u).astype(np.uint8)


def encode_pgm(gray, binary=False):
    gray = np.asarray(gray, dtype=np.uint8)
    rows, cols = gray.shape
    if binary:
        return f"P5\n{cols} {rows}\n255\n".encode("ascii") + gray.tobytes()
    body = "\n".join(" ".join(str(int(v)) for v in row) for row in gray)
    return f"P2\n{cols} {rows}\n255\n{body}\n".encode("ascii")


def write_pgm(path, u, binary=False):
    atomic_write_bytes(path, encode_pgm(to_gray(u), binary))


def encode_pbm(pattern):
    pat = np.asarray(pattern, dtype=bool)
    rows, cols = pat.shape
    body = "\n".join(" ".join("1" if v else "0" for v in row) for row in pat)
    return f"P1\n{cols} {rows}\n{body}\n".encode("ascii")


def write_pbm(path, pattern):
    atomic_write_bytes(path, encode_pbm(pattern))


def difference_raster(exposed, target_indicator):
    """0 where the target is missed, 255 where exposure exceeds it, 128 elsewhere."""
    e = np.asarray(exposed, dtype=bool)
    t = np.asarray(target_indicator) > 0.5
    out = np.full(e.shape, 128, dtype=np.uint8)
    out[t & ~e] = 0
    out[e & ~t] = 255
    return out


def write_difference(path, exposed, target_indicator):
    atomic_write_bytes(path, encode_pgm(difference_raster(exposed, target_indicator)))


def _header_tokens(data, count):
    """First ``count`` whitespace tokens of a netpbm header (``#`` comments skipped)."""
    toks, i = [], 0
    while len(toks) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i >= len(data):
            raise ParseError("truncated raster header", offset=i)
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        toks.append(data[i:j].decode("ascii", "replace"))
        i = j
    return toks, i + 1


def decode_raster(data):
    """Decode P1, P2 or P5 bytes to an integer array (PBM: 1 = foreground)."""
    magic = data[:2]
    if magic == b"P1":
        (_, c, r), pos = _header_tokens(data, 3)
        vals = data[pos - 1:].replace(b" ", b"").replace(b"\n", b"").replace(b"\r", b"").replace(b"\t", b"")
        try:
            arr = np.array([int(chr(v)) for v in vals], dtype=np.uint8)
        except ValueError:
            raise ParseError("PBM body must hold 0/1 digits") from None
    elif magic in (b"P2", b"P5"):
        (_, c, r, mx), pos = _header_tokens(data, 4)
        if int(mx) != 255:
            raise ParseError(f"unsupported maxval {mx}")
        if magic == b"P5":
            arr = np.frombuffer(data[pos:], dtype=np.uint8)
        else:
            try:
                arr = np.array(data[pos:].split(), dtype=np.int64)
            except ValueError:
                raise ParseError("PGM body must hold integers") from None
    else:
        raise ParseError(f"unknown raster magic {magic!r}", line=1, offset=0)
    r, c = int(r), int(c)
    if arr.size != r * c:
        raise DimensionMismatch(f"raster declares {r}x{c} but holds {arr.size} values")
    return arr.reshape(r, c)


def read_raster(path):
    with open(path, "rb") as fh:
        return decode_raster(fh.read())


# -- trace CSV ---------------------------------------------------------------

def format_trace(records, timestamp=None):
    """CSV text: a ``# written <timestamp>`` line, the column header, one row per record."""
    stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    out = io.StringIO()
    out.write(f"# written {stamp}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for rec in records:
        row = dataclasses.asdict(rec) if dataclasses.is_dataclass(rec) else dict(rec)
        w.writerow([_fmt(row[k]) if isinstance(row[k], float) else row[k] for k in TRACE_COLUMNS])
    return out.getvalue()


def write_trace(path, records, timestamp=None):
    atomic_write_text(path, format_trace(records, timestamp))


def read_trace(path):
    with open(path, encoding="ascii") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if rows and tuple(rows[0].keys()) != TRACE_COLUMNS:
        raise ParseError("unexpected trace columns", line=2)
    return rows


# -- SOCS cache --------------------------------------------------------------

def cache_key(sys, grid, n0):
    key = {"lambda_nm": float(sys.lambda_nm), "na": float(sys.na), "sigma_c": float(sys.sigma_c),
           "n": int(grid.n), "dx_nm": float(grid.dx_nm), "n0": int(n0)}
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:16]
    return key, digest


def save_socs(model, root, sys, grid):
    key, digest = cache_key(sys, grid, model.n0)
    folder = os.path.join(root, digest)
    os.makedirs(folder, exist_ok=True)
    for i, mode in enumerate(model.v):
        write_field(os.path.join(folder, f"v_{i:02d}.field"), mode, grid.dx_nm)
    manifest = {"key": key, "sigma": [float(s) for s in model.sigma],
                "meta": {k: v for k, v in model.meta.items() if isinstance(v, (int, float, str))}}
    # the manifest goes last: its presence marks a complete entry
    atomic_write_text(os.path.join(folder, "manifest.json"), json.dumps(manifest, indent=1) + "\n")
    return folder


def load_socs(root, sys, grid, n0):
    """Cached model for these parameters, or None on a miss."""
    key, digest = cache_key(sys, grid, n0)
    folder = os.path.join(root, digest)
    mpath = os.path.join(folder, "manifest.json")
    if not os.path.exists(mpath):
        return None
    with open(mpath, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("key") != key:
        return None
    modes = [read_field(os.path.join(folder, f"v_{i:02d}.field"), (grid.n, grid.n))[0]
             for i in range(n0)]
    meta = dict(manifest.get("meta", {}))
    meta["cache"] = folder
    return SocsModel(GridSpec(grid.n, grid.dx_nm), np.array(manifest["sigma"]), np.array(modes), meta)


def cached_socs(sys, grid, n0, root=None, method="auto"):
    """``(model, hit)``: load from ``root`` if present, else compute and store."""
    from ..optics import socs_from
    if root:
        model = load_socs(root, sys, grid, n0)
        if model is not None:
            return model, True
    model = socs_from(sys, grid, n0, method)
    if root:
        save_socs(model, root, sys, grid)
    return model, False
