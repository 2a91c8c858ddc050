"""Matrix, image, label and model files.

Supported matrix formats:

* Matrix Market (``.mtx``/``.mm``): ``array`` and ``coordinate`` layouts,
  ``real``/``integer``/``pattern`` fields, ``general``/``symmetric``/
  ``skew-symmetric`` symmetry. Written with shortest round-trip float
  formatting, so text round trips are exact.
* CSV (``.csv``): one matrix row per line.
* Binary PGM ``P5`` / PPM ``P6`` with 8-bit samples. Pixel values become
  reals in ``[0, 255]``; a PPM gives one matrix per colour channel.

Model files hold one or more records of the layout below (all integers
and floats little-endian)::

    b"RBD1" | m, n, d : uint64 | weight tag : uint8
    Y : m*d float64, column-major | T : d*n float64, row-major
    eps_r : float64 | residual history : d float64
    [tag 1 only] diagonal weight : m float64

Tag 0 is the identity, 1 a diagonal weight, 2 an external sparse weight
whose matrix is not stored.
"""

import csv
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .core import RbdModel
from .error import Diagonal, Identity, SparseSpd
from .exceptions import IoError, ParseError, UnsupportedFormat

MAGIC = b"RBD1"
_HEADER = struct.Struct("<4sQQQB")

_EXTENSIONS = {
    ".mtx": "mm",
    ".mm": "mm",
    ".csv": "csv",
    ".pgm": "pgm",
    ".ppm": "ppm",
}
FORMATS = ("mm", "csv", "pgm", "ppm")


def guess_format(path, fmt=None):
    if fmt is not None:
        fmt = fmt.lower()
        fmt = {"matrixmarket": "mm", "mtx": "mm"}.get(fmt, fmt)
        if fmt not in FORMATS:
            raise UnsupportedFormat(f"unknown format {fmt!r}")
        return fmt
    ext = Path(path).suffix.lower()
    try:
        return _EXTENSIONS[ext]
    except KeyError:
        raise UnsupportedFormat(f"cannot infer format of {str(path)!r}; pass it explicitly") from None


def _umask():
    mask = os.umask(0)
    os.umask(mask)
    return mask


def _atomic_write(path, data):
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.chmod(tmp, 0o666 & ~_umask())
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


# -- Matrix Market -----------------------------------------------------------

def _mm_parse(path):
    """Parse a Matrix Market file into (shape, rows, cols, vals) with 0-based indices.

    Symmetric entries are expanded. For the array layout every entry is
    returned in column-major order.
    """
    lines = _read_bytes(path).decode("ascii", errors="replace").splitlines()
    if not lines or not lines[0].startswith("%%MatrixMarket"):
        raise ParseError("missing %%MatrixMarket banner", path, line=1)
    banner = lines[0].split()
    if len(banner) != 5 or banner[1].lower() != "matrix":
        raise ParseError(f"bad banner {lines[0]!r}", path, line=1)
    layout, field, symmetry = (b.lower() for b in banner[2:])
    if layout not in ("array", "coordinate"):
        raise UnsupportedFormat(f"{path}: Matrix Market layout {layout!r}")
    if field not in ("real", "integer", "double") and not (field == "pattern" and layout == "coordinate"):
        raise UnsupportedFormat(f"{path}: Matrix Market field {field!r}")
    if symmetry not in ("general", "symmetric", "skew-symmetric"):
        raise UnsupportedFormat(f"{path}: Matrix Market symmetry {symmetry!r}")

    body = ((no, ln.strip()) for no, ln in enumerate(lines[1:], start=2))
    body = [(no, ln) for no, ln in body if ln and not ln.startswith("%")]
    if not body:
        raise ParseError("missing size line", path, line=len(lines))
    no, size_line = body[0]
    try:
        sizes = [int(tok) for tok in size_line.split()]
    except ValueError:
        raise ParseError(f"bad size line {size_line!r}", path, line=no) from None
    entries = body[1:]

    def number(tok, no):
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"bad number {tok!r}", path, line=no) from None

    if layout == "array":
        if len(sizes) != 2:
            raise ParseError("array size line needs 2 integers", path, line=no)
        m, n = sizes
        if symmetry == "general":
            rows = np.tile(np.arange(m), n)
            cols = np.repeat(np.arange(n), m)
        else:
            if m != n:
                raise ParseError("symmetric array must be square", path, line=no)
            # row-major upper triangle == column-major lower triangle
            cols, rows = np.triu_indices(n, k=0 if symmetry == "symmetric" else 1)
        try:
            vals = np.array(" ".join(ln for _, ln in entries).split(), dtype=np.float64)
        except ValueError:
            for no, ln in entries:
                for tok in ln.split():
                    number(tok, no)
            raise
        if vals.size != rows.size:
            raise ParseError(f"expected {rows.size} values, found {vals.size}", path,
                             line=entries[-1][0] if entries else no)
    else:
        if len(sizes) != 3:
            raise ParseError("coordinate size line needs 3 integers", path, line=no)
        m, n, nnz = sizes
        if len(entries) != nnz:
            raise ParseError(f"expected {nnz} entries, found {len(entries)}", path,
                             line=entries[-1][0] if entries else no)
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.ones(nnz)
        want = 2 if field == "pattern" else 3
        for k, (no, ln) in enumerate(entries):
            toks = ln.split()
            if len(toks) != want:
                raise ParseError(f"expected {want} fields, got {len(toks)}", path, line=no)
            try:
                i, j = int(toks[0]), int(toks[1])
            except ValueError:
                raise ParseError(f"bad index in {ln!r}", path, line=no) from None
            if not (1 <= i <= m and 1 <= j <= n):
                raise ParseError(f"index ({i}, {j}) outside {m}x{n}", path, line=no)
            rows[k], cols[k] = i - 1, j - 1
            if want == 3:
                vals[k] = number(toks[2], no)
    if symmetry != "general":
        off = rows != cols
        sign = 1.0 if symmetry == "symmetric" else -1.0
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, sign * vals[off]]))
    return (m, n), rows, cols, vals


def read_matrix_market(path):
    (m, n), rows, cols, vals = _mm_parse(path)
    M = np.zeros((m, n), order="F")
    np.add.at(M, (rows, cols), vals)
    return M


def read_sparse_matrix_market(path):
    """Read a Matrix Market file as a CSR matrix (duplicates are summed)."""
    shape, rows, cols, vals = _mm_parse(path)
    return sp.csr_matrix((vals, (rows, cols)), shape=shape)


def _fmt(x):
    return repr(float(x))


def write_matrix_market(M, path, coordinate=False, symmetric=False):
    """Write a dense or sparse matrix.

    ``coordinate=True`` writes the nonzeros only; ``symmetric=True`` (square,
    exactly symmetric input) stores the lower triangle.
    """
    if sp.issparse(M):
        coordinate = True
        A = sp.coo_matrix(M)
    else:
        A = np.asarray(M, dtype=np.float64)
    m, n = A.shape
    if symmetric:
        if m != n:
            raise ValueError("symmetric output needs a square matrix")
        dense_check = (A != A.T).nnz if sp.issparse(A) else np.count_nonzero(A != A.T)
        if dense_check:
            raise ValueError("matrix is not exactly symmetric")
    sym = "symmetric" if symmetric else "general"
    out = []
    if coordinate:
        C = sp.coo_matrix(A)
        C.sum_duplicates()
        r, c, v = C.row, C.col, C.data
        keep = v != 0
        if symmetric:
            keep &= r >= c
        r, c, v = r[keep], c[keep], v[keep]
        order = np.lexsort((r, c))
        out.append(f"%%MatrixMarket matrix coordinate real {sym}")
        out.append(f"{m} {n} {len(v)}")
        out.extend(f"{r[k] + 1} {c[k] + 1} {_fmt(v[k])}" for k in order)
    else:
        out.append(f"%%MatrixMarket matrix array real {sym}")
        out.append(f"{m} {n}")
        for j in range(n):
            lo = j if symmetric else 0
            out.extend(_fmt(A[i, j]) for i in range(lo, m))
    _atomic_write(path, ("\n".join(out) + "\n").encode("ascii"))


# -- CSV ---------------------------------------------------------------------

def read_csv(path):
    text = _read_bytes(path).decode("utf-8-sig")
    rows = []
    width = None
    for no, rec in enumerate(csv.reader(text.splitlines()), start=1):
        if not rec or all(not f.strip() for f in rec):
            continue
        try:
            row = [float(f) for f in rec]
        except ValueError:
            raise ParseError(f"non-numeric field in {rec!r}", path, line=no) from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", path, line=no)
        rows.append(row)
    if not rows:
        raise ParseError("no data", path)
    return np.asfortranarray(np.array(rows))


def write_csv(M, path):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    text = "".join(",".join(_fmt(x) for x in row) + "\r\n" for row in M)
    _atomic_write(path, text.encode("ascii"))


# -- PGM / PPM ---------------------------------------------------------------

def _pnm_header(data, path):
    """Parse magic, width, height, maxval; returns them and the raster offset."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ParseError("truncated header", path, offset=pos)
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append((data[start:pos], start))
    magic, (w, wpos), (h, hpos), (mv, mpos) = tokens[0][0], tokens[1], tokens[2], tokens[3]
    if magic not in (b"P5", b"P6"):
        if magic in (b"P1", b"P2", b"P3", b"P4"):
            raise UnsupportedFormat(f"{path}: only binary P5/P6 images are supported")
        raise ParseError(f"bad magic {magic!r}", path, offset=0)
    values = []
    for tok, at in ((w, wpos), (h, hpos), (mv, mpos)):
        try:
            values.append(int(tok))
        except ValueError:
            raise ParseError(f"bad header field {tok!r}", path, offset=at) from None
    width, height, maxval = values
    if width < 1 or height < 1:
        raise ParseError(f"bad image size {width}x{height}", path, offset=wpos)
    if not 1 <= maxval <= 255:
        raise UnsupportedFormat(f"{path}: maxval {maxval} (only 8-bit samples are supported)")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ParseError("missing whitespace after maxval", path, offset=pos)
    return magic, width, height, maxval, pos + 1


def read_pnm(path):
    """Read a P5 or P6 image; returns a list with one matrix per channel."""
    data = _read_bytes(path)
    magic, width, height, maxval, offset = _pnm_header(data, path)
    channels = 1 if magic == b"P5" else 3
    size = width * height * channels
    if len(data) - offset < size:
        raise ParseError(f"raster needs {size} bytes, found {len(data) - offset}", path, offset=len(data))
    raster = np.frombuffer(data, dtype=np.uint8, count=size, offset=offset).astype(np.float64)
    if maxval != 255:
        raster *= 255.0 / maxval
    raster = raster.reshape(height, width, channels)
    return [np.asfortranarray(raster[:, :, c]) for c in range(channels)]


def to_pixels(M):
    """Clamp to ``[0, 255]`` and round to bytes."""
    return np.clip(np.rint(np.asarray(M, dtype=np.float64)), 0, 255).astype(np.uint8)


def write_pnm(channels, path):
    """Write one (PGM) or three (PPM) channel matrices as an 8-bit image."""
    if isinstance(channels, np.ndarray) and channels.ndim == 2:
        channels = [channels]
    channels = [to_pixels(c) for c in channels]
    if len(channels) not in (1, 3):
        raise ValueError(f"need 1 or 3 channels, got {len(channels)}")
    shape = channels[0].shape
    if any(c.shape != shape for c in channels):
        raise ValueError("channel shapes differ")
    height, width = shape
    magic = "P5" if len(channels) == 1 else "P6"
    raster = np.stack(channels, axis=-1).tobytes()
    _atomic_write(path, f"{magic}\n{width} {height}\n255\n".encode("ascii") + raster)


# -- dispatch ------------------------------------------------------------------

def read_matrix(path, fmt=None):
    """Read a matrix file. PPM input returns a list of three channel matrices."""
    fmt = guess_format(path, fmt)
    if fmt == "mm":
        return read_matrix_market(path)
    if fmt == "csv":
        return read_csv(path)
    channels = read_pnm(path)
    if fmt == "pgm":
        if len(channels) != 1:
            raise ParseError("expected a grayscale P5 image", path, offset=0)
        return channels[0]
    return channels


def write_matrix(M, path, fmt=None):
    fmt = guess_format(path, fmt)
    if fmt == "mm":
        write_matrix_market(M, path)
    elif fmt == "csv":
        write_csv(M, path)
    elif fmt == "pgm":
        write_pnm([np.asarray(M)], path)
    else:
        write_pnm(M, path)


def read_labels(path):
    """One label per line; blank lines are ignored. Integer-looking labels become ints."""
    text = _read_bytes(path).decode("utf-8")
    labels = [ln.strip() for ln in text.splitlines() if ln.strip()]
    try:
        return np.array([int(x) for x in labels])
    except ValueError:
        return np.array(labels)


def write_labels(labels, path):
    _atomic_write(path, "".join(f"{x}\n" for x in labels).encode("utf-8"))


def read_weight(spec):
    """Parse a CLI weight spec: ``identity``, ``diag:<file>`` or ``spd:<file>``."""
    if spec in (None, "identity"):
        return Identity()
    kind, _, path = spec.partition(":")
    if kind == "diag" and path:
        text = _read_bytes(path).decode("ascii")
        values = []
        for no, ln in enumerate(text.splitlines(), start=1):
            if ln.strip():
                try:
                    values.append(float(ln))
                except ValueError:
                    raise ParseError(f"bad number {ln.strip()!r}", path, line=no) from None
        return Diagonal(values)
    if kind == "spd" and path:
        return SparseSpd(read_sparse_matrix_market(path))
    raise ValueError(f"bad weight spec {spec!r}; use identity, diag:<file> or spd:<file>")


# -- model files -----------------------------------------------------------------

def model_to_bytes(model):
    Y = np.asarray(model.Y, dtype="<f8")
    T = np.asarray(model.T, dtype="<f8")
    m, d = Y.shape
    n = T.shape[1]
    weight = model.weight
    tag = 0 if weight is None else weight.tag
    history = np.asarray(model.residual_history, dtype="<f8")
    if history.size != d:
        raise ValueError(f"residual history has {history.size} entries for d={d}")
    parts = [
        _HEADER.pack(MAGIC, m, n, d, tag),
        Y.tobytes(order="F"),
        T.tobytes(order="C"),
        struct.pack("<d", model.eps_r),
        history.tobytes(),
    ]
    if tag == 1:
        parts.append(np.asarray(weight.values, dtype="<f8").tobytes())
    return b"".join(parts)


def _model_from_buffer(data, offset, path, weight=None):
    if len(data) - offset < _HEADER.size:
        raise ParseError("truncated model header", path, offset=offset)
    magic, m, n, d, tag = _HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}", path, offset=offset)
    if tag not in (0, 1, 2):
        raise ParseError(f"unknown weight tag {tag}", path, offset=offset + 28)
    count = m * d + d * n + 1 + d + (m if tag == 1 else 0)
    pos = offset + _HEADER.size
    if len(data) - pos < 8 * count:
        raise ParseError(f"payload needs {8 * count} bytes, found {len(data) - pos}", path, offset=len(data))
    floats = np.frombuffer(data, dtype="<f8", count=count, offset=pos).astype(np.float64)
    Y = floats[:m * d].reshape((m, d), order="F").copy(order="F")
    k = m * d
    T = floats[k:k + d * n].reshape((d, n)).copy()
    k += d * n
    eps_r = float(floats[k])
    history = floats[k + 1:k + 1 + d].copy()
    k += 1 + d
    if tag == 0:
        w = Identity()
    elif tag == 1:
        w = Diagonal(floats[k:k + m])
    else:
        w = weight
    model = RbdModel(Y=Y, T=T, residual_history=history, weight=w, eps_r=eps_r)
    return model, pos + 8 * count


def model_from_bytes(data, weight=None, path=None):
    """Decode every record in ``data``. ``weight`` is attached to tag-2 records."""
    models = []
    offset = 0
    while offset < len(data):
        model, offset = _model_from_buffer(data, offset, path, weight)
        models.append(model)
    if not models:
        raise ParseError("empty model file", path, offset=0)
    return models


def write_model(model, path):
    """Write one model, or a list of models (e.g. one per colour channel)."""
    models = model if isinstance(model, (list, tuple)) else [model]
    _atomic_write(path, b"".join(model_to_bytes(m) for m in models))


def read_models(path, weight=None):
    return model_from_bytes(_read_bytes(path), weight, path)


def read_model(path, weight=None):
    """Read a single-record model file."""
    models = read_models(path, weight)
    if len(models) != 1:
        raise ParseError(f"file holds {len(models)} models; use read_models", path)
    return models[0]


def models_equal(a, b):
    """Bitwise equality of everything a model file stores."""
    same_weight = (a.weight is None and b.weight is None) or (
        a.weight is not None and b.weight is not None and a.weight == b.weight)
    return (np.array_equal(a.Y, b.Y) and np.array_equal(a.T, b.T)
            and np.array_equal(a.residual_history, b.residual_history)
            and struct.pack("<d", a.eps_r) == struct.pack("<d", b.eps_r)
            and same_weight)


def model_file_size(m, n, d, tag=0):
    return _HEADER.size + 8 * (m * d + d * n + 1 + d + (m if tag == 1 else 0))


__all__ = [
    "read_matrix", "write_matrix", "read_matrix_market", "read_sparse_matrix_market",
    "write_matrix_market", "read_csv", "write_csv", "read_pnm", "write_pnm", "to_pixels",
    "read_labels", "write_labels", "read_weight", "write_model", "read_model", "read_models",
    "model_to_bytes", "model_from_bytes", "models_equal", "model_file_size", "guess_format",
]
