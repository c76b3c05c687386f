"""Binary field dumps.

Layout: a 64-byte ASCII header followed by the array as little-endian
float64 in row-major order.  The header reads

    MHDF1 <ncomp> <ndim> <dim_1> ... <dim_ndim> <h_1> ... <h_ndim>

padded with spaces and closed by a newline.  For slab fields the dims are
``(nt, n1, n2, n3)`` with spacings ``(dt, h1, h2, h3)``; boundary fields
drop ``n1``.
"""
from __future__ import annotations

import os

import numpy as np

MAGIC = "MHDF1"
HEADER_BYTES = 64


class FieldFormatError(ValueError):
    pass


def _header(ncomp, dims, spacing):
    for digits in (9, 7, 5, 3):
        parts = [MAGIC, str(ncomp), str(len(dims))] + [str(int(d)) for d in dims]
        parts += [f"{float(h):.{digits}g}" for h in spacing]
        text = " ".join(parts)
        if len(text) < HEADER_BYTES:
            return (text.ljust(HEADER_BYTES - 1) + "\n").encode("ascii")
    raise FieldFormatError("field dims too long for the header")


def write_field(path, data, spacing):
    """Write ``data`` with shape ``(ncomp, *dims)`` (or ``dims`` for a scalar)."""
    a = np.asarray(data, dtype="<f8")
    if len(spacing) == a.ndim:
        a = a[None]
    dims = a.shape[1:]
    if len(spacing) != len(dims):
        raise FieldFormatError(f"{len(spacing)} spacings for {len(dims)} dims")
    tmp = f"{path}.part"
    with open(tmp, "wb") as fh:
        fh.write(_header(a.shape[0], dims, spacing))
        fh.write(np.ascontiguousarray(a).tobytes(order="C"))
    os.replace(tmp, path)


def read_field(path):
    """Return ``(data, spacing)``; ``data`` has a leading component axis."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER_BYTES)
        body = fh.read()
    if len(head) != HEADER_BYTES or not head.startswith(MAGIC.encode()):
        raise FieldFormatError(f"{path}: not an {MAGIC} file")
    tok = head.decode("ascii").split()
    try:
        ncomp, ndim = int(tok[1]), int(tok[2])
        dims = tuple(int(x) for x in tok[3:3 + ndim])
        spacing = tuple(float(x) for x in tok[3 + ndim:3 + 2 * ndim])
    except (IndexError, ValueError) as exc:
        raise FieldFormatError(f"{path}: malformed header") from exc
    count = ncomp * int(np.prod(dims))
    if len(body) != 8 * count:
        raise FieldFormatError(f"{path}: expected {8 * count} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f8").reshape((ncomp,) + dims).astype(float)
    return data, spacing


def slab_spacing(grid):
    return (grid.dt, grid.h1, grid.h2, grid.h3)


def boundary_spacing(grid):
    return (grid.dt, grid.h2, grid.h3)
