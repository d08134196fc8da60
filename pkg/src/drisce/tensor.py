"""Dense complex multilinear algebra on numpy arrays.

Matrices are 2-D ``complex128`` arrays and third-order tensors are 3-D arrays.
All unfoldings share one convention: the mode-n unfolding of a CP tensor with
factors ``(A, B, C)`` is

* mode 1: ``A @ khatri_rao(C, B).T``
* mode 2: ``B @ khatri_rao(C, A).T``
* mode 3: ``C @ khatri_rao(B, A).T``

i.e. the remaining indices are enumerated with the lowest mode varying fastest.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ColumnMismatch, InvalidMode, RankMismatch, ShapeMismatch

__all__ = [
    "as_matrix",
    "kron",
    "khatri_rao",
    "vec",
    "unvec",
    "unfold",
    "fold",
    "cp3",
    "hstack",
    "vstack",
]


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a 2-D complex128 array (column vector for 1-D input)."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got array with shape {m.shape}")
    return m


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product.

    Column ``r`` of the result is ``kron(a[:, r], b[:, r])``, so the row index
    of ``b`` varies fastest.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ColumnMismatch(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def vec(a) -> np.ndarray:
    """Stack the columns of ``a`` into a single column vector."""
    a = as_matrix(a)
    return a.reshape(-1, 1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.size != rows * cols:
        raise ShapeMismatch(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def _check_mode(n: int) -> int:
    if n not in (1, 2, 3):
        raise InvalidMode(f"mode must be 1, 2 or 3, got {n!r}")
    return n - 1


def unfold(t, n: int) -> np.ndarray:
    """Mode-``n`` unfolding (``n`` in 1..3) of a third-order tensor."""
    ax = _check_mode(n)
    t = np.asarray(t)
    if t.ndim != 3:
        raise ShapeMismatch(f"expected a 3-way tensor, got shape {t.shape}")
    return np.moveaxis(t, ax, 0).reshape(t.shape[ax], -1, order="F")


def fold(m, n: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of shape ``dims``."""
    ax = _check_mode(n)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ShapeMismatch(f"dims must have three entries, got {dims}")
    m = np.asarray(m)
    rest = [d for k, d in enumerate(dims) if k != ax]
    expected = (dims[ax], rest[0] * rest[1])
    if m.shape != expected:
        raise ShapeMismatch(f"mode-{n} unfolding of {dims} must be {expected}, got {m.shape}")
    moved = m.reshape(dims[ax], rest[0], rest[1], order="F")
    return np.moveaxis(moved, 0, ax)


def cp3(a, b, c) -> np.ndarray:
    """Third-order CP tensor with entries ``sum_r a[i,r] b[j,r] c[k,r]``."""
    a, b, c = as_matrix(a), as_matrix(b), as_matrix(c)
    if not a.shape[1] == b.shape[1] == c.shape[1]:
        raise RankMismatch(
            f"factor column counts differ: {a.shape[1]}, {b.shape[1]}, {c.shape[1]}"
        )
    return np.einsum("ir,jr,kr->ijk", a, b, c)


def hstack(blocks: Sequence) -> np.ndarray:
    blocks = [as_matrix(b) for b in blocks]
    if not blocks:
        raise ShapeMismatch("nothing to stack")
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1:
        raise ShapeMismatch(f"row counts differ: {sorted(rows)}")
    return np.concatenate(blocks, axis=1)


def vstack(blocks: Sequence) -> np.ndarray:
    blocks = [as_matrix(b) for b in blocks]
    if not blocks:
        raise ShapeMismatch("nothing to stack")
    cols = {b.shape[1] for b in blocks}
    if len(cols) != 1:
        raise ShapeMismatch(f"column counts differ: {sorted(cols)}")
    return np.concatenate(blocks, axis=0)
