"""SVD-based numerical kernels: pseudo-inverse, LS solves and Khatri-Rao factorization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficientWarning, ShapeMismatch, ZeroMatrix
from .tensor import as_matrix

__all__ = ["KrfResult", "pinv", "ls_solve_right", "rank1_approx", "krf"]

DEFAULT_RTOL_SCALE = 1e-10


def _default_rtol(m: np.ndarray) -> float:
    return DEFAULT_RTOL_SCALE * max(m.shape)


def pinv(m, rtol: float | None = None, return_rank: bool = False):
    """Moore-Penrose pseudo-inverse via a thin SVD.

    Singular values below ``rtol * sigma_max`` are treated as zero. The default
    ``rtol`` is ``1e-10 * max(rows, cols)``.

    Parameters
    ----------
    m : array_like
        Matrix to invert.
    rtol : float, optional
        Relative truncation threshold, must be positive.
    return_rank : bool
        Also return the number of retained singular values.
    """
    m = as_matrix(m)
    if rtol is None:
        rtol = _default_rtol(m)
    if rtol <= 0:
        raise ValueError("rtol must be positive")
    if m.size == 0:
        out = np.zeros((m.shape[1], m.shape[0]), dtype=np.complex128)
        return (out, 0) if return_rank else out
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    keep = s > rtol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    rank = int(keep.sum())
    out = (vh[:rank].conj().T / s[:rank]) @ u[:, :rank].conj().T
    return (out, rank) if return_rank else out


def ls_solve_right(y, f, rtol: float | None = None, warn_rank: int | None = None) -> np.ndarray:
    """Solve ``min_X ||Y - X F||_F`` as ``Y @ pinv(F)``.

    If ``warn_rank`` is given, a :class:`RankDeficientWarning` is emitted when the
    effective rank of ``F`` is below it.
    """
    y = as_matrix(y)
    f = as_matrix(f)
    if y.shape[1] != f.shape[1]:
        raise ShapeMismatch(f"Y has {y.shape[1]} columns but F has {f.shape[1]}")
    fp, rank = pinv(f, rtol, return_rank=True)
    if warn_rank is not None and rank < warn_rank:
        warnings.warn(
            f"LS system has effective rank {rank} < {warn_rank}", RankDeficientWarning, stacklevel=2
        )
    return y @ fp


def rank1_approx(m) -> tuple[np.ndarray, np.ndarray, float]:
    """Best rank-1 approximation ``sigma * u @ v.conj().T`` with unit-norm ``u``, ``v``."""
    m = as_matrix(m)
    if not np.any(m):
        raise ZeroMatrix("rank-1 approximation of a zero matrix is undefined")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return u[:, 0], vh[0].conj(), float(s[0])


@dataclass
class KrfResult:
    """Factors of a least-squares Khatri-Rao factorization ``M ~ khatri_rao(a, b)``."""

    a: np.ndarray
    b: np.ndarray
    residual: float
    zero_columns: list[int] = field(default_factory=list)


def krf(m, rows_a: int, rows_b: int) -> KrfResult:
    """Least-squares Khatri-Rao factorization.

    Each column of ``m`` is reshaped (column-major) into a ``rows_b x rows_a``
    matrix whose best rank-1 approximation ``sigma u v^H`` gives
    ``b[:, r] = sqrt(sigma) u`` and ``a[:, r] = sqrt(sigma) conj(v)``. All-zero
    columns yield zero factor columns and are listed in ``zero_columns``.
    """
    m = as_matrix(m)
    if m.shape[0] != rows_a * rows_b:
        raise ShapeMismatch(f"{m.shape[0]} rows cannot split into {rows_a} x {rows_b}")
    ncol = m.shape[1]
    a = np.zeros((rows_a, ncol), dtype=np.complex128)
    b = np.zeros((rows_b, ncol), dtype=np.complex128)
    zero_columns = []
    for r in range(ncol):
        block = m[:, r].reshape(rows_b, rows_a, order="F")
        if not np.any(block):
            zero_columns.append(r)
            continue
        u, v, sigma = rank1_approx(block)
        root = np.sqrt(sigma)
        b[:, r] = root * u
        a[:, r] = root * v.conj()
    fit = (a[:, None, :] * b[None, :, :]).reshape(rows_a * rows_b, ncol)
    return KrfResult(a, b, float(np.linalg.norm(m - fit)), zero_columns)
