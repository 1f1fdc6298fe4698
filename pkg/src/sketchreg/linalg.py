"""Dense kernels: thin QR, triangular solves, the fast Walsh-Hadamard
transform, and singular-value diagnostics.

Matrices are plain row-major ``numpy.ndarray`` of float64 throughout the
package; there is no wrapper type.
"""

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    NotPowerOfTwoError,
    RankDeficientError,
    SingularFactorError,
)

__all__ = [
    "QRFactors",
    "qr_thin",
    "tri_solve",
    "fwht_inplace",
    "fwht",
    "condition_number",
    "next_pow2",
]


class QRFactors(NamedTuple):
    """Thin QR factors: ``q`` has orthonormal columns, ``r`` is upper
    triangular with nonnegative diagonal."""

    q: np.ndarray
    r: np.ndarray


def qr_thin(m: np.ndarray) -> QRFactors:
    """Thin QR factorization with a nonnegative-diagonal sign convention.

    Parameters
    ----------
    m : (n, d) array with n >= d and full column rank.

    Returns
    -------
    QRFactors with q (n, d), r (d, d) such that q @ r == m.

    Raises
    ------
    RankDeficientError
        If any |r_ii| < 1e-12 * ||m||_F, i.e. the input (typically a
        sketched matrix) effectively lost column rank.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise DimensionMismatchError(
            f"qr_thin needs a tall matrix, got shape {m.shape}"
        )
    q, r = np.linalg.qr(m, mode="reduced")
    tol = 1e-12 * np.linalg.norm(m)
    diag = np.diag(r)
    if np.any(np.abs(diag) < tol):
        raise RankDeficientError(
            f"smallest |R_ii| = {np.min(np.abs(diag)):.3e} below {tol:.3e}"
        )
    # Flip signs so diag(R) >= 0; makes the factorization unique.
    flip = np.where(diag < 0.0, -1.0, 1.0)
    r = flip[:, None] * r
    q = q * flip[None, :]
    return QRFactors(q=q, r=r)


def tri_solve(r: np.ndarray, rhs: np.ndarray, transposed: bool = False) -> np.ndarray:
    """Solve R z = rhs (or R^T z = rhs) for upper-triangular R.

    ``rhs`` may be a vector or a matrix of stacked right-hand sides.
    """
    r = np.asarray(r, dtype=np.float64)
    if np.any(np.diag(r) == 0.0):
        raise SingularFactorError("zero pivot in triangular factor")
    if r.shape[0] != np.shape(rhs)[0]:
        raise DimensionMismatchError(
            f"factor is {r.shape}, rhs has leading dim {np.shape(rhs)[0]}"
        )
    return scipy.linalg.solve_triangular(
        r, rhs, trans="T" if transposed else "N", lower=False, check_finite=False
    )


def next_pow2(n: int) -> int:
    """Smallest power of two >= n."""
    return 1 << max(n - 1, 0).bit_length()


def fwht_inplace(v: np.ndarray) -> np.ndarray:
    """In-place orthonormal Walsh-Hadamard transform along axis 0.

    Applies H = H_n / sqrt(n) (H_n the +-1 Hadamard matrix in Sylvester
    order) via the O(n log n) butterfly; no n x n matrix is formed. The
    transform is an isometry and an involution. 2-D inputs are
    transformed column by column.

    Raises NotPowerOfTwoError unless len(v) is a power of two.
    """
    n = v.shape[0]
    if n == 0 or n & (n - 1):
        raise NotPowerOfTwoError(f"length {n} is not a power of two")
    if v.dtype != np.float64 or not v.flags.c_contiguous:
        raise ValueError("fwht_inplace needs a C-contiguous float64 array")
    cols = v.shape[1:]
    h = 1
    while h < n:
        blocks = v.reshape(n // (2 * h), 2, h, *cols)
        top = blocks[:, 0] + blocks[:, 1]
        bottom = blocks[:, 0] - blocks[:, 1]
        blocks[:, 0] = top
        blocks[:, 1] = bottom
        h *= 2
    v *= 1.0 / np.sqrt(n)
    return v


def fwht(v: np.ndarray) -> np.ndarray:
    """Copying wrapper around :func:`fwht_inplace`."""
    return fwht_inplace(np.array(v, dtype=np.float64, order="C"))


def condition_number(m: np.ndarray) -> float:
    """sigma_max / sigma_min via full SVD.

    Diagnostic only; never called inside solver iterations. Raises
    RankDeficientError when sigma_min < 1e-14 * sigma_max.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise DimensionMismatchError(
            f"condition_number needs a tall matrix, got shape {m.shape}"
        )
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] < 1e-14 * sv[0]:
        raise RankDeficientError(
            f"sigma_min = {sv[-1]:.3e} vs sigma_max = {sv[0]:.3e}"
        )
    return float(sv[0] / sv[-1])
