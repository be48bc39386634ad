"""Dense linear-algebra helpers with fixed sign conventions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    NoConvergence,
    NotPositiveDefinite,
    NotSymmetric,
    RankDeficientBasis,
    RankRequestTooLarge,
)

__all__ = ["EigenPairs", "sym_eig_top_r", "projection_residual", "solve_spd", "COND_LIMIT"]

COND_LIMIT = 1e12
_SYM_RTOL = 1e-8
_TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so that the largest-magnitude entry is positive.

    Entries within a relative 1e-12 of the column maximum count as ties; the
    lowest index among them decides.
    """
    out = vectors.copy()
    mag = np.abs(out)
    for j in range(out.shape[1]):
        col = mag[:, j]
        top = col.max()
        idx = int(np.flatnonzero(col >= top * (1.0 - _TIE_RTOL))[0])
        if out[idx, j] < 0:
            out[:, j] = -out[:, j]
    return out


def sym_eig_top_r(S, r: int) -> EigenPairs:
    """Largest ``r`` eigenpairs of a symmetric matrix, in descending order.

    Uses LAPACK's symmetric driver (tridiagonal reduction followed by an
    implicit QL/QR sweep) on the full matrix, then keeps the top ``r``.
    Eigenvectors are sign-normalised so repeated calls are bitwise equal.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {S.shape}")
    T = S.shape[0]
    if not 1 <= r <= T:
        raise RankRequestTooLarge(f"requested r={r} eigenpairs from a {T}x{T} matrix")
    scale = np.linalg.norm(S)
    if np.linalg.norm(S - S.T) > _SYM_RTOL * max(scale, np.finfo(float).tiny):
        raise NotSymmetric("matrix is not symmetric within 1e-8 relative")
    try:
        vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    order = np.arange(T - 1, T - 1 - r, -1)
    return EigenPairs(vals[order].copy(), _fix_signs(vecs[:, order]))


def projection_residual(F, z) -> np.ndarray:
    """Return ``M_F z = z - F (F'F)^{-1} F' z``.

    Raises
    ------
    RankDeficientBasis
        If the Gram matrix ``F'F`` has condition number above 1e12.
    """
    F = np.asarray(F, dtype=float)
    z = np.asarray(z, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    vec = z.ndim == 1
    if vec:
        z = z[:, None]
    if F.shape[0] != z.shape[0]:
        raise RankDeficientBasis(f"F has {F.shape[0]} rows but z has {z.shape[0]}")
    Q, R = np.linalg.qr(F)
    # singular values of R equal those of F
    d = np.linalg.svd(R, compute_uv=False)
    if d.size == 0 or d.min() == 0.0 or (d.max() / d.min()) ** 2 > COND_LIMIT:
        raise RankDeficientBasis("basis is rank deficient (Gram condition number above 1e12)")
    resid = z - Q @ (Q.T @ z)
    return resid[:, 0] if vec else resid


def solve_spd(A, B) -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive-definite ``A`` via Cholesky."""
    A = np.asarray(A, dtype=float)
    try:
        c = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return scipy.linalg.cho_solve(c, np.asarray(B, dtype=float))
