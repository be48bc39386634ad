"""Plug-in asymptotic variance, t statistics and Wald tests.

All slope estimators here converge at rate ``sqrt(n) T``; variances are
reported on that scale, so ``se_j = sqrt(sigma_hat[j, j] / (n T^2))``.
For the factor estimators ``T`` is the effective length of the
differenced sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularDZ, SingularRestriction, ZeroStandardError
from .linalg import COND_LIMIT

__all__ = ["VarianceEstimate", "variance_est", "conventional_variance", "t_stat", "wald"]


@dataclass(frozen=True, eq=False)
class VarianceEstimate:
    sigma_hat: np.ndarray
    d_z: np.ndarray
    middle: np.ndarray
    n: int
    t_scale: float

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.sigma_hat), 0.0, None) / (self.n * self.t_scale**2))


def _inv_checked(d):
    if not np.all(np.isfinite(d)) or np.linalg.cond(d) > COND_LIMIT:
        raise SingularDZ("D_Z is singular or ill-conditioned")
    return np.linalg.inv(d)


def _sandwich(d_z, middle, n, t_scale):
    d_inv = _inv_checked(d_z)
    sigma = d_inv @ middle @ d_inv
    sigma = 0.5 * (sigma + sigma.T)
    return VarianceEstimate(sigma, d_z, middle, n, t_scale)


def variance_est(components, omega_u_dot_b=None) -> VarianceEstimate:
    """Sandwich ``D_Z^{-1} [ (1/n) sum_i Omega_u.b,i Z_i'Z_i / T^2 ] D_Z^{-1}``.

    Parameters
    ----------
    components : BiasComponents
        Supplies ``Z`` (n, T, k), the scale ``t_eff`` and ``n``.
    omega_u_dot_b : array_like (n,), optional
        Conditional long-run variances of the errors; defaults to the ones
        stored in ``components``.
    """
    Z = np.asarray(components.Z)
    n = Z.shape[0]
    t_scale = float(components.t_eff)
    if omega_u_dot_b is None:
        omega_u_dot_b = components.plus.omega_u_dot_b
    om = np.broadcast_to(np.asarray(omega_u_dot_b, dtype=float), (n,))
    zz = np.einsum("ntk,ntl->nkl", Z, Z) / t_scale**2
    d_z = zz.sum(axis=0) / n
    middle = np.sum(om[:, None, None] * zz, axis=0) / n
    return _sandwich(d_z, middle, n, t_scale)


def conventional_variance(Xt, resid, dof: int) -> VarianceEstimate:
    """Textbook OLS variance ``s^2 (X'X)^{-1}`` expressed on the sandwich scale.

    ``Xt`` is the (n, T, k) design actually regressed and ``dof`` the
    residual degrees of freedom.
    """
    n, T, _ = Xt.shape
    s2 = float(np.sum(resid**2)) / dof
    d_z = np.einsum("ntk,ntl->kl", Xt, Xt) / (n * T**2)
    return _sandwich(d_z, s2 * d_z, n, float(T))


def t_stat(beta_hat, beta_null, se) -> np.ndarray:
    beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    se = np.atleast_1d(np.asarray(se, dtype=float))
    if np.any(~(se > 0)):
        raise ZeroStandardError("standard errors must be strictly positive")
    return (beta_hat - np.asarray(beta_null, dtype=float)) / se


def wald(beta_hat, R, r0, sigma_hat, n: int, T: float) -> float:
    """Wald statistic for ``R beta = r0``; chi-squared with ``q = rows(R)`` df."""
    beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    diff = R @ beta_hat - np.atleast_1d(np.asarray(r0, dtype=float))
    V = R @ np.asarray(sigma_hat, dtype=float) @ R.T
    if np.linalg.matrix_rank(R) < R.shape[0] or np.linalg.cond(V) > COND_LIMIT:
        raise SingularRestriction("restriction matrix must have full row rank")
    return float(n * T**2 * diff @ np.linalg.solve(V, diff))
