"""Kernel long-run covariance estimation and fully-modified corrections.

The innovation vector of unit ``i`` is stacked as ``w_it = (u_it, e_it', h_t')'``
with ``u`` the scalar regression error, ``e`` the ``k`` regressor
innovations and ``h`` the ``r`` factor innovations. Every matrix here is
partitioned over those three blocks; ``b`` denotes ``(e, h)`` taken
together.

Most functions come in two flavours: a single-unit form operating on an
``(S, m)`` array, and a ``*_batch`` form over a leading unit axis that the
estimators use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionMismatch, EmptyKernelSupport, LagOutOfRange, SingularOmegaB

__all__ = [
    "KernelSpec",
    "BlockLayout",
    "LongRunCov",
    "PlusTransform",
    "autocov",
    "lr_cov",
    "lr_cov_batch",
    "build_wbar",
    "build_wbar_batch",
    "plus_transform",
    "plus_transform_batch",
]

KERNELS = ("bartlett", "parzen", "quadratic_spectral")
_KERNEL_ALIASES = {"qs": "quadratic_spectral", "quadratic-spectral": "quadratic_spectral"}
SINGULAR_RTOL = 1e-10


def _bartlett(x):
    a = np.abs(x)
    return np.where(a <= 1.0, 1.0 - a, 0.0)


def _parzen(x):
    a = np.abs(x)
    inner = 1.0 - 6.0 * a**2 + 6.0 * a**3
    outer = 2.0 * (1.0 - a) ** 3
    return np.where(a <= 0.5, inner, np.where(a <= 1.0, outer, 0.0))


def _quadratic_spectral(x):
    x = np.asarray(x, dtype=float)
    z = 6.0 * np.pi * x / 5.0
    out = np.ones_like(z)
    small = np.abs(z) < 1e-4
    out[small] = 1.0 - z[small] ** 2 / 10.0  # Taylor expansion near 0
    zz = z[~small]
    out[~small] = 3.0 / zz**2 * (np.sin(zz) / zz - np.cos(zz))
    return out


_WEIGHT_FUNCS = {
    "bartlett": _bartlett,
    "parzen": _parzen,
    "quadratic_spectral": _quadratic_spectral,
}


@dataclass(frozen=True)
class KernelSpec:
    """Lag window ``omega(j / K)`` and its bandwidth ``K``.

    The default (Bartlett, ``K = 5``) is the fixed truncation used in the
    simulation study. :meth:`power_rule` gives ``K = floor(n ** b)`` for
    runs that follow the joint-asymptotics bandwidth condition.
    """

    kind: Literal["bartlett", "parzen", "quadratic_spectral"] = "bartlett"
    bandwidth: float = 5.0

    def __post_init__(self):
        kind = _KERNEL_ALIASES.get(self.kind, self.kind)
        if kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {KERNELS}")
        object.__setattr__(self, "kind", kind)
        bw = float(self.bandwidth)
        if not (math.isfinite(bw) and bw > 0.0):
            raise EmptyKernelSupport(f"bandwidth must be positive, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", bw)

    @classmethod
    def power_rule(cls, kind: str, n: int, exponent: float) -> KernelSpec:
        return cls(kind, float(max(1, math.floor(n**exponent))))

    def weight(self, x):
        return _WEIGHT_FUNCS[self.kind](np.asarray(x, dtype=float))

    def lag_weights(self, S: int) -> tuple[np.ndarray, np.ndarray]:
        """Lags ``0..S-1`` with nonzero weight and their weights."""
        lags = np.arange(S)
        w = self.weight(lags / self.bandwidth)
        keep = w != 0.0
        if not keep[0]:
            raise EmptyKernelSupport("kernel assigns zero weight to lag 0")
        return lags[keep], w[keep]


@dataclass(frozen=True)
class BlockLayout:
    """Index ranges of the (u, e, h) blocks in a ``1 + k + r`` vector."""

    k: int
    r: int

    @property
    def m(self) -> int:
        return 1 + self.k + self.r

    @property
    def u(self) -> int:
        return 0

    @property
    def eps(self) -> slice:
        return slice(1, 1 + self.k)

    @property
    def eta(self) -> slice:
        return slice(1 + self.k, self.m)

    @property
    def b(self) -> slice:
        return slice(1, self.m)


@dataclass(frozen=True, eq=False)
class LongRunCov:
    """Two-sided (``omega``) and one-sided (``delta``) long-run covariances.

    ``delta = sum_{j>=0} omega(j/K) Gamma(j)`` with
    ``Gamma(j) = (1/S) sum_t w_{t+j} w_t'``, so its ``(e, u)`` block pairs
    regressor innovations with *earlier* errors.
    Arrays may carry a leading unit axis when produced by
    :func:`lr_cov_batch`.
    """

    omega: np.ndarray
    delta: np.ndarray
    gamma0: np.ndarray
    layout: BlockLayout

    def block(self, which: str, row: str, col: str) -> np.ndarray:
        mat = {"omega": self.omega, "delta": self.delta}[which]
        lay = self.layout
        idx = {"u": slice(0, 1), "eps": lay.eps, "eta": lay.eta, "b": lay.b}
        return mat[..., idx[row], idx[col]]


@dataclass(frozen=True, eq=False)
class PlusTransform:
    """Endogeneity and serial-correlation corrections of one unit.

    Attributes
    ----------
    delta_eps_u_plus : ndarray (k,)
        ``Delta_eu - Delta_eb Omega_b^{-1} Omega_bu``.
    delta_eta_u_plus : ndarray (r,)
        Same for the factor-innovation rows.
    endo_coeff : ndarray (k + r,)
        ``Omega_ub Omega_b^{-1}``, the coefficient used to build ``y+``.
    omega_u_dot_b : float
        Long-run variance of ``u`` conditional on ``b``.
    """

    delta_eps_u_plus: np.ndarray
    delta_eta_u_plus: np.ndarray
    endo_coeff: np.ndarray
    omega_u_dot_b: float | np.ndarray


def autocov(w, j: int) -> np.ndarray:
    """Sample autocovariance ``(1/S) sum_t w_{t+j} w_t'`` (divisor ``S``, not ``S - j``)."""
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    S = w.shape[0]
    if not 0 <= j < S:
        raise LagOutOfRange(f"lag {j} outside [0, {S})")
    return w[j:].T @ w[: S - j] / S


def lr_cov_batch(w, kernel: KernelSpec, k: int | None = None, r: int | None = None) -> LongRunCov:
    """Long-run covariances for a stack of series ``w`` of shape ``(n, S, m)``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 3:
        raise DimensionMismatch(f"expected (n, S, m), got {w.shape}")
    _, S, m = w.shape
    if S < 2:
        raise DimensionMismatch("need at least two observations for a long-run covariance")
    layout = _layout(m, k, r)
    lags, weights = kernel.lag_weights(S)
    gamma0 = np.einsum("nsa,nsb->nab", w, w) / S
    omega = weights[0] * gamma0
    delta = weights[0] * gamma0
    for j, wt in zip(lags[1:], weights[1:]):
        # g[a, b] = (1/S) sum_t w_{t+j,a} w_{t,b} = Gamma(j)
        g = np.einsum("nsa,nsb->nab", w[:, j:], w[:, : S - j]) / S
        delta = delta + wt * g
        omega = omega + wt * (g + np.swapaxes(g, 1, 2))
    return LongRunCov(omega, delta, gamma0, layout)


def lr_cov(w, kernel: KernelSpec | None = None, k: int | None = None, r: int | None = None) -> LongRunCov:
    """Kernel long-run covariance of one series ``w`` (shape ``(S, m)``).

    ``omega = sum_{|j|<S} omega(j/K) Gamma(j)`` and ``delta`` is the
    one-sided sum over ``j >= 0``; ``k`` and ``r`` fix the block layout
    (default: ``m - 1`` regressors, no factors).
    """
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    res = lr_cov_batch(w[None], kernel or KernelSpec(), k, r)
    return LongRunCov(res.omega[0], res.delta[0], res.gamma0[0], res.layout)


def _layout(m, k, r):
    if k is None and r is None:
        k, r = max(m - 1, 0), 0
    elif k is None:
        k = m - 1 - r
    elif r is None:
        r = m - 1 - k
    if k < 0 or r < 0 or 1 + k + r != m:
        raise DimensionMismatch(f"layout 1 + {k} + {r} does not match width {m}")
    return BlockLayout(k, r)


def build_wbar_batch(u_hat, dx, dF, a) -> np.ndarray:
    """Stack ``(u_it, dxbar_it', dF_t')`` for every unit over periods ``2..T``.

    Parameters
    ----------
    u_hat : ndarray (n, T)
        Full residuals; the first period is dropped.
    dx : ndarray (n, T-1, k)
        Regressor differences.
    dF : ndarray (T-1, r)
        Differenced factor estimate.
    a : ndarray (n, n)
        Loading weights ``a_ik``.

    Returns
    -------
    ndarray (n, T-1, 1+k+r)
    """
    u_hat = np.asarray(u_hat, dtype=float)
    dx = np.asarray(dx, dtype=float)
    dF = np.asarray(dF, dtype=float)
    a = np.asarray(a, dtype=float)
    n, S, k = dx.shape
    if u_hat.shape != (n, S + 1) or dF.shape[0] != S or a.shape != (n, n):
        raise DimensionMismatch(
            f"misaligned inputs: u {u_hat.shape}, dx {dx.shape}, dF {dF.shape}, a {a.shape}"
        )
    dxbar = dx - np.einsum("ik,ktj->itj", a, dx) / n
    return np.concatenate(
        [u_hat[:, 1:, None], dxbar, np.broadcast_to(dF, (n, S, dF.shape[1]))], axis=2
    )


def build_wbar(u_hat, dx, dx_all, dF, a_row) -> np.ndarray:
    """Single-unit version of :func:`build_wbar_batch`.

    ``dx_all`` holds the differenced regressors of all ``n`` units and
    ``a_row`` the weights ``a_ik`` of this unit against each of them.
    """
    u_hat = np.asarray(u_hat, dtype=float)
    dx = np.asarray(dx, dtype=float)
    dx_all = np.asarray(dx_all, dtype=float)
    dF = np.asarray(dF, dtype=float)
    a_row = np.asarray(a_row, dtype=float)
    if dx.ndim == 1:
        dx = dx[:, None]
    if dx_all.ndim == 2:
        dx_all = dx_all[:, :, None]
    if dF.ndim == 1:
        dF = dF[:, None]
    n = dx_all.shape[0]
    S = dx.shape[0]
    if u_hat.shape != (S + 1,) or dx_all.shape[1:] != dx.shape or dF.shape[0] != S or a_row.shape != (n,):
        raise DimensionMismatch("inputs are not aligned on periods 2..T")
    dxbar = dx - np.einsum("k,ktj->tj", a_row, dx_all) / n
    return np.column_stack([u_hat[1:], dxbar, dF])


def plus_transform_batch(lrc: LongRunCov) -> PlusTransform:
    """Vectorised :func:`plus_transform` over a leading unit axis."""
    omega = np.asarray(lrc.omega)
    delta = np.asarray(lrc.delta)
    lay = lrc.layout
    om_b = omega[:, 1:, 1:]
    om_bu = omega[:, 1:, 0]
    scale = np.trace(om_b, axis1=1, axis2=2)
    eig_min = np.linalg.eigvalsh(om_b)[:, 0]
    bad = np.flatnonzero(~(eig_min > SINGULAR_RTOL * np.abs(scale)))
    if bad.size:
        raise SingularOmegaB(
            "long-run covariance of regressor/factor innovations is singular "
            "(regressors or factors look cointegrated)",
            unit=int(bad[0]),
        )
    coeff = np.linalg.solve(om_b, om_bu[:, :, None])[:, :, 0]
    d_plus = delta[:, 1:, 0] - np.einsum("nab,nb->na", delta[:, 1:, 1:], coeff)
    om_udb = omega[:, 0, 0] - np.einsum("na,na->n", om_bu, coeff)
    k = lay.k
    return PlusTransform(d_plus[:, :k], d_plus[:, k:], coeff, om_udb)


def plus_transform(lrc: LongRunCov) -> PlusTransform:
    """Fully-modified correction terms for one unit's long-run covariance."""
    res = plus_transform_batch(LongRunCov(lrc.omega[None], lrc.delta[None], lrc.gamma0[None], lrc.layout))
    return PlusTransform(
        res.delta_eps_u_plus[0],
        res.delta_eta_u_plus[0],
        res.endo_coeff[0],
        float(res.omega_u_dot_b[0]),
    )
