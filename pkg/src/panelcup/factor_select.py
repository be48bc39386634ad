"""Choosing the number of common trends with an information criterion.

For each candidate ``r`` the model is fitted by :func:`~panelcup.cup` and
scored by

    IC(r) = log sigma2(r) + r g(n, T),   g = log(a) / a,   a = nT / (n + T),

with ``sigma2(r)`` the mean squared residual of the fit. The criterion
counts all factors, stationary ones included.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from .errors import RankRequestTooLarge
from .estimators import CupConfig, _prepare, cup, factor_extract
from .panel import PanelDataset

__all__ = ["IcResult", "select_r", "penalty_log_a"]


@dataclass(frozen=True, eq=False)
class IcResult:
    """Outcome of :func:`select_r`.

    ``ic_values[j]`` and ``sigma2_values[j]`` belong to ``r = j + 1``.
    """

    r_hat: int
    ic_values: np.ndarray
    sigma2_values: np.ndarray
    penalty: float
    betas: np.ndarray

    def to_dict(self) -> dict:
        return {
            "r_hat": self.r_hat,
            "ic_values": [float(v) for v in self.ic_values],
            "sigma2_values": [float(v) for v in self.sigma2_values],
            "penalty": self.penalty,
        }


def penalty_log_a(n: int, T: int) -> float:
    """``g = log(a) / a`` with ``a = nT / (n + T)``."""
    a = n * T / (n + T)
    return math.log(a) / a


_PENALTIES: dict[str, Callable[[int, int], float]] = {"log_a": penalty_log_a}


def _resid_var(Y, X, beta, r):
    W = Y - X @ beta
    fac = factor_extract(W.T, r)
    U = W - fac.Lambda_hat @ fac.F_hat.T
    return float(np.sum(U * U)) / U.size


def select_r(
    panel: PanelDataset,
    beta_hint=None,
    r_max: int = 4,
    penalty: str | Callable[[int, int], float] = "log_a",
    *,
    config: CupConfig | None = None,
    fast: bool = False,
) -> IcResult:
    """Estimate the number of common trends.

    Parameters
    ----------
    panel : PanelDataset
    beta_hint : array_like, optional
        Starting slope for the Cup fits (default: ``config.init``).
    r_max : int
        Largest candidate; must satisfy ``1 <= r_max <= min(n, T) - 1``.
    penalty : {"log_a"} or callable
        Per-factor penalty ``g(n, T)``.
    config : CupConfig, optional
        Iteration, detrending and kernel settings; its ``r`` is ignored.
    fast : bool
        Fit Cup once at ``r_max`` and reuse that slope for every candidate
        instead of refitting at each ``r``.

    Returns
    -------
    IcResult
        ``r_hat`` minimises ``IC``; ties go to the smallest ``r``.

    Notes
    -----
    ``sigma2(r)`` is evaluated at the best of the slopes fitted for
    ``r' <= r``, which makes it nonincreasing in ``r`` by construction.
    """
    config = config or CupConfig()
    n, T = panel.n, panel.T
    bound = min(n, T) - 1
    if not 1 <= int(r_max) <= bound:
        raise RankRequestTooLarge(f"r_max={r_max} must lie in [1, {bound}] = [1, min(n, T) - 1]")
    r_max = int(r_max)
    if isinstance(penalty, str) and penalty not in _PENALTIES:
        raise ValueError(f"unknown penalty {penalty!r}")
    g_fn = _PENALTIES[penalty] if isinstance(penalty, str) else penalty
    g = float(g_fn(n, T))

    Y, X = _prepare(panel, config)
    if fast:
        fit = cup(panel, replace(config, r=r_max), beta_init=beta_hint, inference=False)
        betas = np.repeat(fit.beta_hat[None], r_max, axis=0)
    else:
        betas = np.stack(
            [cup(panel, replace(config, r=r), beta_init=beta_hint, inference=False).beta_hat for r in range(1, r_max + 1)]
        )

    sigma2 = np.empty(r_max)
    for j in range(r_max):
        sigma2[j] = min(_resid_var(Y, X, betas[i], j + 1) for i in range(j + 1))
    with np.errstate(divide="ignore"):
        ic = np.log(sigma2) + g * np.arange(1, r_max + 1)
    r_hat = int(np.argmin(ic)) + 1  # argmin keeps the first minimiser
    return IcResult(r_hat, ic, sigma2, g, betas)
