"""Slope estimators for panels with unobserved I(1) common trends.

The model is ``y_it = x_it' beta + lambda_i' F_t + u_it`` with ``x`` and
``F`` integrated of order one. Besides the naive pooled OLS and within
(LSDV) estimators this module provides

* :func:`ls_given_f` / :func:`ls_fm_known_f` -- least squares and its
  fully-modified version when the trends are observed;
* :func:`cup` -- the continuously-updated estimator, alternating a
  projected least-squares step for ``beta`` with a principal-components
  step for ``F``;
* :func:`cup_bc` -- ``cup`` followed by a one-shot bias subtraction;
* :func:`cup_fm` / :func:`two_step_fm` -- fully-modified data corrections
  applied inside every iteration (or only once).

Periods are counted 1..T. Sums that pair levels with first differences
run over periods 2..T and use ``T - 1`` as the time scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .errors import (
    NotPositiveDefinite,
    NumericalError,
    RankRequestTooLarge,
    SingularDesign,
    SingularLoadingGram,
    SingularOmegaB,
)
from .inference import VarianceEstimate, conventional_variance, t_stat, variance_est
from .linalg import COND_LIMIT, projection_residual, solve_spd, sym_eig_top_r
from .lrcov import (
    KernelSpec,
    LongRunCov,
    PlusTransform,
    build_wbar_batch,
    lr_cov_batch,
    plus_transform_batch,
)
from .panel import DetrendSpec, PanelDataset, project_deterministics

__all__ = [
    "FactorEstimate",
    "CupConfig",
    "EstimationResult",
    "BiasComponents",
    "pooled_ols",
    "lsdv",
    "ls_given_f",
    "factor_extract",
    "objective",
    "cup",
    "bias_components",
    "cup_bc",
    "cup_fm",
    "two_step_fm",
    "ls_bc_known_f",
    "ls_fm_known_f",
]


@dataclass(frozen=True, eq=False)
class FactorEstimate:
    """Trends ``F_hat`` (T, r) with ``F'F / T^2 = I`` and loadings (n, r)."""

    F_hat: np.ndarray
    Lambda_hat: np.ndarray
    eigenvalues: np.ndarray

    @property
    def common_component(self) -> np.ndarray:
        """``F_hat Lambda_hat'`` as a (T, n) array."""
        return self.F_hat @ self.Lambda_hat.T


@dataclass(frozen=True)
class CupConfig:
    r: int = 1
    max_iter: int = 20
    tol: float = 1e-8
    init: Literal["pooled_ols", "lsdv", "zero"] = "lsdv"
    kernel: KernelSpec = field(default_factory=KernelSpec)
    detrend: DetrendSpec = field(default_factory=DetrendSpec)

    def __post_init__(self):
        if int(self.r) < 1:
            raise ValueError("r must be at least 1")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.init not in ("pooled_ols", "lsdv", "zero"):
            raise ValueError(f"unknown init {self.init!r}")
        object.__setattr__(self, "detrend", DetrendSpec.coerce(self.detrend))


@dataclass(frozen=True, eq=False)
class BiasComponents:
    """Ingredients of the bias correction and of the plug-in variance.

    Arrays carry a leading unit axis. ``t_eff`` is the time scale (``T - 1``)
    used in the ``1/T`` and ``T^2`` normalisations.
    """

    theta: np.ndarray  # (n, k)
    Z: np.ndarray  # (n, T, k)
    a: np.ndarray  # (n, n)
    xbar: np.ndarray  # (n, T, k)
    delta_bar: np.ndarray  # (n, r, k)
    D_Z: np.ndarray  # (k, k)
    phi: np.ndarray  # (k,)
    plus: PlusTransform
    lrc: LongRunCov
    u_hat: np.ndarray  # (n, T)
    wbar: np.ndarray  # (n, T-1, 1+k+r)
    t_eff: int

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def fm_shift(self) -> np.ndarray:
        """Per-unit ``Delta+_eu - delta_bar' Delta+_hu`` (n, k)."""
        return self.plus.delta_eps_u_plus - np.einsum(
            "nrk,nr->nk", self.delta_bar, self.plus.delta_eta_u_plus
        )


@dataclass(eq=False)
class EstimationResult:
    beta_hat: np.ndarray
    estimator: str
    factors: FactorEstimate | None = None
    phi_hat: np.ndarray | None = None
    se: np.ndarray | None = None
    t_stats: np.ndarray | None = None
    iterations: int = 0
    converged: bool = True
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    variance: VarianceEstimate | None = field(default=None, repr=False)
    components: BiasComponents | None = field(default=None, repr=False)
    detrend: DetrendSpec = field(default_factory=DetrendSpec)
    kernel: KernelSpec | None = None

    @property
    def r(self) -> int | None:
        return None if self.factors is None else self.factors.F_hat.shape[1]

    def t_against(self, beta_null) -> np.ndarray:
        if self.se is None:
            raise ValueError(f"{self.estimator} result carries no standard errors")
        return t_stat(self.beta_hat, beta_null, self.se)


# -- small helpers -------------------------------------------------------------


def _arrays(panel: PanelDataset):
    return np.asarray(panel.y), np.asarray(panel.x)


def _solve_normal(A, b, what="design"):
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > COND_LIMIT:
        raise SingularDesign(f"{what} Gram matrix is singular or ill-conditioned")
    try:
        return solve_spd(A, b)
    except NotPositiveDefinite as exc:
        raise SingularDesign(f"{what} Gram matrix is not positive definite") from exc


def _annihilate(F, Z):
    """Apply ``M_F`` to every unit of ``Z`` (n, T) or (n, T, k)."""
    Z = np.asarray(Z)
    n, T = Z.shape[:2]
    flat = np.moveaxis(Z, 1, 0).reshape(T, -1)
    out = projection_residual(F, flat).reshape((T, n) + Z.shape[2:])
    return np.moveaxis(out, 0, 1)


def _with_t(result: EstimationResult) -> EstimationResult:
    if result.se is not None and np.all(result.se > 0):
        result.t_stats = t_stat(result.beta_hat, 0.0, result.se)
    return result


# -- naive estimators ------------------------------------------------------------


def pooled_ols(panel: PanelDataset) -> EstimationResult:
    """Pooled least squares ignoring the factor structure."""
    Y, X = _arrays(panel)
    n, T, k = X.shape
    A = np.einsum("ntk,ntl->kl", X, X)
    b = np.einsum("ntk,nt->k", X, Y)
    beta = _solve_normal(A, b)
    res = EstimationResult(beta, "PooledOLS")
    if n * T > k:
        var = conventional_variance(X, Y - X @ beta, n * T - k)
        res.variance, res.se = var, var.se
    return _with_t(res)


def lsdv(panel: PanelDataset) -> EstimationResult:
    """Within-group (least squares dummy variables) estimator."""
    Y, X = _arrays(panel)
    n, T, k = X.shape
    Yd = Y - Y.mean(axis=1, keepdims=True)
    Xd = X - X.mean(axis=1, keepdims=True)
    A = np.einsum("ntk,ntl->kl", Xd, Xd)
    b = np.einsum("ntk,nt->k", Xd, Yd)
    beta = _solve_normal(A, b, "within")
    res = EstimationResult(beta, "LSDV")
    dof = n * T - n - k
    if dof > 0:
        var = conventional_variance(Xd, Yd - Xd @ beta, dof)
        res.variance, res.se = var, var.se
    return _with_t(res)


def _ls_step(Y, X, F):
    MX = _annihilate(F, X)
    A = np.einsum("ntk,ntl->kl", MX, MX)
    b = np.einsum("ntk,nt->k", MX, Y)
    return _solve_normal(A, b, "projected")


def ls_given_f(panel: PanelDataset, F) -> EstimationResult:
    """Least squares with observed trends ``F`` concentrated out."""
    Y, X = _arrays(panel)
    F = np.asarray(F, dtype=float).reshape(panel.T, -1)
    return EstimationResult(_ls_step(Y, X, F), "LSKnownF")


# -- factor step -----------------------------------------------------------------


def factor_extract(W, r: int) -> FactorEstimate:
    """Principal components of the (T, n) matrix ``W`` under ``F'F / T^2 = I``.

    ``F_hat`` is ``T`` times the top-``r`` eigenvectors of ``W W' / (n T^2)``,
    the loadings are ``W' F_hat / T^2`` and ``eigenvalues`` the matching
    top-``r`` eigenvalues.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    T, n = W.shape
    if not 1 <= r <= min(n, T):
        raise RankRequestTooLarge(f"r={r} exceeds min(n, T)={min(n, T)}")
    S = W @ W.T / (n * T**2)
    eig = sym_eig_top_r(S, r)
    F = T * eig.vectors
    Lam = W.T @ F / T**2
    return FactorEstimate(F, Lam, eig.values)


def objective(Y, X, beta, F) -> float:
    """``S_nT(beta, F) = (1/(n T^2)) sum_i (y_i - x_i b)' M_F (y_i - x_i b)``."""
    W = np.asarray(Y) - np.asarray(X) @ np.atleast_1d(beta)
    n, T = W.shape
    MW = projection_residual(F, W.T)
    return float(np.sum(MW * MW)) / (n * T**2)


def _initial_beta(Y, X, init):
    if isinstance(init, str):
        panel = PanelDataset(Y, X)
        if init == "lsdv":
            return lsdv(panel).beta_hat
        if init == "pooled_ols":
            return pooled_ols(panel).beta_hat
        if init == "zero":
            return np.zeros(X.shape[2])
        raise ValueError(f"unknown init {init!r}")
    beta = np.atleast_1d(np.asarray(init, dtype=float))
    if beta.shape != (X.shape[2],):
        raise ValueError(f"initial beta has shape {beta.shape}, expected ({X.shape[2]},)")
    return beta


def _rel_change(new, old):
    return float(np.linalg.norm(new - old) / max(1.0, np.linalg.norm(old)))


def _prepare(panel: PanelDataset, config: CupConfig):
    panel = project_deterministics(panel, config.detrend)
    panel.require_estimable()
    if config.r > min(panel.n, panel.T):
        raise RankRequestTooLarge(f"r={config.r} exceeds min(n, T)={min(panel.n, panel.T)}")
    return _arrays(panel)


# -- bias ingredients ---------------------------------------------------------------


def _loading_weights(Lam):
    n = Lam.shape[0]
    G = Lam.T @ Lam / n
    if not np.all(np.isfinite(G)) or np.linalg.cond(G) > COND_LIMIT:
        raise SingularLoadingGram("Lambda'Lambda/n is singular; loading weights undefined")
    return Lam @ np.linalg.solve(G, Lam.T)


def _components(Y, X, beta, F, Lam, kernel: KernelSpec, barred: bool = True) -> BiasComponents:
    n, T, k = X.shape
    r = F.shape[1]
    t_eff = T - 1
    W = Y - X @ beta
    u_hat = W - Lam @ F.T
    a = _loading_weights(Lam) if barred else np.zeros((n, n))
    xbar = X - np.einsum("ik,ktj->itj", a, X) / n
    Z = _annihilate(F, xbar)
    FtF = F.T @ F
    delta_bar = np.linalg.solve(FtF, np.einsum("tr,ntk->rnk", F, xbar).reshape(r, -1))
    delta_bar = np.moveaxis(delta_bar.reshape(r, n, k), 1, 0)
    wbar = build_wbar_batch(u_hat, np.diff(X, axis=1), np.diff(F, axis=0), a)
    lrc = lr_cov_batch(wbar, kernel, k, r)
    plus = plus_transform_batch(lrc)
    db = wbar[:, :, 1:]
    theta = np.einsum("ntk,ntm,nm->nk", Z[:, 1:], db, plus.endo_coeff) / t_eff
    theta = theta + plus.delta_eps_u_plus - np.einsum("nrk,nr->nk", delta_bar, plus.delta_eta_u_plus)
    D_Z = np.einsum("ntk,ntl->kl", Z, Z) / (n * t_eff**2)
    phi = _solve_normal(D_Z, theta.sum(axis=0) / n, "D_Z")
    return BiasComponents(theta, Z, a, xbar, delta_bar, D_Z, phi, plus, lrc, u_hat, wbar, t_eff)


def bias_components(panel: PanelDataset, result: EstimationResult, kernel: KernelSpec | None = None) -> BiasComponents:
    """Bias terms of a Cup fit, evaluated at its ``(beta, F_hat, Lambda_hat)``.

    The panel is passed through the same deterministic projection that the
    fit used.
    """
    if result.factors is None:
        raise ValueError("result carries no factor estimate")
    panel = project_deterministics(panel, result.detrend)
    Y, X = _arrays(panel)
    kernel = kernel or result.kernel or KernelSpec()
    f = result.factors
    return _components(Y, X, result.beta_hat, f.F_hat, f.Lambda_hat, kernel)


def _attach_inference(res: EstimationResult, comps: BiasComponents) -> EstimationResult:
    res.components = comps
    try:
        var = variance_est(comps)
    except NumericalError as exc:
        warnings.warn(f"{res.estimator}: standard errors unavailable ({exc})", RuntimeWarning, stacklevel=3)
        return res
    res.variance, res.se = var, var.se
    return _with_t(res)


# -- continuously-updated estimators -------------------------------------------------


def _cup_iterate(Y, X, config: CupConfig, beta_init=None):
    n, T, _ = X.shape
    beta = _initial_beta(Y, X, config.init if beta_init is None else beta_init)
    fac = factor_extract((Y - X @ beta).T, config.r)
    trace = [objective(Y, X, beta, fac.F_hat)]
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        new = _ls_step(Y, X, fac.F_hat)
        fac = factor_extract((Y - X @ new).T, config.r)
        trace.append(objective(Y, X, new, fac.F_hat))
        change = _rel_change(new, beta)
        beta = new
        if change <= config.tol:
            converged = True
            break
    return beta, fac, it, converged, np.array(trace)


def cup(panel: PanelDataset, config: CupConfig | None = None, *, beta_init=None, inference: bool = True) -> EstimationResult:
    """Continuously-updated estimator of ``(beta, F)``.

    Alternates ``beta = (sum x'M_F x)^{-1} sum x'M_F y`` with re-extracting
    ``F`` from ``y - x beta`` until the relative change in ``beta`` drops
    below ``config.tol`` or ``config.max_iter`` steps are taken. Hitting the
    cap is not an error: the last iterate comes back with
    ``converged=False``.

    Parameters
    ----------
    panel : PanelDataset
    config : CupConfig, optional
    beta_init : array_like, optional
        Overrides ``config.init``.
    inference : bool
        Compute plug-in standard errors (needs the kernel step).
    """
    config = config or CupConfig()
    Y, X = _prepare(panel, config)
    beta, fac, it, conv, trace = _cup_iterate(Y, X, config, beta_init)
    res = EstimationResult(
        beta, "Cup", fac, iterations=it, converged=conv, objective_trace=trace,
        detrend=config.detrend, kernel=config.kernel,
    )
    if inference:
        try:
            comps = _components(Y, X, beta, fac.F_hat, fac.Lambda_hat, config.kernel)
        except NumericalError as exc:
            warnings.warn(f"Cup: standard errors unavailable ({exc})", RuntimeWarning, stacklevel=2)
            return res
        _attach_inference(res, comps)
    return res


def cup_bc(panel: PanelDataset, config: CupConfig | None = None, *, beta_init=None) -> EstimationResult:
    """Cup followed by ``beta_CupBC = beta_Cup - phi_hat / T``."""
    config = config or CupConfig()
    Y, X = _prepare(panel, config)
    beta, fac, it, conv, trace = _cup_iterate(Y, X, config, beta_init)
    comps = _components(Y, X, beta, fac.F_hat, fac.Lambda_hat, config.kernel)
    res = EstimationResult(
        beta - comps.phi / comps.t_eff, "CupBC", fac, phi_hat=comps.phi,
        iterations=it, converged=conv, objective_trace=trace,
        detrend=config.detrend, kernel=config.kernel,
    )
    return _attach_inference(res, comps)


def _fm_step(Y, X, F, comps: BiasComponents):
    """One fully-modified update of ``beta`` given ``F`` and the corrections."""
    n, T, k = X.shape
    correction = np.einsum("ntm,nm->nt", comps.wbar[:, :, 1:], comps.plus.endo_coeff)
    y_plus = Y.copy()
    y_plus[:, 1:] -= correction
    MX = _annihilate(F, X)
    A = np.einsum("ntk,ntl->kl", MX, MX)
    b = np.einsum("ntk,nt->k", MX, y_plus) - comps.t_eff * comps.fm_shift.sum(axis=0)
    return _solve_normal(A, b, "projected")


def _cup_fm(panel, config, beta_init, max_iter, label):
    Y, X = _prepare(panel, config)
    beta = _initial_beta(Y, X, config.init if beta_init is None else beta_init)
    fac = factor_extract((Y - X @ beta).T, config.r)
    trace = [objective(Y, X, beta, fac.F_hat)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        comps = _components(Y, X, beta, fac.F_hat, fac.Lambda_hat, config.kernel)
        new = _fm_step(Y, X, fac.F_hat, comps)
        fac = factor_extract((Y - X @ new).T, config.r)
        trace.append(objective(Y, X, new, fac.F_hat))
        change = _rel_change(new, beta)
        beta = new
        if change <= config.tol:
            converged = True
            break
    comps = _components(Y, X, beta, fac.F_hat, fac.Lambda_hat, config.kernel)
    res = EstimationResult(
        beta, label, fac, iterations=it, converged=converged, objective_trace=np.array(trace),
        detrend=config.detrend, kernel=config.kernel,
    )
    return _attach_inference(res, comps)


def cup_fm(panel: PanelDataset, config: CupConfig | None = None, *, beta_init=None) -> EstimationResult:
    """Fully-modified Cup: endogeneity and serial-correlation corrections are
    rebuilt from the current residuals at every iteration."""
    config = config or CupConfig()
    return _cup_fm(panel, config, beta_init, config.max_iter, "CupFM")


def two_step_fm(panel: PanelDataset, config: CupConfig | None = None, *, beta_init=None) -> EstimationResult:
    """:func:`cup_fm` stopped after a single iteration."""
    config = config or CupConfig()
    return _cup_fm(panel, replace(config, max_iter=1), beta_init, 1, "TwoStepFM")


# -- observed trends -----------------------------------------------------------------


def _known_f_components(panel, F0, kernel):
    Y, X = _arrays(panel)
    F0 = np.asarray(F0, dtype=float).reshape(panel.T, -1)
    beta = _ls_step(Y, X, F0)
    W = Y - X @ beta
    Lam = np.linalg.solve(F0.T @ F0, F0.T @ W.T).T
    comps = _components(Y, X, beta, F0, Lam, kernel or KernelSpec(), barred=False)
    return Y, X, F0, beta, comps


def ls_bc_known_f(panel: PanelDataset, F0, kernel: KernelSpec | None = None) -> EstimationResult:
    """Bias-corrected least squares with observed trends."""
    _, _, F0, beta, comps = _known_f_components(panel, F0, kernel)
    res = EstimationResult(beta - comps.phi / comps.t_eff, "LSBC", phi_hat=comps.phi, kernel=kernel)
    return _attach_inference(res, comps)


def ls_fm_known_f(panel: PanelDataset, F0, kernel: KernelSpec | None = None) -> EstimationResult:
    """Fully-modified least squares with observed trends; algebraically equal to
    :func:`ls_bc_known_f`."""
    Y, X, F0, _, comps = _known_f_components(panel, F0, kernel)
    beta = _fm_step(Y, X, F0, comps)
    res = EstimationResult(beta, "LSFM", kernel=kernel)
    return _attach_inference(res, comps)
