"""Simulation design, seeded replications and summary tables.

The design is a single-factor panel

    y_it = beta0 x_it + c lambda_i F_t + u_it,
    x_it = x_{i,t-1} + e_it,   F_t = F_{t-1} + h_t,

with ``(u_it, e_it, h_t)`` Gaussian, unit variances and correlations
``s21 = corr(u, e)``, ``s31 = corr(u, h)``, ``s32 = corr(e, h)``, and
``lambda_i ~ N(mu_lambda, 1)``.

Random numbers come from numpy's counter-based Philox generator with
ziggurat normals (``Generator.standard_normal``); replication ``j`` of a run
is seeded with ``base_seed + j``. Draw order within a replication is fixed:
loadings, then the factor shocks, then the unit-time shocks.
"""

from __future__ import annotations

import math
import os
import time
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from .errors import NotPositiveDefinite, PanelCupError
from .estimators import CupConfig, cup, cup_bc, cup_fm, lsdv, pooled_ols, two_step_fm
from .panel import PanelDataset
from .report import SCHEMA_VERSION, dumps

__all__ = [
    "DgpConfig",
    "SimulatedPanel",
    "EstimatorSummary",
    "McSummary",
    "ESTIMATORS",
    "generate",
    "run_mc",
    "default_jobs",
]

ESTIMATORS = ("lsdv", "2sfm", "cupbc", "cupfm", "cup", "pooled")
TABLE_LABELS = {
    "lsdv": "LSDV",
    "2sfm": "2sFM",
    "cupbc": "CupBC",
    "cupfm": "CupFM",
    "cup": "Cup",
    "pooled": "Pooled",
}


def default_jobs() -> int:
    """Worker count from ``PANELCUP_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("PANELCUP_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class DgpConfig:
    """Parameters of the simulation design.

    ``factor_shocks`` selects how the common factor shock ``h_t`` relates
    to the unit shocks:

    ``"independent"`` (default)
        ``h_t`` is drawn on its own; ``(u_it, e_it)`` are drawn with
        correlation ``s21``. ``s31`` and ``s32`` only enter the validity
        check of the 3x3 covariance.
    ``"shared"``
        ``(u_it, e_it, h_t)`` are jointly normal with the full 3x3
        covariance for every unit, with the same ``h_t`` for all units.
    """

    n: int = 40
    T: int = 40
    beta0: float = 2.0
    c: float = 5.0
    sigma21: float = 0.2
    sigma31: float = 0.8
    sigma32: float = 0.4
    mu_lambda: float = 2.0
    mu_eta: float = 0.0
    r: int = 1
    seed: int = 0
    factor_shocks: Literal["independent", "shared"] = "independent"

    def __post_init__(self):
        if self.n < 1 or self.T < 2:
            raise ValueError("need n >= 1 and T >= 2")
        if self.r != 1:
            raise ValueError("only single-factor designs are supported")
        if self.factor_shocks not in ("independent", "shared"):
            raise ValueError(f"unknown factor_shocks {self.factor_shocks!r}")

    @property
    def covariance(self) -> np.ndarray:
        """3x3 covariance of ``(u, e, h)``."""
        s21, s31, s32 = self.sigma21, self.sigma31, self.sigma32
        return np.array([[1.0, s21, s31], [s21, 1.0, s32], [s31, s32, 1.0]])

    def with_seed(self, seed: int) -> DgpConfig:
        return DgpConfig(**{**asdict(self), "seed": int(seed)})


@dataclass(frozen=True, eq=False)
class SimulatedPanel:
    panel: PanelDataset
    F0: np.ndarray  # (T, 1)
    lambda0: np.ndarray  # (n,)
    u: np.ndarray  # (n, T)
    eps: np.ndarray  # (n, T)
    eta: np.ndarray  # (T,)


def _cholesky(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("innovation covariance is not positive definite") from exc


def generate(config: DgpConfig) -> SimulatedPanel:
    """Draw one panel from the design; fully determined by ``config.seed``."""
    cov = config.covariance
    _cholesky(cov)
    n, T = config.n, config.T
    rng = np.random.Generator(np.random.Philox(config.seed))
    lam = config.mu_lambda + rng.standard_normal(n)
    z_common = rng.standard_normal(T)
    z_unit = rng.standard_normal((n, T, 2))

    if config.factor_shocks == "shared":
        # order (h, u, e) so that h depends only on the common draw
        L = _cholesky(cov[np.ix_([2, 0, 1], [2, 0, 1])])
        eta = L[0, 0] * z_common
        u = L[1, 0] * z_common + L[1, 1] * z_unit[..., 0]
        eps = L[2, 0] * z_common + L[2, 1] * z_unit[..., 0] + L[2, 2] * z_unit[..., 1]
    else:
        L = _cholesky(cov[:2, :2])
        eta = z_common
        u = L[0, 0] * z_unit[..., 0]
        eps = L[1, 0] * z_unit[..., 0] + L[1, 1] * z_unit[..., 1]
    eta = eta + config.mu_eta

    F = np.cumsum(eta)
    x = np.cumsum(eps, axis=1)
    y = config.beta0 * x + config.c * lam[:, None] * F[None, :] + u
    return SimulatedPanel(PanelDataset(y, x), F[:, None], lam, u, eps, eta)


# -- replications ----------------------------------------------------------------


def _fit_one(name, panel, cup_config):
    if name == "lsdv":
        return lsdv(panel)
    if name == "pooled":
        return pooled_ols(panel)
    if name == "cup":
        return cup(panel, cup_config)
    if name == "cupbc":
        return cup_bc(panel, cup_config)
    if name == "cupfm":
        return cup_fm(panel, cup_config)
    if name == "2sfm":
        return two_step_fm(panel, cup_config)
    raise ValueError(f"unknown estimator {name!r}")


def _replicate(args):
    config, seed, estimators, cup_config = args
    sim = generate(config.with_seed(seed))
    out = {}
    for name in estimators:
        try:
            res = _fit_one(name, sim.panel, cup_config)
            beta = float(res.beta_hat[0])
            tval = float(res.t_against(config.beta0)[0]) if res.se is not None else math.nan
        except (PanelCupError, np.linalg.LinAlgError):
            beta, tval = math.nan, math.nan
        out[name] = (beta, tval)
    return out


@dataclass(frozen=True)
class EstimatorSummary:
    mean_bias_x100: float
    std_dev: float
    t_mean: float
    t_std: float
    n_ok: int
    n_failed: int
    std_defined: bool


def _mean_std(values):
    """Mean and sample std via exact summation, so order does not matter."""
    m = len(values)
    if m == 0:
        return math.nan, math.nan, False
    mean = math.fsum(values) / m
    if m < 2:
        return mean, 0.0, False
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var), True


def _summarise(beta0, betas, tvals) -> EstimatorSummary:
    ok = [b for b in betas if math.isfinite(b)]
    ts = [t for t in tvals if math.isfinite(t)]
    mean_b, std_b, defined = _mean_std(ok)
    mean_t, std_t, _ = _mean_std(ts)
    return EstimatorSummary(
        mean_bias_x100=100.0 * (mean_b - beta0) if ok else math.nan,
        std_dev=std_b,
        t_mean=mean_t,
        t_std=std_t,
        n_ok=len(ok),
        n_failed=len(betas) - len(ok),
        std_defined=defined,
    )


@dataclass
class McSummary:
    """Bias (x100), dispersion and t-statistic moments per estimator."""

    config: DgpConfig
    reps: int
    base_seed: int
    estimators: dict[str, EstimatorSummary]
    cup_config: dict = field(default_factory=dict)
    elapsed: float = field(default=0.0, compare=False)
    betas: dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)
    tstats: dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self, include_timing: bool = False) -> dict:
        cfg = asdict(self.config)
        cfg.pop("seed")
        out = {
            "schema_version": SCHEMA_VERSION,
            "command": "simulate",
            "design": cfg,
            "reps": self.reps,
            "base_seed": self.base_seed,
            "cup": self.cup_config,
            "estimators": {k: _jsonable(asdict(v)) for k, v in self.estimators.items()},
        }
        if include_timing:
            out["elapsed"] = self.elapsed
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return dumps(self.to_dict(include_timing))

    def table(self) -> str:
        """Text table: mean bias x100 over (std), then t mean over (t std)."""
        names = list(self.estimators)
        width = 10
        c = self.config
        head = f"(n,T)=({c.n},{c.T})  c={c.c:g}  s21={c.sigma21:g}  s31={c.sigma31:g}  s32={c.sigma32:g}  reps={self.reps}"
        lines = [head, " " * 12 + "".join(f"{TABLE_LABELS.get(k, k):>{width}}" for k in names)]

        def row(label, values):
            return f"{label:<12}" + "".join(f"{v:>{width}}" for v in values)

        est = self.estimators
        lines.append(row("bias x100", [_fmt(est[k].mean_bias_x100) for k in names]))
        lines.append(row("", [f"({_fmt(est[k].std_dev)})" for k in names]))
        lines.append(row("t mean", [_fmt(est[k].t_mean) for k in names]))
        lines.append(row("", [f"({_fmt(est[k].t_std)})" for k in names]))
        failed = [f"{TABLE_LABELS.get(k, k)}={est[k].n_failed}" for k in names if est[k].n_failed]
        if failed:
            lines.append("failed replications: " + ", ".join(failed))
        if self.reps < 2:
            lines.append("note: std undefined for a single replication (reported as 0)")
        return "\n".join(lines) + "\n"


def _fmt(v):
    return "nan" if not math.isfinite(v) else f"{v:.3f}"


def _jsonable(d):
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def run_mc(
    config: DgpConfig,
    reps: int = 1000,
    estimators: Iterable[str] = ("lsdv", "2sfm", "cupbc", "cupfm"),
    base_seed: int | None = None,
    cup_config: CupConfig | None = None,
    n_jobs: int | None = None,
) -> McSummary:
    """Run ``reps`` seeded replications and aggregate.

    Replication ``j`` uses seed ``base_seed + j`` (``base_seed`` defaults
    to ``config.seed``). A replication whose fit raises is recorded as a
    failure for that estimator and excluded from its moments. The result
    does not depend on ``n_jobs``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    estimators = tuple(estimators)
    for name in estimators:
        if name not in ESTIMATORS:
            raise ValueError(f"unknown estimator {name!r}; choose from {ESTIMATORS}")
    if not estimators:
        raise ValueError("at least one estimator is required")
    generate(config)  # validates the covariance before spawning work
    cup_config = cup_config or CupConfig()
    base = config.seed if base_seed is None else int(base_seed)
    n_jobs = default_jobs() if n_jobs is None else max(1, int(n_jobs))
    tasks = [(config, base + j, estimators, cup_config) for j in range(reps)]

    t0 = time.perf_counter()
    if n_jobs == 1:
        results = [_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=max(1, reps // (4 * n_jobs))))
    elapsed = time.perf_counter() - t0

    summaries, betas, tstats = {}, {}, {}
    for name in estimators:
        b = [res[name][0] for res in results]
        t = [res[name][1] for res in results]
        betas[name] = np.array(b)
        tstats[name] = np.array(t)
        summaries[name] = _summarise(config.beta0, b, t)
    cup_info = {
        "r": cup_config.r,
        "max_iter": cup_config.max_iter,
        "tol": cup_config.tol,
        "init": cup_config.init,
        "kernel": cup_config.kernel.kind,
        "bandwidth": cup_config.kernel.bandwidth,
        "detrend": cup_config.detrend.mode,
    }
    return McSummary(config, reps, base, summaries, cup_info, elapsed, betas, tstats)
