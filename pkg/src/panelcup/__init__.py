"""Estimation of panel cointegration models with unobserved I(1) common trends."""

from .errors import DataError, NumericalError, PanelCupError
from .estimators import (
    BiasComponents,
    CupConfig,
    EstimationResult,
    FactorEstimate,
    bias_components,
    cup,
    cup_bc,
    cup_fm,
    factor_extract,
    ls_bc_known_f,
    ls_fm_known_f,
    ls_given_f,
    lsdv,
    pooled_ols,
    two_step_fm,
)
from .factor_select import IcResult, select_r
from .inference import VarianceEstimate, t_stat, variance_est, wald
from .lrcov import KernelSpec, LongRunCov, PlusTransform, lr_cov, plus_transform
from .mc import DgpConfig, McSummary, SimulatedPanel, generate, run_mc
from .panel import DetrendSpec, PanelDataset, load_panel, read_csv, write_csv

__version__ = "0.1.0"
