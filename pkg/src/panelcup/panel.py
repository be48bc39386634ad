"""Balanced panel container, CSV I/O and deterministic-term projections."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import (
    DegenerateProjection,
    DimensionMismatch,
    DuplicateCell,
    MissingColumn,
    NonNumericField,
    TooShort,
    UnbalancedPanel,
)

__all__ = [
    "PanelDataset",
    "DetrendSpec",
    "DifferencedSeries",
    "load_panel",
    "read_csv",
    "write_csv",
    "to_records",
    "project_deterministics",
    "first_difference",
]


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Balanced panel of ``n`` units observed over ``T`` periods.

    Parameters
    ----------
    y : ndarray, shape (n, T)
        Outcomes.
    x : ndarray, shape (n, T, k)
        Regressors. A 2-d array is read as ``k = 1``.
    unit_ids, time_ids : sequence, optional
        Labels; default to ``0..n-1`` and ``1..T``.
    x_names : sequence of str, optional
        Regressor names, default ``x1..xk``.

    Notes
    -----
    Arrays are copied and made read-only, so a dataset can be shared freely.
    Estimators that need kernel lags additionally require ``n >= 2`` and
    ``T >= 4`` (see :meth:`require_estimable`).
    """

    y: np.ndarray
    x: np.ndarray
    unit_ids: tuple = field(default=None)
    time_ids: tuple = field(default=None)
    x_names: tuple = field(default=None)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 2:
            raise DimensionMismatch(f"y must be 2-d (n, T), got shape {y.shape}")
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3 or x.shape[:2] != y.shape:
            raise DimensionMismatch(f"x shape {x.shape} does not match y shape {y.shape}")
        n, T, k = x.shape
        if n < 1 or T < 2 or k < 1:
            raise DimensionMismatch(f"need n >= 1, T >= 2, k >= 1; got n={n}, T={T}, k={k}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise NonNumericField("y/x", "non-finite")
        unit_ids = tuple(range(n)) if self.unit_ids is None else tuple(self.unit_ids)
        time_ids = tuple(range(1, T + 1)) if self.time_ids is None else tuple(self.time_ids)
        x_names = tuple(f"x{j + 1}" for j in range(k)) if self.x_names is None else tuple(self.x_names)
        if len(unit_ids) != n or len(time_ids) != T or len(x_names) != k:
            raise DimensionMismatch("label lengths do not match data dimensions")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "unit_ids", unit_ids)
        object.__setattr__(self, "time_ids", time_ids)
        object.__setattr__(self, "x_names", x_names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[1]

    @property
    def k(self) -> int:
        return self.x.shape[2]

    def require_estimable(self):
        """Raise unless the panel is large enough for the factor estimators."""
        if self.n < 2 or self.T < 4:
            raise TooShort(f"factor estimators need n >= 2 and T >= 4, got n={self.n}, T={self.T}")

    def replace(self, y=None, x=None) -> PanelDataset:
        return PanelDataset(
            self.y if y is None else y,
            self.x if x is None else x,
            self.unit_ids,
            self.time_ids,
            self.x_names,
        )

    def __eq__(self, other):
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return (
            self.unit_ids == other.unit_ids
            and self.time_ids == other.time_ids
            and self.x_names == other.x_names
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.x, other.x)
        )

    __hash__ = None


# -- long-format I/O -----------------------------------------------------------


def _label(v):
    """Normalise an id so that numeric strings sort numerically."""
    if isinstance(v, str):
        s = v.strip()
        try:
            return int(s)
        except ValueError:
            try:
                f = float(s)
            except ValueError:
                return s
            return int(f) if f.is_integer() else f
    return v


def _number(value, column, row):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        out = float(value)
    else:
        try:
            out = float(str(value).strip())
        except ValueError:
            raise NonNumericField(column, value, row) from None
    if not math.isfinite(out):
        raise NonNumericField(column, value, row)
    return out


def _sort_key(v):
    # mixed int/str labels sort by type name first, then value
    return (isinstance(v, str), v)


def load_panel(rows: Iterable[Mapping], x_names: Sequence[str] | None = None) -> PanelDataset:
    """Pack long-format records into a :class:`PanelDataset`.

    Each record maps ``unit``, ``time``, ``y`` and the regressor names
    (``x1, x2, ...`` unless ``x_names`` is given) to values. Units and
    periods are sorted ascending.
    """
    rows = list(rows)
    if not rows:
        raise UnbalancedPanel(None, None)
    if x_names is None:
        keys = rows[0].keys()
        x_names = sorted(
            (c for c in keys if c.startswith("x") and c[1:].isdigit()), key=lambda c: int(c[1:])
        )
    x_names = list(x_names)
    for col in ("unit", "time", "y"):
        if col not in rows[0]:
            raise MissingColumn(col)
    if not x_names:
        raise MissingColumn("x1")
    for col in x_names:
        if col not in rows[0]:
            raise MissingColumn(col)

    cells = {}
    for lineno, rec in enumerate(rows, start=1):
        for col in ("unit", "time", "y", *x_names):
            if col not in rec:
                raise MissingColumn(col)
        key = (_label(rec["unit"]), _label(rec["time"]))
        if key in cells:
            raise DuplicateCell(*key)
        cells[key] = (
            _number(rec["y"], "y", lineno),
            [_number(rec[c], c, lineno) for c in x_names],
        )

    units = sorted({u for u, _ in cells}, key=_sort_key)
    times = sorted({t for _, t in cells}, key=_sort_key)
    n, T, k = len(units), len(times), len(x_names)
    y = np.empty((n, T))
    x = np.empty((n, T, k))
    for i, u in enumerate(units):
        for t, s in enumerate(times):
            try:
                yv, xv = cells[(u, s)]
            except KeyError:
                raise UnbalancedPanel(u, s) from None
            y[i, t] = yv
            x[i, t] = xv
    return PanelDataset(y, x, units, times, x_names)


def to_records(panel: PanelDataset) -> list[dict]:
    """Inverse of :func:`load_panel`: one dict per (unit, time) cell."""
    out = []
    for i, u in enumerate(panel.unit_ids):
        for t, s in enumerate(panel.time_ids):
            rec = {"unit": u, "time": s, "y": float(panel.y[i, t])}
            for j, name in enumerate(panel.x_names):
                rec[name] = float(panel.x[i, t, j])
            out.append(rec)
    return out


def read_csv(path: str | Path) -> PanelDataset:
    """Read a long-format CSV with header ``unit,time,y,x1,...,xk``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        for col in ("unit", "time", "y"):
            if col not in header:
                raise MissingColumn(col)
        x_names = [h for h in header if h not in ("unit", "time", "y")]
        if not x_names:
            raise MissingColumn("x1")
        reader.fieldnames = header
        return load_panel(reader, x_names=x_names)


def write_csv(panel: PanelDataset, path: str | Path) -> None:
    fields = ["unit", "time", "y", *panel.x_names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for rec in to_records(panel):
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})


# -- deterministic terms -------------------------------------------------------


@dataclass(frozen=True)
class DetrendSpec:
    """Which deterministic terms to project out before estimation."""

    mode: Literal["none", "demean", "demean_and_trend"] = "none"

    _ALIASES = {"trend": "demean_and_trend", "detrend": "demean_and_trend"}

    def __post_init__(self):
        mode = self._ALIASES.get(self.mode, self.mode)
        if mode not in ("none", "demean", "demean_and_trend"):
            raise ValueError(f"unknown detrend mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)

    @property
    def n_terms(self) -> int:
        return {"none": 0, "demean": 1, "demean_and_trend": 2}[self.mode]

    @classmethod
    def coerce(cls, value) -> DetrendSpec:
        return value if isinstance(value, cls) else cls(value or "none")


def _deterministic_residual(z: np.ndarray, n_terms: int) -> np.ndarray:
    """Residuals of regressing each series in ``z`` (..., T, m) on {1} or {1, t}."""
    T = z.shape[-2]
    if n_terms == 1:
        return z - z.mean(axis=-2, keepdims=True)
    D = np.column_stack([np.ones(T), np.arange(1, T + 1, dtype=float)])
    Q, _ = np.linalg.qr(D)
    return z - Q @ (np.swapaxes(Q, 0, 1) @ z)


def project_deterministics(panel: PanelDataset, spec: DetrendSpec | str = "none") -> PanelDataset:
    """Replace y and x by residuals from per-unit regressions on deterministics.

    ``demean`` removes a unit intercept, ``demean_and_trend`` an intercept
    and a linear time trend; ``none`` returns the input unchanged.
    """
    spec = DetrendSpec.coerce(spec)
    if spec.mode == "none":
        return panel
    if panel.T <= spec.n_terms:
        raise DegenerateProjection(
            f"T={panel.T} must exceed the number of deterministic terms ({spec.n_terms})"
        )
    y = _deterministic_residual(panel.y[:, :, None], spec.n_terms)[:, :, 0]
    x = _deterministic_residual(panel.x, spec.n_terms)
    return panel.replace(y=y, x=x)


# -- differencing ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DifferencedSeries:
    """First differences; row ``t`` holds the change into period ``t + origin_offset``
    (periods counted from 1), so the first retained period is 2."""

    values: np.ndarray
    origin_offset: int = 2

    def __len__(self):
        return len(self.values)


def first_difference(series) -> DifferencedSeries:
    z = np.asarray(series, dtype=float)
    if z.ndim == 0 or z.shape[0] < 2:
        raise TooShort("need at least two periods to difference")
    return DifferencedSeries(np.diff(z, axis=0))
