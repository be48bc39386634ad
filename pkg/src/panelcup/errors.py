"""Exception hierarchy.

Errors fall in two families that the command line maps to distinct exit
codes: :class:`DataError` (bad input or configuration, exit 2) and
:class:`NumericalError` (the data parsed but the computation broke down,
exit 3).
"""

from __future__ import annotations


class PanelCupError(Exception):
    """Base class for all package errors."""


class DataError(PanelCupError, ValueError):
    """Input data or configuration is invalid."""


class NumericalError(PanelCupError, ArithmeticError):
    """A numerical step failed on otherwise valid input."""


# -- input / configuration --------------------------------------------------


class UnbalancedPanel(DataError):
    def __init__(self, unit, time):
        self.unit = unit
        self.time = time
        super().__init__(f"missing cell for unit={unit!r}, time={time!r}")


class DuplicateCell(DataError):
    def __init__(self, unit, time):
        self.unit = unit
        self.time = time
        super().__init__(f"duplicate cell for unit={unit!r}, time={time!r}")


class NonNumericField(DataError):
    def __init__(self, column, value, row=None):
        self.column = column
        self.value = value
        self.row = row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"non-numeric value {value!r} in column {column!r}{where}")


class MissingColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"required column {column!r} is missing")


class DimensionMismatch(DataError):
    pass


class TooShort(DataError):
    pass


class DegenerateProjection(DataError):
    pass


class LagOutOfRange(DataError):
    pass


class RankRequestTooLarge(DataError):
    pass


class EmptyKernelSupport(DataError):
    pass


# -- numerical ---------------------------------------------------------------


class NotSymmetric(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class RankDeficientBasis(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class SingularDesign(NumericalError):
    pass


class SingularOmegaB(NumericalError):
    """Long-run covariance of (regressor, factor) innovations is singular.

    This signals cointegration among the regressors and factors.
    """

    def __init__(self, message, unit=None):
        self.unit = unit
        if unit is not None:
            message = f"unit {unit}: {message}"
        super().__init__(message)


class SingularLoadingGram(NumericalError):
    pass


class SingularDZ(NumericalError):
    pass


class ZeroStandardError(NumericalError):
    pass


class SingularRestriction(NumericalError):
    pass
