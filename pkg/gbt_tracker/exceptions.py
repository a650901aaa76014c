"""
Error types raised across the tracker, planner and harness.
Input problems also subclass ValueError, numerical breakdowns ArithmeticError.
"""

from typing import List


class GbtError(Exception):
    """Base class for every error the simulator raises on purpose."""

    code = "gbt_error"


class IntegrationDivergedError(GbtError, ArithmeticError):
    code = "integration_diverged"


class CoincidentPositionError(GbtError, ValueError):
    code = "coincident_position"


class EmptyBatchError(GbtError, ValueError):
    code = "empty_batch"


class IllConditionedPriorError(GbtError, ArithmeticError):
    code = "ill_conditioned_prior"


class DegenerateBearingSetError(GbtError, ValueError):
    code = "degenerate_bearing_set"


class MatrixRootError(GbtError, ArithmeticError):
    code = "matrix_root"


class NearSingularBearingError(GbtError, ArithmeticError):
    code = "near_singular_bearing"


class SplineSolveError(GbtError, ArithmeticError):
    code = "spline_solve"


class FilterDegenerateError(GbtError, ArithmeticError):
    code = "filter_degenerate"


class DegenerateGeometryError(GbtError, ArithmeticError):
    code = "degenerate_geometry"


class ConfigValidationError(GbtError, ValueError):
    """Raised with every field-level problem found while loading a scenario."""

    code = "config_invalid"

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
