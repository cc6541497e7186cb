"""Finite-resolution laboratory for relative metric mean dimension with potential."""

from .errors import (CapacityError, CommutationError, ConstraintError, ConstructionError,
                     DomainError, RelMdimError, SurjectivityError)
from .metric_core import (MapSystem, MetricSpace, Potential, RateEstimate, bowen_distance,
                          box_dimension_estimate, covering_number, maximal_separated_set,
                          minimal_spanning_set)

__version__ = "0.1.0"
