"""Data-driven output-feedback stabilization from sampled input-output data.

The package synthesizes stabilizing dynamic output-feedback controllers
for continuous-time LTI plants using one sampled input-output trajectory
and the plant order: the input and output are run through a bank of
reference filters, the unknown-initial-condition disturbance is
cancelled exactly by an annihilator acting on the sample axis, and a
static gain on the filter state is obtained from a feasibility program
on the filtered data.  A model-based verification layer independently
re-derives every data-driven quantity.
"""

from .errors import (
    AssumptionError,
    CapacityError,
    ConditioningError,
    ConfigError,
    ConvergenceError,
    DimensionError,
    ExcitationError,
    GateError,
    IostabError,
    ModelError,
    NoUniqueSolutionError,
    NotObservableError,
)
from .matkit import DEFAULT_POLICY, NumericPolicy

__all__ = [
    "AssumptionError",
    "CapacityError",
    "ConditioningError",
    "ConfigError",
    "ConvergenceError",
    "DEFAULT_POLICY",
    "DimensionError",
    "ExcitationError",
    "GateError",
    "IostabError",
    "ModelError",
    "NoUniqueSolutionError",
    "NotObservableError",
    "NumericPolicy",
]

__version__ = "0.1.0"
