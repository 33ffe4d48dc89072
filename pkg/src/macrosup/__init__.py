"""Macroscopic superposition indices and multipartite entanglement for spin-1/2 chains."""
from .qstate import (
    InfeasibleSize,
    MixedState,
    PureState,
    SiteSubset,
    StateError,
    make_mixed,
    make_state,
    reduced_density,
)
from .observables import AdditiveObservable, correlation, max_fluctuation
from .qindex import double_commutator, max_double_commutator, trace_norm
from .scaling import ScalingFit, fit_power_law

__version__ = "0.1.0"

__all__ = [
    "AdditiveObservable",
    "InfeasibleSize",
    "MixedState",
    "PureState",
    "ScalingFit",
    "SiteSubset",
    "StateError",
    "correlation",
    "double_commutator",
    "fit_power_law",
    "make_mixed",
    "make_state",
    "max_double_commutator",
    "max_fluctuation",
    "reduced_density",
    "trace_norm",
    "__version__",
]
