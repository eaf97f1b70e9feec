"""Hopf-formula Hamilton-Jacobi solver with superdifferential calculus,
generalized characteristics, and singularity-persistence verification."""

from .quadform import SpdForm
from .geometry import BoundaryData, CompatibilityReport, Domain, Problem, check_compatibility
from .hopf import (HopfOptions, HopfValue, Minimizer, SliceWindow,
                   WindowConstructionError, hopf_value, make_slice_window,
                   slice_value, window_invariants)
from .superdiff import (Covector, SuperDiff, directional_derivative,
                        energy_min_selection, exposed_face, monotonicity_check,
                        reachable_gradients, superdifferential,
                        v_transform_superdiff)
from .characteristics import (CharArc, DissipationReport, IdentityReport,
                              PersistenceReport, derivative_identity_check,
                              dissipation_check, persistence_run, trace)
from .analytic import EpsExample, make_data, two_well_data, two_well_solution

__version__ = "0.1.0"

__all__ = [
    "SpdForm", "Domain", "BoundaryData", "Problem", "check_compatibility",
    "CompatibilityReport", "HopfOptions", "HopfValue", "Minimizer",
    "SliceWindow", "WindowConstructionError", "hopf_value", "slice_value",
    "make_slice_window", "window_invariants", "Covector", "SuperDiff",
    "reachable_gradients", "superdifferential", "energy_min_selection",
    "directional_derivative", "exposed_face", "v_transform_superdiff",
    "monotonicity_check", "CharArc", "trace", "derivative_identity_check",
    "dissipation_check", "persistence_run", "DissipationReport",
    "IdentityReport", "PersistenceReport", "EpsExample", "two_well_data",
    "two_well_solution", "make_data",
]
