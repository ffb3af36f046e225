"""Kadison-Schwarz divisibility of qubit dynamical maps."""
from .dynamics import (
    AmplitudeDampingSpec, PauliDynamics, accumulate_rates, blp_monotonicity,
    divisibility_scan, integrate_master_equation, map_at, propagator,
)
from .generators import (
    GKSLData, RateFunctions, classify_rates, dephasing_rates, dissipativity_numeric,
    erika_rates, modified_rates, pauli_generator,
)
from .maps import (
    PauliDiagonalMap, PauliMixtureMap, QubitMap, choi_matrix, is_cp, ks_closed_form_diag,
    ks_witness_search,
)
from .pauli import PauliCoordinates, QubitOperator
from .witness import KSReport, Verdict

__all__ = [
    "AmplitudeDampingSpec", "PauliDynamics", "accumulate_rates", "blp_monotonicity",
    "divisibility_scan", "integrate_master_equation", "map_at", "propagator",
    "GKSLData", "RateFunctions", "classify_rates", "dephasing_rates",
    "dissipativity_numeric", "erika_rates", "modified_rates", "pauli_generator",
    "PauliDiagonalMap", "PauliMixtureMap", "QubitMap", "choi_matrix", "is_cp",
    "ks_closed_form_diag", "ks_witness_search", "PauliCoordinates", "QubitOperator",
    "KSReport", "Verdict",
]
