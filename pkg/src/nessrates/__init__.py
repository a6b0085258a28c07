"""Exact kinetic rate matrices between components of open quantum networks.

Given a Lindblad Liouvillian with a unique nonequilibrium steady state and a
partition of Hilbert space into components, the package computes the
time-independent rate matrix governing population flow between components,
together with the dynamics needed to judge when that rate law applies.
"""
__version__ = "0.1.0"

from .errors import (ConfigError, DimensionError, DynamicsError, NessRateError, PartitionError, RateError,
                     SteadyStateError, ValidationError)
from .operators import (HilbertSpace, Operator, SuperOperator, assemble_liouvillian, bose_occupation,
                        commutator_generator, devectorize, ket_bra, lindblad_pair, projector, vectorize)
from .partition import LiouvillePartition, Partition, liouville_partition, populations, validate
from .ness import NessResult, solve_ness
from .rates import RateMatrix, balance_report, complement_response, rate_matrix, route_agreement
from .dynamics import (Trajectory, fit_rate_matrix, m_split, markov_analysis, perturbed_state, propagate,
                       relative_error, timescales)

__all__ = [
    "__version__",
    "NessRateError", "DimensionError", "ValidationError", "PartitionError", "SteadyStateError",
    "RateError", "DynamicsError", "ConfigError",
    "HilbertSpace", "Operator", "SuperOperator", "assemble_liouvillian", "bose_occupation",
    "commutator_generator", "devectorize", "ket_bra", "lindblad_pair", "projector", "vectorize",
    "Partition", "LiouvillePartition", "liouville_partition", "populations", "validate",
    "NessResult", "solve_ness",
    "RateMatrix", "rate_matrix", "complement_response", "route_agreement", "balance_report",
    "Trajectory", "propagate", "m_split", "timescales", "relative_error", "fit_rate_matrix",
    "perturbed_state", "markov_analysis",
]
