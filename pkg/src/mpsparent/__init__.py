"""Matrix product states, their parent Hamiltonians and the intersection property."""

from .budget import ResourceLimitError, get_memory_budget, memory_budget
from .errors import ChargeError, ConsistencyError, DomainError, PreconditionError
from .mps import (
    MpsTensor,
    Subspace,
    blocking_map,
    injectivity_length,
    mps_space,
    random_mps,
    state_vector,
)
from .spinalg import HalfInt, LocalOperator, cg

__version__ = "0.1.0"

__all__ = [
    "ChargeError",
    "ConsistencyError",
    "DomainError",
    "HalfInt",
    "LocalOperator",
    "MpsTensor",
    "PreconditionError",
    "ResourceLimitError",
    "Subspace",
    "blocking_map",
    "cg",
    "get_memory_budget",
    "injectivity_length",
    "memory_budget",
    "mps_space",
    "random_mps",
    "state_vector",
]
