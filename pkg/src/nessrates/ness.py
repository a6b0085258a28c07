"""Unique steady state of a Liouvillian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import SteadyStateError
from .operators import POSITIVITY_TOL, Operator, SuperOperator, devectorize, vectorize_matrix

NULLITY_RTOL = 1e-10
RESIDUAL_RTOL = 1e-9


@dataclass(frozen=True)
class NessResult:
    rho_s: Operator
    residual: float
    null_dim: int
    min_eig: float


def numerical_nullity(L: SuperOperator, rtol: float = NULLITY_RTOL) -> tuple[int, np.ndarray]:
    s = sla.svdvals(L.matrix)
    return int(np.sum(s <= rtol * s[0])), s


def solve_ness(L: SuperOperator, null_rtol: float = NULLITY_RTOL) -> NessResult:
    """Solve ``L[rho_s] = 0`` with ``tr(rho_s) = 1``.

    The population equation of the first basis state is replaced by the
    trace constraint; trace preservation makes it redundant.
    """
    d = L.space.dim
    null_dim, s = numerical_nullity(L, null_rtol)
    if null_dim != 1:
        raise SteadyStateError(f"steady state not unique (numerical nullity {null_dim})")

    A = np.array(L.matrix, copy=True)
    A[0, :] = vectorize_matrix(np.eye(d)).conj()
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    x = sla.solve(A, b)

    rho = devectorize(x, L.space).hermitized()
    rho = rho * (1.0 / rho.trace().real)
    residual = float(np.linalg.norm(L.matrix @ vectorize_matrix(rho.matrix)))
    if residual > RESIDUAL_RTOL * s[0]:
        raise SteadyStateError(f"steady-state residual {residual:.3g} exceeds {RESIDUAL_RTOL:g} * ||L||")
    min_eig = rho.min_eigenvalue()
    if min_eig < POSITIVITY_TOL:
        raise SteadyStateError(f"non-physical steady state (min eigenvalue {min_eig:.3g})")
    return NessResult(rho, residual, null_dim, min_eig)
