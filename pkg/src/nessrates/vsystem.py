"""Three-level V-system: ground state g and coupled excited states 1, 2.

Baths (each dissipator carries an explicit factor 2 on its rate):

* hot bath ``|k><g|`` with rate ``2 Gamma_Hk`` (k = 1, 2)
* cold bath ``|g><k|`` with rate ``2 Gamma_Ck``
* excited-manifold transfer ``|2><1|`` (``2 Gamma_Df``) and ``|1><2|`` (``2 Gamma_Db``)

Closed-form rates for the standard ``{g, 1, 2}`` and grouped ``{A = g+1, 2}``
partitions are provided alongside the numerical model.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import RateError, ValidationError
from .operators import HilbertSpace, Operator, SuperOperator, assemble_liouvillian, ket_bra, lindblad_pair
from .partition import Partition

LABELS = ("g", "1", "2")
GAMMA_FIELDS = ("Gamma_H1", "Gamma_H2", "Gamma_C1", "Gamma_C2", "Gamma_Df", "Gamma_Db")


@dataclass(frozen=True)
class VParams:
    """Model parameters in atomic units; defaults are the reference set."""

    eps_g: float = 0.0
    eps_1: float = 0.02
    eps_2: float = 0.012
    J: float = 2e-5
    Gamma_H1: float = 1.5e-6
    Gamma_H2: float = 0.0
    Gamma_C1: float = 4.5e-6
    Gamma_C2: float = 1e-9
    Gamma_Df: float = 1e-9
    Gamma_Db: float = 0.0

    def __post_init__(self):
        for name in GAMMA_FIELDS:
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if max(self.Gamma_C1, self.Gamma_C2, self.Gamma_Df, self.Gamma_Db) <= 0:
            raise ValidationError("at least one cold-bath or excited-manifold rate must be positive")

    def replace(self, **changes) -> VParams:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class VDerived:
    beta: float
    gamma_star: float
    delta: float
    r: float | None = None


@dataclass(frozen=True, eq=False)
class VSystem:
    params: VParams
    space: HilbertSpace
    H: Operator
    L: SuperOperator
    standard: Partition
    grouped: Partition


def space() -> HilbertSpace:
    return HilbertSpace.from_labels(LABELS)


def hamiltonian(params: VParams) -> Operator:
    sp = space()
    h = np.diag([params.eps_g, params.eps_1, params.eps_2]).astype(complex)
    h[1, 2] = h[2, 1] = params.J
    return Operator(sp, h)


def dissipators(params: VParams) -> list[SuperOperator]:
    sp = space()
    channels = [
        (ket_bra(sp, "1", "g"), params.Gamma_H1),
        (ket_bra(sp, "2", "g"), params.Gamma_H2),
        (ket_bra(sp, "g", "1"), params.Gamma_C1),
        (ket_bra(sp, "g", "2"), params.Gamma_C2),
        (ket_bra(sp, "2", "1"), params.Gamma_Df),
        (ket_bra(sp, "1", "2"), params.Gamma_Db),
    ]
    return [lindblad_pair(S, 2.0 * g, 0.0) for S, g in channels]


def standard_partition() -> Partition:
    return Partition.from_labels(space())


def grouped_partition() -> Partition:
    return Partition.from_groups(space(), {"A": ["g", "1"], "2": ["2"]})


def build(params: VParams | None = None) -> VSystem:
    params = VParams() if params is None else params
    H = hamiltonian(params)
    L = assemble_liouvillian(H, dissipators(params))
    return VSystem(params, H.space, H, L, standard_partition(), grouped_partition())


def derived(params: VParams, rho_s: Operator | None = None) -> VDerived:
    """Coherence-mediated rate beta, dephasing width, splitting and ground share r."""
    gamma_star = params.Gamma_C1 + params.Gamma_C2 + params.Gamma_Df + params.Gamma_Db
    delta = params.eps_2 - params.eps_1
    denom = gamma_star ** 2 + delta ** 2
    if denom == 0:
        if params.J != 0:
            raise RateError("beta undefined: zero dephasing width and degenerate excited states")
        beta = 0.0
    else:
        beta = params.J ** 2 * gamma_star / denom
    r = None
    if rho_s is not None:
        gg = rho_s.matrix[0, 0].real
        s11 = rho_s.matrix[1, 1].real
        if gg + s11 <= 0:
            raise RateError("ground share undefined: group A is unpopulated")
        r = float(gg / (gg + s11))
    return VDerived(beta, gamma_star, delta, r)


def analytic_rates_standard(params: VParams) -> tuple[float, float]:
    """``(k21, k12)`` for the ``{g, 1, 2}`` partition."""
    beta = derived(params).beta
    return 2.0 * (beta + params.Gamma_Df), 2.0 * (beta + params.Gamma_Db)


def analytic_rates_grouped(params: VParams, r: float) -> tuple[float, float]:
    """``(k2A, kA2)`` between group A = {g, 1} and state 2."""
    if not 0.0 <= r <= 1.0:
        raise ValidationError(f"ground share r must lie in [0, 1], got {r}")
    p = params
    beta = derived(p).beta
    bf, bb = beta + p.Gamma_Df, beta + p.Gamma_Db
    denom = r * bf + p.Gamma_H1 + (1.0 - r) * p.Gamma_H2 + p.Gamma_C1
    if denom == 0:
        raise RateError("grouped rate undefined: vanishing denominator")
    k2A = 2.0 * ((p.Gamma_H1 + p.Gamma_H2) * bf + p.Gamma_H2 * p.Gamma_C1) / denom
    kA2 = 2.0 * ((bf + p.Gamma_H1 + p.Gamma_C1) * p.Gamma_C2 + bb * (p.Gamma_H1 + p.Gamma_H2 + p.Gamma_C1)) / denom
    return k2A, kA2


def grouped_limits(params: VParams) -> dict[str, float]:
    """Bounding values of the grouped rates for strong and vanishing pumping."""
    p = params
    beta = derived(p).beta
    return {
        "k2A_H1_inf": 2.0 * (beta + p.Gamma_Df),
        "k2A_H2_inf": 2.0 * (beta + p.Gamma_Df + p.Gamma_C1),
        "kA2_H1_inf": 2.0 * (beta + p.Gamma_Db + p.Gamma_C2),
        "kA2_H2_inf": 2.0 * (beta + p.Gamma_Db),
        "kA2_dark": 2.0 * (p.Gamma_C2 + (beta + p.Gamma_Db) * p.Gamma_C1 / (beta + p.Gamma_Df + p.Gamma_C1)),
    }


def steady_coherence(params: VParams, rho_s: Operator) -> complex:
    """Closed-form ``<1|rho_s|2>`` given the steady excited populations."""
    g = derived(params)
    p11, p22 = rho_s.matrix[1, 1].real, rho_s.matrix[2, 2].real
    return 1j * params.J * (p11 - p22) / (g.gamma_star - 1j * g.delta)


def sweep_beta(deltas, gammas, params: VParams | None = None) -> np.ndarray:
    """beta on a grid of splittings and ``Gamma = Gamma_C2 = Gamma_Df``.

    Returns an array of shape ``(len(deltas), len(gammas))``. The splitting is
    applied by shifting ``eps_2`` relative to ``eps_1``.
    """
    params = VParams() if params is None else params
    out = np.empty((len(deltas), len(gammas)))
    for i, dlt in enumerate(deltas):
        for j, gam in enumerate(gammas):
            p = params.replace(eps_2=params.eps_1 + dlt, Gamma_C2=gam, Gamma_Df=gam)
            out[i, j] = derived(p).beta
    return out
