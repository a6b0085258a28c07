"""Nonequilibrium spin-boson model: two displaced diabats on one nuclear coordinate.

Each diabat ``k`` carries ``-(Omega_k/2) d^2/dq^2 + (Omega_k/2)(q - q_k)^2 + eps_k``
and the diabats are coupled by ``lambda``. A radiative bath drives the
electronic transition and one phonon bath per diabat relaxes the nuclear
motion. Work happens in a truncated basis built from eigenstates of the
Hamiltonian localized left and right of the diabat crossing ``q_X``, which
keeps the left/right projectors exact block projectors.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .errors import DynamicsError, ValidationError
from .ness import solve_ness
from .operators import (HilbertSpace, Operator, SuperOperator, assemble_liouvillian, bose_occupation,
                        lindblad_pair)
from .partition import Partition, liouville_partition, populations, validate
from .rates import rate_matrix

log = logging.getLogger(__name__)

DESK_CUT_QUANTA = 25
FULL_CUT_QUANTA = 50
FULL_N_BASIS = 400
TIE_TOL = 1e-12
SERIES_TOL = 1e-14
SERIES_MAX_TERMS = 200


@dataclass(frozen=True)
class SBParams:
    """Model parameters in atomic units, temperatures in kelvin.

    ``e_cut=None`` selects ``DESK_CUT_QUANTA * Omega_2 + eps_2 - eps_1``.
    """

    Omega_1: float = 2e-3
    Omega_2: float = 4e-4
    eps_1: float = 0.0
    eps_2: float = 0.012
    q_1: float = -3.0
    q_2: float = 3.0
    lam: float = 2e-5
    Gamma_rad: float = 1e-6
    Gamma_ph1: float = 1e-9
    Gamma_ph2: float = 1e-9
    T_rad: float = 5800.0
    T_ph: float = 300.0
    alpha_att: float = 1.0
    n_basis: int = 128
    e_cut: float | None = None
    q_rad: float = -3.0

    def __post_init__(self):
        if self.Omega_1 <= 0 or self.Omega_2 <= 0:
            raise ValidationError("diabat frequencies must be positive")
        for name in ("Gamma_rad", "Gamma_ph1", "Gamma_ph2", "alpha_att"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.T_rad <= 0 or self.T_ph <= 0:
            raise ValidationError("temperatures must be positive")
        if self.n_basis < 2:
            raise ValidationError("n_basis must be at least 2")
        if self.cutoff <= min(self.eps_1, self.eps_2):
            raise ValidationError("e_cut lies below both diabat minima")

    @classmethod
    def full_scale(cls, **changes) -> SBParams:
        base = cls(**changes)
        if "n_basis" not in changes:
            base = dataclasses.replace(base, n_basis=FULL_N_BASIS)
        if "e_cut" not in changes:
            base = dataclasses.replace(base, e_cut=FULL_CUT_QUANTA * base.Omega_2 + base.eps_2 - base.eps_1)
        return base

    @property
    def cutoff(self) -> float:
        if self.e_cut is not None:
            return self.e_cut
        return DESK_CUT_QUANTA * self.Omega_2 + self.eps_2 - self.eps_1

    def replace(self, **changes) -> SBParams:
        return dataclasses.replace(self, **changes)

    def potential(self, k: int, q):
        omega, qk, ek = ((self.Omega_1, self.q_1, self.eps_1) if k == 1 else (self.Omega_2, self.q_2, self.eps_2))
        return 0.5 * omega * (np.asarray(q) - qk) ** 2 + ek


@dataclass(frozen=True, eq=False)
class NuclearBasis:
    """Matrices of the unit-frequency oscillator basis centred at q = 0."""

    n: int
    q: np.ndarray
    q2: np.ndarray
    d2: np.ndarray
    a: np.ndarray


def primitive_basis(n_basis: int) -> NuclearBasis:
    """Position, its square, the second derivative and the annihilation operator.

    ``q2`` and ``d2`` are the exact matrix elements of ``q^2`` and ``d^2/dq^2``
    in the truncated basis rather than products of truncated matrices.
    """
    if n_basis < 2:
        raise ValidationError("n_basis must be at least 2")
    n = np.arange(n_basis, dtype=float)
    a = np.diag(np.sqrt(n[1:]), 1)
    q = (a + a.T) / np.sqrt(2.0)
    off2 = np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0)) / 2.0
    band = np.diag(off2, 2) + np.diag(off2, -2)
    q2 = np.diag(n + 0.5) + band
    d2 = -np.diag(n + 0.5) + band
    for m in (a, q, q2, d2):
        m.setflags(write=False)
    return NuclearBasis(n_basis, q, q2, d2, a)


def dividing_surface(params: SBParams) -> float:
    """Crossing point of the two diabats strictly between their minima."""
    p = params
    A = 0.5 * (p.Omega_1 - p.Omega_2)
    B = -(p.Omega_1 * p.q_1 - p.Omega_2 * p.q_2)
    C = 0.5 * (p.Omega_1 * p.q_1 ** 2 - p.Omega_2 * p.q_2 ** 2) + p.eps_1 - p.eps_2
    lo, hi = min(p.q_1, p.q_2), max(p.q_1, p.q_2)

    if A == 0.0:
        roots = [] if B == 0.0 else [-C / B]
    else:
        disc = B * B - 4.0 * A * C
        if disc < 0:
            roots = []
        else:
            s = np.sqrt(disc)
            t = -0.5 * (B + np.copysign(s, B))
            roots = [t / A] + ([C / t] if t != 0 else [])
    inside = sorted({r for r in roots if lo < r < hi})
    if len(inside) != 1:
        raise ValidationError("no crossing between minima" if not inside else "diabats cross twice between minima")
    qx = inside[0]
    f = lambda x: A * x * x + B * x + C  # noqa: E731
    for _ in range(3):
        df = 2.0 * A * qx + B
        if df == 0:
            break
        qx -= f(qx) / df
    return float(qx)


def half_space_projectors(q: np.ndarray, q_x: float) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the eigenvectors of ``q`` below / above ``q_x``."""
    w, U = np.linalg.eigh(q)
    ties = np.abs(w - q_x) <= TIE_TOL
    if np.any(ties):
        log.warning("%d position eigenvalue(s) at the dividing surface assigned to the left", int(ties.sum()))
    left = (w < q_x) | ties
    P_L = U[:, left] @ U[:, left].T
    return P_L, np.eye(q.shape[0]) - P_L


def _round_projector(m: np.ndarray) -> np.ndarray:
    h = 0.5 * (m + m.conj().T)
    w, U = np.linalg.eigh(h)
    keep = U[:, w > 0.5]
    return keep @ keep.conj().T


@dataclass(frozen=True, eq=False)
class _Truncation:
    transform: np.ndarray
    labels: tuple[str, ...]
    energies: np.ndarray
    q_x: float
    h_prim: np.ndarray
    pl_prim: np.ndarray
    basis: NuclearBasis


def _basis_key(p: SBParams) -> tuple:
    return (p.Omega_1, p.Omega_2, p.eps_1, p.eps_2, p.q_1, p.q_2, p.lam, p.n_basis, p.cutoff)


@lru_cache(maxsize=8)
def _truncation(key: tuple) -> _Truncation:
    O1, O2, e1, e2, q1, q2, lam, n_basis, cut = key
    p = SBParams(Omega_1=O1, Omega_2=O2, eps_1=e1, eps_2=e2, q_1=q1, q_2=q2, lam=lam, n_basis=n_basis, e_cut=cut)
    nb = primitive_basis(n_basis)
    eye = np.eye(n_basis)

    def diabat(omega, qk, ek):
        return -0.5 * omega * nb.d2 + 0.5 * omega * (nb.q2 - 2.0 * qk * nb.q + qk * qk * eye) + ek * eye

    E1, E2 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    H = np.kron(E1, diabat(O1, q1, e1)) + np.kron(E2, diabat(O2, q2, e2)) + lam * np.kron(sx, eye)

    q_x = dividing_surface(p)
    pl_nuc, _ = half_space_projectors(nb.q, q_x)
    pl = np.kron(np.eye(2), pl_nuc)

    blocks, labels, energies = [], [], []
    for side, P in (("L", pl), ("R", np.eye(2 * n_basis) - pl)):
        w, U = np.linalg.eigh(P)
        sub = U[:, w > 0.5]
        e, c = np.linalg.eigh(sub.T @ H @ sub)
        keep = e < cut
        blocks.append(sub @ c[:, keep])
        energies.extend(e[keep])
        labels.extend(f"{side}{i}" for i in range(int(keep.sum())))
    V = np.hstack(blocks)
    if V.shape[1] < 4:
        raise ValidationError(f"cutoff too aggressive: only {V.shape[1]} states retained")
    S = V.T @ V
    if np.linalg.cond(S) > 1e8:
        raise ValidationError("ill-conditioned truncation")
    w, U = np.linalg.eigh(S)
    V = V @ (U @ np.diag(w ** -0.5) @ U.T)
    for m in (V, H, pl):
        m.setflags(write=False)
    return _Truncation(V, tuple(labels), np.array(energies), q_x, H, pl, nb)


@dataclass(frozen=True, eq=False)
class SBWorkspace:
    params: SBParams
    space: HilbertSpace
    H: Operator
    L: SuperOperator
    P_L: Operator
    P_R: Operator
    q_x: float
    E_rad: float
    n_rad: float
    n_ph: tuple[float, float]
    partitions: dict[str, Partition] = field(repr=False)
    transform: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    def truncate(self, m: np.ndarray) -> Operator:
        """Congruence-transform a primitive-space matrix into the working basis."""
        V = self.transform
        return Operator(self.space, V.conj().T @ m @ V)

    def electronic(self, k: int) -> Operator:
        """Truncated image of ``|k><k|`` on the electronic factor."""
        e = np.zeros((2, 2))
        e[k - 1, k - 1] = 1.0
        return self.truncate(np.kron(e, np.eye(self.params.n_basis)))

    def dipole(self, strength: float = 1.0) -> Operator:
        """Truncated ``strength * (|2><1| + |1><2|)``."""
        sx = np.array([[0.0, 1.0], [1.0, 0.0]])
        return self.truncate(strength * np.kron(sx, np.eye(self.params.n_basis)))


def radiative_gap(params: SBParams) -> float:
    """Diabat energy gap at the radiative reference position."""
    return float(params.potential(2, params.q_rad) - params.potential(1, params.q_rad))


def build_truncated(params: SBParams | None = None) -> SBWorkspace:
    params = SBParams() if params is None else params
    tr = _truncation(_basis_key(params))
    V = tr.transform
    d = V.shape[1]
    space = HilbertSpace(d, tr.labels)
    nb = tr.basis.n
    eye = np.eye(nb)

    def trunc(m):
        return Operator(space, V.T @ m @ V)

    H = trunc(tr.h_prim).hermitized()
    pl = _round_projector(V.T @ tr.pl_prim @ V)
    P_L = Operator(space, pl)
    P_R = Operator(space, np.eye(d) - pl)

    E_rad = radiative_gap(params)
    n_rad = params.alpha_att * bose_occupation(E_rad, params.T_rad)
    n_ph = (bose_occupation(params.Omega_1, params.T_ph), bose_occupation(params.Omega_2, params.T_ph))

    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    S_rad = trunc(np.kron(lower, eye))
    dissipators = [lindblad_pair(S_rad, params.Gamma_rad, n_rad)]
    for k, (gamma, qk, n) in enumerate(((params.Gamma_ph1, params.q_1, n_ph[0]),
                                        (params.Gamma_ph2, params.q_2, n_ph[1])), start=1):
        e = np.zeros((2, 2))
        e[k - 1, k - 1] = 1.0
        S = trunc(np.kron(e, tr.basis.a - qk / np.sqrt(2.0) * eye))
        dissipators.append(lindblad_pair(S, gamma, n))
    L = assemble_liouvillian(H, dissipators)

    lr = validate([P_L, P_R], ("L", "R"), tol=1e-9)
    # |1><1| (x) P_L commutes with the block structure, so its image is a
    # sub-projector of the truncated P_L once rounded
    pg = _round_projector(V.T @ np.kron(np.diag([1.0, 0.0]), tr.pl_prim[:nb, :nb]) @ V)
    P_g = Operator(space, pg)
    P_1 = Operator(space, pl - pg)
    three = validate([P_g, P_1, P_R], ("g", "1", "2"), tol=1e-9)

    return SBWorkspace(params, space, H, L, P_L, P_R, tr.q_x, E_rad, n_rad, n_ph,
                       {"left-right": lr, "three-component": three}, V, tr.energies)


def three_component_partition(ws: SBWorkspace) -> Partition:
    return ws.partitions["three-component"]


@dataclass(frozen=True)
class SBRates:
    """Rates of one spin-boson steady state, in atomic units."""

    forward_rate: float
    backward_rate: float
    transferred_population: float
    k_1g: float | None = None
    k_21: float | None = None


def steady_rates(ws: SBWorkspace, three_component: bool = True, route: str = "linear-solve") -> SBRates:
    """Left-to-right NESS rates and, optionally, the three-component rates."""
    rho = solve_ness(ws.L).rho_s
    lr = liouville_partition(ws.partitions["left-right"], rho)
    k = rate_matrix(ws.L, lr, route)
    k_1g = k_21 = None
    if three_component:
        k3 = rate_matrix(ws.L, liouville_partition(ws.partitions["three-component"], rho), route)
        k_1g, k_21 = k3.rate("1", "g"), k3.rate("2", "1")
    return SBRates(k.rate("R", "L"), k.rate("L", "R"), float(lr.steady_populations[1]), k_1g, k_21)


@dataclass(frozen=True, eq=False)
class VerticalExcitation:
    rho: Operator
    rho_s: Operator
    excitation_energy: float
    promoted_population: float
    n_terms: int

    @property
    def energy_per_promoted(self) -> float:
        return self.excitation_energy / self.promoted_population


def vertical_excitation(ws: SBWorkspace, alpha_dip: float = 0.45, rho_s: Operator | None = None) -> VerticalExcitation:
    """Apply the dipole kick ``exp(-i mu) rho_s exp(i mu)`` to the dark steady state.

    The kick is summed as the nested-commutator series
    ``sum_k (-i)^k / k! [mu, [mu, ... rho_s]]``.
    """
    if ws.params.Gamma_rad != 0:
        raise ValidationError("vertical excitation requires the dark model (Gamma_rad = 0)")
    if rho_s is None:
        rho_s = solve_ness(ws.L).rho_s
    mu = ws.dipole(alpha_dip).matrix
    rho0 = rho_s.matrix
    total = rho0.copy()
    term = rho0
    for k in range(1, SERIES_MAX_TERMS + 1):
        term = (-1j / k) * (mu @ term - term @ mu)
        total = total + term
        if np.linalg.norm(term) <= SERIES_TOL:
            break
    else:
        raise DynamicsError(f"vertical-excitation series not converged in {SERIES_MAX_TERMS} terms")
    rho = Operator(ws.space, total).hermitized()
    rho = rho * (1.0 / rho.trace().real)
    diff = rho.matrix - rho0
    energy = float(np.trace(ws.H.matrix @ diff).real)
    promoted = float(np.trace(ws.electronic(2).matrix @ diff).real)
    return VerticalExcitation(rho, rho_s, energy, promoted, k)


@dataclass(frozen=True)
class TransferFit:
    rate: float
    plateau: float
    window: float
    residual: float


def fit_transfer_rate(times, p_r, n_windows: int = 24) -> TransferFit:
    """Single-exponential rise ``p_inf - (p_inf - p_0) exp(-k t)`` of a population.

    ``p_inf`` is the mean over the second half of the record. The fit is
    repeated over windows ``[0, t_w]`` and the window with the smallest
    normalized RMS residual wins.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(p_r, dtype=float)
    plateau = float(y[t >= 0.5 * t[-1]].mean())
    amp = plateau - y[0]
    if abs(amp) <= 1e-14:
        raise DynamicsError("population does not change; no transfer rate to fit")
    u = (plateau - y) / amp
    reached = np.nonzero(u <= 0.5)[0]
    if reached.size == 0 or reached[0] == 0:
        raise DynamicsError("population never completes half of its rise")
    t_half = t[reached[0]]
    ends = np.unique(np.searchsorted(t, np.geomspace(2.0 * t_half, 0.5 * t[-1], n_windows)))
    best = None
    for j in ends:
        if j < 3:
            continue
        tw, uw = t[: j + 1], u[: j + 1]

        def cost(logk):
            return float(np.mean((uw - np.exp(-np.exp(logk) * tw)) ** 2))

        k0 = np.log(np.log(2.0) / t_half)
        res = minimize_scalar(cost, bounds=(k0 - 6.0, k0 + 6.0), method="bounded")
        rms = float(np.sqrt(res.fun))
        if best is None or rms < best.residual:
            best = TransferFit(float(np.exp(res.x)), plateau, float(t[j]), rms)
    if best is None:
        raise DynamicsError("time grid too coarse to fit a transfer rate")
    return best


def vertical_excitation_rate(ws: SBWorkspace, alpha_dip: float = 0.45, t_max: float | None = None,
                             n_times: int = 2001) -> tuple[TransferFit, VerticalExcitation]:
    """Left-to-right transfer rate after a vertical excitation of the dark state."""
    from .dynamics import propagate

    ve = vertical_excitation(ws, alpha_dip)
    if t_max is None:
        t_max = 10.0 * 2.0 * np.pi / min(ws.params.Omega_1, ws.params.Omega_2)
    times = np.linspace(0.0, t_max, n_times)
    traj = propagate(ws.L, ve.rho, times, ws.partitions["left-right"])
    return fit_transfer_rate(times, traj.p[1]), ve


def dark_rate(params: SBParams) -> float:
    """Left-to-right NESS rate with the radiative bath switched off."""
    return steady_rates(build_truncated(params.replace(Gamma_rad=0.0)), three_component=False).forward_rate


def sweep(params: SBParams, name: str, values, three_component: bool = True) -> list[dict]:
    """Steady rates over a grid of one parameter, in grid order."""
    rows = []
    for v in values:
        ws = build_truncated(params.replace(**{name: v}))
        r = steady_rates(ws, three_component)
        rows.append({name: float(v), **dataclasses.asdict(r)})
    return rows


__all__ = [
    "SBParams", "NuclearBasis", "SBWorkspace", "SBRates", "VerticalExcitation", "TransferFit",
    "primitive_basis", "dividing_surface", "half_space_projectors", "build_truncated",
    "three_component_partition", "steady_rates", "vertical_excitation", "vertical_excitation_rate",
    "fit_transfer_rate", "dark_rate", "radiative_gap", "sweep", "populations",
]
