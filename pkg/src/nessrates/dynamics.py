"""Population dynamics under a Liouvillian and tests of rate-law behaviour.

A trajectory records component populations ``p(t)`` and their exact time
derivatives ``pdot(t) = C^dag L x(t)``. Against a rate matrix ``k`` the
derivative splits into a Markovian part ``M1 = k p`` and a memory part
``M2 = pdot - k p``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import trapezoid

from .errors import DimensionError, DynamicsError, ValidationError
from .operators import Operator, SuperOperator, vectorize
from .partition import LiouvillePartition, Partition
from .rates import RateMatrix, restricted_complement_operator

EIG_MAX_DIM = 1600
EIG_MAX_COND = 1e8
EIG_RECON_RTOL = 1e-10
FIT_RTOL = 1e-12
ZERO_RTOL = 1e-14
UNSTABLE_RTOL = 1e-10
MARKOV_RATIO = 0.1
SETTLE_TOL = 1e-6
TRACE_DRIFT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Trajectory:
    names: tuple[str, ...]
    times: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    pdot: np.ndarray = field(repr=False)
    method: str = "eig"

    def window(self, t_start: float = 0.0, t_end: float | None = None) -> np.ndarray:
        t_end = self.times[-1] if t_end is None else t_end
        return (self.times >= t_start) & (self.times <= t_end)


def _eig_propagate(Lm, x0, C, times):
    w, V = np.linalg.eig(Lm)
    if np.linalg.cond(V) > EIG_MAX_COND:
        return None
    c = np.linalg.solve(V, x0)
    if np.linalg.norm(V @ c - x0) > EIG_RECON_RTOL * np.linalg.norm(x0):
        return None
    CV = C.conj().T @ V
    phase = np.exp(np.outer(w, times)) * c[:, None]
    return (CV @ phase).real, (CV @ (w[:, None] * phase)).real


def _expm_propagate(Lm, x0, C, times):
    Ch = C.conj().T
    CL = Ch @ Lm
    p = np.empty((C.shape[1], times.size))
    pdot = np.empty_like(p)
    props: dict[float, np.ndarray] = {}
    x = sla.expm(Lm * times[0]) @ x0 if times[0] != 0 else x0.copy()
    for i, t in enumerate(times):
        if i:
            dt = float(t - times[i - 1])
            key = round(dt, 12)
            if key not in props:
                props[key] = sla.expm(Lm * dt)
            x = props[key] @ x
        p[:, i] = (Ch @ x).real
        pdot[:, i] = (CL @ x).real
    return p, pdot


def propagate(L: SuperOperator, rho0: Operator, times, partition: Partition | LiouvillePartition,
              method: str = "auto") -> Trajectory:
    """Populations and exact derivatives on ``times`` starting from ``rho0`` at t = 0.

    ``method`` is ``"eig"`` (spectral decomposition of L), ``"expm"`` (matrix
    exponential per distinct step) or ``"auto"``, which tries the spectral
    route for small, well-conditioned generators.
    """
    if isinstance(partition, LiouvillePartition):
        partition = partition.partition
    if rho0.space != L.space or partition.space != L.space:
        raise DimensionError("state, partition and Liouvillian live on different spaces")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValidationError("times must be a strictly increasing, non-negative grid of at least two points")
    if method not in ("auto", "eig", "expm"):
        raise ValidationError(f"unknown propagation method {method!r}")

    x0 = vectorize(rho0)
    C = partition.constraint_matrix()
    out = None
    if method == "eig" or (method == "auto" and L.matrix.shape[0] <= EIG_MAX_DIM):
        out = _eig_propagate(L.matrix, x0, C, times)
        if out is None and method == "eig":
            raise DynamicsError("propagation failed: Liouvillian not diagonalizable to working precision")
        used = "eig"
    if out is None:
        out = _expm_propagate(L.matrix, x0, C, times)
        used = "expm"
    drift = float(np.max(np.abs(out[0].sum(axis=0) - rho0.trace().real)))
    if not np.all(np.isfinite(out[0])) or drift > TRACE_DRIFT_TOL:
        raise DynamicsError(f"propagation failed: trace drift {drift:.3g}")
    return Trajectory(partition.names, times, out[0], out[1], used)


def m_split(traj: Trajectory, k: RateMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Markovian ``k p`` and memory ``pdot - k p`` parts of the derivative."""
    if tuple(k.names) != traj.names:
        raise DimensionError("rate matrix and trajectory describe different components")
    m1 = k.k @ traj.p
    return m1, traj.pdot - m1


def m_ratio(traj: Trajectory, k: RateMatrix) -> np.ndarray:
    """``|M2(t)|_inf / |M1(t)|_inf`` per grid time (inf where M1 vanishes)."""
    m1, m2 = m_split(traj, k)
    a, b = np.max(np.abs(m2), axis=0), np.max(np.abs(m1), axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(b > 0, a / np.where(b > 0, b, 1.0), np.inf)


@dataclass(frozen=True)
class TimescaleReport:
    t1: float
    t2: float
    kappa: complex
    t_s: float | None = None

    @property
    def markovian(self) -> bool:
        """True when memory decays well before the slow kinetics (``t2 < 0.1 t1``)."""
        return self.t2 < MARKOV_RATIO * self.t1


def timescales(k: RateMatrix, L: SuperOperator, lp: LiouvillePartition,
               traj: Trajectory | None = None) -> TimescaleReport:
    """Slow relaxation time ``t1``, memory decay time ``t2`` and, given a trajectory, ``t_s``.

    ``t1`` comes from the slowest nonzero eigenvalue of ``k`` and ``t2`` from the
    least negative eigenvalue ``kappa`` of QLQ on range(Q). Eigenvalues of ``k``
    with ``|Re| <= 1e-14 * scale`` count as the structural zero.
    """
    ev = k.eigenvalues()
    scale = max(k.scale(), 1e-300)
    nonzero = ev[np.abs(ev.real) > ZERO_RTOL * scale]
    if nonzero.size == 0:
        raise DynamicsError("rate matrix has no nonzero eigenvalue")
    t1 = 1.0 / abs(nonzero[np.argmin(np.abs(nonzero.real))].real)

    mev = np.linalg.eigvals(restricted_complement_operator(L, lp))
    kappa = mev[np.argmax(mev.real)]
    if kappa.real > UNSTABLE_RTOL * np.max(np.abs(mev)):
        raise DynamicsError(f"unstable generator: complement eigenvalue with real part {kappa.real:.3g}")
    if kappa.real == 0:
        raise DynamicsError("complement generator has a purely imaginary eigenvalue; t2 undefined")
    t2 = 1.0 / abs(kappa.real)

    t_s = None if traj is None else settling_time(traj, lp.steady_populations)
    return TimescaleReport(float(t1), float(t2), complex(kappa), t_s)


def settling_time(traj: Trajectory, p_s, tol: float = SETTLE_TOL) -> float | None:
    """First grid time after which ``|p(t) - p_s|_inf <= tol`` holds; None if never."""
    dev = np.max(np.abs(traj.p - np.asarray(p_s, dtype=float)[:, None]), axis=0)
    bad = np.nonzero(dev > tol)[0]
    if bad.size == 0:
        return float(traj.times[0])
    if bad[-1] + 1 < traj.times.size:
        return float(traj.times[bad[-1] + 1])
    return None


def relative_error(traj: Trajectory, k: RateMatrix, t_start: float = 0.0, t_end: float | None = None) -> float:
    """``2 int|pdot - k p| / int|pdot + k p|`` over the grid points in the window."""
    m = traj.window(t_start, t_end)
    if m.sum() < 2:
        raise DynamicsError("fewer than two grid points inside the integration window")
    t = traj.times[m]
    m1, m2 = m_split(traj, k)
    num = trapezoid(np.linalg.norm(m2[:, m], axis=0), t)
    den = trapezoid(np.linalg.norm(traj.pdot[:, m] + m1[:, m], axis=0), t)
    if den == 0:
        raise DynamicsError("populations are stationary over the window")
    return float(2.0 * num / den)


@dataclass(frozen=True, eq=False)
class RateFit:
    k: np.ndarray = field(repr=False)
    gram_cond: float
    rank: int
    basis: np.ndarray = field(repr=False, default=None)

    def eigenvalues(self) -> np.ndarray:
        ev = np.linalg.eigvals(self.k)
        return ev[np.argsort(-ev.real, kind="stable")]

    def resolved_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the fit restricted to the span of the data.

        Outside range(G) the pseudo-inverse sets the fit to zero, so only
        ``rank`` eigenvalues carry information.
        """
        U = self.basis
        ev = np.linalg.eigvals(U.T @ self.k @ U)
        return ev[np.argsort(-ev.real, kind="stable")]

    def slow_eigenvalue(self) -> complex:
        """Slowest resolved relaxation eigenvalue.

        The fit does not enforce probability conservation, so the stationary
        mode shows up as the resolved eigenvalue of smallest magnitude rather
        than an exact zero; the next one is the slow relaxation.
        """
        ev = self.resolved_eigenvalues()
        return complex(ev[np.argsort(np.abs(ev.real), kind="stable")[1]])


def fit_rate_matrix(traj: Trajectory, t_start: float = 0.0, t_end: float | None = None) -> RateFit:
    """Least-squares rate matrix ``A G^+`` with ``A = int pdot p^T`` and ``G = int p p^T``.

    The Gram matrix is nearly singular because total probability is
    conserved, so the pseudo-inverse drops directions below ``FIT_RTOL``.
    """
    m = traj.window(t_start, t_end)
    if m.sum() < 2:
        raise DynamicsError("fewer than two grid points inside the fitting window")
    t, p, pd = traj.times[m], traj.p[:, m], traj.pdot[:, m]
    A = trapezoid(pd[:, None, :] * p[None, :, :], t, axis=2)
    G = trapezoid(p[:, None, :] * p[None, :, :], t, axis=2)
    w, U = np.linalg.eigh(G)
    w, U = w[::-1], U[:, ::-1]
    rank = int(np.sum(w > FIT_RTOL * w[0])) if w[0] > 0 else 0
    if rank < 2:
        raise DynamicsError("degenerate population trajectories")
    cond = float(w[0] / w[-1]) if w[-1] > 0 else np.inf
    return RateFit(A @ np.linalg.pinv(G, rcond=FIT_RTOL, hermitian=True), cond, rank, U[:, :rank])


def perturbed_state(rho_s: Operator, target: Operator, eta: float) -> Operator:
    """``(1 - eta) rho_s + eta * target``, with ``target`` normalized to unit trace."""
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"eta must lie in [0, 1], got {eta}")
    tr = target.trace().real
    if tr <= 0:
        raise ValidationError("target state has non-positive trace")
    return rho_s * (1.0 - eta) + target * (eta / tr)


@dataclass(frozen=True, eq=False)
class MarkovReport:
    relative_error: float
    fit: RateFit
    timescales: TimescaleReport
    t_final: float
    trajectory: Trajectory = field(repr=False)


def markov_analysis(L: SuperOperator, lp: LiouvillePartition, k: RateMatrix, rho0: Operator,
                    dt: float, tf_factor: float = 5.0) -> MarkovReport:
    """Propagate from ``rho0`` up to ``tf_factor * t1`` and score the rate law after ``t2``."""
    ts = timescales(k, L, lp)
    t_final = tf_factor * ts.t1
    if dt <= 0 or dt >= t_final:
        raise ValidationError(f"time step {dt:g} must lie in (0, {t_final:g})")
    times = np.arange(0.0, t_final + 0.5 * dt, dt)
    traj = propagate(L, rho0, times, lp)
    err = relative_error(traj, k, ts.t2, t_final)
    fit = fit_rate_matrix(traj, ts.t2, t_final)
    ts = TimescaleReport(ts.t1, ts.t2, ts.kappa, settling_time(traj, lp.steady_populations))
    return MarkovReport(err, fit, ts, t_final, traj)
