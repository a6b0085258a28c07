"""Steady-state transition rate matrices between network components.

For a partition with steady components ``varrho_n`` the rate matrix is

    k_mn = tr{P_m (1 - L (QLQ)^-1 Q) L[varrho_n]}

The complement response ``x_n = -(QLQ)^-1 Q L[varrho_n]`` (restricted to
range(Q)) is computed by one of two independent routes:

``direct``
    Explicit pseudo-inverse of QLQ expressed in an orthonormal basis of
    range(Q).
``linear-solve``
    Rank-revealing least squares on the full space, with range(Q) imposed by
    bordering QLQ with the constraints ``tr(P_m x) = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, RateError, ValidationError
from .operators import SuperOperator
from .partition import LiouvillePartition

ROUTES = ("direct", "linear-solve")
RANK_RTOL = 1e-12
SOLVE_RTOL = 1e-9
IMAG_RTOL = 1e-10
# backward error of an SVD least-squares solve, relative to |L| |x|
NOISE_RTOL = 1024 * np.finfo(float).eps
IMAG_NOISE = 64 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class RateMatrix:
    names: tuple[str, ...]
    k: np.ndarray = field(repr=False)
    route: str
    imag_residue: float = 0.0

    def __post_init__(self):
        k = np.array(self.k, dtype=float, copy=True)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] != len(self.names):
            raise DimensionError(f"rate matrix shape {k.shape} does not match {len(self.names)} names")
        k.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "names", tuple(self.names))

    def rate(self, to: str, frm: str) -> float:
        """``k[to, from]``: rate of transfer from component ``frm`` to ``to``."""
        return float(self.k[self.names.index(to), self.names.index(frm)])

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues sorted by real part, largest (closest to zero) first."""
        ev = np.linalg.eigvals(self.k)
        return ev[np.argsort(-ev.real, kind="stable")]

    def scale(self) -> float:
        return float(np.max(np.abs(self.k))) if self.k.size else 0.0


def _check_inputs(L: SuperOperator, lp: LiouvillePartition) -> None:
    if L.space != lp.space:
        raise DimensionError("Liouvillian and partition live on different spaces")


def restricted_complement_operator(L: SuperOperator, lp: LiouvillePartition) -> np.ndarray:
    """QLQ written in the orthonormal basis of range(Q)."""
    _check_inputs(L, lp)
    B = lp.complement_basis
    return B.conj().T @ lp.apply_q(L.matrix @ B)


def _complement_rhs(L: SuperOperator, lp: LiouvillePartition) -> np.ndarray:
    return -lp.apply_q(L.matrix @ lp.steady_vectors)


def _solve_direct(L: SuperOperator, lp: LiouvillePartition) -> np.ndarray:
    B = lp.complement_basis
    M = restricted_complement_operator(L, lp)
    U, s, Vh = sla.svd(M)
    keep = s > RANK_RTOL * s[0] if s.size else s.astype(bool)
    M_pinv = (Vh[keep].conj().T / s[keep]) @ U[:, keep].conj().T
    return B @ (M_pinv @ (B.conj().T @ _complement_rhs(L, lp)))


def _qlq_full(L: SuperOperator, lp: LiouvillePartition) -> np.ndarray:
    V, C = lp.steady_vectors, lp.constraint
    QL = lp.apply_q(L.matrix)
    return QL - (QL @ V) @ C.conj().T


def _solve_linear(L: SuperOperator, lp: LiouvillePartition) -> np.ndarray:
    d2, N = L.matrix.shape[0], lp.size
    C = lp.constraint
    K = np.zeros((d2 + N, d2 + N), dtype=complex)
    K[:d2, :d2] = _qlq_full(L, lp)
    # border scaled to the operator so gelsd sees a balanced matrix
    s = np.linalg.norm(K[:d2, :d2], 1) or 1.0
    K[:d2, d2:] = s * C
    K[d2:, :d2] = s * C.conj().T
    rhs = np.zeros((d2 + N, N), dtype=complex)
    rhs[:d2] = _complement_rhs(L, lp)
    sol, *_ = sla.lstsq(K, rhs, cond=RANK_RTOL, lapack_driver="gelsd")
    return sol[:d2]


def complement_response(L: SuperOperator, lp: LiouvillePartition, route: str = "linear-solve") -> np.ndarray:
    """All complement solutions ``x_n`` as the columns of a ``d^2 x N`` matrix.

    Each column solves ``QLQ x_n = -Q L[varrho_n]`` inside range(Q). If QLQ is
    singular on range(Q) the minimum-norm solution is returned, provided the
    system is still consistent.
    """
    _check_inputs(L, lp)
    if route == "direct":
        X = _solve_direct(L, lp)
    elif route == "linear-solve":
        X = _solve_linear(L, lp)
    else:
        raise ValidationError(f"unknown route {route!r}; expected one of {ROUTES}")

    rhs = _complement_rhs(L, lp)
    # QLQ x = QL x for x in range(Q)
    resid = lp.apply_q(L.matrix @ X) - rhs
    l_norm = np.linalg.norm(L.matrix, 1)
    for n in range(lp.size):
        bound = SOLVE_RTOL * np.linalg.norm(rhs[:, n])
        noise = NOISE_RTOL * l_norm * max(np.linalg.norm(X[:, n]), 1.0)
        r = np.linalg.norm(resid[:, n])
        if r > max(bound, noise):
            raise RateError(f"complement operator singular: residual {r:.3g} for component {lp.partition.names[n]!r}")
        leak = np.linalg.norm(X[:, n] - lp.apply_q(X[:, n]))
        if leak > SOLVE_RTOL * max(np.linalg.norm(X[:, n]), np.linalg.norm(lp.steady_vectors[:, n])):
            raise RateError(f"complement solution leaves range(Q) (defect {leak:.3g})")
    return X


def qlq_restricted_solve(L: SuperOperator, lp: LiouvillePartition, n: int, route: str = "linear-solve") -> np.ndarray:
    """Complement solution ``x_n`` for a single component index ``n``."""
    if not 0 <= n < lp.size:
        raise ValidationError(f"component index {n} out of range")
    return complement_response(L, lp, route)[:, n]


def rate_matrix(L: SuperOperator, lp: LiouvillePartition, route: str = "linear-solve") -> RateMatrix:
    X = complement_response(L, lp, route)
    Y = lp.steady_vectors + X
    kc = lp.constraint.conj().T @ (L.matrix @ Y)
    k = kc.real
    scale = np.max(np.abs(k)) if k.size else 0.0
    imag = float(np.max(np.abs(kc.imag))) if k.size else 0.0
    # rounding in L @ Y leaves an imaginary part of order eps * |L| * |Y|
    noise = IMAG_NOISE * np.linalg.norm(L.matrix, 1) * np.max(np.linalg.norm(Y, axis=0))
    if imag > max(IMAG_RTOL * scale, noise):
        raise RateError(f"non-real rate: imaginary residue {imag:.3g} against rate scale {scale:.3g}")
    return RateMatrix(lp.partition.names, k, route, imag)


def route_agreement(a: RateMatrix, b: RateMatrix) -> float:
    """Largest entrywise difference relative to the rate scale."""
    scale = max(a.scale(), b.scale())
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(a.k - b.k)) / scale)


@dataclass(frozen=True)
class BalanceReport:
    kp_inf: float
    column_sums: np.ndarray
    pair_flux: np.ndarray
    max_pair_flux: float


def balance_report(k: RateMatrix, p_s) -> BalanceReport:
    """Global-balance residual, column sums and pairwise net fluxes.

    ``pair_flux[m, n] = k_mn p_n - k_nm p_m`` is the net flow from ``n`` to
    ``m``; it vanishes under detailed balance but not in general at a NESS.
    """
    p = np.asarray(p_s, dtype=float)
    if p.shape != (len(k.names),):
        raise DimensionError("population vector does not match the rate matrix")
    flux = k.k * p[None, :]
    pair = flux - flux.T
    np.fill_diagonal(pair, 0.0)
    return BalanceReport(
        kp_inf=float(np.max(np.abs(k.k @ p))),
        column_sums=k.k.sum(axis=0),
        pair_flux=pair,
        max_pair_flux=float(np.max(np.abs(pair))),
    )
