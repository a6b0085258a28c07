"""Network components as Hilbert-space projectors and their Liouville-space images.

A partition is a complete, orthogonal set of Hermitian projectors ``P_n``.
Given a steady state ``rho_s`` each component gets a renormalized steady
density ``varrho_n = P_n rho_s P_n / tr(P_n rho_s)`` and a rank-one Liouville
projector ``Pi_n[B] = varrho_n tr(P_n B)``; ``Q = 1 - sum_n Pi_n`` is the
complement.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, PartitionError
from .operators import HilbertSpace, Operator, SuperOperator, projector, vectorize

PARTITION_TOL = 1e-10
EPS_POP = 1e-12


@dataclass(frozen=True, eq=False)
class Partition:
    space: HilbertSpace
    projectors: tuple[Operator, ...]
    names: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.projectors)

    def constraint_matrix(self) -> np.ndarray:
        """``d^2 x N`` matrix whose columns are ``vec(P_n)``."""
        return np.column_stack([vectorize(P) for P in self.projectors])

    def index(self, name: str) -> int:
        return self.names.index(name)

    @classmethod
    def from_groups(cls, space: HilbertSpace, groups: Mapping[str, Sequence[str]] | Sequence[Sequence[str]]) -> Partition:
        """Diagonal partition from groups of basis labels.

        ``groups`` is either a mapping name -> labels or a list of label lists,
        in which case each component is named by joining its labels.
        """
        if isinstance(groups, Mapping):
            names, members = list(groups.keys()), list(groups.values())
        else:
            members = [list(g) for g in groups]
            names = ["+".join(g) for g in members]
        return validate([projector(space, m) for m in members], names)

    @classmethod
    def from_labels(cls, space: HilbertSpace, labels: Sequence[str] | None = None) -> Partition:
        """One component per basis state."""
        labels = list(space.labels if labels is None else labels)
        return cls.from_groups(space, {lab: [lab] for lab in labels})


def validate(projectors: Sequence[Operator], names: Sequence[str] | None = None,
             tol: float = PARTITION_TOL) -> Partition:
    """Check completeness, orthogonality and Hermiticity of ``projectors``."""
    projectors = tuple(projectors)
    if not projectors:
        raise PartitionError("a partition needs at least one projector")
    space = projectors[0].space
    for P in projectors:
        if P.space != space:
            raise DimensionError("projectors live on different spaces")
    if names is None:
        names = [str(i) for i in range(len(projectors))]
    names = tuple(str(n) for n in names)
    if len(names) != len(projectors):
        raise PartitionError("one name is required per projector")
    if len(set(names)) != len(names):
        raise PartitionError("component names must be unique")

    for name, P in zip(names, projectors):
        if not P.is_hermitian(tol):
            raise PartitionError(f"projector {name!r} is not Hermitian")
    mats = [P.matrix for P in projectors]
    for m, Pm in enumerate(mats):
        for n, Pn in enumerate(mats):
            target = Pn if m == n else 0.0
            if np.max(np.abs(Pm @ Pn - target)) > tol:
                raise PartitionError(f"overlapping components: {names[m]!r} and {names[n]!r}")
    if np.max(np.abs(sum(mats) - np.eye(space.dim))) > tol:
        raise PartitionError("incomplete partition: projectors do not sum to the identity")
    return Partition(space, projectors, names)


def populations(partition: Partition, rho: Operator) -> np.ndarray:
    """``p_n = tr(P_n rho)`` as a real vector."""
    if rho.space != partition.space:
        raise DimensionError("state and partition live on different spaces")
    p = partition.constraint_matrix().conj().T @ vectorize(rho)
    return p.real.copy()


@dataclass(frozen=True, eq=False)
class LiouvillePartition:
    partition: Partition
    steady_components: tuple[Operator, ...]
    steady_populations: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.partition.size

    @property
    def space(self) -> HilbertSpace:
        return self.partition.space

    @cached_property
    def constraint(self) -> np.ndarray:
        return self.partition.constraint_matrix()

    @cached_property
    def steady_vectors(self) -> np.ndarray:
        """``d^2 x N`` matrix whose columns are ``vec(varrho_n)``."""
        return np.column_stack([vectorize(v) for v in self.steady_components])

    @cached_property
    def pi(self) -> tuple[SuperOperator, ...]:
        C, V = self.constraint, self.steady_vectors
        return tuple(SuperOperator(self.space, np.outer(V[:, n], C[:, n].conj()))
                     for n in range(self.size))

    @cached_property
    def q(self) -> SuperOperator:
        d2 = self.space.dim ** 2
        return SuperOperator(self.space, np.eye(d2) - self.steady_vectors @ self.constraint.conj().T)

    def apply_q(self, x: np.ndarray) -> np.ndarray:
        """Apply the complement to a vector or the columns of a matrix."""
        return x - self.steady_vectors @ (self.constraint.conj().T @ x)

    @cached_property
    def complement_basis(self) -> np.ndarray:
        """Orthonormal basis of range(Q), shape ``d^2 x (d^2 - N)``.

        ``tr(P_m varrho_n) = delta_mn`` makes range(Q) the orthogonal
        complement of span{vec(P_n)}, so a complete QR of the constraint
        matrix yields the basis directly.
        """
        C = self.constraint
        q, r = np.linalg.qr(C, mode="complete")
        rank = int(np.sum(np.abs(np.diag(r)) > 1e-12 * np.abs(r).max()))
        if rank != self.size:
            raise PartitionError("projector vectors are linearly dependent")
        return q[:, self.size:]


def liouville_partition(partition: Partition, rho_s: Operator, eps_pop: float = EPS_POP) -> LiouvillePartition:
    """Renormalized steady components and Liouville projectors for ``rho_s``."""
    if rho_s.space != partition.space:
        raise DimensionError("steady state and partition live on different spaces")
    p = populations(partition, rho_s)
    comps = []
    for name, P, pn in zip(partition.names, partition.projectors, p):
        if pn <= eps_pop:
            raise PartitionError(f"degenerate component: unpopulated projector {name!r} (population {pn:.3g})")
        comps.append(Operator(partition.space, P.matrix @ rho_s.matrix @ P.matrix / pn))
    p.setflags(write=False)
    return LiouvillePartition(partition, tuple(comps), p)
