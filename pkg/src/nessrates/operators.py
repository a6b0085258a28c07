"""Dense operator algebra on finite Hilbert spaces and Lindblad superoperators.

Operators are vectorized by column stacking, so that entry ``(i, j)`` of a
``d x d`` matrix lands at index ``j*d + i`` and

    vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)

All quantities are in atomic units (hbar = 1).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = -1e-8

#: Boltzmann constant in hartree per kelvin (CODATA).
K_BOLTZMANN = 3.166811563e-6


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HilbertSpace:
    """Labeled orthonormal basis, optionally with a tensor-product structure.

    For a product space the composite index is row-major over ``factors``,
    i.e. the last factor varies fastest.
    """

    dim: int
    labels: tuple[str, ...]
    factors: tuple[tuple[str, int], ...] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError(f"dimension must be positive, got {self.dim}")
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) != self.dim:
            raise DimensionError(f"{len(labels)} labels for dimension {self.dim}")
        if len(set(labels)) != len(labels):
            raise ValidationError("basis labels must be unique")
        if self.factors is not None:
            factors = tuple((str(n), int(d)) for n, d in self.factors)
            object.__setattr__(self, "factors", factors)
            if int(np.prod([d for _, d in factors])) != self.dim:
                raise DimensionError("product of factor dimensions differs from dim")

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> HilbertSpace:
        labels = tuple(labels)
        return cls(len(labels), labels)

    @classmethod
    def numbered(cls, dim: int, prefix: str = "") -> HilbertSpace:
        return cls(dim, tuple(f"{prefix}{i}" for i in range(dim)))

    @classmethod
    def product(cls, *spaces: tuple[str, HilbertSpace]) -> HilbertSpace:
        """Tensor product of named spaces; labels are joined with ``","``."""
        labels = tuple(",".join(combo) for combo in itertools.product(*(s.labels for _, s in spaces)))
        factors = tuple((name, s.dim) for name, s in spaces)
        return cls(len(labels), labels, factors)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ValidationError(f"unknown basis label {label!r}") from None


@dataclass(frozen=True, eq=False)
class Operator:
    """A ``dim x dim`` complex matrix on a :class:`HilbertSpace`."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionError(f"matrix shape {m.shape} does not match space dim {self.space.dim}")
        object.__setattr__(self, "matrix", m)

    def dag(self) -> Operator:
        return Operator(self.space, self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return self.hermiticity_error() <= tol

    def hermitized(self) -> Operator:
        return Operator(self.space, 0.5 * (self.matrix + self.matrix.conj().T))

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the Hermitian part."""
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def check_state(self) -> Operator:
        """Raise :class:`ValidationError` unless this is a density matrix."""
        if not self.is_hermitian():
            raise ValidationError(f"state is not Hermitian (error {self.hermiticity_error():.3g})")
        tr = self.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"state trace is {tr.real:.12g}, expected 1")
        lam = self.min_eigenvalue()
        if lam < POSITIVITY_TOL:
            raise ValidationError(f"state has negative eigenvalue {lam:.3g}")
        return self

    def __add__(self, other: Operator) -> Operator:
        _same_space(self.space, other.space)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: Operator) -> Operator:
        _same_space(self.space, other.space)
        return Operator(self.space, self.matrix - other.matrix)

    def __matmul__(self, other: Operator) -> Operator:
        _same_space(self.space, other.space)
        return Operator(self.space, self.matrix @ other.matrix)

    def __mul__(self, c) -> Operator:
        return Operator(self.space, c * self.matrix)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """A ``dim**2 x dim**2`` matrix acting on column-stacked operators."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.space.dim ** 2
        if m.shape != (n, n):
            raise DimensionError(f"superoperator shape {m.shape} does not match {n}x{n}")
        object.__setattr__(self, "matrix", m)

    def apply(self, op: Operator) -> Operator:
        _same_space(self.space, op.space)
        return devectorize(self.matrix @ vectorize(op), self.space)

    def trace_defect(self) -> float:
        """Largest entry of ``vec(I)^dagger L``; zero for trace-preserving maps."""
        return float(np.max(np.abs(vectorize_matrix(np.eye(self.space.dim)).conj() @ self.matrix)))

    def is_trace_preserving(self, tol: float = 1e-10) -> bool:
        return self.trace_defect() <= tol

    def __add__(self, other: SuperOperator) -> SuperOperator:
        _same_space(self.space, other.space)
        return SuperOperator(self.space, self.matrix + other.matrix)

    def __matmul__(self, other: SuperOperator) -> SuperOperator:
        _same_space(self.space, other.space)
        return SuperOperator(self.space, self.matrix @ other.matrix)

    def __mul__(self, c) -> SuperOperator:
        return SuperOperator(self.space, c * self.matrix)

    __rmul__ = __mul__


def _same_space(a: HilbertSpace, b: HilbertSpace) -> None:
    if a != b:
        raise DimensionError("operands live on different Hilbert spaces")


def vectorize_matrix(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def vectorize(op: Operator) -> np.ndarray:
    """Column-stack ``op.matrix`` into a vector of length ``dim**2``."""
    return vectorize_matrix(op.matrix)


def devectorize(v, space: HilbertSpace) -> Operator:
    v = np.asarray(v)
    if v.ndim != 1 or v.size != space.dim ** 2:
        raise DimensionError(f"vector of length {v.size} cannot be reshaped on a space of dim {space.dim}")
    return Operator(space, v.reshape(space.dim, space.dim, order="F"))


def ket_bra(space: HilbertSpace, i, j) -> Operator:
    """``|i><j|`` where ``i``/``j`` are labels or integer indices."""
    ii = i if isinstance(i, (int, np.integer)) else space.index(i)
    jj = j if isinstance(j, (int, np.integer)) else space.index(j)
    m = np.zeros((space.dim, space.dim), dtype=complex)
    m[ii, jj] = 1.0
    return Operator(space, m)


def projector(space: HilbertSpace, labels: Sequence) -> Operator:
    """Diagonal projector onto the listed basis states."""
    m = np.zeros((space.dim, space.dim), dtype=complex)
    for lab in labels:
        k = lab if isinstance(lab, (int, np.integer)) else space.index(lab)
        m[k, k] = 1.0
    return Operator(space, m)


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim))


def left_generator(a: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> a @ rho``."""
    return np.kron(np.eye(a.shape[0]), a)


def right_generator(b: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> rho @ b``."""
    return np.kron(b.T, np.eye(b.shape[0]))


def sandwich_generator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> a @ rho @ b``."""
    return np.kron(b.T, a)


def commutator_generator(H: Operator) -> SuperOperator:
    """Superoperator of ``rho -> -i[H, rho]``."""
    if not H.is_hermitian():
        raise ValidationError(f"Hamiltonian is not Hermitian (error {H.hermiticity_error():.3g})")
    h = H.matrix
    return SuperOperator(H.space, -1j * (left_generator(h) - right_generator(h)))


def _dissipator(s: np.ndarray) -> np.ndarray:
    sds = s.conj().T @ s
    return sandwich_generator(s, s.conj().T) - 0.5 * (left_generator(sds) + right_generator(sds))


def lindblad_pair(S: Operator, rate: float, n: float = 0.0) -> SuperOperator:
    """Thermal Lindblad channel pair for jump operator ``S``.

    Downward channel ``S`` with rate ``rate*(n+1)``, upward channel ``S^dagger``
    with rate ``rate*n``. With ``n = 0`` only the downward channel remains.
    """
    if rate < 0:
        raise ValidationError(f"bath rate must be non-negative, got {rate}")
    if n < 0:
        raise ValidationError(f"mean occupation must be non-negative, got {n}")
    d = S.space.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    if rate == 0:
        return SuperOperator(S.space, out)
    out += rate * (n + 1.0) * _dissipator(S.matrix)
    if n > 0:
        out += rate * n * _dissipator(S.matrix.conj().T)
    return SuperOperator(S.space, out)


def assemble_liouvillian(H: Operator, dissipators: Iterable[SuperOperator] = ()) -> SuperOperator:
    """Hamiltonian commutator plus the sum of dissipators."""
    L = commutator_generator(H).matrix.copy()
    for D in dissipators:
        if D.space != H.space:
            raise DimensionError("dissipator and Hamiltonian live on different spaces")
        L += D.matrix
    return SuperOperator(H.space, L)


def bose_occupation(energy: float, temperature: float) -> float:
    """Mean Bose occupation ``1/(exp(E/kT) - 1)`` for a gap in hartree and T in kelvin."""
    if temperature <= 0:
        raise ValidationError(f"temperature must be positive, got {temperature}")
    if energy <= 0:
        raise ValidationError(f"level spacing must be positive, got {energy}")
    return float(1.0 / np.expm1(energy / (K_BOLTZMANN * temperature)))
