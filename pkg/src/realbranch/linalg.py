"""Dense linear algebra on a bipartite Hilbert space H_A ⊗ H_B.

Flat indexing is row-major over A then B: the basis vector |a⟩⊗|b⟩ sits at
index ``a * d_B + b``. Every module relies on this, so reshaping a state to
its ``(d_A, d_B)`` amplitude matrix is a plain C-order reshape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidStateError
from .tolerances import DEFAULT, Tolerances

MAX_DIM = 4096


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BipartiteSpace:
    d_A: int
    d_B: int

    def __post_init__(self):
        for name in ("d_A", "d_B"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise DimensionError(f"{name} must be a positive integer, got {value!r}")
        if self.d_A * self.d_B > MAX_DIM:
            raise DimensionError(f"total dimension {self.dim} exceeds {MAX_DIM}")

    @property
    def dim(self) -> int:
        return self.d_A * self.d_B

    def index(self, a: int, b: int) -> int:
        return a * self.d_B + b


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitude vector on a bipartite space; need not be normalized."""

    space: BipartiteSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.shape[0] != self.space.dim:
            raise DimensionError(
                f"expected {self.space.dim} amplitudes for {self.space}, got {amps.shape[0]}"
            )
        if not np.all(np.isfinite(amps)):
            raise InvalidStateError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def product(cls, psi_A, psi_B) -> "StateVector":
        psi_A = np.asarray(psi_A, dtype=complex)
        psi_B = np.asarray(psi_B, dtype=complex)
        return cls(BipartiteSpace(psi_A.size, psi_B.size), np.kron(psi_A, psi_B))

    @classmethod
    def basis(cls, space: BipartiteSpace, a: int, b: int) -> "StateVector":
        amps = np.zeros(space.dim, dtype=complex)
        amps[space.index(a, b)] = 1.0
        return cls(space, amps)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def is_normalized(self, tol: Tolerances = DEFAULT) -> bool:
        return abs(self.norm_sq - 1.0) <= tol.normalized

    def normalized(self) -> "StateVector":
        n = self.norm_sq
        if n == 0.0:
            raise InvalidStateError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / np.sqrt(n))

    def as_matrix(self) -> np.ndarray:
        """Amplitudes as the ``(d_A, d_B)`` coefficient matrix."""
        return self.amplitudes.reshape(self.space.d_A, self.space.d_B)

    def with_amplitudes(self, amplitudes) -> "StateVector":
        return StateVector(self.space, amplitudes)

    def __add__(self, other: "StateVector") -> "StateVector":
        _same_space(self, other)
        return StateVector(self.space, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "StateVector") -> "StateVector":
        _same_space(self, other)
        return StateVector(self.space, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar) -> "StateVector":
        return StateVector(self.space, self.amplitudes * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"StateVector({self.space.d_A}x{self.space.d_B}, norm_sq={self.norm_sq:.6g})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Square complex matrix on H_A, checked on demand against state invariants."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError(f"density matrix must be square, got shape {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def violations(self, tol: Tolerances = DEFAULT, unit_trace: bool = True) -> list[str]:
        problems = []
        herr = self.hermiticity_error()
        if herr > tol.hermitian:
            problems.append(f"not Hermitian (max deviation {herr:.3e})")
        lam = self.min_eigenvalue()
        if lam < -tol.psd:
            problems.append(f"not positive semidefinite (min eigenvalue {lam:.3e})")
        if unit_trace and abs(self.trace - 1.0) > tol.trace:
            problems.append(f"trace {self.trace!r} differs from 1")
        return problems

    def is_valid(self, tol: Tolerances = DEFAULT, unit_trace: bool = True) -> bool:
        return not self.violations(tol, unit_trace)

    def check(self, tol: Tolerances = DEFAULT, unit_trace: bool = True) -> "DensityMatrix":
        problems = self.violations(tol, unit_trace)
        if problems:
            raise InvalidStateError("invalid density matrix: " + "; ".join(problems))
        return self

    def normalized(self) -> "DensityMatrix":
        return DensityMatrix(self.data / self.trace)

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))


def _same_space(phi: StateVector, psi: StateVector):
    if phi.space != psi.space:
        raise DimensionError(f"space mismatch: {phi.space} vs {psi.space}")


def inner_product(phi: StateVector, psi: StateVector) -> complex:
    """⟨φ, ψ⟩, conjugate-linear in ``phi``."""
    _same_space(phi, psi)
    return complex(np.vdot(phi.amplitudes, psi.amplitudes))


def check_operator_B(P, d_B: int) -> np.ndarray:
    P = np.asarray(P, dtype=complex)
    if P.shape != (d_B, d_B):
        raise DimensionError(f"operator on H_B must be {d_B}x{d_B}, got {P.shape}")
    return P


def projector_error(P: np.ndarray) -> float:
    """Largest entry-wise violation of P² = P and P = P†."""
    P = np.asarray(P)
    return float(max(np.max(np.abs(P @ P - P)), np.max(np.abs(P - P.conj().T))))


def is_projector(P, tol: Tolerances = DEFAULT) -> bool:
    return projector_error(P) <= tol.projector


def apply_projector_B(psi: StateVector, P) -> StateVector:
    """(I ⊗ P) ψ."""
    P = check_operator_B(P, psi.space.d_B)
    # rows of the amplitude matrix are H_B vectors
    return psi.with_amplitudes((psi.as_matrix() @ P.T).reshape(-1))


def reduced_matrix(psi: StateVector) -> np.ndarray:
    """Unnormalized Tr_B |ψ⟩⟨ψ| as a bare array."""
    M = psi.as_matrix()
    return M @ M.conj().T


def partial_trace_B(psi: StateVector) -> DensityMatrix:
    """Tr_B |ψ⟩⟨ψ|; its trace equals ‖ψ‖²."""
    if psi.norm_sq == 0.0:
        raise InvalidStateError("partial trace of the zero vector")
    return DensityMatrix(reduced_matrix(psi))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix, tol: Tolerances = DEFAULT) -> float:
    """Half the trace norm of ρ − σ."""
    if rho.dim != sigma.dim:
        raise DimensionError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    for name, m in (("rho", rho), ("sigma", sigma)):
        err = m.hermiticity_error()
        if err > tol.hermitian:
            raise InvalidStateError(f"{name} is not Hermitian (max deviation {err:.3e})")
    diff = rho.data - sigma.data
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))
