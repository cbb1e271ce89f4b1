"""Projective decompositions of H_B: fixed bases, discrete Fourier, Schmidt."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidStateError
from .linalg import BipartiteSpace, StateVector
from .tolerances import DEFAULT, Tolerances

KINDS = ("basis", "fourier", "schmidt")
NULL_LABEL = "null"


@dataclass(frozen=True, eq=False)
class ProjectiveDecomposition:
    space: BipartiteSpace
    labels: tuple[str, ...]
    projectors: tuple[np.ndarray, ...]
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown decomposition kind {self.kind!r}; allowed: {list(KINDS)}")
        if len(self.labels) != len(self.projectors):
            raise ValueError("one label per projector required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"labels must be unique: {self.labels}")
        d_B = self.space.d_B
        frozen = []
        for P in self.projectors:
            P = np.array(P, dtype=complex)
            if P.shape != (d_B, d_B):
                raise DimensionError(f"projector shape {P.shape} != ({d_B}, {d_B})")
            P.setflags(write=False)
            frozen.append(P)
        object.__setattr__(self, "projectors", tuple(frozen))
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    def __len__(self):
        return len(self.projectors)

    def __iter__(self):
        return iter(zip(self.labels, self.projectors))

    def projector(self, label: str) -> np.ndarray:
        return self.projectors[self.labels.index(label)]

    def errors(self) -> dict[str, float]:
        """Worst-case violations of idempotence, Hermiticity, orthogonality, completeness."""
        d_B = self.space.d_B
        idem = herm = orth = 0.0
        for i, P in enumerate(self.projectors):
            idem = max(idem, float(np.max(np.abs(P @ P - P))))
            herm = max(herm, float(np.max(np.abs(P - P.conj().T))))
            for Q in self.projectors[i + 1:]:
                orth = max(orth, float(np.max(np.abs(P @ Q))))
        total = sum(self.projectors, np.zeros((d_B, d_B), dtype=complex))
        comp = float(np.max(np.abs(total - np.eye(d_B))))
        return {"idempotence": idem, "hermiticity": herm, "orthogonality": orth, "completeness": comp}

    def is_valid(self, tol: Tolerances = DEFAULT) -> bool:
        return max(self.errors().values()) <= tol.projector


def _check_orthonormal(basis: np.ndarray, tol: Tolerances):
    gram = basis.conj().T @ basis
    err = float(np.max(np.abs(gram - np.eye(basis.shape[1]))))
    if err > tol.orthonormal:
        raise InvalidStateError(f"basis is not orthonormal (max Gram deviation {err:.3e})")


def basis_decomposition(space: BipartiteSpace, basis=None, labels=None,
                        tol: Tolerances = DEFAULT) -> ProjectiveDecomposition:
    """Rank-one projectors |b_i⟩⟨b_i| onto the columns of ``basis``.

    With no basis the computational basis of H_B is used. Labels default to
    the column indices.
    """
    d_B = space.d_B
    basis = np.eye(d_B, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    if basis.shape != (d_B, d_B):
        raise DimensionError(f"basis must be a {d_B}x{d_B} matrix of columns, got {basis.shape}")
    _check_orthonormal(basis, tol)
    if labels is None:
        labels = [str(i) for i in range(d_B)]
    projectors = [np.outer(basis[:, i], basis[:, i].conj()) for i in range(d_B)]
    return ProjectiveDecomposition(space, tuple(labels), tuple(projectors), "basis")


def fourier_vectors(d: int) -> np.ndarray:
    """Columns g_m[b] = exp(2πi m b / d) / √d."""
    m = np.arange(d)
    return np.exp(2j * np.pi * np.outer(m, m) / d) / np.sqrt(d)


def fourier_decomposition(space: BipartiteSpace, labels=None) -> ProjectiveDecomposition:
    g = fourier_vectors(space.d_B)
    if labels is None:
        labels = [str(i) for i in range(space.d_B)]
    projectors = [np.outer(g[:, m], g[:, m].conj()) for m in range(space.d_B)]
    return ProjectiveDecomposition(space, tuple(labels), tuple(projectors), "fourier")


@dataclass(frozen=True, eq=False)
class SchmidtData:
    coefficients: np.ndarray
    # columns are e_j (on H_A) and f_j (on H_B)
    vectors_A: np.ndarray
    vectors_B: np.ndarray
    groups: tuple[tuple[int, ...], ...]

    def term(self, j: int) -> np.ndarray:
        return self.coefficients[j] * np.kron(self.vectors_A[:, j], self.vectors_B[:, j])

    def reconstruct(self) -> np.ndarray:
        d = self.vectors_A.shape[0] * self.vectors_B.shape[0]
        return sum((self.term(j) for j in range(len(self.coefficients))),
                   np.zeros(d, dtype=complex))


def group_degenerate(coefficients, eps_deg: float) -> tuple[tuple[int, ...], ...]:
    """Chain consecutive sorted coefficients whose gap is at most ``eps_deg``."""
    groups: list[list[int]] = []
    for j, c in enumerate(coefficients):
        if groups and coefficients[j - 1] - c <= eps_deg:
            groups[-1].append(j)
        else:
            groups.append([j])
    return tuple(tuple(g) for g in groups)


def schmidt(psi: StateVector, eps_deg: float | None = None,
            tol: Tolerances = DEFAULT) -> SchmidtData:
    """SVD of the amplitude matrix, zero coefficients dropped, degeneracies grouped."""
    eps_deg = tol.eps_deg if eps_deg is None else eps_deg
    if psi.norm_sq == 0.0:
        raise InvalidStateError("Schmidt decomposition of the zero vector")
    U, s, Vh = np.linalg.svd(psi.as_matrix(), full_matrices=False)
    keep = s > tol.schmidt_zero
    if not np.any(keep):
        raise InvalidStateError("all Schmidt coefficients vanish")
    s = s[keep]
    e = U[:, keep]
    # M[a, b] = Σ_j s_j U[a, j] Vh[j, b], so f_j is row j of Vh
    f = Vh[keep, :].T
    return SchmidtData(s, e, f, group_degenerate(s, eps_deg))


def schmidt_projectors(psi: StateVector, eps_deg: float | None = None,
                       tol: Tolerances = DEFAULT) -> ProjectiveDecomposition:
    """One projector per degeneracy group, plus a ``null`` complement if needed.

    Group labels are ``s0, s1, ...`` in order of decreasing coefficient.
    """
    data = schmidt(psi, eps_deg, tol)
    d_B = psi.space.d_B
    labels, projectors = [], []
    for n, group in enumerate(data.groups):
        f = data.vectors_B[:, list(group)]
        projectors.append(f @ f.conj().T)
        labels.append(f"s{n}")
    support = sum(projectors, np.zeros((d_B, d_B), dtype=complex))
    if len(data.coefficients) < d_B:
        complement = np.eye(d_B) - support
        # clean up rounding so the complement is an exact-as-possible projector
        w, V = np.linalg.eigh(0.5 * (complement + complement.conj().T))
        V = V[:, w > 0.5]
        projectors.append(V @ V.conj().T)
        labels.append(NULL_LABEL)
    return ProjectiveDecomposition(psi.space, tuple(labels), tuple(projectors), "schmidt")


@dataclass(frozen=True, eq=False)
class DecompositionSpec:
    """Recipe for the preferred decomposition at a given time.

    ``basis`` and ``fourier`` produce one fixed family; ``schmidt`` is
    rebuilt from the state it is applied to.
    """

    kind: str = "basis"
    basis: np.ndarray | None = None
    labels: tuple[str, ...] | None = None
    eps_deg: float | None = None
    _fixed: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown decomposition kind {self.kind!r}; allowed: {list(KINDS)}")

    @property
    def state_dependent(self) -> bool:
        return self.kind == "schmidt"

    def build(self, psi: StateVector, tol: Tolerances = DEFAULT) -> ProjectiveDecomposition:
        if self.kind == "schmidt":
            return schmidt_projectors(psi, self.eps_deg, tol)
        # fixed families are built once per space
        cached = self._fixed.get(psi.space)
        if cached is None:
            if self.kind == "basis":
                cached = basis_decomposition(psi.space, self.basis, self.labels, tol)
            else:
                cached = fourier_decomposition(psi.space, self.labels)
            self._fixed[psi.space] = cached
        return cached
