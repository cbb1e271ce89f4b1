"""Unitary evolution under piecewise-constant Hamiltonians (ħ = 1).

Each segment is diagonalized once when the schedule is built. Evolving a
vector then costs two matrix-vector products per segment crossed, and
full propagator matrices are cached per (segment, duration).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ScheduleError
from .linalg import StateVector
from .tolerances import DEFAULT, Tolerances


@dataclass(frozen=True, eq=False)
class Propagator:
    t_from: float
    t_to: float
    U: np.ndarray

    def apply(self, psi: StateVector) -> StateVector:
        return psi.with_amplitudes(self.U @ psi.amplitudes)

    def unitarity_error(self) -> float:
        U = self.U
        return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def _hermiticity_error(H: np.ndarray) -> float:
    return float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0


def _spectrum(H: np.ndarray, tol: Tolerances):
    err = _hermiticity_error(H)
    if err > tol.hermitian:
        raise ScheduleError(f"Hamiltonian is not Hermitian (max deviation {err:.3e})")
    H = 0.5 * (H + H.conj().T)
    try:
        evals, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigen_propagator", f"eigendecomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(evals)) and np.all(np.isfinite(V))):
        raise NumericalError("eigen_propagator", "non-finite spectrum")
    verr = float(np.max(np.abs(V.conj().T @ V - np.eye(V.shape[0]))))
    if verr > tol.unitarity:
        raise NumericalError("eigen_propagator", f"eigenvectors not orthonormal ({verr:.3e})")
    return evals, V


def _from_spectrum(evals, V, dt) -> np.ndarray:
    return (V * np.exp(-1j * evals * dt)) @ V.conj().T


def eigen_propagator(H, dt: float, tol: Tolerances = DEFAULT) -> Propagator:
    """exp(−iH dt) = V diag(e^{−iλ dt}) V†."""
    H = np.asarray(H, dtype=complex)
    evals, V = _spectrum(H, tol)
    return Propagator(0.0, float(dt), _from_spectrum(evals, V, dt))


@dataclass(frozen=True, eq=False)
class Segment:
    H: np.ndarray
    start: float
    # math.inf for an open-ended final segment
    end: float
    evals: np.ndarray
    V: np.ndarray

    @property
    def duration(self) -> float:
        return self.end - self.start


class HamiltonianSchedule:
    """Ordered list of ``(H, duration)`` pieces starting at t = 0.

    A duration of ``None`` (or ``math.inf``) marks an open-ended final
    segment, so the schedule covers arbitrarily late horizons.
    """

    def __init__(self, pieces, tol: Tolerances = DEFAULT):
        pieces = list(pieces)
        if not pieces:
            raise ScheduleError("schedule needs at least one segment")
        segments = []
        dim = None
        t = 0.0
        for i, (H, duration) in enumerate(pieces):
            H = np.array(H, dtype=complex)
            if H.ndim != 2 or H.shape[0] != H.shape[1]:
                raise ScheduleError(f"segment {i}: Hamiltonian must be square, got {H.shape}")
            if dim is None:
                dim = H.shape[0]
            elif H.shape[0] != dim:
                raise ScheduleError(f"segment {i}: dimension {H.shape[0]} != {dim}")
            if duration is None:
                duration = math.inf
            duration = float(duration)
            if not duration > 0:
                raise ScheduleError(f"segment {i}: duration must be > 0, got {duration}")
            if math.isinf(duration) and i != len(pieces) - 1:
                raise ScheduleError("only the final segment may be open-ended")
            evals, V = _spectrum(H, tol)
            H.setflags(write=False)
            segments.append(Segment(H, t, t + duration, evals, V))
            t += duration
        self.segments: tuple[Segment, ...] = tuple(segments)
        self.dim: int = dim
        self.tol = tol
        self._cache: dict[tuple[int, float], np.ndarray] = {}
        self._lock = threading.Lock()

    @classmethod
    def constant(cls, H, duration=None, tol: Tolerances = DEFAULT) -> "HamiltonianSchedule":
        return cls([(H, duration)], tol)

    @property
    def horizon(self) -> float:
        return self.segments[-1].end

    def _check_time(self, t: float):
        if not (0.0 <= t <= self.horizon) or math.isnan(t):
            raise ScheduleError(f"time {t} outside schedule [0, {self.horizon}]")

    def _pieces(self, t1: float, t2: float):
        """Yield (segment index, dt) covering [t1, t2] in time order; t1 <= t2."""
        for i, seg in enumerate(self.segments):
            lo = max(t1, seg.start)
            hi = min(t2, seg.end)
            if hi > lo:
                yield i, hi - lo

    def evolve(self, amplitudes: np.ndarray, t1: float, t2: float) -> np.ndarray:
        """U(t2, t1) applied to a vector or to the columns of a matrix.

        ``t2 < t1`` evolves backwards, i.e. applies U(t1, t2)†.
        """
        self._check_time(t1)
        self._check_time(t2)
        out = np.asarray(amplitudes, dtype=complex)
        if out.shape[0] != self.dim:
            raise ScheduleError(f"vector dimension {out.shape[0]} != schedule dimension {self.dim}")
        if t2 >= t1:
            sign, pieces = 1.0, list(self._pieces(t1, t2))
        else:
            sign, pieces = -1.0, list(self._pieces(t2, t1))[::-1]
        for i, dt in pieces:
            seg = self.segments[i]
            phase = np.exp(-1j * sign * seg.evals * dt)
            coeffs = seg.V.conj().T @ out
            coeffs = phase[:, None] * coeffs if coeffs.ndim == 2 else phase * coeffs
            out = seg.V @ coeffs
        return out

    def segment_propagator(self, index: int, dt: float) -> np.ndarray:
        key = (index, float(dt))
        U = self._cache.get(key)
        if U is None:
            seg = self.segments[index]
            U = _from_spectrum(seg.evals, seg.V, dt)
            U.setflags(write=False)
            with self._lock:
                U = self._cache.setdefault(key, U)
        return U

    def propagator(self, t1: float, t2: float) -> Propagator:
        """U(t2, t1) as a matrix, composed from cached segment exponentials."""
        self._check_time(t1)
        self._check_time(t2)
        U = np.eye(self.dim, dtype=complex)
        lo, hi = min(t1, t2), max(t1, t2)
        for i, dt in self._pieces(lo, hi):
            U = self.segment_propagator(i, dt) @ U
        if t2 < t1:
            U = U.conj().T
        return Propagator(float(t1), float(t2), U)


def propagate(psi: StateVector, t1: float, t2: float, sched: HamiltonianSchedule) -> StateVector:
    """ψ(t2) from ψ(t1); backwards when t2 < t1."""
    return psi.with_amplitudes(sched.evolve(psi.amplitudes, t1, t2))
