"""Final-time branches, two-time weights, real states and branch sampling.

A branch is a nonzero component (I ⊗ P_l) ψ(T) of the state at the horizon
T. The real state of branch l at an earlier time t is a mixture of the
normalized reduced states of the time-t components ψ_k(t), weighted by the
pre/post-selected probability of outcome k given ψ_I at 0 and ψ_l(T) at T.
All evolution is the global unitary one; nothing collapses.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .decomposition import DecompositionSpec
from .dynamics import HamiltonianSchedule, propagate
from .errors import InvalidStateError, NumericalError
from .linalg import DensityMatrix, StateVector, apply_projector_B, reduced_matrix
from .tolerances import DEFAULT, Tolerances

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Components:
    """Nonzero components of ψ(t) under the decomposition in force at t."""

    t: float
    state: StateVector
    items: tuple[tuple[str, StateVector], ...]
    dropped_mass: float

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    @property
    def labels(self) -> list[str]:
        return [k for k, _ in self.items]


def split(psi: StateVector, spec: DecompositionSpec, t: float = 0.0,
          tol: Tolerances = DEFAULT) -> Components:
    decomp = spec.build(psi, tol)
    items, dropped = [], 0.0
    for label, P in decomp:
        comp = apply_projector_B(psi, P)
        mass = comp.norm_sq
        if mass > tol.eps_branch:
            items.append((label, comp))
        else:
            dropped += mass
    return Components(float(t), psi, tuple(items), dropped)


def components_at(psi_I: StateVector, sched: HamiltonianSchedule, spec: DecompositionSpec,
                  t: float, tol: Tolerances = DEFAULT) -> Components:
    return split(propagate(psi_I, 0.0, t, sched), spec, t, tol)


def decompose_at(psi_I: StateVector, sched: HamiltonianSchedule, spec: DecompositionSpec,
                 t: float, tol: Tolerances = DEFAULT) -> list[tuple[str, StateVector]]:
    """Nonzero components (k, ψ_k(t)) of the evolved state at time t."""
    return list(components_at(psi_I, sched, spec, t, tol).items)


@dataclass(frozen=True, eq=False)
class Branch:
    label: str
    component: StateVector
    probability: float
    # ⟨ψ_l(T), ψ(T)⟩; its real part is a second route to the probability
    overlap: complex
    horizon: float


@dataclass(frozen=True, eq=False)
class BranchSet(Sequence):
    """Branches at one horizon, with the mass of dropped components."""

    horizon: float
    kind: str
    final_state: StateVector
    branches: tuple[Branch, ...]
    dropped_mass: float

    def __getitem__(self, i):
        return self.branches[i]

    def __len__(self):
        return len(self.branches)

    @property
    def labels(self) -> list[str]:
        return [b.label for b in self.branches]

    @property
    def probabilities(self) -> dict[str, float]:
        return {b.label: b.probability for b in self.branches}

    @property
    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))

    def get(self, label: str) -> Branch:
        for b in self.branches:
            if b.label == label:
                return b
        raise KeyError(label)


def final_branches(psi_I: StateVector, sched: HamiltonianSchedule, spec: DecompositionSpec,
                   T: float, tol: Tolerances = DEFAULT) -> BranchSet:
    comps = components_at(psi_I, sched, spec, T, tol)
    if not comps.items:
        raise NumericalError("final_branches", f"no nonzero branch at T={T}")
    psi_T = comps.state
    branches = []
    for label, comp in comps:
        overlap = complex(np.vdot(comp.amplitudes, psi_T.amplitudes))
        branches.append(Branch(label, comp, comp.norm_sq, overlap, float(T)))
    bset = BranchSet(float(T), spec.kind, psi_T, tuple(branches), comps.dropped_mass)
    residual = abs(bset.total_probability - psi_T.norm_sq)
    if residual > len(bset) * tol.eps_branch + comps.dropped_mass + tol.trace:
        raise NumericalError("final_branches", f"probabilities miss total mass by {residual:.3e}")
    return bset


@dataclass(frozen=True)
class TwoTimeWeights:
    label: str
    t: float
    weights: dict[str, float]
    raw: dict[str, float]


def _backward(branch: Branch, t: float, sched: HamiltonianSchedule) -> np.ndarray:
    """U(T, t)† ψ_l(T), so that ⟨ψ_l(T), U(T,t) ψ_k⟩ = ⟨result, ψ_k⟩."""
    if not 0.0 <= t <= branch.horizon:
        raise InvalidStateError(f"time {t} outside [0, {branch.horizon}]")
    return sched.evolve(branch.component.amplitudes, branch.horizon, t)


def _weights(label: str, back: np.ndarray, comps: Components, tol: Tolerances) -> TwoTimeWeights:
    raw = {k: float(abs(np.vdot(back, c.amplitudes)) ** 2) for k, c in comps}
    total = sum(raw.values())
    if not total > 0.0:
        raise NumericalError(
            "two_time_weights",
            f"all transition weights vanish for branch {label!r} at t={comps.t}",
        )
    return TwoTimeWeights(label, comps.t, {k: q / total for k, q in raw.items()}, raw)


def _check_branch(branch: Branch, tol: Tolerances):
    if branch.probability <= tol.eps_branch:
        raise InvalidStateError(f"branch {branch.label!r} has negligible probability")


def two_time_weights(branch: Branch, t: float, psi_I: StateVector, sched: HamiltonianSchedule,
                     spec: DecompositionSpec, tol: Tolerances = DEFAULT) -> TwoTimeWeights:
    _check_branch(branch, tol)
    back = _backward(branch, t, sched)
    return _weights(branch.label, back, components_at(psi_I, sched, spec, t, tol), tol)


def _mixture(weights: TwoTimeWeights, comps: Components, tol: Tolerances) -> DensityMatrix:
    d_A = comps.state.space.d_A
    rho = np.zeros((d_A, d_A), dtype=complex)
    for k, comp in comps:
        w = weights.weights[k]
        if w:
            rho += w * reduced_matrix(comp) / comp.norm_sq
    rho = DensityMatrix(rho)
    problems = rho.violations(tol)
    if problems:
        raise NumericalError("real_state", "; ".join(problems))
    return rho


def real_state(branch: Branch, t: float, psi_I: StateVector, sched: HamiltonianSchedule,
               spec: DecompositionSpec, tol: Tolerances = DEFAULT) -> DensityMatrix:
    """The real state of ``branch`` at time t, a density matrix on H_A."""
    _check_branch(branch, tol)
    comps = components_at(psi_I, sched, spec, t, tol)
    weights = _weights(branch.label, _backward(branch, t, sched), comps, tol)
    return _mixture(weights, comps, tol)


def real_states_at(branches: Iterable[Branch], t: float, psi_I: StateVector,
                   sched: HamiltonianSchedule, spec: DecompositionSpec,
                   tol: Tolerances = DEFAULT) -> dict[str, DensityMatrix]:
    """Real states of several branches at one time, sharing the time-t split."""
    comps = components_at(psi_I, sched, spec, t, tol)
    out = {}
    for b in branches:
        _check_branch(b, tol)
        out[b.label] = _mixture(_weights(b.label, _backward(b, t, sched), comps, tol), comps, tol)
    return out


@dataclass(frozen=True, eq=False)
class RealStateTrajectory:
    label: str
    times: tuple[float, ...]
    states: tuple[DensityMatrix, ...]

    def __iter__(self):
        return iter(zip(self.times, self.states))


def trajectories(branches: Sequence[Branch], times: Sequence[float], psi_I: StateVector,
                 sched: HamiltonianSchedule, spec: DecompositionSpec,
                 tol: Tolerances = DEFAULT) -> dict[str, RealStateTrajectory]:
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("sample times must be strictly increasing")
    per_time = [real_states_at(branches, t, psi_I, sched, spec, tol) for t in times]
    return {
        b.label: RealStateTrajectory(b.label, tuple(times), tuple(s[b.label] for s in per_time))
        for b in branches
    }


def real_state_trajectory(branch: Branch, times: Sequence[float], psi_I: StateVector,
                          sched: HamiltonianSchedule, spec: DecompositionSpec,
                          tol: Tolerances = DEFAULT) -> RealStateTrajectory:
    return trajectories([branch], times, psi_I, sched, spec, tol)[branch.label]


def _distribution(branches: Sequence[Branch], tol: Tolerances):
    labels = [b.label for b in branches]
    p = np.array([b.probability for b in branches], dtype=float)
    if len(p) == 0 or np.all(p <= tol.eps_branch):
        raise InvalidStateError("no branch has non-negligible probability")
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise InvalidStateError(f"branch probabilities sum to {total}, not 1")
    if total != 1.0:
        logger.info("renormalizing branch probabilities before sampling (sum=%r)", float(total))
    return labels, p / total


def sample_branches(branches: Sequence[Branch], seed: int, size: int,
                    tol: Tolerances = DEFAULT) -> list[str]:
    """``size`` independent Born-rule draws from a generator seeded with ``seed``."""
    labels, p = _distribution(branches, tol)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    return [labels[i] for i in idx]


def sample_branch(branches: Sequence[Branch], seed: int, tol: Tolerances = DEFAULT) -> str:
    """The realized branch label for one seed."""
    return sample_branches(branches, seed, 1, tol)[0]
