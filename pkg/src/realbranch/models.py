"""Toy models: measurement chains, recoherence, random Hamiltonians, branch trees.

Measurement models use a system qubit as H_A and ``n_env`` record qubits as
H_B. Environment qubit 0 is the most significant bit of the H_B index, so
the computational basis label of H_B index ``b`` is ``format(b, '0{n}b')``.

Recording qubit j is the interaction g·|1⟩⟨1|_sys ⊗ X_j switched on for
π/(2g); its propagator is |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ (−i X_j), a controlled flip
with the phase −i left on the flipped record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decomposition import DecompositionSpec
from .dynamics import HamiltonianSchedule, propagate
from .errors import InvalidStateError, ScheduleError
from .linalg import BipartiteSpace, StateVector, apply_projector_B
from .tolerances import DEFAULT, Tolerances

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PROJ_1 = np.array([[0, 0], [0, 1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class RecordingEvent:
    """A completed measurement: at ``time`` the record sits in a pointer basis."""

    time: float
    labels: tuple[str, ...]
    projectors: tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    space: BipartiteSpace
    psi_I: StateVector
    sched: HamiltonianSchedule
    decomp: DecompositionSpec
    # None means the model carries no recording-event metadata
    events: tuple[RecordingEvent, ...] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.psi_I.space != self.space:
            raise InvalidStateError("initial state lives on a different space")
        if self.sched.dim != self.space.dim:
            raise ScheduleError(f"schedule dimension {self.sched.dim} != {self.space.dim}")
        if not self.psi_I.is_normalized():
            raise InvalidStateError(f"initial state not normalized (norm² = {self.psi_I.norm_sq!r})")

    @property
    def default_horizon(self) -> float:
        return float(self.metadata.get("default_horizon", 1.0))


def bit_labels(n: int) -> tuple[str, ...]:
    return tuple(format(b, f"0{n}b") for b in range(2 ** n)) if n else ("",)


def env_operator(op: np.ndarray, j: int, n_env: int) -> np.ndarray:
    """``op`` on environment qubit j, identity elsewhere (a 2^n × 2^n matrix)."""
    out = np.eye(1, dtype=complex)
    for i in range(n_env):
        out = np.kron(out, op if i == j else np.eye(2))
    return out


def qubit_pointer_event(time: float, j: int, n_env: int) -> RecordingEvent:
    P1 = env_operator(PROJ_1, j, n_env)
    P0 = np.eye(2 ** n_env) - P1
    return RecordingEvent(float(time), ("0", "1"), (P0, P1))


def _system_state(alpha, beta) -> np.ndarray:
    psi = np.array([alpha, beta], dtype=complex)
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-12:
        raise InvalidStateError(f"|alpha|^2 + |beta|^2 = {np.vdot(psi, psi).real!r}, expected 1")
    return psi


def record_duration(g: float) -> float:
    if not g > 0:
        raise ValueError(f"coupling g must be positive, got {g}")
    return math.pi / (2.0 * g)


def _build(name, alpha, beta, n_env, steps, post_H=None, **metadata) -> ModelSpec:
    """Assemble a qubit-environment model from timed ``(start, duration, H, event)`` steps.

    Gaps between steps get H = 0; after the last step the schedule continues
    open-ended with ``post_H`` (zero by default).
    """
    space = BipartiteSpace(2, 2 ** n_env)
    zero = np.zeros((space.dim, space.dim), dtype=complex)
    pieces, events = [], []
    cursor = 0.0
    for start, duration, H, event in steps:
        if start < cursor - 1e-12:
            raise ScheduleError(f"interaction windows overlap at t={start}")
        if start > cursor:
            pieces.append((zero, start - cursor))
        pieces.append((H, duration))
        cursor = start + duration
        if event is not None:
            events.append(event)
    pieces.append((zero if post_H is None else post_H, None))
    psi_I = StateVector(space, np.kron(_system_state(alpha, beta), np.eye(2 ** n_env)[0]))
    decomp = DecompositionSpec("basis", labels=bit_labels(n_env))
    metadata.setdefault("default_horizon", cursor + 1.0)
    metadata["last_interaction_end"] = cursor
    return ModelSpec(name, space, psi_I, HamiltonianSchedule(pieces), decomp,
                     tuple(events), metadata)


def _record_step(j, n_env, g, start, sign=1.0):
    dur = record_duration(g)
    H = sign * g * np.kron(PROJ_1, env_operator(SIGMA_X, j, n_env))
    event = qubit_pointer_event(start + dur, j, n_env) if sign > 0 else None
    return (float(start), dur, H, event)


def _default_times(count: int, g: float, gap: float = 0.5) -> list[float]:
    dur = record_duration(g)
    return [gap + j * (dur + gap) for j in range(count)]


def measurement_chain(alpha, beta, n_env: int, g: float = 1.0,
                      t_rec: Sequence[float] | None = None,
                      post_field: float = 0.0) -> ModelSpec:
    """System qubit recorded successively into ``n_env`` environment qubits.

    Record j starts at ``t_rec[j]`` and lasts π/(2g). After the last record
    the Hamiltonian is ``post_field · σ_x ⊗ I``, which acts on the system
    alone and therefore commutes with every I ⊗ P_k.
    """
    if n_env < 1:
        raise ValueError("n_env must be at least 1")
    t_rec = _default_times(n_env, g) if t_rec is None else [float(t) for t in t_rec]
    if len(t_rec) != n_env:
        raise ValueError(f"need {n_env} recording times, got {len(t_rec)}")
    if t_rec[0] < 0 or any(b <= a for a, b in zip(t_rec, t_rec[1:])):
        raise ScheduleError("recording times must be nonnegative and increasing")
    steps = [_record_step(j, n_env, g, t_rec[j]) for j in range(n_env)]
    post_H = post_field * np.kron(SIGMA_X, np.eye(2 ** n_env)) if post_field else None
    expected = {}
    for label, amp in (("0" * n_env, alpha), ("1" * n_env, beta)):
        if abs(amp) ** 2 > 0:
            expected[label] = float(abs(amp) ** 2)
    return _build("measurement_chain", alpha, beta, n_env, steps, post_H,
                  recording_times=list(t_rec), expected_probabilities=expected,
                  first_record_end=t_rec[0] + record_duration(g))


def recoherence_model(alpha, beta, t_rec: float = 0.5, t_unrec: float = 3.0,
                      g: float = 1.0) -> ModelSpec:
    """One record written at ``t_rec`` and unwritten by the inverse interaction at ``t_unrec``."""
    dur = record_duration(g)
    if not t_rec + dur <= t_unrec:
        raise ScheduleError(f"erasure at {t_unrec} overlaps recording window ending {t_rec + dur}")
    steps = [_record_step(0, 1, g, t_rec), _record_step(0, 1, g, t_unrec, sign=-1.0)]
    return _build("recoherence", alpha, beta, 1, steps,
                  recording_times=[t_rec], erasure_times=[t_unrec],
                  first_record_end=t_rec + dur, erasure_end=t_unrec + dur)


def sequential_measurements(alpha, beta, theta: float, g: float = 1.0,
                            t_rec: Sequence[float] | None = None,
                            rotation_time: float = 1.0) -> ModelSpec:
    """Two records of the system qubit with a rotation exp(−iθσ_y/2) in between.

    The second outcome's Born factor depends on the first, so the four
    leaves carry probabilities |α|²cos², |α|²sin², |β|²sin², |β|²cos² of θ/2.
    """
    dur = record_duration(g)
    if t_rec is None:
        t_rec = [0.5, 0.5 + dur + rotation_time + 1.0]
    t0, t1 = (float(t) for t in t_rec)
    rot_start = t0 + dur + 0.5 * (t1 - t0 - dur - rotation_time)
    if rot_start < t0 + dur or rot_start + rotation_time > t1:
        raise ScheduleError("rotation does not fit between the two recordings")
    H_rot = (theta / rotation_time) * np.kron(0.5 * SIGMA_Y, np.eye(4))
    steps = [_record_step(0, 2, g, t0), (rot_start, float(rotation_time), H_rot, None),
             _record_step(1, 2, g, t1)]
    return _build("sequential_measurements", alpha, beta, 2, steps,
                  recording_times=[t0, t1], theta=float(theta))


def random_model(seed: int, d_A: int, d_B: int, energy_scale: float = 1.0) -> ModelSpec:
    """Seeded random Hamiltonian and initial state.

    With A = (X + iY)/√2 for X, Y standard normal d×d matrices,
    H = energy_scale · (A + A†)/2. The initial state is a standard complex
    normal vector, normalized. Draw order: X, Y, then ψ real and imaginary
    parts, all from ``numpy.random.default_rng(seed)``.
    """
    space = BipartiteSpace(d_A, d_B)
    d = space.dim
    rng = np.random.default_rng(seed)
    A = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    H = energy_scale * (A + A.conj().T) / 2
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    psi = psi / np.linalg.norm(psi)
    return ModelSpec("random", space, StateVector(space, psi), HamiltonianSchedule.constant(H),
                     DecompositionSpec("basis"), None,
                     {"seed": int(seed), "energy_scale": float(energy_scale), "default_horizon": 1.0})


def static_model(psi_I: StateVector, H=None, decomp: DecompositionSpec | None = None,
                 name: str = "static") -> ModelSpec:
    """Time-independent model; H = 0 when omitted. Carries no recording events."""
    d = psi_I.space.dim
    H = np.zeros((d, d), dtype=complex) if H is None else H
    return ModelSpec(name, psi_I.space, psi_I, HamiltonianSchedule.constant(H),
                     decomp or DecompositionSpec("basis"), (), {"default_horizon": 1.0})


@dataclass(frozen=True, eq=False)
class TreeNode:
    label: str
    t_start: float
    t_end: float
    # component at t_start and at t_end
    state_start: StateVector
    state_end: StateVector
    children: tuple["TreeNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=False)
class BranchTree:
    root: TreeNode
    horizon: float

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    @property
    def leaves(self) -> dict[str, StateVector]:
        return {n.label: n.state_end for n in self.nodes() if n.is_leaf}

    def reconstruction_error(self) -> float:
        """Worst |Σ children − parent| over internal nodes, at the split time."""
        worst = 0.0
        for node in self.nodes():
            if node.children:
                total = sum((c.state_start.amplitudes for c in node.children),
                            np.zeros_like(node.state_end.amplitudes))
                worst = max(worst, float(np.max(np.abs(total - node.state_end.amplitudes))))
        return worst


def branch_tree(model: ModelSpec, horizon: float | None = None,
                tol: Tolerances = DEFAULT) -> BranchTree:
    """Split the evolving state at each recording event into pointer components.

    Children whose squared norm is at most ``eps_branch`` are dropped; a node
    never has more than one parent.
    """
    if model.events is None:
        raise ValueError(f"model {model.name!r} has no recording-event metadata")
    T = model.default_horizon if horizon is None else float(horizon)
    events = sorted(model.events, key=lambda e: e.time)
    if events and T < events[-1].time:
        raise ScheduleError(f"horizon {T} precedes the last recording event at {events[-1].time}")
    sched = model.sched

    def grow(label: str, t0: float, state: StateVector, depth: int) -> TreeNode:
        t1 = events[depth].time if depth < len(events) else T
        end = propagate(state, t0, t1, sched)
        if depth == len(events):
            return TreeNode(label, t0, t1, state, end)
        children = []
        for out, P in zip(events[depth].labels, events[depth].projectors):
            child = apply_projector_B(end, P)
            if child.norm_sq > tol.eps_branch:
                children.append(grow(label + out, t1, child, depth + 1))
        return TreeNode(label, t0, t1, state, end, tuple(children))

    return BranchTree(grow("", 0.0, model.psi_I, 0), T)
