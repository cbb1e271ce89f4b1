"""Horizon sweeps: how branch probabilities and real states depend on T.

A true T → ∞ limit cannot be observed numerically. ``horizon_sweep`` calls a
sweep converged when the last ``n_stable`` consecutive horizon pairs agree
within ``eps_p`` on probabilities and ``eps_rho`` (trace distance) on real
states, with the same matched branch set throughout. It also records the
running min/max envelope of each probability so that bounded oscillation
can be told apart from drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .branching import BranchSet, final_branches, trajectories
from .decomposition import DecompositionSpec
from .dynamics import HamiltonianSchedule, propagate
from .errors import ScheduleError
from .linalg import DensityMatrix, StateVector, trace_distance
from .models import ModelSpec, branch_tree
from .tolerances import DEFAULT, Tolerances

SCHMIDT_NOTE = ("branch identity across horizons for state-dependent (schmidt) decompositions "
                "is assigned by greedy maximum-overlap matching, not by projector label")
LIMIT_NOTE = ("convergence means stability over the final n_stable horizon pairs at the "
              "stated tolerances; it is a finite-horizon surrogate, not a proof of a limit")


@dataclass(frozen=True)
class BranchMatching:
    pairs: tuple[tuple[str, str], ...]
    unmatched_from: tuple[str, ...]
    unmatched_to: tuple[str, ...]
    ambiguous: tuple[tuple[str, str], ...] = ()
    overlaps: dict = field(default_factory=dict)

    @property
    def mapping(self) -> dict[str, str]:
        return dict(self.pairs)


def match_branches(earlier: BranchSet, later: BranchSet, sched: HamiltonianSchedule,
                   tol: Tolerances = DEFAULT, method: str = "auto") -> BranchMatching:
    """Pair branches at horizon T with branches at a later horizon T′.

    With ``method="auto"`` fixed-basis kinds pair by projector label and
    Schmidt-kind branches pair greedily by |⟨ψ_m(T′), U(T′,T) ψ_l(T)⟩|, each
    branch used at most once; a choice whose runner-up overlap is within
    ``tol.ambiguity`` is flagged. ``"label"`` or ``"overlap"`` forces one rule.
    """
    if not earlier.horizon < later.horizon:
        raise ValueError("match_branches needs T < T′")
    if method not in ("auto", "label", "overlap"):
        raise ValueError(f"unknown matching method {method!r}")
    a, b = earlier.labels, later.labels
    by_label = "schmidt" not in (earlier.kind, later.kind)
    if method == "label" or (method == "auto" and by_label):
        common = [x for x in a if x in set(b)]
        return BranchMatching(tuple((x, x) for x in common),
                              tuple(x for x in a if x not in set(b)),
                              tuple(x for x in b if x not in set(a)))

    cols = np.stack([br.component.amplitudes for br in earlier], axis=1)
    moved = sched.evolve(cols, earlier.horizon, later.horizon)
    rows = np.stack([br.component.amplitudes for br in later], axis=1)
    M = np.abs(rows.conj().T @ moved)  # M[m, l]
    floor = np.sqrt(tol.eps_branch)
    pairs, ambiguous = [], []
    used_l, used_m = set(), set()
    for flat in np.argsort(-M, axis=None, kind="stable"):
        m, l = np.unravel_index(flat, M.shape)
        if l in used_l or m in used_m or M[m, l] <= floor:
            continue
        rivals = [M[m, j] for j in range(M.shape[1]) if j != l and j not in used_l]
        rivals += [M[i, l] for i in range(M.shape[0]) if i != m and i not in used_m]
        if rivals and M[m, l] - max(rivals) < tol.ambiguity:
            ambiguous.append((a[l], b[m]))
        pairs.append((a[l], b[m]))
        used_l.add(l)
        used_m.add(m)
    overlaps = {f"{a[l]}->{b[m]}": float(M[m, l]) for m in range(len(b)) for l in range(len(a))}
    return BranchMatching(tuple(pairs),
                          tuple(x for i, x in enumerate(a) if i not in used_l),
                          tuple(x for i, x in enumerate(b) if i not in used_m),
                          tuple(ambiguous), overlaps)


@dataclass
class Track:
    """One branch followed across horizons; ``None`` where it is absent."""

    key: str
    labels: list
    probabilities: list
    states: list  # per horizon: list of DensityMatrix per sample time, or None

    def envelope(self) -> tuple[list, list]:
        lo, hi, cur_lo, cur_hi = [], [], np.inf, -np.inf
        for p in self.probabilities:
            if p is not None:
                cur_lo, cur_hi = min(cur_lo, p), max(cur_hi, p)
            lo.append(None if np.isinf(cur_lo) else cur_lo)
            hi.append(None if np.isinf(cur_hi) else cur_hi)
        return lo, hi

    def spread(self) -> float:
        ps = [p for p in self.probabilities if p is not None]
        return float(max(ps) - min(ps)) if ps else 0.0


@dataclass
class PairDiagnostics:
    T_from: float
    T_to: float
    max_dp: float
    max_drho: float
    matched: int
    unmatched: int
    ambiguous: int
    count_changed: bool
    matched_probability_shift: float

    def stable(self, eps_p: float, eps_rho: float) -> bool:
        return (not self.count_changed and self.unmatched == 0
                and self.max_dp <= eps_p and self.max_drho <= eps_rho)


def _dm_to_list(rho: DensityMatrix):
    return [[[float(z.real), float(z.imag)] for z in row] for row in rho.data]


@dataclass
class HorizonReport:
    kind: str
    horizons: list[float]
    times: list[float]
    branch_counts: list[int]
    dropped_mass: list[float]
    tracks: list[Track]
    pairs: list[PairDiagnostics]
    # per track key: per pair: per time trace distance (None where unmatched)
    distances: dict[str, list]
    converged: bool
    eps_p: float
    eps_rho: float
    n_stable: int
    notes: list[str]
    branch_sets: list[BranchSet] = field(default_factory=list, repr=False)

    def track(self, key: str) -> Track:
        for t in self.tracks:
            if t.key == key:
                return t
        raise KeyError(key)

    @property
    def p_estimates(self) -> dict[str, float] | None:
        if not self.converged:
            return None
        return {t.key: t.probabilities[-1] for t in self.tracks if t.probabilities[-1] is not None}

    @property
    def rho_estimates(self) -> dict[str, list[DensityMatrix]] | None:
        if not self.converged:
            return None
        return {t.key: t.states[-1] for t in self.tracks if t.states[-1] is not None}

    def max_spread(self) -> float:
        return max((t.spread() for t in self.tracks), default=0.0)

    def to_dict(self) -> dict:
        tracks = []
        for t in self.tracks:
            lo, hi = t.envelope()
            tracks.append({
                "key": t.key,
                "labels": t.labels,
                "probabilities": t.probabilities,
                "envelope_min": lo,
                "envelope_max": hi,
                "spread": t.spread(),
                "trace_distances": self.distances.get(t.key, []),
            })
        out = {
            "kind": self.kind,
            "horizons": self.horizons,
            "times": self.times,
            "branch_counts": self.branch_counts,
            "dropped_mass": self.dropped_mass,
            "tracks": tracks,
            "pairs": [vars(p).copy() for p in self.pairs],
            "converged": self.converged,
            "status": "converged" if self.converged else "not_converged",
            "eps_p": self.eps_p,
            "eps_rho": self.eps_rho,
            "n_stable": self.n_stable,
            "estimates": None,
            "notes": self.notes,
        }
        if self.converged:
            out["estimates"] = {
                key: {"p_inf": self.p_estimates.get(key),
                      "rho_inf": [_dm_to_list(r) for r in states]}
                for key, states in self.rho_estimates.items()
            }
        return out


def horizon_sweep(psi_I: StateVector, sched: HamiltonianSchedule, spec: DecompositionSpec,
                  horizons: Sequence[float], times: Sequence[float],
                  eps_p: float | None = None, eps_rho: float | None = None,
                  n_stable: int | None = None, tol: Tolerances = DEFAULT) -> HorizonReport:
    eps_p = tol.eps_p if eps_p is None else eps_p
    eps_rho = tol.eps_rho if eps_rho is None else eps_rho
    n_stable = tol.n_stable if n_stable is None else n_stable
    horizons = [float(T) for T in horizons]
    times = [float(t) for t in times]
    if not horizons:
        raise ValueError("at least one horizon required")
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must be strictly increasing")
    if horizons[-1] > sched.horizon:
        raise ScheduleError(f"schedule ends at {sched.horizon}, before horizon {horizons[-1]}")
    if times and (times[0] < 0 or times[-1] > horizons[0]):
        raise ValueError("sample times must lie in [0, smallest horizon]")

    sets, trajs = [], []
    for T in horizons:
        bset = final_branches(psi_I, sched, spec, T, tol)
        sets.append(bset)
        trajs.append(trajectories(bset.branches, times, psi_I, sched, spec, tol) if times else {})

    n = len(horizons)
    # label at horizon i -> track
    tracks: list[Track] = []
    current: dict[str, Track] = {}
    for label in sets[0].labels:
        tr = Track(label, [None] * n, [None] * n, [None] * n)
        tracks.append(tr)
        current[label] = tr
    matchings = []
    for i in range(n):
        if i > 0:
            m = match_branches(sets[i - 1], sets[i], sched, tol)
            matchings.append(m)
            nxt = {}
            for old, new in m.pairs:
                nxt[new] = current[old]
            for new in m.unmatched_to:
                tr = Track(f"{new}@T{i}", [None] * n, [None] * n, [None] * n)
                tracks.append(tr)
                nxt[new] = tr
            current = nxt
        for b in sets[i]:
            tr = current[b.label]
            tr.labels[i] = b.label
            tr.probabilities[i] = b.probability
            tr.states[i] = list(trajs[i][b.label].states) if times else []

    distances: dict[str, list] = {t.key: [] for t in tracks}
    pairs = []
    for i, m in enumerate(matchings):
        max_dp = max_drho = shift = 0.0
        for tr in tracks:
            a, b = tr.probabilities[i], tr.probabilities[i + 1]
            if a is None or b is None:
                distances[tr.key].append(None)
                continue
            dp = abs(a - b)
            max_dp = max(max_dp, dp)
            shift += dp
            ds = [trace_distance(x, y, tol) for x, y in zip(tr.states[i], tr.states[i + 1])]
            distances[tr.key].append(ds)
            if ds:
                max_drho = max(max_drho, max(ds))
        pairs.append(PairDiagnostics(
            horizons[i], horizons[i + 1], max_dp, max_drho, len(m.pairs),
            len(m.unmatched_from) + len(m.unmatched_to), len(m.ambiguous),
            len(sets[i]) != len(sets[i + 1]), shift))

    converged = len(pairs) >= n_stable and n_stable >= 1 and all(
        p.stable(eps_p, eps_rho) for p in pairs[-n_stable:])
    notes = [LIMIT_NOTE]
    if len(pairs) < n_stable:
        notes.append(f"only {len(pairs)} horizon pairs available; n_stable={n_stable} required")
    if spec.kind == "schmidt":
        notes.append(SCHMIDT_NOTE)
    return HorizonReport(spec.kind, horizons, times, [len(s) for s in sets],
                         [s.dropped_mass for s in sets], tracks, pairs, distances,
                         converged, eps_p, eps_rho, n_stable, notes, sets)


@dataclass
class FtbornReport:
    horizons: list[float]
    # leaf label -> series of ⟨ψ(T), ψ_j(T)⟩ per horizon
    series: dict[str, list[complex]]
    leaf_probabilities: dict[str, float]
    matched_branch: dict[str, str | None]
    branch_probabilities: dict[str, float]
    max_probability_mismatch: float
    orthogonality_error: float
    max_series_drift: float
    unmatched_branches: list[str]

    def to_dict(self) -> dict:
        return {
            "horizons": self.horizons,
            "series": {k: [[z.real, z.imag] for z in v] for k, v in self.series.items()},
            "leaf_probabilities": self.leaf_probabilities,
            "matched_branch": self.matched_branch,
            "branch_probabilities": self.branch_probabilities,
            "max_probability_mismatch": self.max_probability_mismatch,
            "orthogonality_error": self.orthogonality_error,
            "max_series_drift": self.max_series_drift,
            "unmatched_branches": self.unmatched_branches,
        }


def ftborn_check(model: ModelSpec, horizons: Sequence[float],
                 tol: Tolerances = DEFAULT) -> FtbornReport:
    """Compare branch-tree inner products ⟨ψ(T), ψ_j(T)⟩ with final-branch probabilities.

    Each tree leaf is paired with the final branch it overlaps most. Also
    measures how far the leaf Gram matrix at the last horizon is from
    diag(p_j).
    """
    horizons = [float(T) for T in horizons]
    series: dict[str, list[complex]] = {}
    tree = None
    for T in horizons:
        tree = branch_tree(model, T, tol)
        psi_T = propagate(model.psi_I, 0.0, T, model.sched)
        for label, leaf in tree.leaves.items():
            series.setdefault(label, []).append(complex(np.vdot(psi_T.amplitudes, leaf.amplitudes)))

    leaves = tree.leaves
    labels = list(leaves)
    G = np.array([[np.vdot(leaves[a].amplitudes, leaves[b].amplitudes) for b in labels]
                  for a in labels])
    leaf_p = {k: float(np.real(v[-1])) for k, v in series.items()}
    ortho = float(np.max(np.abs(G - np.diag([leaf_p[k] for k in labels])))) if labels else 0.0

    bset = final_branches(model.psi_I, model.sched, model.decomp, horizons[-1], tol)
    matched, mismatch = {}, 0.0
    for label in labels:
        overlaps = [abs(np.vdot(b.component.amplitudes, leaves[label].amplitudes)) for b in bset]
        best = int(np.argmax(overlaps))
        if overlaps[best] ** 2 <= tol.eps_branch:
            matched[label] = None
            mismatch = max(mismatch, leaf_p[label])
            continue
        matched[label] = bset[best].label
        mismatch = max(mismatch, abs(leaf_p[label] - bset[best].probability))
    used = [m for m in matched.values() if m is not None]
    unmatched = [b.label for b in bset if b.label not in used]
    for b in bset:
        if b.label in unmatched:
            mismatch = max(mismatch, b.probability)
        elif used.count(b.label) > 1:
            # several leaves landed in one branch: compare the summed weight
            total = sum(leaf_p[k] for k, v in matched.items() if v == b.label)
            mismatch = max(mismatch, abs(total - b.probability))
    drift = max((float(np.max(np.abs(np.array(v) - v[-1]))) for v in series.values()), default=0.0)
    return FtbornReport(horizons, series, leaf_p, matched, bset.probabilities,
                        mismatch, ortho, drift, unmatched)
