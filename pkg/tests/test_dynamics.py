import math

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import random_hermitian, random_state
from oracles import evolve_pieces
from realbranch import (
    BipartiteSpace,
    HamiltonianSchedule,
    NumericalError,
    ScheduleError,
    StateVector,
    eigen_propagator,
    propagate,
)

SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


def test_zero_hamiltonian_is_identity(rng):
    psi = random_state(rng, 2, 2)
    sched = HamiltonianSchedule.constant(np.zeros((4, 4)))
    assert np.array_equal(propagate(psi, 0.0, 3.0, sched).amplitudes, psi.amplitudes)


def test_sigma_z_for_pi():
    psi = StateVector(BipartiteSpace(2, 1), [0.6, 0.8j])
    out = propagate(psi, 0.0, math.pi, HamiltonianSchedule.constant(SIGMA_Z))
    expected = np.array([0.6 * np.exp(-1j * math.pi), 0.8j * np.exp(1j * math.pi)])
    assert np.max(np.abs(out.amplitudes - expected)) < 1e-15
    assert np.max(np.abs(out.amplitudes + psi.amplitudes)) < 1e-15


def test_single_segment_matches_expm(rng):
    H = random_hermitian(rng, 6)
    psi = random_state(rng, 2, 3)
    out = propagate(psi, 0.4, 2.1, HamiltonianSchedule.constant(H))
    assert np.max(np.abs(out.amplitudes - expm(-1j * H * 1.7) @ psi.amplitudes)) < 1e-12


def _piecewise(rng, d=6):
    return [(random_hermitian(rng, d), 0.7), (np.zeros((d, d)), 0.3),
            (random_hermitian(rng, d), 1.1), (random_hermitian(rng, d), None)]


def test_piecewise_matches_expm_oracle(rng):
    pieces = _piecewise(rng)
    sched = HamiltonianSchedule(pieces)
    psi = random_state(rng, 2, 3)
    for t1, t2 in [(0.0, 0.5), (0.2, 1.9), (0.0, 4.0), (1.0, 1.0), (2.5, 7.0)]:
        out = propagate(psi, t1, t2, sched)
        ref = evolve_pieces(pieces, psi.amplitudes, t1, t2)
        assert np.max(np.abs(out.amplitudes - ref)) < 1e-11


def test_composition(rng):
    sched = HamiltonianSchedule(_piecewise(rng))
    psi = random_state(rng, 2, 3)
    direct = propagate(psi, 0.3, 3.7, sched)
    split = propagate(propagate(psi, 0.3, 1.5, sched), 1.5, 3.7, sched)
    assert np.max(np.abs(direct.amplitudes - split.amplitudes)) < 1e-11


def test_reversibility_and_norm(rng):
    sched = HamiltonianSchedule(_piecewise(rng))
    psi = random_state(rng, 2, 3)
    fwd = propagate(psi, 0.1, 5.0, sched)
    assert abs(fwd.norm_sq - 1) < 1e-12
    back = propagate(fwd, 5.0, 0.1, sched)
    assert np.max(np.abs(back.amplitudes - psi.amplitudes)) < 1e-10


def test_propagator_matrix_matches_vector_path(rng):
    sched = HamiltonianSchedule(_piecewise(rng))
    psi = random_state(rng, 2, 3)
    U = sched.propagator(0.2, 3.0)
    assert U.unitarity_error() <= 1e-10
    assert np.max(np.abs(U.apply(psi).amplitudes - propagate(psi, 0.2, 3.0, sched).amplitudes)) < 1e-11
    # cached per (segment, duration): a repeat returns the identical array
    assert sched.segment_propagator(0, 0.5) is sched.segment_propagator(0, 0.5)


def test_eigen_propagator_examples(rng):
    H = random_hermitian(rng, 4)
    assert np.max(np.abs(eigen_propagator(H, 0.0).U - np.eye(4))) < 1e-14
    U = eigen_propagator(np.diag([0.0, 1.0]), 2 * math.pi).U
    assert np.max(np.abs(U - np.eye(2))) < 1e-14
    psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    P = eigen_propagator(H, 1.3)
    assert abs(np.linalg.norm(P.U @ psi) - np.linalg.norm(psi)) < 1e-12
    assert P.unitarity_error() <= 1e-10


def test_energy_conserved_within_segment(rng):
    H = random_hermitian(rng, 6)
    sched = HamiltonianSchedule.constant(H)
    psi = random_state(rng, 2, 3)
    e0 = np.vdot(psi.amplitudes, H @ psi.amplitudes).real
    for t in (0.5, 3.0, 17.0):
        a = propagate(psi, 0.0, t, sched).amplitudes
        assert abs(np.vdot(a, H @ a).real - e0) <= 1e-9 * max(1.0, abs(e0))


def test_schedule_errors(rng):
    with pytest.raises(ScheduleError):
        HamiltonianSchedule([(np.array([[0, 1], [0, 0]]), 1.0)])
    with pytest.raises(ScheduleError):
        HamiltonianSchedule([(np.eye(2), 0.0)])
    with pytest.raises(ScheduleError):
        HamiltonianSchedule([(np.eye(2), None), (np.eye(2), 1.0)])
    sched = HamiltonianSchedule([(np.eye(2), 1.0)])
    psi = StateVector(BipartiteSpace(2, 1), [1, 0])
    with pytest.raises(ScheduleError):
        propagate(psi, 0.0, 1.5, sched)
    with pytest.raises(ScheduleError):
        eigen_propagator(np.array([[0, 1j], [1j, 0]]), 1.0)


def test_eigendecomposition_failure_is_reported(monkeypatch):
    def boom(_):
        raise np.linalg.LinAlgError("did not converge")

    monkeypatch.setattr(np.linalg, "eigh", boom)
    with pytest.raises(NumericalError, match="eigen_propagator"):
        eigen_propagator(np.eye(2), 1.0)
