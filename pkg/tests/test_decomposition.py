import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state, random_unitary
from realbranch import (
    BipartiteSpace,
    DecompositionSpec,
    InvalidStateError,
    StateVector,
    apply_projector_B,
    basis_decomposition,
    fourier_decomposition,
    schmidt,
    schmidt_projectors,
)
from realbranch.decomposition import group_degenerate


def _matrix_product_errors(projectors, d):
    """Orthogonality/completeness by direct matrix products."""
    worst = 0.0
    for i, P in enumerate(projectors):
        for j, Q in enumerate(projectors):
            target = P if i == j else np.zeros_like(P)
            worst = max(worst, np.max(np.abs(P @ Q - target)))
    worst = max(worst, np.max(np.abs(sum(projectors) - np.eye(d))))
    return worst


def test_computational_basis_d2():
    d = basis_decomposition(BipartiteSpace(1, 2))
    assert d.labels == ("0", "1")
    assert np.array_equal(d.projectors[0], np.diag([1, 0]))
    assert np.array_equal(d.projectors[1], np.diag([0, 1]))
    assert np.max(np.abs(sum(d.projectors) - np.eye(2))) == 0


def test_random_basis_d3(rng):
    d = basis_decomposition(BipartiteSpace(2, 3), random_unitary(rng, 3))
    assert _matrix_product_errors(d.projectors, 3) <= 1e-12
    assert d.is_valid()


def test_basis_rejects_non_orthonormal():
    with pytest.raises(InvalidStateError):
        basis_decomposition(BipartiteSpace(1, 2), np.array([[1, 1], [0, 1]]))


def test_fourier_examples():
    d2 = fourier_decomposition(BipartiteSpace(1, 2))
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    assert np.max(np.abs(d2.projectors[0] - np.outer(plus, plus))) < 1e-15
    assert np.max(np.abs(d2.projectors[1] - np.outer(minus, minus))) < 1e-15
    d1 = fourier_decomposition(BipartiteSpace(3, 1))
    assert len(d1) == 1 and np.allclose(d1.projectors[0], 1)
    d4 = fourier_decomposition(BipartiteSpace(1, 4))
    assert _matrix_product_errors(d4.projectors, 4) <= 1e-12


def test_schmidt_product_state(rng):
    a = np.array([0.6, 0.8j])
    b = np.array([1, 1j, -1]) / np.sqrt(3)
    s = schmidt(StateVector.product(a, b) * 2.0)
    assert s.coefficients.shape == (1,)
    assert s.coefficients[0] == pytest.approx(2.0, abs=1e-13)
    assert s.groups == ((0,),)


def test_schmidt_bell(bell):
    s = schmidt(bell)
    assert np.allclose(s.coefficients, [1 / np.sqrt(2)] * 2, atol=1e-15)
    assert s.groups == ((0, 1),)


def test_schmidt_unequal_coefficients():
    psi = StateVector(BipartiteSpace(2, 2), [np.sqrt(0.3), 0, 0, np.sqrt(0.7)])
    s = schmidt(psi, 1e-6)
    assert np.allclose(s.coefficients, [np.sqrt(0.7), np.sqrt(0.3)], atol=1e-15)
    assert s.groups == ((0,), (1,))


def test_schmidt_rejects_zero():
    with pytest.raises(InvalidStateError):
        schmidt(StateVector(BipartiteSpace(2, 2), np.zeros(4)))


def test_schmidt_projectors_bell(bell):
    d = schmidt_projectors(bell)
    assert d.labels == ("s0",)
    assert np.max(np.abs(d.projectors[0] - np.eye(2))) < 1e-12


def test_schmidt_projectors_distinct():
    psi = StateVector(BipartiteSpace(2, 2), [np.sqrt(0.3), 0, 0, np.sqrt(0.7)])
    d = schmidt_projectors(psi, 1e-6)
    assert d.labels == ("s0", "s1")
    assert np.max(np.abs(d.projectors[0] - np.diag([0, 1]))) < 1e-12
    assert np.max(np.abs(d.projectors[1] - np.diag([1, 0]))) < 1e-12


def test_schmidt_projectors_product_adds_null():
    psi = StateVector.product([1, 0], np.array([1, 1]) / np.sqrt(2))
    d = schmidt_projectors(psi)
    assert d.labels == ("s0", "null")
    f0 = np.array([1, 1]) / np.sqrt(2)
    assert np.max(np.abs(d.projectors[0] - np.outer(f0, f0))) < 1e-12
    assert d.is_valid()


def test_grouping_chains_consecutive_gaps():
    assert group_degenerate([1.0, 1.0 - 5e-9, 1.0 - 1e-8, 0.5], 6e-9) == ((0, 1, 2), (3,))
    assert group_degenerate([0.9, 0.5, 0.1], 1e-8) == ((0,), (1,), (2,))


def _degenerate_state(rng, d_A, d_B, multiplicities):
    """Random Schmidt vectors with prescribed repeated coefficients."""
    UA, UB = random_unitary(rng, d_A), random_unitary(rng, d_B)
    coeffs = []
    for value, count in multiplicities:
        coeffs += [value] * count
    coeffs = np.array(coeffs) / np.linalg.norm(coeffs)
    M = sum(c * np.outer(UA[:, j], UB[:, j]) for j, c in enumerate(coeffs))
    return StateVector(BipartiteSpace(d_A, d_B), M.reshape(-1)), len(multiplicities)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d_A=st.integers(1, 5), d_B=st.integers(1, 5))
def test_schmidt_invariants_random(seed, d_A, d_B):
    rng = np.random.default_rng(seed)
    psi = random_state(rng, d_A, d_B) * 1.3
    s = schmidt(psi)
    assert np.max(np.abs(s.reconstruct() - psi.amplitudes)) <= 1e-10
    assert abs(np.sum(s.coefficients ** 2) - psi.norm_sq) <= 1e-10
    assert np.all(np.diff(s.coefficients) <= 0)
    flat = sorted(i for g in s.groups for i in g)
    assert flat == list(range(len(s.coefficients)))
    decomp = schmidt_projectors(psi)
    assert decomp.is_valid()
    for n, group in enumerate(s.groups):
        comp = apply_projector_B(psi, decomp.projector(f"s{n}"))
        expect = sum(s.term(j) for j in group)
        assert np.max(np.abs(comp.amplitudes - expect)) <= 1e-10


def test_schmidt_degenerate_groups(rng):
    psi, n_groups = _degenerate_state(rng, 4, 5, [(2.0, 2), (1.0, 1), (0.5, 1)])
    s = schmidt(psi)
    assert len(s.groups) == n_groups
    assert [len(g) for g in s.groups] == [2, 1, 1]
    d = schmidt_projectors(psi)
    assert d.labels == ("s0", "s1", "s2", "null")
    assert np.trace(d.projector("s0")).real == pytest.approx(2, abs=1e-10)
    assert d.is_valid()


def test_spec_caches_fixed_family(rng):
    spec = DecompositionSpec("fourier")
    psi = random_state(rng, 2, 3)
    assert spec.build(psi) is spec.build(psi)
    with pytest.raises(ValueError, match="allowed"):
        DecompositionSpec("energy")
