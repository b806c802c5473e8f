import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcomm.qstate import (ImpossibleBranchError, MeasurementBasis, MixedState, PureState, StateError,
                          apply_unitary, fidelity, measure, partial_trace, pauli_expectations,
                          random_mixed, random_pure, sample_counts, tensor_product,
                          tomography_reconstruct)

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def test_from_label_big_endian():
    assert np.argmax(PureState.from_label("01").probabilities()) == 1
    assert np.argmax(PureState.from_label("10").probabilities()) == 2


def test_unnormalized_rejected():
    with pytest.raises(StateError):
        PureState(np.array([1, 1], dtype=complex))
    with pytest.raises(StateError):
        MixedState(np.diag([0.7, 0.7]))


def test_negative_eigenvalue_rejected():
    with pytest.raises(StateError):
        MixedState(np.diag([1.2, -0.2]))


def test_apply_unitary_rejects_non_unitary():
    with pytest.raises(StateError):
        apply_unitary(PureState.from_label("0"), np.array([[1, 1], [0, 1]]), [0])


def test_hadamard_on_second_qubit():
    s = apply_unitary(PureState.from_label("00"), H, [1])
    assert np.allclose(s.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2), 0, 0])


def test_partial_trace_of_bell_is_mixed():
    bell = PureState.from_vector([1, 0, 0, 1])
    r = partial_trace(bell, [0])
    assert np.allclose(r.matrix, np.eye(2) / 2)


def test_partial_trace_keeps_order():
    s = tensor_product(PureState.from_label("0"), PureState.from_label("1"))
    assert np.allclose(partial_trace(s, [1]).matrix, np.diag([0, 1]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fidelity_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    a, b = random_mixed(1, rng), random_mixed(1, rng)
    f = fidelity(a, b)
    assert 0 <= f <= 1
    assert abs(f - fidelity(b, a)) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fidelity_pure_matches_overlap(seed):
    rng = np.random.default_rng(seed)
    a, b = random_pure(2, rng), random_pure(2, rng)
    assert abs(fidelity(a.density(), b.density()) - fidelity(a, b)) < 1e-8


def test_measure_bell_basis_on_bell_state():
    s = PureState.from_vector([1, 0, 0, 1])
    res = measure(s, MeasurementBasis.bell(), [0, 1])
    assert abs(res.probabilities["phi+"] - 1) < 1e-12


def test_force_impossible_branch():
    with pytest.raises(ImpossibleBranchError):
        measure(PureState.from_label("0"), MeasurementBasis.computational(), [0], force="1")


def test_sampled_measure_is_seeded():
    s = PureState.from_label("+")
    a = measure(s, MeasurementBasis.computational(), [0], shots=1000, seed=5, mode="sampled")
    b = measure(s, MeasurementBasis.computational(), [0], shots=1000, seed=5, mode="sampled")
    assert a.histogram.counts == b.histogram.counts
    assert sum(a.histogram.counts.values()) == 1000


def test_sample_counts_sum():
    c = sample_counts({"a": 0.2, "b": 0.8}, 500, np.random.default_rng(0))
    assert sum(c.values()) == 500


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]))
def test_tomography_round_trip(seed, n):
    rho = random_mixed(n, np.random.default_rng(seed))
    rec = tomography_reconstruct(pauli_expectations(rho))
    assert np.max(np.abs(rec.matrix - rho.matrix)) < 1e-9


def test_tomography_needs_all_strings():
    with pytest.raises(StateError):
        tomography_reconstruct({"I": 1.0, "X": 0.0})
