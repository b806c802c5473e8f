import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcomm.circuits import prepare_named
from qcomm.noise import (CHANNELS, NoiseModel, apply_channel, default_grid, make_channel, noise_sweep,
                         sweep_csv)
from qcomm.qstate import MixedState, PureState, StateError, fidelity, random_mixed


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(CHANNELS), st.floats(0, 1), st.sampled_from(["printed", "standard"]))
def test_kraus_completeness(label, p, conv):
    assert make_channel(label, p, conv).completeness_error() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(CHANNELS), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_channel_preserves_trace(label, p, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    rho = PureState.from_vector(v).density()
    out = apply_channel(rho, make_channel(label, p), 1)
    assert abs(np.trace(out.matrix) - 1) < 1e-12


def test_bit_flip_conventions():
    one = PureState.from_label("0").density()
    printed = apply_channel(one, make_channel("bit_flip", 0.0, "printed"), 0)
    standard = apply_channel(one, make_channel("bit_flip", 0.0, "standard"), 0)
    assert np.allclose(printed.matrix, np.diag([0, 1]))
    assert np.allclose(standard.matrix, np.diag([1, 0]))


def test_full_depolarizing_is_maximally_mixed():
    rho = PureState.from_label("+").density()
    out = apply_channel(rho, make_channel("depolarizing", 1.0), 0)
    assert np.allclose(out.matrix, np.eye(2) / 2)


def test_amplitude_damping_decays_excited():
    rho = PureState.from_label("1").density()
    out = apply_channel(rho, make_channel("amplitude_damping", 0.3), 0)
    assert out.matrix[1, 1].real == pytest.approx(0.7)


def test_phase_damping_kills_coherence():
    rho = PureState.from_label("+").density()
    out = apply_channel(rho, make_channel("phase_damping", 1.0), 0)
    assert abs(out.matrix[0, 1]) < 1e-12


@pytest.mark.parametrize("p", [-0.1, 1.1])
def test_probability_out_of_range(p):
    with pytest.raises(StateError):
        make_channel("bit_flip", p)


def test_unknown_channel():
    with pytest.raises(StateError):
        make_channel("erasure", 0.1)


def test_grid_and_sweep_csv():
    grid = default_grid(0.05)
    assert len(grid) == 21 and grid[-1] == 1.0
    bell = prepare_named("phi+")

    def runner(nm):
        rho = bell.density()
        return rho if nm is None else nm.apply(rho, [1])

    pts = noise_sweep(runner, "depolarizing", grid, protocol="bell")
    assert pts[0].fidelity == pytest.approx(1)
    text = sweep_csv(pts)
    assert text.splitlines()[0] == "channel,p,protocol,fidelity"
    assert len(text.splitlines()) == 22


def test_noise_model_sites_override():
    rho = MixedState(np.eye(4) / 4)
    nm = NoiseModel("amplitude_damping", 1.0, sites=(0,))
    out = nm.apply(PureState.from_label("11").density(), [1])
    assert out.matrix[1, 1].real == pytest.approx(1)
    assert fidelity(rho, rho) == pytest.approx(1)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(CHANNELS), st.floats(0, 1), st.integers(0, 2**32 - 1), st.permutations([0, 1, 2]))
def test_channel_commutes_with_relabeling(label, p, seed, perm):
    rho = random_mixed(3, np.random.default_rng(seed))
    ch = make_channel(label, p)
    permuted = np.transpose(rho.matrix.reshape((2,) * 6), list(perm) + [q + 3 for q in perm]).reshape(8, 8)
    a = apply_channel(MixedState(permuted), ch, perm.index(0)).matrix
    b = apply_channel(rho, ch, 0).matrix
    b = np.transpose(b.reshape((2,) * 6), list(perm) + [q + 3 for q in perm]).reshape(8, 8)
    assert np.allclose(a, b, atol=1e-12)


def test_full_depolarizing_overlap():
    psi = prepare_named("ghz", 3)
    rho = psi.density()
    ch = make_channel("depolarizing", 1.0)
    for q in range(3):
        rho = apply_channel(rho, ch, q)
    assert fidelity(psi, rho) == pytest.approx(1 / 8)


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_phase_damping_scales_coherence(p):
    out = apply_channel(PureState.from_label("+").density(), make_channel("phase_damping", p), 0)
    assert out.matrix[0, 1].real == pytest.approx(0.5 * (1 - p))


def test_bit_flip_fixes_maximally_mixed():
    out = apply_channel(MixedState.maximally_mixed(1), make_channel("bit_flip", 0.2), 0)
    assert np.allclose(out.matrix, np.eye(2) / 2)


def test_depolarizing_zero_is_single_identity():
    ch = make_channel("depolarizing", 0.0)
    assert len(ch.operators) == 1 and np.allclose(ch.operators[0], np.eye(2))
