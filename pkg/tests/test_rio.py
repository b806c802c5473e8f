import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcomm import rio
from qcomm.qstate import StateError


def _psi(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def test_su_operator_forms():
    op = rio.SuOperator(1j, np.exp(0.3j), "lump")
    u0, u1 = op.sub_operators
    assert np.allclose(op.matrix, (u0 + u1) / math.sqrt(2))
    assert np.allclose(op.matrix.conj().T @ op.matrix, np.eye(2))
    with pytest.raises(StateError):
        rio.SuOperator(1, 1, "unit")
    with pytest.raises(StateError):
        rio.SuOperator(0.5, 1, "lump")


def test_cross_kerr_tags_only_the_path():
    reg = rio.DualRailRegister.from_vector(["A"], [1 / math.sqrt(2), 1 / math.sqrt(2)])
    out = rio.cross_kerr(reg, "A", 1, 2)
    assert out.phase_indices == (0, 2)
    assert abs(out.norm() - 1) < 1e-12


def test_bbs_is_self_inverse():
    reg = rio.DualRailRegister.from_vector(["A"], [0.6, 0.8j])
    back = rio.bbs_mix(rio.bbs_mix(reg, "A"), "A")
    assert np.allclose(back.settled(), reg.settled())


def test_homodyne_probabilities_sum_to_one():
    # |01> + |10>: one photon on each tagged path, classes +1 and -1 merge
    reg = rio.DualRailRegister.from_vector(["A", "B"], [0, 0.6, 0.8, 0])
    reg = rio.cross_kerr(rio.cross_kerr(reg, "A", 0, 1), "B", 0, -1)
    out = rio.homodyne_discriminate(reg)
    assert sum(p for _, p, _ in out) == pytest.approx(1)
    assert {res.outcome for res, _, _ in out} == {1}


def test_sampled_homodyne_seeded():
    reg = rio.DualRailRegister.from_vector(["A"], [0.6, 0.8])
    reg = rio.cross_kerr(reg, "A", 1, 1)
    a = rio.homodyne_discriminate(reg, mode="sampled", seed=4)
    b = rio.homodyne_discriminate(reg, mode="sampled", seed=4)
    assert a[0][0].outcome == b[0][0].outcome


def test_homodyne_desk_values():
    m = rio.HomodyneModel(1.0, math.pi, 1.0)
    e = rio.error_probabilities(m)
    assert e["P1"] == pytest.approx(0.0227501319, abs=1e-9)
    assert m.peak_separation() == pytest.approx(4)
    assert m.midpoint() == pytest.approx(0)
    assert rio.empirical_error_rate(m, 0, 1, 200_000, seed=1) == pytest.approx(e["P1"], abs=2e-3)


def test_small_dissipation_limit():
    p1, p2 = rio.success_probabilities(rio.HomodyneModel(1.0, math.pi, 1e-15))
    assert p1 == pytest.approx(0.625, abs=1e-12)
    assert p2 == pytest.approx(0.25, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 5), st.floats(0.01, 1), st.floats(0.05, math.pi))
def test_p1_at_least_p2(z, d, theta):
    p1, p2 = rio.success_probabilities(rio.HomodyneModel(z, theta, d))
    assert p1 >= p2 - 1e-15


def test_homodyne_model_validation():
    with pytest.raises(StateError):
        rio.HomodyneModel(z=0)
    with pytest.raises(StateError):
        rio.HomodyneModel(D=1.5)


def test_master_equation_photon_number_decays_like_d():
    times = np.linspace(0, 2, 5)
    traj = rio.integrate_master_equation(1.5, 1.0, times)
    want = [rio.dissipation_factor(1.0, t) for t in times]
    assert np.allclose(traj.photon_number, want, atol=1e-8)
    assert np.allclose(traj.amplitude, np.sqrt(want), atol=1e-8)


@pytest.mark.parametrize("channel", rio.CHANNELS)
def test_riho_every_channel(channel):
    rng = np.random.default_rng(11)
    res = rio.run_riho(_psi(rng), rio.SuOperator.random(rng, "lump"), channel)
    assert len(res.branches) == 16
    assert res.min_fidelity > 1 - 1e-10
    assert res.total_probability() == pytest.approx(1)


def test_riho_needs_lump_form():
    with pytest.raises(StateError):
        rio.run_riho([1, 0], rio.SuOperator(1, 0), "omega+")


@pytest.mark.parametrize("channel", rio.CHANNELS)
@pytest.mark.parametrize("which", [0, 1])
def test_ripuo(channel, which):
    rng = np.random.default_rng(which)
    u = rio.SuOperator.random(rng, "lump").sub_operators[which]
    res = rio.run_ripuo(_psi(rng), u, channel)
    assert res.min_fidelity > 1 - 1e-10


def test_ripuo_rejects_general_operator():
    with pytest.raises(StateError):
        rio.run_ripuo([1, 0], rio.SuOperator(0.6, 0.8))


def test_unknown_channel():
    with pytest.raises(StateError):
        rio.run_riho([1, 0], rio.SuOperator(1, 1, "lump"), "sigma")


def test_efficiency_values():
    assert rio.efficiency(1, 1) == Fraction(1, 10)
    assert rio.efficiency(2, 1) == Fraction(2, 15)
    assert abs(float(rio.efficiency(200, 0)) - 0.2) < 1e-3
    assert rio.classical_bits(2, 1) == 11 and rio.ebits(2, 1) == 4


def test_cjrio_base_case():
    rng = np.random.default_rng(2)
    ops = [rio.SuOperator.random(rng) for _ in range(2)]
    res = rio.run_cjrio(_psi(rng), ops, 1)
    assert res.min_fidelity > 1 - 1e-10
    assert res.total_probability() == pytest.approx(1)
    assert res.classical_bits == rio.classical_bits(2, 1)


@pytest.mark.parametrize("M,N", [(1, 0), (1, 1), (2, 0)])
def test_cjrio_small_configurations(M, N):
    rng = np.random.default_rng(M + 3 * N)
    ops = [rio.SuOperator.random(rng) for _ in range(M)]
    res = rio.run_cjrio(_psi(rng), ops, N)
    assert res.min_fidelity > 1 - 1e-10
    assert res.classical_bits == rio.classical_bits(M, N)


def test_cjrio_trajectories_for_larger_groups():
    rng = np.random.default_rng(7)
    ops = [rio.SuOperator.random(rng) for _ in range(3)]
    res = rio.run_cjrio(_psi(rng), ops, 3, trajectories=4, seed=1)
    assert len(res.branches) == 4
    assert res.min_fidelity > 1 - 1e-10


def test_cjrio_without_consent_halts():
    res = rio.run_cjrio([1, 0], [np.eye(2), np.eye(2)], 1, consent=False)
    assert res.status == "halted: no consent"
    assert all(b.state is None for b in res.branches)


def test_cjrio_photon_limit():
    with pytest.raises(StateError):
        rio.run_cjrio([1, 0], [np.eye(2)] * 4, 3)


def test_surface_csv_header():
    text = rio.success_surface_csv([1.0], [0.5, 1.0], [math.pi])
    lines = text.splitlines()
    assert lines[0] == "z,D,theta,P1Suc,P2Suc" and len(lines) == 3
