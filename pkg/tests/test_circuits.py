import json

import numpy as np
import pytest

from qcomm.circuits import (Circuit, circuit_from_dict, load_circuit, prepare_named,
                            preparation_circuit, run_circuit, zero_state)
from qcomm.qstate import PureState, StateError, fidelity


def test_bell_preparation():
    s = prepare_named("phi+")
    assert np.allclose(s.amplitudes, np.array([1, 0, 0, 1]) / np.sqrt(2))


def test_cluster4_amplitudes():
    s = prepare_named("cluster4")
    want = np.zeros(16, dtype=complex)
    want[[0b0000, 0b0011, 0b1100]] = 0.5
    want[0b1111] = -0.5
    assert fidelity(s, PureState(want)) > 1 - 1e-12


def test_ghz_n():
    s = prepare_named("ghz", 5)
    assert abs(s.amplitudes[0]) ** 2 == pytest.approx(0.5)
    assert abs(s.amplitudes[-1]) ** 2 == pytest.approx(0.5)


def test_inverse_undoes_preparation():
    c = preparation_circuit("cluster4")
    s = run_circuit(c.inverse(), prepare_named("cluster4")).branches[0].state
    assert abs(s.amplitudes[0]) > 1 - 1e-12


def test_measurement_branches_enumerated():
    c = Circuit(1).add("H", 0).measure([0], ["a"])
    res = run_circuit(c, zero_state(1))
    assert res.probabilities() == pytest.approx({"0": 0.5, "1": 0.5})


def test_classically_controlled_gate():
    c = Circuit(2).add("H", 0).measure([0], ["a"]).add("X", 1, controls=["a"])
    for br in run_circuit(c, zero_state(2)).branches:
        assert abs(br.state.amplitudes[3 * br.bits["a"]]) == pytest.approx(1)


def test_control_when_zero():
    c = Circuit(2).measure([0], ["a"]).add("X", 1, controls=["a"], when=0)
    br = run_circuit(c, zero_state(2)).branches[0]
    assert abs(br.state.amplitudes[1]) == pytest.approx(1)


def test_unknown_control_rejected():
    with pytest.raises(StateError):
        Circuit(1).add("X", 0, controls=["nope"])


def test_duplicate_target_rejected():
    with pytest.raises(StateError):
        Circuit(2).add("CNOT", 0, 0)


def test_sampled_mode_seeded():
    c = Circuit(2).add("H", 0).add("H", 1).measure([0, 1])
    a = run_circuit(c, zero_state(2), mode="sampled", shots=4096, seed=9)
    b = run_circuit(c, zero_state(2), mode="sampled", shots=4096, seed=9)
    assert a.histogram.counts == b.histogram.counts


def test_config_round_trip(tmp_path):
    cfg = {"num_qubits": 3, "steps": [
        {"gate": "H", "targets": [0]},
        {"gate": "CNOT", "targets": [0, 1]},
        {"gate": "Ry", "targets": [2], "params": [0.3]},
        {"measure": [0], "bits": ["m"]},
        {"gate": "X", "targets": [2], "if": ["m"], "when": 0},
    ]}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    c = load_circuit(p)
    assert c.num_qubits == 3 and len(c.steps) == 5
    assert set(run_circuit(c, zero_state(3)).probabilities()) == {"0", "1"}


@pytest.mark.parametrize("cfg", [
    {"steps": []},
    {"num_qubits": 1, "steps": [{"targets": [0]}]},
    {"num_qubits": 1, "steps": [{"gate": "Q", "targets": [0]}]},
    {"num_qubits": 1, "steps": [{"gate": "Rx", "targets": [0]}]},
])
def test_bad_config(cfg):
    with pytest.raises(StateError):
        circuit_from_dict(cfg)
