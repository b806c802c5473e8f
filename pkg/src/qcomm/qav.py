"""Quantum anonymous veto.

Protocol A circulates one half of |phi+> through all voters; a vetoing voter
applies sigma_z(t) = diag(1, e^{i pi / 2^t}) in iteration t.  The tallying
agent undoes the Bell preparation and reads "00" (phi+, inconclusive) or
"10" (phi-, conclusive).

Protocol B circulates qubits 1 and 2 of a cluster or GHZ state; each vetoing
voter applies a fixed two-qubit operator and one measurement decides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import preparation_circuit, run_circuit, standard_gate, zero_state
from .noise import NoiseModel, apply_noise
from .qstate import PureState, StateError, apply_unitary

_I = np.eye(2, dtype=complex)
_X = standard_gate("X").matrix
_Z = standard_gate("Z").matrix
_IY = 1j * standard_gate("Y").matrix  # [[0, 1], [-1, 0]]

BELL_OUTCOME = {"00": "phi+", "10": "phi-", "01": "psi+", "11": "psi-"}


@dataclass(frozen=True)
class VoteVector:
    vetoes: tuple

    @classmethod
    def from_string(cls, bits: str) -> "VoteVector":
        if not bits or set(bits) - {"0", "1"}:
            raise StateError(f"vote string must be over 0/1, got {bits!r}")
        return cls(tuple(ch == "1" for ch in bits))

    @classmethod
    def from_vetoers(cls, n: int, vetoers) -> "VoteVector":
        v = set(vetoers)
        if any(i < 1 or i > n for i in v):
            raise StateError("voter indices are 1-based and at most n")
        return cls(tuple(i + 1 in v for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.vetoes)

    @property
    def count(self) -> int:
        return sum(self.vetoes)

    def __str__(self) -> str:
        return "".join("1" if v else "0" for v in self.vetoes)


def sigma_z(t: int) -> np.ndarray:
    if t < 0:
        raise StateError("iteration index must be non-negative")
    return standard_gate("SigmaZt", t).matrix


def max_iterations(n: int) -> int:
    return 1 + math.ceil(math.log2(n)) if n > 1 else 1


# -- Protocol A -------------------------------------------------------------------

TRAVEL_A = 1


@dataclass
class RoundResult:
    t: int
    outcome: str
    label: str
    conclusive: bool
    probabilities: dict


def protocol_a_final(votes: VoteVector, t: int, noise: NoiseModel | None = None):
    """Bell pair after all voters acted in iteration t (before the agent's measurement).

    With noise the channel hits the travel qubit on each of the n+1 hops.
    """
    state = run_circuit(preparation_circuit("phi+"), zero_state(2)).branches[0].state
    if noise is not None:
        state = state.density()
    u = sigma_z(t)
    state = apply_noise(state, noise, [TRAVEL_A])
    for veto in votes.vetoes:
        if veto:
            state = apply_unitary(state, u, [TRAVEL_A])
        state = apply_noise(state, noise, [TRAVEL_A])
    return state


def _readout(state) -> dict:
    c = preparation_circuit("phi+").inverse().measure([0, 1], ["b0", "b1"])
    return run_circuit(c, state).probabilities()


def protocol_a_round(votes: VoteVector, t: int) -> RoundResult:
    probs = _readout(protocol_a_final(votes, t))
    outcome = max(probs, key=probs.get)
    label = BELL_OUTCOME[outcome]
    return RoundResult(t, outcome, label, label == "phi-", probs)


@dataclass
class ProtocolAResult:
    rounds: list
    verdict: str

    @property
    def conclusive_iteration(self) -> int | None:
        """1-based iteration at which a veto was detected."""
        for r in self.rounds:
            if r.conclusive:
                return r.t + 1
        return None


def protocol_a_run(votes: VoteVector) -> ProtocolAResult:
    rounds = []
    for t in range(max_iterations(votes.n)):
        r = protocol_a_round(votes, t)
        rounds.append(r)
        if r.conclusive:
            return ProtocolAResult(rounds, "veto")
    return ProtocolAResult(rounds, "no veto")


# -- Protocol B -------------------------------------------------------------------------

@dataclass(frozen=True)
class EncodingTable:
    resource: str
    operators: tuple  # one (op on qubit 1, op on qubit 2) pair per voter

    def matrix(self, voter: int) -> np.ndarray:
        a, b = self.operators[voter]
        return np.kron(a, b)


CLUSTER_ENCODING = EncodingTable("cluster4", ((_X, _IY), (_X, _Z), (_IY, _Z), (_IY, _IY)))
GHZ_ENCODING = EncodingTable("ghz3", ((_X, _I), (_X, _X), (_IY, _X), (_IY, _I)))
ENCODINGS = {"cluster4": CLUSTER_ENCODING, "ghz3": GHZ_ENCODING}
TRAVEL_B = (1, 2)


@dataclass
class ProtocolBResult:
    outcome: str
    probability: float
    overlap: float
    verdict: str
    final_state: object

    @property
    def conclusive(self) -> bool:
        return self.verdict == "no consensus"


def protocol_b_initial(resource: str) -> PureState:
    c = preparation_circuit(resource)
    return run_circuit(c, zero_state(c.num_qubits)).branches[0].state


def protocol_b_final(votes: VoteVector, resource: str = "cluster4",
                     encoding: EncodingTable | None = None, noise: NoiseModel | None = None):
    encoding = encoding or ENCODINGS.get(resource)
    if encoding is None or encoding.resource != resource:
        raise StateError(f"encoding does not match resource {resource!r}")
    if votes.n != len(encoding.operators):
        raise StateError(f"{resource} table covers {len(encoding.operators)} voters")
    state = protocol_b_initial(resource)
    if noise is not None:
        state = state.density()
    state = apply_noise(state, noise, TRAVEL_B)
    for i, veto in enumerate(votes.vetoes):
        if veto:
            state = apply_unitary(state, encoding.matrix(i), TRAVEL_B)
        state = apply_noise(state, noise, TRAVEL_B)
    return state


def protocol_b_run(votes: VoteVector, resource: str = "cluster4",
                   encoding: EncodingTable | None = None) -> ProtocolBResult:
    psi_in = protocol_b_initial(resource)
    psi_fin = protocol_b_final(votes, resource, encoding)
    overlap = abs(np.vdot(psi_in.amplitudes, psi_fin.amplitudes))
    prep = preparation_circuit(resource)
    c = prep.inverse().measure(range(prep.num_qubits), [f"b{i}" for i in range(prep.num_qubits)])
    probs = run_circuit(c, psi_fin).probabilities()
    outcome = max(probs, key=probs.get)
    verdict = "consensus" if abs(overlap - 1) < 1e-10 else "no consensus"
    return ProtocolBResult(outcome, probs[outcome], float(overlap), verdict, psi_fin)


def all_patterns(n: int):
    for k in range(2**n):
        yield VoteVector.from_string(format(k, f"0{n}b"))
