"""Gate library, circuits with classical feed-forward, and named entangled states."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .qstate import (
    MixedState,
    PureState,
    ShotHistogram,
    StateError,
    _embed_apply,
    _normalize_raw,
    apply_unitary,
    sample_counts,
)

_S2 = 1 / np.sqrt(2)


def _rx(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]])


def _rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


_FIXED = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
    "H": np.array([[1, 1], [1, -1]]) * _S2,
    "S": np.diag([1, 1j]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    "CZ": np.diag([1, 1, 1, -1]),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
}
_PARAM = {
    "P": (1, lambda p: np.diag([1, np.exp(1j * p)])),
    "Rx": (1, _rx),
    "Ry": (1, _ry),
    "Rz": (1, _rz),
    # sigma_z(t) of the iterative veto protocol
    "SigmaZt": (1, lambda t: np.diag([1, np.exp(1j * np.pi / 2**t)])),
}
_ALIASES = {"CX": "CNOT", "ID": "I"}

GATE_NAMES = tuple(_FIXED) + tuple(_PARAM)


@dataclass(frozen=True, eq=False)
class Gate:
    label: str
    matrix: np.ndarray
    params: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = m.shape[0]
        if m.shape != (d, d) or np.max(np.abs(m.conj().T @ m - np.eye(d))) > 1e-10:
            raise StateError(f"gate {self.label} is not unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def num_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    def dagger(self) -> "Gate":
        return Gate(self.label + "^dag", self.matrix.conj().T, self.params)


def standard_gate(name: str, *params: float) -> Gate:
    key = _ALIASES.get(name, name)
    if key in _FIXED:
        if params:
            raise StateError(f"gate {name} takes no parameters")
        return Gate(key, _FIXED[key])
    if key in _PARAM:
        arity, fn = _PARAM[key]
        if len(params) != arity:
            raise StateError(f"gate {name} takes {arity} parameter(s)")
        return Gate(key, fn(*params), tuple(float(p) for p in params))
    raise StateError(f"unknown gate {name!r}")


def zyx_unitary(phi, gamma, beta, alpha) -> np.ndarray:
    """e^{i phi} Rz(gamma) Ry(beta) Rx(alpha)."""
    return np.exp(1j * phi) * _rz(gamma) @ _ry(beta) @ _rx(alpha)


# -- circuits ------------------------------------------------------------------

@dataclass(frozen=True)
class GateStep:
    gate: Gate
    targets: tuple
    controls: tuple = ()  # classical bits; applied iff their XOR equals ``when``
    when: int = 1


@dataclass(frozen=True)
class MeasureStep:
    targets: tuple
    bits: tuple


@dataclass
class Circuit:
    num_qubits: int
    steps: list = field(default_factory=list)

    def _check(self, targets):
        if any(t < 0 or t >= self.num_qubits for t in targets):
            raise StateError(f"targets {targets} out of range")
        if len(set(targets)) != len(targets):
            raise StateError(f"duplicate targets {targets}")

    def _known_bits(self) -> set:
        return {b for s in self.steps if isinstance(s, MeasureStep) for b in s.bits}

    def add(self, gate, *targets, controls=(), when: int = 1) -> "Circuit":
        if isinstance(gate, str):
            gate = standard_gate(gate)
        targets = tuple(int(t) for t in targets)
        self._check(targets)
        if gate.num_qubits != len(targets):
            raise StateError(f"gate {gate.label} needs {gate.num_qubits} targets")
        unknown = set(controls) - self._known_bits()
        if unknown:
            raise StateError(f"controls {sorted(unknown)} reference no earlier measurement")
        self.steps.append(GateStep(gate, targets, tuple(controls), int(when) & 1))
        return self

    def measure(self, targets, bits=None) -> "Circuit":
        targets = tuple(int(t) for t in targets)
        self._check(targets)
        bits = tuple(bits) if bits is not None else tuple(f"c{t}" for t in targets)
        if len(bits) != len(targets):
            raise StateError("one bit name per measured qubit")
        if set(bits) & self._known_bits():
            raise StateError(f"bit names {bits} reused")
        self.steps.append(MeasureStep(targets, bits))
        return self

    def inverse(self) -> "Circuit":
        """Inverse of a measurement-free circuit."""
        out = Circuit(self.num_qubits)
        for s in reversed(self.steps):
            if not isinstance(s, GateStep) or s.controls:
                raise StateError("only unconditioned unitary circuits can be inverted")
            out.steps.append(GateStep(s.gate.dagger(), s.targets))
        return out

    def unitary(self) -> np.ndarray:
        n = self.num_qubits
        cols = []
        for i in range(2**n):
            e = np.zeros(2**n, dtype=complex)
            e[i] = 1
            cols.append(run_circuit(self, PureState(e)).branches[0].state.amplitudes)
        return np.array(cols).T


@dataclass
class Branch:
    bits: dict
    probability: float
    state: object

    @property
    def key(self) -> str:
        return "".join(str(v) for v in self.bits.values())


@dataclass
class RunResult:
    branches: list
    histogram: ShotHistogram | None = None

    def probabilities(self) -> dict:
        out: dict = {}
        for b in self.branches:
            out[b.key] = out.get(b.key, 0.0) + b.probability
        return out


def run_circuit(c: Circuit, state, mode: str = "analytic", shots: int = 8192,
                seed=None, prune: float = 1e-14) -> RunResult:
    """Execute a circuit.

    Every measurement branch is enumerated with its exact probability.  In
    sampled mode a histogram over the concatenated measurement bits is drawn
    from those probabilities as well.
    """
    if state.num_qubits != c.num_qubits:
        raise StateError("input dimension does not match circuit")
    if mode not in ("analytic", "sampled"):
        raise StateError(f"unknown mode {mode!r}")
    branches = [Branch({}, 1.0, state)]
    for step in c.steps:
        nxt = []
        for br in branches:
            if isinstance(step, GateStep):
                if step.controls and sum(br.bits[b] for b in step.controls) % 2 != step.when:
                    nxt.append(br)
                    continue
                nxt.append(Branch(br.bits, br.probability,
                                  apply_unitary(br.state, step.gate.matrix, step.targets)))
            else:
                k = len(step.targets)
                for idx in range(2**k):
                    v = np.zeros(2**k)
                    v[idx] = 1
                    raw = _embed_apply(br.state, np.outer(v, v), step.targets)
                    if isinstance(br.state, PureState):
                        p = float(np.real(np.vdot(raw, raw)))
                    else:
                        p = float(np.real(np.trace(raw)))
                    if p <= prune:
                        continue
                    bits = dict(br.bits)
                    for name, ch in zip(step.bits, format(idx, f"0{k}b")):
                        bits[name] = int(ch)
                    nxt.append(Branch(bits, br.probability * p, _normalize_raw(br.state, raw, p)))
        branches = nxt
    res = RunResult(branches)
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        counts = sample_counts(res.probabilities(), shots, rng)
        res.histogram = ShotHistogram(shots, counts)
    return res


# -- config files ---------------------------------------------------------------

def circuit_from_dict(cfg: dict) -> Circuit:
    """Build a circuit from the documented JSON schema.

    {"num_qubits": n, "steps": [
        {"gate": "H", "targets": [0]},
        {"gate": "Rz", "targets": [1], "params": [0.5]},
        {"measure": [0, 1], "bits": ["m0", "m1"]},
        {"gate": "X", "targets": [2], "if": ["m1"]},
        {"gate": "Z", "targets": [2], "if": ["m0"], "when": 0}]}

    A gate with "if" runs when the XOR of the listed bits equals "when"
    (default 1).
    """
    try:
        c = Circuit(int(cfg["num_qubits"]))
        for i, s in enumerate(cfg.get("steps", [])):
            if "measure" in s:
                c.measure(s["measure"], s.get("bits"))
            elif "gate" in s:
                g = standard_gate(s["gate"], *s.get("params", []))
                c.add(g, *s["targets"], controls=s.get("if", ()), when=s.get("when", 1))
            else:
                raise StateError(f"step {i} has neither 'gate' nor 'measure'")
    except KeyError as exc:
        raise StateError(f"missing field {exc}") from None
    return c


def load_circuit(path) -> Circuit:
    return circuit_from_dict(json.loads(Path(path).read_text()))


# -- named states -----------------------------------------------------------------

def bell_circuit(label: str = "phi+") -> Circuit:
    """H on qubit 0, CNOT 0->1, then Paulis selecting the Bell variant."""
    c = Circuit(2).add("H", 0).add("CNOT", 0, 1)
    if label in ("psi+", "psi-"):
        c.add("X", 1)
    if label in ("phi-", "psi-"):
        c.add("Z", 0)
    if label not in ("phi+", "phi-", "psi+", "psi-"):
        raise StateError(f"unknown Bell state {label!r}")
    return c


def ghz_circuit(n: int) -> Circuit:
    if n < 3:
        raise StateError("GHZ needs at least 3 qubits")
    c = Circuit(n).add("H", 0)
    for i in range(1, n):
        c.add("CNOT", 0, i)
    return c


def cluster4_circuit() -> Circuit:
    return (Circuit(4).add("H", 0).add("H", 2).add("CZ", 0, 2)
            .add("CNOT", 0, 1).add("CNOT", 2, 3))


def preparation_circuit(name: str, n: int | None = None) -> Circuit:
    if name in ("phi+", "phi-", "psi+", "psi-"):
        return bell_circuit(name)
    if name == "bell":
        return bell_circuit("phi+")
    if name == "ghz":
        return ghz_circuit(3 if n is None else n)
    if name.startswith("ghz") and name[3:].isdigit():
        return ghz_circuit(int(name[3:]))
    if name == "cluster4":
        return cluster4_circuit()
    raise StateError(f"unknown named state {name!r}")


def prepare_named(name: str, n: int | None = None) -> PureState:
    """bell states (phi+, phi-, psi+, psi-), ghz / ghzN, cluster4."""
    c = preparation_circuit(name, n)
    zero = np.zeros(2**c.num_qubits, dtype=complex)
    zero[0] = 1
    return run_circuit(c, PureState(zero)).branches[0].state


def zero_state(n: int, mixed: bool = False):
    v = np.zeros(2**n, dtype=complex)
    v[0] = 1
    s = PureState(v)
    return s.density() if mixed else s


__all__ = [
    "Gate", "standard_gate", "zyx_unitary", "Circuit", "GateStep", "MeasureStep",
    "Branch", "RunResult", "run_circuit", "circuit_from_dict", "load_circuit",
    "bell_circuit", "ghz_circuit", "cluster4_circuit", "preparation_circuit",
    "prepare_named", "zero_state", "GATE_NAMES", "MixedState",
]
