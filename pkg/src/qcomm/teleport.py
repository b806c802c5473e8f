"""Teleportation, remote state preparation, multi-output teleportation and
broadcasting of known states."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit, preparation_circuit, run_circuit, standard_gate, zero_state
from .noise import NoiseModel, apply_noise
from .qstate import (
    BELL_VECTORS,
    MixedState,
    PureState,
    StateError,
    fidelity,
    partial_trace,
    tensor_all,
    tensor_product,
)

_X = standard_gate("X").matrix
_Z = standard_gate("Z").matrix
BELL_LABELS = tuple(BELL_VECTORS)
# Pauli sigma with (I (x) sigma)|phi+> equal to the labelled Bell state up to phase
_BELL_FROM_PHI_PLUS = {"phi+": np.eye(2), "phi-": _Z, "psi+": _X, "psi-": _X @ _Z}
# the singlet (|01> - |10>)/sqrt2 is psi- in the usual labelling
SINGLET = "psi-"


def bell_state(label: str) -> PureState:
    if label == "singlet":
        label = SINGLET
    if label not in BELL_VECTORS:
        raise StateError(f"not a Bell state: {label!r}")
    return PureState(BELL_VECTORS[label])


def _bell_sigma(label: str) -> np.ndarray:
    return _BELL_FROM_PHI_PLUS[SINGLET if label == "singlet" else label]


@dataclass
class BranchOutcome:
    bits: str
    probability: float
    states: list
    fidelities: list

    @property
    def fidelity(self) -> float:
        return min(self.fidelities) if self.fidelities else 1.0


# -- standard teleportation ----------------------------------------------------

TELEPORT_BITS = 2


def teleport_circuit(resource: str = "phi+") -> Circuit:
    """Qubit 0 payload, 1 sender half, 2 receiver half (resource already loaded)."""
    if resource not in BELL_VECTORS:
        raise StateError(f"teleportation needs a Bell resource, got {resource!r}")
    c = Circuit(3).add("CNOT", 0, 1).add("H", 0).measure([0, 1], ["m0", "m1"])
    sigma = _bell_sigma(resource)
    if not np.allclose(sigma, np.eye(2)):
        from .circuits import Gate

        c.add(Gate("pre", sigma.conj().T), 2)
    c.add("X", 2, controls=["m1"]).add("Z", 2, controls=["m0"])
    return c


def standard_teleport(payload: PureState, resource: str = "phi+", noise: NoiseModel | None = None):
    """Teleport one qubit; one BranchOutcome per Bell-measurement result."""
    if payload.num_qubits != 1:
        raise StateError("payload must be a single qubit")
    c = teleport_circuit(resource)
    start = tensor_product(payload, bell_state(resource))
    if noise is not None:
        start = apply_noise(start.density(), noise, [2])
    out = []
    for br in run_circuit(c, start).branches:
        r = partial_trace(br.state, [2])
        out.append(BranchOutcome(br.key, br.probability, [r], [fidelity(payload, r)]))
    return out


# -- remote state preparation ------------------------------------------------------

@dataclass(frozen=True)
class KnownQubit:
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0 <= self.theta <= np.pi + 1e-12:
            raise StateError("theta must lie in [0, pi]")
        if not 0 <= self.phi < 2 * np.pi:
            object.__setattr__(self, "phi", float(np.mod(self.phi, 2 * np.pi)))

    @property
    def vector(self) -> np.ndarray:
        return np.array([np.cos(self.theta / 2), np.exp(1j * self.phi) * np.sin(self.theta / 2)])

    def state(self) -> PureState:
        return PureState.from_vector(self.vector)


def u_rsp(phi: float) -> np.ndarray:
    """X Z P(-2 phi); maps |q1> to the orthogonal partner |q2>."""
    return _X @ _Z @ np.diag([1, np.exp(-2j * phi)])


def rsp_basis(q: KnownQubit) -> np.ndarray:
    """Columns |q1>, |q2> = U_RSP |q1>."""
    q1 = q.vector
    return np.column_stack([q1, u_rsp(q.phi) @ q1])


def _rsp_steps(c: Circuit, q: KnownQubit, sender: int, receiver: int, bit: str, resource: str):
    from .circuits import Gate

    sigma = _bell_sigma(resource) @ _bell_sigma(SINGLET).conj().T
    if not np.allclose(sigma, np.eye(2)):
        # receiver rotates the shared pair into the singlet before use
        c.add(Gate("pre", sigma.conj().T), receiver)
    c.add(Gate("basis", rsp_basis(q).conj().T), sender)
    c.measure([sender], [bit])
    # outcome 0 is |q1>: the receiver holds |q2> and undoes U_RSP;
    # outcome 1 is |q2>: identity
    c.add(Gate("u_rsp_inv", np.linalg.inv(u_rsp(q.phi))), receiver, controls=[bit], when=0)


def rsp(payload: KnownQubit, resource: str = "singlet", noise: NoiseModel | None = None):
    """Remotely prepare a known qubit with one shared pair and one classical bit."""
    c = Circuit(2)
    _rsp_steps(c, payload, 0, 1, "a", resource)
    start = bell_state(resource).density() if noise is not None else bell_state(resource)
    start = apply_noise(start, noise, [1])
    target = payload.state()
    out = []
    for br in run_circuit(c, start).branches:
        r = partial_trace(br.state, [1])
        out.append(BranchOutcome(br.key, br.probability, [r], [fidelity(target, r)]))
    return out


# -- multi-output teleportation -------------------------------------------------------

@dataclass(frozen=True)
class GhzLikePayload:
    m: int
    alpha: complex
    beta: complex

    def __post_init__(self):
        if self.m < 1:
            raise StateError("m must be at least 1")
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1) > 1e-10:
            raise StateError("payload not normalized")

    def state(self) -> PureState:
        v = np.zeros(2**self.m, dtype=complex)
        v[0], v[-1] = self.alpha, self.beta
        return PureState(v)

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "GhzLikePayload":
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        z /= np.linalg.norm(z)
        return cls(m, complex(z[0]), complex(z[1]))


def cascade(m: int) -> Circuit:
    """CNOT from qubit 0 to every other qubit; self-inverse."""
    c = Circuit(m)
    for i in range(1, m):
        c.add("CNOT", 0, i)
    return c


def mqt_dissolve(payload: GhzLikePayload):
    """Return (core qubit, remaining qubits) after the CNOT cascade.

    Raises if the result does not factor as core (x) |0...0>.
    """
    s = run_circuit(cascade(payload.m), payload.state()).branches[0].state
    a = s.amplitudes.reshape(2, -1)
    rest = np.zeros(a.shape[1], dtype=complex)
    rest[0] = 1
    if np.max(np.abs(a[:, 1:]), initial=0) > 1e-10:
        raise StateError("payload did not dissolve into a single core qubit")
    core = PureState.from_vector(a[:, 0])
    return core, (PureState(rest) if payload.m > 1 else None)


def mqt_reconstruct(core, m: int):
    """Receiver side: append m-1 fresh |0> qubits and undo the cascade."""
    if m == 1:
        return core
    zeros = zero_state(m - 1, mixed=isinstance(core, MixedState))
    full = tensor_product(core, zeros)
    return run_circuit(cascade(m), full).branches[0].state


MQT_BELL_PAIRS = 2


@dataclass
class MqtResult:
    branches: list
    bell_pairs: int
    classical_bits: int

    def averaged_states(self) -> list:
        """Probability-weighted receiver states over all branches."""
        out = []
        for j in range(2):
            m = sum(b.probability * b.states[j].density().matrix for b in self.branches)
            out.append(MixedState(m))
        return out


def mqt_run(payload_a: GhzLikePayload, payload_b: GhzLikePayload,
            noise: NoiseModel | None = None) -> MqtResult:
    """Teleport two GHZ-like payloads to two receivers with two Bell pairs.

    Qubit layout of the core simulation: 0 core A, 1 core B, 2/3 pair one
    (sender, receiver 1), 4/5 pair two (sender, receiver 2).
    """
    if payload_b.m != payload_a.m + 1:
        raise StateError("second payload must have m + 1 qubits")
    core_a, _ = mqt_dissolve(payload_a)
    core_b, _ = mqt_dissolve(payload_b)
    pair = bell_state("phi+")
    start = tensor_all([core_a, core_b, pair, pair])
    if noise is not None:
        start = apply_noise(start.density(), noise, [3, 5])
    c = (Circuit(6)
         .add("CNOT", 0, 2).add("H", 0).add("CNOT", 1, 4).add("H", 1)
         .measure([0, 2, 1, 4], ["a0", "a1", "b0", "b1"])
         .add("X", 3, controls=["a1"]).add("Z", 3, controls=["a0"])
         .add("X", 5, controls=["b1"]).add("Z", 5, controls=["b0"]))
    ta, tb = payload_a.state(), payload_b.state()
    branches = []
    for br in run_circuit(c, start).branches:
        ra = mqt_reconstruct(_reduce(br.state, 3), payload_a.m)
        rb = mqt_reconstruct(_reduce(br.state, 5), payload_b.m)
        branches.append(BranchOutcome(br.key, br.probability, [ra, rb],
                                      [fidelity(ta, ra), fidelity(tb, rb)]))
    return MqtResult(branches, MQT_BELL_PAIRS, 4)


def _reduce(state, q):
    r = partial_trace(state, [q])
    if isinstance(state, PureState):
        w, v = np.linalg.eigh(r.matrix)
        if w[-1] > 1 - 1e-10:
            return PureState.from_vector(v[:, -1])
    return r


def mqt_receiver_histogram(payload_a, payload_b, shots: int = 8192, seed=None):
    """Measure the first qubit of each reconstructed receiver state.

    Sampling runs over the joint distribution of teleportation branches and
    receiver outcomes; returns a ShotHistogram keyed by two-bit strings.
    """
    from .qstate import ShotHistogram, sample_counts

    probs: dict = {}
    for br in mqt_run(payload_a, payload_b).branches:
        pa = _first_qubit_probs(br.states[0])
        pb = _first_qubit_probs(br.states[1])
        for x, y in itertools.product("01", repeat=2):
            probs[x + y] = probs.get(x + y, 0.0) + br.probability * pa[int(x)] * pb[int(y)]
    counts = sample_counts(probs, shots, np.random.default_rng(seed))
    return ShotHistogram(shots, counts), probs


def _first_qubit_probs(state):
    d = np.real(np.diag(partial_trace(state, [0]).matrix))
    return d / d.sum()


# -- broadcasting of known states --------------------------------------------------------

VARIANTS = ("plain", "joint", "controlled", "multidirectional")


@dataclass(frozen=True)
class BroadcastChannelSpec:
    variant: str
    receivers: int = 2
    resources: tuple = ()
    distinct: bool = False
    disclose: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise StateError(f"unknown broadcast variant {self.variant!r}")
        if self.receivers < 1:
            raise StateError("need at least one receiver")
        if self.variant == "multidirectional" and self.receivers < 2:
            raise StateError("multidirectional broadcasting needs at least two parties")
        res = self.resources or self.default_resources()
        if len(res) != self.pair_count():
            raise StateError(f"{self.variant} needs {self.pair_count()} resources, got {len(res)}")
        if self.distinct and len(set(res)) != len(res):
            raise StateError("distinct-pair constraint violated")
        object.__setattr__(self, "resources", tuple(res))

    def pair_count(self) -> int:
        if self.variant == "multidirectional":
            return self.receivers * (self.receivers - 1)
        return self.receivers

    def default_resources(self) -> tuple:
        if self.variant == "joint":
            return ("ghz3",) * self.receivers
        if self.distinct:
            if self.pair_count() > 4:
                raise StateError("at most four distinct Bell pairs exist")
            return BELL_LABELS[: self.pair_count()]
        return (SINGLET,) * self.pair_count()


@dataclass
class BroadcastResult:
    status: str
    branches: list = field(default_factory=list)
    resources_used: int = 0
    classical_bits: int = 0

    @property
    def min_fidelity(self) -> float:
        return min((b.fidelity for b in self.branches), default=float("nan"))


def _broadcast_plain(payload: KnownQubit, resources, noise=None) -> list:
    m = len(resources)
    c = Circuit(2 * m)
    for i, res in enumerate(resources):
        _rsp_steps(c, payload, 2 * i, 2 * i + 1, f"a{i}", res)
    start = tensor_all([bell_state(r) for r in resources])
    if noise is not None:
        start = apply_noise(start.density(), noise, [2 * i + 1 for i in range(m)])
    target = payload.state()
    out = []
    for br in run_circuit(c, start).branches:
        rs = [_reduce(br.state, 2 * i + 1) for i in range(m)]
        out.append(BranchOutcome(br.key, br.probability, rs, [fidelity(target, r) for r in rs]))
    return out


def _broadcast_joint(payload: KnownQubit, m: int, noise=None) -> list:
    """Sender 1 knows theta and measures in {c|0>+s|1>, s|0>-c|1>}; after
    hearing bit a, sender 2 measures in (|0> +- e^{-i(-1)^a phi}|1>)/sqrt2.
    The receiver applies X^a then Z^(a xor b).

    The triples never interact, so one triple is simulated and the joint
    branches are products of its branches.
    """
    from .circuits import Gate

    th, ph = payload.theta / 2, payload.phi
    amp = np.array([[np.cos(th), np.sin(th)], [np.sin(th), -np.cos(th)]])
    # basis columns (|0> + e^{-i phi}|1>)/sqrt2, (|0> - e^{-i phi}|1>)/sqrt2
    ph_basis = np.array([[1, 1], [np.exp(-1j * ph), -np.exp(-1j * ph)]]) / np.sqrt(2)
    start = run_circuit(preparation_circuit("ghz3"), zero_state(3)).branches[0].state
    if noise is not None:
        # the receiver's qubit travels after distribution
        start = apply_noise(start.density(), noise, [2])
    c = (Circuit(3).add(Gate("amp", amp.conj().T), 0).measure([0], ["a"])
         # for a = 1 sender 2 conjugates the basis phase: P(-2 phi) before the rotation
         .add(Gate("adapt", np.diag([1, np.exp(-2j * ph)])), 1, controls=["a"])
         .add(Gate("phase", ph_basis.conj().T), 1).measure([1], ["b"])
         .add("X", 2, controls=["a"]).add("Z", 2, controls=["a", "b"]))
    target = payload.state()
    single = []
    for br in run_circuit(c, start).branches:
        r = _reduce(br.state, 2)
        single.append((br.key, br.probability, r, fidelity(target, r)))
    out = []
    for combo in itertools.product(single, repeat=m):
        out.append(BranchOutcome("".join(k for k, _, _, _ in combo),
                                 float(np.prod([p for _, p, _, _ in combo])),
                                 [r for _, _, r, _ in combo], [f for _, _, _, f in combo]))
    return out


def broadcast_known(payload, spec: BroadcastChannelSpec, noise: NoiseModel | None = None,
                    rng: np.random.Generator | None = None) -> BroadcastResult:
    """Prepare the known qubit ``payload`` at every receiver.

    plain: one pair per receiver, one RSP each.
    joint: one GHZ triple per receiver; the two senders split (theta, phi).
    controlled: the controller secretly picks a Bell variant for each pair
      (``spec.resources`` or drawn from ``rng``); without disclosure the
      receivers cannot choose their correction and the run reports
      "control not released".
    multidirectional: ``payload`` is a list with one known qubit per party;
      every party prepares its qubit at all others with n(n-1) pairs.
    """
    if spec.variant == "plain":
        br = _broadcast_plain(payload, spec.resources, noise)
        return BroadcastResult("ok", br, spec.pair_count(), spec.receivers)
    if spec.variant == "joint":
        br = _broadcast_joint(payload, spec.receivers, noise)
        return BroadcastResult("ok", br, spec.pair_count(), 2 * spec.receivers)
    if spec.variant == "controlled":
        resources = spec.resources
        if rng is not None and not spec.distinct:
            resources = tuple(rng.choice(BELL_LABELS, size=spec.receivers))
        if not spec.disclose:
            return BroadcastResult("control not released", [], spec.pair_count(), spec.receivers)
        br = _broadcast_plain(payload, resources, noise)
        # controller's disclosure costs two bits per pair
        return BroadcastResult("ok", br, spec.pair_count(), 3 * spec.receivers)
    # multidirectional
    parties = list(payload)
    n = spec.receivers
    if len(parties) != n:
        raise StateError(f"multidirectional broadcasting needs {n} payloads")
    branches = []
    k = 0
    for s in range(n):
        res = spec.resources[k:k + n - 1]
        k += n - 1
        for b in _broadcast_plain(parties[s], res, noise):
            branches.append(BranchOutcome(f"{s}:{b.bits}", b.probability, b.states, b.fidelities))
    return BroadcastResult("ok", branches, spec.pair_count(), spec.pair_count())


def broadcast_circuit_two_bell() -> Circuit:
    """Two phi+ pairs; the sender measures both halves in the diagonal basis and
    each receiver applies Z on outcome 1.  Prepares |+> at both receivers.

    Layout: 0, 1 sender halves; 2, 3 receivers, which measure last in the
    computational basis.
    """
    return (Circuit(4).add("H", 0).add("CNOT", 0, 2).add("H", 1).add("CNOT", 1, 3)
            .add("H", 0).add("H", 1).measure([0, 1], ["s0", "s1"])
            .add("Z", 2, controls=["s0"]).add("Z", 3, controls=["s1"])
            .measure([2, 3], ["r0", "r1"]))
