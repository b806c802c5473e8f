"""Dense pure and mixed qubit states.

Ordering is big-endian: qubit 0 is the leftmost symbol of a ket and the most
significant bit of the amplitude index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

MAX_QUBITS = 20
ATOL = 1e-10

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class StateError(ValueError):
    """Invalid state, operator or target specification."""


class ImpossibleBranchError(StateError):
    """A forced measurement outcome has zero probability."""


def _check_n(n: int) -> None:
    if n < 0 or n > MAX_QUBITS:
        raise StateError(f"qubit count {n} outside [0, {MAX_QUBITS}]")


def _qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise StateError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        _check_n(_qubits_of(a.size))
        if abs(np.linalg.norm(a) - 1) > ATOL:
            raise StateError(f"state not normalized (norm={np.linalg.norm(a):.3g})")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def num_qubits(self) -> int:
        return _qubits_of(self.amplitudes.size)

    @classmethod
    def from_vector(cls, vec, normalize: bool = True) -> "PureState":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        if normalize:
            nrm = np.linalg.norm(v)
            if nrm == 0:
                raise StateError("zero vector")
            v = v / nrm
        return cls(v)

    @classmethod
    def from_label(cls, label: str) -> "PureState":
        """Product state from a string over 0, 1, +, -, r (|+i>), l (|-i>)."""
        s = 1 / np.sqrt(2)
        single = {
            "0": [1, 0], "1": [0, 1], "+": [s, s], "-": [s, -s],
            "r": [s, 1j * s], "l": [s, -1j * s],
        }
        try:
            vecs = [np.array(single[ch], dtype=complex) for ch in label]
        except KeyError as exc:
            raise StateError(f"unknown symbol {exc} in label {label!r}") from None
        return cls(reduce(np.kron, vecs, np.ones(1, dtype=complex)))

    @classmethod
    def qubit(cls, alpha: complex, beta: complex) -> "PureState":
        return cls.from_vector([alpha, beta])

    def density(self) -> "MixedState":
        return MixedState(np.outer(self.amplitudes, self.amplitudes.conj()))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self) -> str:
        return f"PureState(n={self.num_qubits})"


@dataclass(frozen=True, eq=False)
class MixedState:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateError("density matrix must be square")
        _check_n(_qubits_of(m.shape[0]))
        if np.max(np.abs(m - m.conj().T), initial=0) > ATOL:
            raise StateError("density matrix not Hermitian")
        if abs(np.trace(m) - 1) > ATOL:
            raise StateError(f"trace {np.trace(m).real:.6g} != 1")
        if np.linalg.eigvalsh(m).min() < -ATOL:
            raise StateError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def num_qubits(self) -> int:
        return _qubits_of(self.matrix.shape[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def density(self) -> "MixedState":
        return self

    @classmethod
    def maximally_mixed(cls, n: int) -> "MixedState":
        return cls(np.eye(2**n, dtype=complex) / 2**n)

    def __repr__(self) -> str:
        return f"MixedState(n={self.num_qubits})"


def as_density(state) -> MixedState:
    return state.density()


# -- low level tensor helpers, shared with the photonic register --------------

def apply_to_axes(tensor: np.ndarray, u: np.ndarray, axes) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to the given qubit axes of a (2,)*n tensor."""
    k = len(axes)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _check_targets(targets, n: int) -> tuple[int, ...]:
    t = tuple(int(x) for x in targets)
    if len(set(t)) != len(t):
        raise StateError(f"duplicate targets {t}")
    if any(x < 0 or x >= n for x in t):
        raise StateError(f"targets {t} out of range for {n} qubits")
    return t


def _check_unitary(u: np.ndarray, k: int, tol: float = 1e-8) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (2**k, 2**k):
        raise StateError(f"operator shape {u.shape} does not match {k} targets")
    if np.max(np.abs(u.conj().T @ u - np.eye(2**k))) > tol:
        raise StateError("operator is not unitary")
    return u


def _embed_apply(state, op: np.ndarray, targets) -> np.ndarray:
    """Return the raw array of op applied on targets (pure: vector, mixed: op rho op^dag)."""
    n = state.num_qubits
    if isinstance(state, PureState):
        t = state.amplitudes.reshape((2,) * n)
        return apply_to_axes(t, op, targets).reshape(-1)
    t = state.matrix.reshape((2,) * (2 * n))
    t = apply_to_axes(t, op, targets)
    t = apply_to_axes(t, op.conj(), [n + x for x in targets])
    return t.reshape(2**n, 2**n)


def apply_unitary(state, u, targets):
    """U|psi> or U rho U^dag with U acting on ``targets`` (in the given order)."""
    t = _check_targets(targets, state.num_qubits)
    u = _check_unitary(u, len(t))
    out = _embed_apply(state, u, t)
    if isinstance(state, PureState):
        return PureState.from_vector(out)
    return MixedState((out + out.conj().T) / 2)


def tensor_product(a, b):
    """a (x) b, with a on the leftmost qubits."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, MixedState) and isinstance(b, MixedState):
        return MixedState(np.kron(a.matrix, b.matrix))
    raise StateError("tensor_product needs two states of the same kind")


def tensor_all(states):
    return reduce(tensor_product, states)


def partial_trace(rho, keep) -> MixedState:
    n = rho.num_qubits
    keep = sorted(_check_targets(keep, n))
    if not keep:
        raise StateError("keep set must be non-empty")
    if isinstance(rho, PureState):
        m = np.moveaxis(rho.amplitudes.reshape((2,) * n), keep, range(len(keep)))
        m = m.reshape(2 ** len(keep), -1)
        m = m @ m.conj().T
        return MixedState((m + m.conj().T) / 2)
    rho = as_density(rho)
    drop = [q for q in range(n) if q not in keep]
    t = rho.matrix.reshape((2,) * (2 * n))
    # trace highest index first so the remaining axis numbers stay valid
    for q in sorted(drop, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + cur)
    d = 2 ** len(keep)
    m = t.reshape(d, d)
    return MixedState((m + m.conj().T) / 2)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    if w.min() < -1e-12:
        raise StateError(f"matrix has eigenvalue {w.min():.3g} below -1e-12")
    # round-off eigenvalues would otherwise contribute sqrt(1e-16) = 1e-8
    w = np.where(w < 1e-13, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(sigma, rho) -> float:
    """F = (Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2."""
    if isinstance(sigma, PureState) and isinstance(rho, PureState):
        if sigma.num_qubits != rho.num_qubits:
            raise StateError("dimension mismatch")
        return float(abs(np.vdot(sigma.amplitudes, rho.amplitudes)) ** 2)
    if isinstance(sigma, PureState) or isinstance(rho, PureState):
        pure, other = (sigma, rho) if isinstance(sigma, PureState) else (rho, sigma)
        if pure.num_qubits != other.num_qubits:
            raise StateError("dimension mismatch")
        psi = pure.amplitudes
        return float(np.clip(np.real(psi.conj() @ other.matrix @ psi), 0, 1))
    s, r = sigma.matrix, rho.matrix
    if s.shape != r.shape:
        raise StateError("dimension mismatch")
    # nuclear norm of sqrt(sigma) sqrt(rho)
    sv = np.linalg.svd(_psd_sqrt(s) @ _psd_sqrt(r), compute_uv=False)
    return float(np.clip(np.sum(sv) ** 2, 0, 1))


# -- measurement ---------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementBasis:
    label: str
    projectors: tuple
    outcomes: tuple = ()

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=complex).reshape(-1) for v in self.projectors)
        if not vecs:
            raise StateError("empty basis")
        d = vecs[0].size
        _qubits_of(d)
        g = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
        if np.max(np.abs(g - np.eye(len(vecs)))) > ATOL:
            raise StateError("basis vectors are not orthonormal")
        if len(vecs) != d:
            raise StateError("basis is not complete")
        outs = tuple(self.outcomes) or tuple(str(i) for i in range(len(vecs)))
        if len(outs) != len(vecs):
            raise StateError("one outcome label per projector required")
        object.__setattr__(self, "projectors", vecs)
        object.__setattr__(self, "outcomes", outs)

    @property
    def num_qubits(self) -> int:
        return _qubits_of(self.projectors[0].size)

    @classmethod
    def computational(cls, k: int = 1) -> "MeasurementBasis":
        d = 2**k
        return cls("computational", tuple(np.eye(d)),
                   tuple(format(i, f"0{k}b") for i in range(d)))

    @classmethod
    def diagonal(cls, k: int = 1) -> "MeasurementBasis":
        h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        hk = reduce(np.kron, [h] * k)
        labels = ["".join(p) for p in itertools.product("+-", repeat=k)]
        return cls("diagonal", tuple(hk.T), tuple(labels))

    @classmethod
    def bell(cls) -> "MeasurementBasis":
        return cls("bell", tuple(BELL_VECTORS.values()), tuple(BELL_VECTORS))

    @classmethod
    def custom(cls, vectors, outcomes=()) -> "MeasurementBasis":
        return cls("custom", tuple(vectors), tuple(outcomes))


_S = 1 / np.sqrt(2)
BELL_VECTORS = {
    "phi+": np.array([_S, 0, 0, _S], dtype=complex),
    "phi-": np.array([_S, 0, 0, -_S], dtype=complex),
    "psi+": np.array([0, _S, _S, 0], dtype=complex),
    "psi-": np.array([0, _S, -_S, 0], dtype=complex),
}


@dataclass
class ShotHistogram:
    shots: int
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.shots <= 0:
            raise StateError("shots must be positive")
        if sum(self.counts.values()) != self.shots:
            raise StateError("counts do not sum to shots")

    def frequency(self, outcome: str) -> float:
        return self.counts.get(outcome, 0) / self.shots


@dataclass
class MeasurementResult:
    probabilities: dict
    states: dict
    histogram: ShotHistogram | None = None
    record: str | None = None

    @property
    def collapsed(self):
        return self.states[self.record] if self.record is not None else None


def branch_probabilities(state, basis: MeasurementBasis, targets):
    """Born probabilities and unnormalized post-measurement arrays, per outcome."""
    t = _check_targets(targets, state.num_qubits)
    if basis.num_qubits != len(t):
        raise StateError("basis size does not match targets")
    out = {}
    for label, v in zip(basis.outcomes, basis.projectors):
        proj = np.outer(v, v.conj())
        raw = _embed_apply(state, proj, t)
        if isinstance(state, PureState):
            p = float(np.real(np.vdot(raw, raw)))
        else:
            p = float(np.real(np.trace(raw)))
        out[label] = (max(p, 0.0), raw)
    return out


def _normalize_raw(state, raw, p):
    if isinstance(state, PureState):
        return PureState.from_vector(raw / np.sqrt(p))
    m = raw / p
    return MixedState((m + m.conj().T) / 2)


def sample_counts(probs: dict, shots: int, rng: np.random.Generator) -> dict:
    """Inverse-CDF sampling of ``shots`` outcomes."""
    labels = list(probs)
    p = np.array([probs[k] for k in labels], dtype=float)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(shots), side="right")
    idx = np.minimum(idx, len(labels) - 1)
    hits = np.bincount(idx, minlength=len(labels))
    return {labels[i]: int(hits[i]) for i in range(len(labels)) if hits[i]}


def measure(state, basis: MeasurementBasis, targets, shots: int | None = None,
            seed=None, mode: str = "analytic", force: str | None = None) -> MeasurementResult:
    """Projective measurement of ``targets``.

    Analytic mode returns every outcome with its probability and normalized
    collapsed state.  Sampled mode also draws a histogram of ``shots`` and
    records the first drawn outcome.  ``force`` selects the recorded branch and
    raises ImpossibleBranchError when it has zero probability.
    """
    if mode not in ("analytic", "sampled"):
        raise StateError(f"unknown mode {mode!r}")
    br = branch_probabilities(state, basis, targets)
    probs = {k: p for k, (p, _) in br.items()}
    states = {k: _normalize_raw(state, raw, p) for k, (p, raw) in br.items() if p > 1e-14}
    res = MeasurementResult(probs, states)
    if force is not None:
        if force not in probs:
            raise StateError(f"unknown outcome {force!r}")
        if probs[force] <= 1e-14:
            raise ImpossibleBranchError(f"outcome {force!r} has zero probability")
        res.record = force
    if mode == "sampled":
        shots = 1 if shots is None else int(shots)
        rng = np.random.default_rng(seed)
        counts = sample_counts(probs, shots, rng)
        res.histogram = ShotHistogram(shots, counts)
        if res.record is None:
            res.record = next(iter(sample_counts(probs, 1, rng)))
    return res


# -- tomography ----------------------------------------------------------------

def pauli_strings(n: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n)]


def pauli_matrix(label: str) -> np.ndarray:
    return reduce(np.kron, [PAULI[c] for c in label], np.ones((1, 1), dtype=complex))


def pauli_expectations(state) -> dict[str, float]:
    rho = as_density(state).matrix
    n = _qubits_of(rho.shape[0])
    return {s: float(np.real(np.trace(pauli_matrix(s) @ rho))) for s in pauli_strings(n)}


def tomography_reconstruct(expectations: dict) -> MixedState:
    """rho = sum_P <P> P / 2^n, clamped to the nearest valid density matrix."""
    if not expectations:
        raise StateError("no expectations given")
    n = len(next(iter(expectations)))
    missing = [s for s in pauli_strings(n) if s not in expectations]
    if missing:
        raise StateError(f"missing Pauli strings: {missing[:4]}{'...' if len(missing) > 4 else ''}")
    if abs(expectations["I" * n] - 1) > 1e-8:
        raise StateError("identity expectation must be 1")
    m = sum(expectations[s] * pauli_matrix(s) for s in pauli_strings(n)) / 2**n
    m = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(m)
    if w.min() < 0:
        w = np.clip(w, 0, None)
        w /= w.sum()
        m = (v * w) @ v.conj().T
    return MixedState(m)


def random_pure(n: int, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState.from_vector(v)


def random_mixed(n: int, rng: np.random.Generator, rank: int | None = None) -> MixedState:
    d = 2**n
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = g @ g.conj().T
    return MixedState(m / np.trace(m))
