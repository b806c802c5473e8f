"""Single-qubit Kraus channels and fidelity-vs-noise sweeps.

The bit-flip channel is stored as printed in the source model, E0 = sqrt(p) I
and E1 = sqrt(1-p) X, so p = 0 is a certain flip.  Pass
``convention="standard"`` for the usual assignment E0 = sqrt(1-p) I,
E1 = sqrt(p) X.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .circuits import Circuit, GateStep, zero_state
from .qstate import MixedState, StateError, _embed_apply, fidelity

CHANNELS = ("bit_flip", "depolarizing", "amplitude_damping", "phase_damping")
CONVENTIONS = ("printed", "standard")

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    label: str
    p: float
    operators: tuple

    def completeness_error(self) -> float:
        s = sum(e.conj().T @ e for e in self.operators)
        return float(np.max(np.abs(s - _I)))


def make_channel(label: str, p: float, convention: str = "printed") -> KrausChannel:
    if label not in CHANNELS:
        raise StateError(f"unknown channel {label!r}; choose from {CHANNELS}")
    if convention not in CONVENTIONS:
        raise StateError(f"unknown convention {convention!r}")
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise StateError(f"noise probability {p} outside [0, 1]")
    if label == "bit_flip":
        keep = p if convention == "printed" else 1 - p
        ops = [np.sqrt(keep) * _I, np.sqrt(1 - keep) * _X]
    elif label == "depolarizing":
        ops = [np.sqrt(1 - 3 * p / 4) * _I] + [np.sqrt(p) / 2 * m for m in (_X, _Y, _Z)]
    elif label == "amplitude_damping":
        ops = [np.diag([1, np.sqrt(1 - p)]).astype(complex),
               np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)]
    else:
        ops = [np.sqrt(1 - p) * _I,
               np.sqrt(p) * np.diag([1, 0]).astype(complex),
               np.sqrt(p) * np.diag([0, 1]).astype(complex)]
    ops = tuple(o for o in ops if np.any(o != 0))
    return KrausChannel(label, p, ops)


def apply_channel(rho, ch: KrausChannel, target: int) -> MixedState:
    """rho' = sum_k E_k rho E_k^dag on one qubit."""
    rho = rho.density()
    if not 0 <= target < rho.num_qubits:
        raise StateError(f"target {target} out of range")
    m = sum(_embed_apply(rho, e, (target,)) for e in ch.operators)
    return MixedState((m + m.conj().T) / 2)


def apply_channel_to(rho, ch: KrausChannel, targets: Sequence[int]) -> MixedState:
    for t in targets:
        rho = apply_channel(rho, ch, t)
    return rho


@dataclass(frozen=True)
class NoiseModel:
    """A channel applied at a protocol's travel points.

    ``sites`` overrides the protocol's default travel qubits when given.
    """

    label: str
    p: float
    convention: str = "printed"
    sites: tuple | None = None

    @property
    def channel(self) -> KrausChannel:
        return make_channel(self.label, self.p, self.convention)

    def apply(self, rho, default_sites: Sequence[int]) -> MixedState:
        sites = default_sites if self.sites is None else self.sites
        return apply_channel_to(rho, self.channel, sites)


def apply_noise(rho, noise: NoiseModel | None, sites: Sequence[int]):
    """Helper used by protocol runners; a no-op when noise is None."""
    if noise is None:
        return rho
    return noise.apply(rho, sites)


def run_noisy_circuit(c: Circuit, noise: NoiseModel | None, rho=None) -> MixedState:
    """Run a measurement-free circuit with the channel after every gate on its targets."""
    rho = zero_state(c.num_qubits, mixed=True) if rho is None else rho.density()
    ch = noise.channel if noise is not None else None
    for s in c.steps:
        if not isinstance(s, GateStep) or s.controls:
            raise StateError("gate-noise runs need a measurement-free circuit")
        m = _embed_apply(rho, s.gate.matrix, s.targets)
        rho = MixedState((m + m.conj().T) / 2)
        if ch is not None:
            targets = s.targets if noise.sites is None else [t for t in s.targets if t in noise.sites]
            rho = apply_channel_to(rho, ch, targets)
    return rho


Runner = Callable[[NoiseModel | None], object]


@dataclass(frozen=True)
class SweepPoint:
    channel: str
    p: float
    protocol: str
    fidelity: float


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def noise_sweep(runner: Runner, label: str, grid: Sequence[float], sites=None,
                protocol: str = "protocol", convention: str = "printed") -> list[SweepPoint]:
    """Fidelity of noisy against noiseless output of ``runner`` on each grid point.

    The runner takes a NoiseModel (or None for the ideal run) and returns a
    state or a list of states; for lists the minimum fidelity is reported.
    """
    if any(not 0 <= p <= 1 for p in grid):
        raise StateError("noise grid must lie within [0, 1]")
    ideal = _as_list(runner(None))
    out = []
    for p in grid:
        noisy = _as_list(runner(NoiseModel(label, float(p), convention,
                                           None if sites is None else tuple(sites))))
        f = min(fidelity(a, b) for a, b in zip(ideal, noisy))
        out.append(SweepPoint(label, float(p), protocol, f))
    return out


def default_grid(step: float = 0.05) -> list[float]:
    k = int(round(1 / step))
    return [round(i * step, 10) for i in range(k + 1)]


def sweep_csv(points: Sequence[SweepPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["channel", "p", "protocol", "fidelity"])
    for pt in points:
        w.writerow([pt.channel, f"{pt.p:.6g}", pt.protocol, f"{pt.fidelity:.12f}"])
    return buf.getvalue()
