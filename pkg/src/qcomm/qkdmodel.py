"""Analytic click-rate and key-rate model for COW and DPS QKD.

tau    = eta * mu * f * 10^(-l_f d / 10)
clicks = tau / (1 + tau)                       (COW)
       = tau' / (1 + tau'), tau' = tau 10^(-l_m / 10)   (DPS)
KR     = clicks (1 - DR)(1 - CR)               (COW)
       = 2 clicks (1 - DR)(1 - CR)             (DPS, two key detectors)

The click formula is reported as printed: it is a saturation fraction rather
than a rate in s^-1.  Dead time enters only through the opt-in factor
1 / (1 + clicks * t_d).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Sequence

from .qstate import StateError

PROTOCOLS = ("COW", "DPS")
AXES = ("DR", "CR", "t_d", "d")

# Allowed sweep ranges; distance is open beyond the tested 40-120 km.
RANGES = {
    "DR": (0.03125, 0.5),
    "CR": (0.5, 0.95),
    "t_d": (20e-6, 50e-6),
    "d": (0.0, float("inf")),
}

_DEFAULTS = {
    "COW": dict(mu=0.5, f=5e8, l_f=0.5, l_m=0.0),
    "DPS": dict(mu=0.2, f=1e9, l_f=0.2, l_m=2.0),
}


@dataclass(frozen=True)
class QkdParams:
    protocol: str = "DPS"
    mu: float = 0.2
    l_f: float = 0.2
    d: float = 80.0
    f: float = 1e9
    eta: float = 0.1
    t_d: float = 50e-6
    l_m: float = 2.0
    DR: float = 0.03125
    CR: float = 0.5

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise StateError(f"protocol must be one of {PROTOCOLS}")
        if self.d < 0:
            raise StateError("distance must be non-negative")
        for name in ("eta", "DR", "CR"):
            if not 0 <= getattr(self, name) <= 1:
                raise StateError(f"{name} must lie in [0, 1]")
        for name in ("mu", "f", "l_f", "t_d", "l_m"):
            if getattr(self, name) < 0:
                raise StateError(f"{name} must be non-negative")

    @classmethod
    def defaults(cls, protocol: str, **overrides) -> "QkdParams":
        if protocol not in PROTOCOLS:
            raise StateError(f"protocol must be one of {PROTOCOLS}")
        return cls(protocol=protocol, **{**_DEFAULTS[protocol], **overrides})


@dataclass(frozen=True)
class KeyRateResult:
    params: QkdParams
    tau: float
    clicks: float
    key_rate: float
    dead_time_corrected: bool


def tau(p: QkdParams) -> float:
    return p.eta * p.mu * p.f * 10 ** (-p.l_f * p.d / 10)


def clicks(p: QkdParams, dead_time: bool = False) -> float:
    t = tau(p)
    if p.protocol == "DPS":
        t *= 10 ** (-p.l_m / 10)
    c = t / (1 + t)
    return c / (1 + c * p.t_d) if dead_time else c


def protocol_factor(protocol: str) -> int:
    return 2 if protocol == "DPS" else 1


def key_rate(p: QkdParams, dead_time: bool = False) -> KeyRateResult:
    c = clicks(p, dead_time)
    kr = protocol_factor(p.protocol) * c * (1 - p.DR) * (1 - p.CR)
    return KeyRateResult(p, tau(p), c, kr, dead_time)


def _check_grid(axis: str, grid) -> None:
    if axis not in AXES:
        raise StateError(f"sweep axis must be one of {AXES}")
    lo, hi = RANGES[axis]
    bad = [g for g in grid if not lo - 1e-15 <= g <= hi + 1e-15]
    if bad:
        raise StateError(f"{axis} values {bad} outside the allowed range [{lo:g}, {hi:g}]")


def sweep(base: QkdParams, axis: str, grid: Sequence[float], dead_time: bool = False) -> list[KeyRateResult]:
    _check_grid(axis, grid)
    return [key_rate(replace(base, **{axis: float(g)}), dead_time) for g in grid]


def default_grid(axis: str, points: int = 8) -> list[float]:
    if axis == "d":
        return [40.0 + 10.0 * i for i in range(9)]
    lo, hi = RANGES[axis]
    return [lo + (hi - lo) * i / (points - 1) for i in range(points)]


def results_csv(results: Sequence[KeyRateResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["protocol", "d_km", "DR", "CR", "t_d_us", "tau", "clicks", "key_rate", "corrected"])
    for r in results:
        p = r.params
        w.writerow([p.protocol, f"{p.d:.6g}", f"{p.DR:.6g}", f"{p.CR:.6g}", f"{p.t_d * 1e6:.6g}",
                    f"{r.tau:.12e}", f"{r.clicks:.15f}", f"{r.key_rate:.15f}", int(r.dead_time_corrected)])
    return buf.getvalue()
