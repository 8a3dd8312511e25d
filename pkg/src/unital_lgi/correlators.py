"""Closed-form two-time correlators and the Leggett-Garg parameter K3.

For unital dynamics measured along +z the correlators are read straight off
the transfer matrices: ``C12 = D12[2, 2]``, ``C23 = D23[2, 2]`` and
``C13 = (D23 @ D12)[2, 2]``. Only the third column of ``D12`` and the third
row of ``D23`` enter, which gives the six-parameter form of K3 used by
``k3_algebraic``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import InvalidMapError, UnitalMap, is_positive
from .qubit import DEFAULT_TOL, Z_AXIS, MeasurementAxis, rotation_to_z

__all__ = [
    "CLASSICAL_K3_WINDOW",
    "LUEDERS_BOUND",
    "LGResult",
    "PositiveUnitalParams",
    "UnitaryParams",
    "correlators_from_maps",
    "k3_algebraic",
    "k3_unitary",
    "params_from_maps",
    "phase_gap",
]

LUEDERS_BOUND = 1.5
# Macrorealist window for K3; reported as metadata, never used to clamp.
CLASSICAL_K3_WINDOW = (-3.0, 1.0)


@dataclass(frozen=True)
class LGResult:
    c12: float
    c23: float
    c13: float
    k3: float

    @classmethod
    def from_correlators(cls, c12: float, c23: float, c13: float) -> "LGResult":
        return cls(float(c12), float(c23), float(c13), float(c12 + c23 - c13))

    @property
    def violates_classical_bound(self) -> bool:
        return self.k3 > CLASSICAL_K3_WINDOW[1]

    def as_dict(self) -> dict:
        return {"c12": self.c12, "c23": self.c23, "c13": self.c13, "k3": self.k3}


@dataclass(frozen=True)
class PositiveUnitalParams:
    """Third column of the first map and third row of the second, in spherical form."""

    r1: float
    theta1: float
    phi1: float
    r2: float
    theta2: float
    phi2: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.r1, self.theta1, self.phi1, self.r2, self.theta2, self.phi2)


@dataclass(frozen=True)
class UnitaryParams:
    theta1: float
    theta2: float
    gamma: float


def _rotated(m: UnitalMap, axis: MeasurementAxis) -> np.ndarray:
    if axis == Z_AXIS:
        return m.delta
    r = rotation_to_z(axis.vector)
    return r @ m.delta @ r.T


def correlators_from_maps(d12: UnitalMap, d23: UnitalMap, axis: MeasurementAxis = Z_AXIS,
                          tol: float = DEFAULT_TOL) -> LGResult:
    d12 = d12 if isinstance(d12, UnitalMap) else UnitalMap(d12)
    d23 = d23 if isinstance(d23, UnitalMap) else UnitalMap(d23)
    for name, m in (("d12", d12), ("d23", d23)):
        if not is_positive(m, tol):
            raise InvalidMapError(f"{name} is not a positive map", check="positive")
    a, b = _rotated(d12, axis), _rotated(d23, axis)
    return LGResult.from_correlators(a[2, 2], b[2, 2], (b @ a)[2, 2])


def k3_algebraic(p: PositiveUnitalParams) -> float:
    ct1, ct2 = math.cos(p.theta1), math.cos(p.theta2)
    st1, st2 = math.sin(p.theta1), math.sin(p.theta2)
    return (p.r1 * ct1 + p.r2 * ct2
            - p.r1 * p.r2 * (ct1 * ct2 + st1 * st2 * math.cos(p.phi1 - p.phi2)))


def _spherical(v: np.ndarray) -> tuple[float, float, float]:
    r = float(np.linalg.norm(v))
    if r == 0.0:
        return 0.0, 0.0, 0.0
    theta = math.atan2(math.hypot(v[0], v[1]), v[2])
    phi = math.atan2(v[1], v[0]) % (2 * math.pi) if (v[0] or v[1]) else 0.0
    return r, theta, phi


def params_from_maps(d12: UnitalMap, d23: UnitalMap) -> PositiveUnitalParams:
    r1, t1, p1 = _spherical(np.asarray(d12.delta)[:, 2])
    r2, t2, p2 = _spherical(np.asarray(d23.delta)[2, :])
    return PositiveUnitalParams(r1, t1, p1, r2, t2, p2)


def phase_gap(phi1: float, phi2: float) -> float:
    """``|phi1 - phi2|`` folded into ``[0, pi]``."""
    d = (phi1 - phi2) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def k3_unitary(p: UnitaryParams) -> float:
    a, b = math.cos(2 * p.theta1), math.cos(2 * p.theta2)
    return a + b - a * b - math.sin(2 * p.theta1) * math.sin(2 * p.theta2) * math.cos(2 * p.gamma)
