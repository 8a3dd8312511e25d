"""Brute-force simulation of the three-time measurement protocol.

Everything here is done on 2x2 density matrices: states are evolved,
projected with ``(I +/- n.sigma)/2`` and evolved again branch by branch, and
joint probabilities are traces. None of the closed forms in
``correlators`` are used, so this module serves as the independent check
on them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .channels import (
    AffineQubitMap,
    InvalidMapError,
    UnitalMap,
    apply_to_operator,
    compose,
    is_positive,
    random_unital_map,
)
from .correlators import LGResult
from .qubit import (
    DEFAULT_TOL,
    Z_AXIS,
    InvalidStateError,
    MeasurementAxis,
    bloch_to_density,
    is_density_matrix,
    random_bloch_vectors,
)

__all__ = [
    "JointDistribution",
    "ProtocolOutcome",
    "ProtocolSpec",
    "effective_gamma",
    "euler_unitary",
    "simulate_protocol",
    "simulate_unitary_protocol",
    "state_independence_probe",
]

_OUTCOMES = (1, -1)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """``probs[a, b]`` is P(Q_i = OUTCOMES[a], Q_j = OUTCOMES[b]) with OUTCOMES = (+1, -1)."""

    probs: np.ndarray

    def __getitem__(self, outcomes: tuple[int, int]) -> float:
        i, j = outcomes
        return float(self.probs[_OUTCOMES.index(i), _OUTCOMES.index(j)])

    @property
    def correlator(self) -> float:
        return float(sum(qi * qj * self[qi, qj] for qi in _OUTCOMES for qj in _OUTCOMES))

    @property
    def total(self) -> float:
        return float(self.probs.sum())


class ProtocolOutcome(NamedTuple):
    p12: JointDistribution
    p23: JointDistribution
    p13: JointDistribution
    lg: LGResult


@dataclass(frozen=True, eq=False)
class ProtocolSpec:
    initial_state: np.ndarray
    map12: UnitalMap
    map23: UnitalMap
    pre_map: Optional[AffineQubitMap] = None
    axis: MeasurementAxis = Z_AXIS

    def validate(self, tol: float = DEFAULT_TOL) -> None:
        if not is_density_matrix(self.initial_state, tol):
            raise InvalidStateError("initial_state is not a valid density matrix")
        for name in ("map12", "map23", "pre_map"):
            m = getattr(self, name)
            if m is None:
                continue
            if name != "pre_map" and not m.is_unital(tol):
                raise InvalidMapError(f"{name} must be unital", check="unital")
            if not is_positive(m, tol):
                raise InvalidMapError(f"{name} is not a positive map", check="positive")


def _measured_joint(rho: np.ndarray, first: AffineQubitMap, axis: MeasurementAxis) -> JointDistribution:
    probs = np.empty((2, 2))
    for a, qi in enumerate(_OUTCOMES):
        pi_i = axis.projector(qi)
        branch = pi_i @ rho @ pi_i
        evolved = apply_to_operator(first, branch)
        for b, qj in enumerate(_OUTCOMES):
            probs[a, b] = np.trace(axis.projector(qj) @ evolved).real
    return JointDistribution(probs)


def simulate_protocol(spec: ProtocolSpec, tol: float = DEFAULT_TOL) -> ProtocolOutcome:
    """Exact joint distributions for the pairs (t1,t2), (t2,t3), (t1,t3).

    Each pair is measured in its own run: P12 measures t1 and t2, P23
    measures t2 and t3, and P13 measures t1 and t3 with nothing at t2.
    """
    spec.validate(tol)
    rho1 = np.asarray(spec.initial_state, dtype=complex)
    if spec.pre_map is not None:
        rho1 = apply_to_operator(spec.pre_map, rho1)
    rho2 = apply_to_operator(spec.map12, rho1)

    p12 = _measured_joint(rho1, spec.map12, spec.axis)
    p23 = _measured_joint(rho2, spec.map23, spec.axis)
    p13 = _measured_joint(rho1, compose(spec.map23, spec.map12), spec.axis)
    lg = LGResult.from_correlators(p12.correlator, p23.correlator, p13.correlator)
    return ProtocolOutcome(p12, p23, p13, lg)


def euler_unitary(phi: float, theta: float, xi: float) -> np.ndarray:
    """``exp(-i sz phi) exp(-i sy theta) exp(-i sz xi)``."""
    rz_phi = np.diag([np.exp(-1j * phi), np.exp(1j * phi)])
    ry = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]], dtype=complex)
    rz_xi = np.diag([np.exp(-1j * xi), np.exp(1j * xi)])
    return rz_phi @ ry @ rz_xi


def effective_gamma(u1_params: Sequence[float], u2_params: Sequence[float]) -> float:
    """Phase that enters the closed-form unitary K3 for two Euler triples.

    Only the inner z-angles survive in ``<+|U2 U1|+>``; the outer ones are
    global phases. The pi/2 offset matches the sign convention of the
    closed form in ``correlators.k3_unitary``.
    """
    return u1_params[0] + u2_params[2] + math.pi / 2


def simulate_unitary_protocol(u1_params: Sequence[float], u2_params: Sequence[float],
                              alpha: float) -> LGResult:
    """Three-time protocol for unitary steps given as Euler triples ``(phi, theta, xi)``.

    ``alpha`` is the probability of the +z outcome at t1.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be a probability")
    u1 = euler_unitary(*u1_params)
    u2 = euler_unitary(*u2_params)
    p1 = np.array([alpha, 1.0 - alpha])

    def transition(u):
        # |<j|U|i>|^2 indexed [i, j]; basis order (+, -) matches _OUTCOMES
        return (np.abs(u) ** 2).T

    t1, t2, t13 = transition(u1), transition(u2), transition(u2 @ u1)
    p2 = p1 @ t1
    p12 = JointDistribution(p1[:, None] * t1)
    p23 = JointDistribution(p2[:, None] * t2)
    p13 = JointDistribution(p1[:, None] * t13)
    return LGResult.from_correlators(p12.correlator, p23.correlator, p13.correlator)


def state_independence_probe(map12: UnitalMap, map23: UnitalMap, n_states: int, seed: int,
                             axis: MeasurementAxis = Z_AXIS) -> float:
    """Spread (max - min) of the oracle K3 over random initial states and pre-maps."""
    rng = np.random.default_rng(seed)
    states = random_bloch_vectors(rng, n_states)
    k3 = []
    for w in states:
        spec = ProtocolSpec(bloch_to_density(w), map12, map23,
                            pre_map=random_unital_map(rng, "cp"), axis=axis)
        k3.append(simulate_protocol(spec).lg.k3)
    return float(max(k3) - min(k3))
