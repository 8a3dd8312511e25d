"""Two-level system states and projective measurement along a fixed axis.

States are handled in two pictures: the Bloch vector ``w`` (a real 3-vector)
and the density matrix ``rho = (I + w . sigma) / 2``. Bloch vectors are not
forced inside the unit ball on construction so that intermediate algebra
(rows of a transfer matrix, unnormalised branches) can reuse the type.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

__all__ = [
    "DEFAULT_TOL",
    "IDENTITY2",
    "PAULI",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "BlochVector",
    "InvalidStateError",
    "MeasurementAxis",
    "Z_AXIS",
    "bloch_to_density",
    "density_to_bloch",
    "is_density_matrix",
    "project",
    "random_bloch_vectors",
    "rotation_to_z",
]

DEFAULT_TOL = 1e-9

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


class InvalidStateError(ValueError):
    """Raised when a vector or matrix is not a valid qubit state."""


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, arr: ArrayLike) -> "BlochVector":
        a = np.asarray(arr, dtype=float).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self))

    def is_physical(self, tol: float = DEFAULT_TOL) -> bool:
        return self.norm <= 1.0 + tol

    def is_pure(self, tol: float = DEFAULT_TOL) -> bool:
        return abs(self.norm - 1.0) <= tol

    def __neg__(self) -> "BlochVector":
        return BlochVector(-self.x, -self.y, -self.z)


@dataclass(frozen=True)
class MeasurementAxis:
    """Direction ``n`` of the dichotomic observable ``Q = n . sigma``."""

    n: tuple[float, float, float] = (0.0, 0.0, 1.0)
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        v = np.asarray(self.n, dtype=float).reshape(3)
        if abs(np.linalg.norm(v) - 1.0) > self.tol:
            raise ValueError(f"measurement axis must be a unit vector, got |n| = {np.linalg.norm(v)}")
        object.__setattr__(self, "n", tuple(float(t) for t in v))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.n)

    @property
    def observable(self) -> np.ndarray:
        return sum(c * s for c, s in zip(self.n, PAULI))

    def projector(self, outcome: int) -> np.ndarray:
        """Projector onto the eigenspace of ``Q`` with eigenvalue ``outcome`` (+1 or -1)."""
        if outcome not in (1, -1):
            raise ValueError("outcome must be +1 or -1")
        return 0.5 * (IDENTITY2 + outcome * self.observable)


Z_AXIS = MeasurementAxis()


def rotation_to_z(n: ArrayLike) -> np.ndarray:
    """Proper rotation ``R`` with ``R @ n = (0, 0, 1)``."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(n, z)
    s = np.linalg.norm(axis)
    c = float(np.dot(n, z))
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])
    k = axis / s
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * kx + (1 - c) * (kx @ kx)


def bloch_to_density(w: ArrayLike) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(3)
    return 0.5 * (IDENTITY2 + w[0] * SIGMA_X + w[1] * SIGMA_Y + w[2] * SIGMA_Z)


def is_density_matrix(rho: ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        return False
    if not np.allclose(rho, rho.conj().T, atol=tol, rtol=0):
        return False
    if abs(np.trace(rho) - 1) > tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -tol)


def density_to_bloch(rho: ArrayLike, tol: float = DEFAULT_TOL) -> BlochVector:
    """Bloch vector ``w_k = Tr(rho sigma_k)`` of a Hermitian unit-trace matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise InvalidStateError(f"expected a 2x2 matrix, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=tol, rtol=0):
        raise InvalidStateError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise InvalidStateError(f"density matrix has trace {np.trace(rho).real:.6g}, expected 1")
    return BlochVector.from_array([np.trace(rho @ s).real for s in PAULI])


def project(w: ArrayLike, n: MeasurementAxis = Z_AXIS,
            tol: float = DEFAULT_TOL) -> tuple[float, BlochVector, BlochVector]:
    """Measure ``n . sigma`` on state ``w``.

    Returns ``(prob_plus, w_plus, w_minus)``; the post-measurement states are
    the pure eigenstates ``+n`` and ``-n``.
    """
    w = np.asarray(w, dtype=float).reshape(3)
    if np.linalg.norm(w) > 1.0 + tol:
        raise InvalidStateError(f"unphysical Bloch vector with |w| = {np.linalg.norm(w):.6g}")
    nv = n.vector
    p_plus = float(np.clip(0.5 * (1.0 + nv @ w), 0.0, 1.0))
    return p_plus, BlochVector.from_array(nv), BlochVector.from_array(-nv)


def random_bloch_vectors(rng: np.random.Generator, size: int, pure: bool = False) -> np.ndarray:
    """Uniform samples from the unit ball (or the sphere when ``pure``), shape ``(size, 3)``."""
    v = rng.normal(size=(size, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if not pure:
        v *= rng.uniform(size=(size, 1)) ** (1.0 / 3.0)
    return v
