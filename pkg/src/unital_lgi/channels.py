"""Trace-preserving qubit maps in the affine (King-Ruskai) picture.

A trace-preserving map acts on Bloch vectors as ``w -> b + Delta @ w``; the
4x4 transfer matrix on Stokes vectors ``(1, w)`` is ``[[1, 0], [b, Delta]]``.
Unital maps have ``b = 0``. Rotations act actively on Bloch vectors and the
rotation-scaling split is written ``Delta = R1 @ diag(c) @ R2``.

Complete positivity is decided from the Choi spectrum; the diagonal-form
inequality ``c3 + c2 <= 1 + c1`` is kept as a cross-check only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .qubit import DEFAULT_TOL, IDENTITY2, PAULI, BlochVector, bloch_to_density, density_to_bloch

__all__ = [
    "AffineQubitMap",
    "ChannelReport",
    "InvalidMapError",
    "KRAUS_CUTOFF",
    "NotCompletelyPositiveError",
    "RDRDecomposition",
    "UnitalMap",
    "apply",
    "apply_kraus",
    "apply_to_operator",
    "canonical_diagonal",
    "choi_matrix",
    "classify",
    "compose",
    "cp_inequality_holds",
    "decompose_rdr",
    "divisibility_witness",
    "euler_zyz",
    "is_completely_positive",
    "is_positive",
    "is_rotation",
    "kraus_from_map",
    "make_unital_rdr",
    "pauli_choi_eigenvalues",
    "random_cp_diagonal",
    "random_rotation",
    "random_unital_map",
    "rot_y",
    "rot_z",
    "satisfies_row_column_bounds",
    "transfer_matrix",
]

KRAUS_CUTOFF = 1e-12

_STOKES_BASIS = (IDENTITY2,) + PAULI


class InvalidMapError(ValueError):
    """A map fails a validity check; ``check`` names the failed predicate."""

    def __init__(self, message: str, check: str = ""):
        super().__init__(message)
        self.check = check


class NotCompletelyPositiveError(InvalidMapError):
    def __init__(self, min_eigenvalue: float):
        super().__init__(
            f"completely-positive check failed: most negative Choi eigenvalue {min_eigenvalue:.3e}",
            check="completely-positive",
        )
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True, eq=False)
class AffineQubitMap:
    delta: np.ndarray
    b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        delta = np.array(self.delta, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        if delta.shape != (3, 3):
            raise InvalidMapError(f"Delta must be 3x3, got shape {delta.shape}", check="shape")
        if b.shape != (3,):
            raise InvalidMapError(f"b must have 3 entries, got {b.shape}", check="shape")
        delta.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "b", b)

    def is_unital(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.linalg.norm(self.b) <= tol)

    def to_record(self) -> list[float]:
        """Flat exchange record: ``b`` followed by ``Delta`` row-major."""
        return [float(v) for v in self.b] + [float(v) for v in self.delta.ravel()]

    @classmethod
    def from_record(cls, values: Sequence[float]) -> "AffineQubitMap":
        values = list(values)
        if len(values) != 12:
            raise InvalidMapError(f"map record needs 12 reals, got {len(values)}", check="shape")
        b = np.array(values[:3])
        delta = np.array(values[3:]).reshape(3, 3)
        if not np.any(b):
            return UnitalMap(delta)
        return cls(delta, b)

    def __repr__(self):
        return f"{type(self).__name__}(delta={self.delta.tolist()}, b={self.b.tolist()})"


class UnitalMap(AffineQubitMap):
    """Affine map with ``b = 0``: fixes the maximally mixed state."""

    def __init__(self, delta: ArrayLike, b: ArrayLike | None = None):
        if b is not None and np.any(np.asarray(b, dtype=float)):
            raise InvalidMapError("a unital map has b = 0", check="unital")
        super().__init__(delta)

    @classmethod
    def identity(cls) -> "UnitalMap":
        return cls(np.eye(3))


@dataclass(frozen=True, eq=False)
class RDRDecomposition:
    r1: np.ndarray
    d: np.ndarray
    r2: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.r1 @ np.diag(self.d) @ self.r2


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def euler_zyz(alpha: float, beta: float, gamma: float) -> np.ndarray:
    return rot_z(alpha) @ rot_y(beta) @ rot_z(gamma)


def is_rotation(r: ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        return False
    return bool(np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0) and abs(np.linalg.det(r) - 1) <= tol)


def make_unital_rdr(r1: ArrayLike, d: ArrayLike, r2: ArrayLike, tol: float = DEFAULT_TOL) -> UnitalMap:
    """Unital map with ``Delta = r1 @ diag(d) @ r2``."""
    for name, r in (("r1", r1), ("r2", r2)):
        if not is_rotation(r, tol):
            raise InvalidMapError(f"{name} is not a proper rotation", check="rotation")
    d = np.asarray(d, dtype=float).reshape(3)
    return UnitalMap(np.asarray(r1, dtype=float) @ np.diag(d) @ np.asarray(r2, dtype=float))


def decompose_rdr(m: AffineQubitMap | ArrayLike) -> RDRDecomposition:
    """Split ``Delta`` into proper rotations around a signed diagonal.

    Signs from improper SVD factors are pushed onto the last diagonal entry,
    so ``d[2] < 0`` exactly when ``det(Delta) < 0``.
    """
    delta = _delta(m)
    u, s, vt = np.linalg.svd(delta)
    s = s.copy()
    if np.linalg.det(u) < 0:
        u[:, -1] *= -1
        s[-1] *= -1
    if np.linalg.det(vt) < 0:
        vt[-1, :] *= -1
        s[-1] *= -1
    return RDRDecomposition(u, s, vt)


def _delta(m) -> np.ndarray:
    if isinstance(m, AffineQubitMap):
        return m.delta
    return np.asarray(m, dtype=float)


def _affine(m) -> AffineQubitMap:
    if isinstance(m, AffineQubitMap):
        return m
    return UnitalMap(m)


def apply(m: AffineQubitMap, w: ArrayLike) -> BlochVector:
    m = _affine(m)
    return BlochVector.from_array(m.b + m.delta @ np.asarray(w, dtype=float).reshape(3))


def compose(later: AffineQubitMap, earlier: AffineQubitMap) -> AffineQubitMap:
    """Map for ``earlier`` followed by ``later``."""
    later, earlier = _affine(later), _affine(earlier)
    delta = later.delta @ earlier.delta
    b = later.b + later.delta @ earlier.b
    if not np.any(b):
        return UnitalMap(delta)
    return AffineQubitMap(delta, b)


def transfer_matrix(m: AffineQubitMap) -> np.ndarray:
    m = _affine(m)
    t = np.zeros((4, 4))
    t[0, 0] = 1.0
    t[1:, 0] = m.b
    t[1:, 1:] = m.delta
    return t


def is_positive(m: AffineQubitMap, tol: float = DEFAULT_TOL) -> bool:
    """True iff the map sends the Bloch ball into itself."""
    m = _affine(m)
    if m.is_unital(tol):
        return bool(np.linalg.norm(m.delta, 2) <= 1.0 + tol)
    # Non-unital: the ellipsoid b + Delta.S^2 must fit in the ball; check on a dense sphere grid.
    u = _sphere_grid()
    return bool(np.linalg.norm(m.b + u @ m.delta.T, axis=1).max() <= 1.0 + tol)


def _sphere_grid(n: int = 4000) -> np.ndarray:
    i = np.arange(n) + 0.5
    polar = np.arccos(1 - 2 * i / n)
    az = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([np.sin(polar) * np.cos(az), np.sin(polar) * np.sin(az), np.cos(polar)], axis=1)


def satisfies_row_column_bounds(m: AffineQubitMap, tol: float = DEFAULT_TOL) -> bool:
    """Necessary positivity conditions: every row and column of ``Delta`` has norm <= 1."""
    delta = _delta(m)
    rows = (delta ** 2).sum(axis=1)
    cols = (delta ** 2).sum(axis=0)
    return bool(rows.max() <= 1.0 + tol and cols.max() <= 1.0 + tol)


def apply_to_operator(m: AffineQubitMap, x: ArrayLike) -> np.ndarray:
    """Linear extension of the map to an arbitrary 2x2 operator."""
    t = transfer_matrix(m)
    x = np.asarray(x, dtype=complex)
    coeffs = np.array([np.trace(s @ x) / 2 for s in _STOKES_BASIS])
    out = t @ coeffs
    return sum(c * s for c, s in zip(out, _STOKES_BASIS))


def choi_matrix(m: AffineQubitMap) -> np.ndarray:
    """``J = sum_ij |i><j| (x) Lambda(|i><j|)``; trace 2 for trace-preserving maps."""
    j = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for b in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[a, b] = 1.0
            j += np.kron(e, apply_to_operator(m, e))
    return j


def pauli_choi_eigenvalues(c: ArrayLike) -> np.ndarray:
    """Closed-form Choi spectrum of ``diag(c1, c2, c3)`` (twice the Pauli-channel weights)."""
    c1, c2, c3 = np.asarray(c, dtype=float).reshape(3)
    return 0.5 * np.array([
        1 + c1 + c2 + c3,
        1 + c1 - c2 - c3,
        1 - c1 + c2 - c3,
        1 - c1 - c2 + c3,
    ])


def canonical_diagonal(c: ArrayLike) -> np.ndarray:
    """Reorder a diagonal triple so that ``c3 >= c2 >= |c1|``.

    Pairwise sign flips are free (pi rotations), so only the sign of the
    product survives; it is carried by the smallest-magnitude entry.
    """
    c = np.asarray(c, dtype=float).reshape(3)
    mags = np.sort(np.abs(c))
    sign = -1.0 if np.prod(np.sign(c)) < 0 else 1.0
    return np.array([sign * mags[0], mags[1], mags[2]])


def cp_inequality_holds(c: ArrayLike, tol: float = DEFAULT_TOL) -> bool:
    c1, c2, c3 = canonical_diagonal(c)
    return bool(c3 <= 1.0 + tol and c3 + c2 <= 1.0 + c1 + tol)


def is_completely_positive(m: AffineQubitMap, tol: float = DEFAULT_TOL) -> bool:
    return bool(np.linalg.eigvalsh(choi_matrix(m)).min() >= -tol)


def divisibility_witness(m: AffineQubitMap, tol: float = DEFAULT_TOL) -> bool:
    """``det(Delta) >= 0``. Necessary for infinitesimal divisibility, not a full decision."""
    return bool(np.linalg.det(_delta(m)) >= -tol)


def kraus_from_map(m: AffineQubitMap, tol: float = DEFAULT_TOL) -> list[np.ndarray]:
    """Kraus operators from the Choi eigendecomposition.

    Raises NotCompletelyPositiveError carrying the most negative eigenvalue.
    """
    evals, evecs = np.linalg.eigh(choi_matrix(m))
    if evals.min() < -tol:
        raise NotCompletelyPositiveError(float(evals.min()))
    ops = []
    for lam, v in sorted(zip(evals, evecs.T), key=lambda p: -p[0]):
        if lam <= KRAUS_CUTOFF:
            continue
        # Choi column (i, m) holds A[m, i]
        ops.append(np.sqrt(lam) * v.reshape(2, 2).T)
    return ops


def apply_kraus(kraus: Sequence[np.ndarray], rho: ArrayLike) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return sum(a @ rho @ a.conj().T for a in kraus)


@dataclass(frozen=True)
class ChannelReport:
    is_trace_preserving: bool
    is_unital: bool
    is_positive: bool
    is_completely_positive: bool
    divisibility_witness: bool
    choi_eigenvalues: tuple[float, float, float, float]
    determinant: float
    satisfies_row_column_bounds: bool = True

    def failed_checks(self) -> list[str]:
        names = {
            "is_trace_preserving": "trace-preserving",
            "is_unital": "unital",
            "is_positive": "positive",
            "is_completely_positive": "completely-positive",
            "divisibility_witness": "divisibility-witness",
        }
        return [label for attr, label in names.items() if not getattr(self, attr)]

    def as_dict(self) -> dict:
        return {
            "is_trace_preserving": self.is_trace_preserving,
            "is_unital": self.is_unital,
            "is_positive": self.is_positive,
            "is_completely_positive": self.is_completely_positive,
            "divisibility_witness": self.divisibility_witness,
            "satisfies_row_column_bounds": self.satisfies_row_column_bounds,
            "choi_eigenvalues": list(self.choi_eigenvalues),
            "determinant": self.determinant,
        }


def classify(m: AffineQubitMap, tol: float = DEFAULT_TOL) -> ChannelReport:
    m = _affine(m)
    choi = choi_matrix(m)
    evals = np.linalg.eigvalsh(choi)
    # Tr_out J = I for trace-preserving maps
    partial = choi.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)
    return ChannelReport(
        is_trace_preserving=bool(np.allclose(partial, IDENTITY2, atol=tol, rtol=0)),
        is_unital=m.is_unital(tol),
        is_positive=is_positive(m, tol),
        is_completely_positive=bool(evals.min() >= -tol),
        divisibility_witness=divisibility_witness(m, tol),
        choi_eigenvalues=tuple(float(e) for e in evals),
        determinant=float(np.linalg.det(m.delta)),
        satisfies_row_column_bounds=satisfies_row_column_bounds(m, tol),
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-random proper rotation from a uniformly distributed unit quaternion."""
    q = rng.normal(size=4)
    a, b, c, d = q / np.linalg.norm(q)
    return np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
    ])


def random_cp_diagonal(rng: np.random.Generator, divisible: bool = False) -> np.ndarray:
    """Diagonal triple drawn uniformly from the CP region by rejection."""
    while True:
        c = rng.uniform(-1.0, 1.0, size=3)
        if pauli_choi_eigenvalues(c).min() < 0:
            continue
        if divisible and np.prod(c) < 0:
            continue
        return c


def random_unital_map(rng: np.random.Generator, kind: str = "positive") -> UnitalMap:
    """Random unital map; ``kind`` is ``positive``, ``cp`` or ``cptp-divisible``."""
    if kind == "positive":
        d = rng.uniform(-1.0, 1.0, size=3)
    elif kind == "cp":
        d = random_cp_diagonal(rng)
    elif kind == "cptp-divisible":
        d = random_cp_diagonal(rng, divisible=True)
    else:
        raise ValueError(f"unknown map kind {kind!r}")
    return UnitalMap(random_rotation(rng) @ np.diag(d) @ random_rotation(rng))
