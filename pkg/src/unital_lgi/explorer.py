"""Searches over map parameters for large K3, sweeps and Bloch trajectories.

Search strategy: a lattice scan of the parameter box (vectorised, reduced in
lattice order), then bounded Nelder-Mead from the best ``top_k`` lattice
points. Infeasible points are skipped and counted rather than penalised.

Constraint sets
---------------
``positive``   six-parameter box ``(r1, r2, theta1, theta2, phi1, phi2)``; the
               first map is ``Rz(phi1) Ry(theta1) * r1``, the second
               ``r2 * (Rz(phi2) Ry(theta2))^T``.
``cptp``       same box, maps ``Rz(phi1) Ry(theta1) diag(c, c, r1)`` and
               ``diag(c, c, r2) (Rz(phi2) Ry(theta2))^T`` with a fixed
               transverse scaling ``c``; points failing CP or the
               determinant witness are filtered.
``shrink=S``   first map a rotation, second a uniform shrink by ``S`` times
               a rotation; box ``(theta1, theta2, phi1, phi2)``.
``reversed``   the Lueders-achieving family applied in reversed temporal
               order; box ``(phi, gamma, gamma_prime, c, c_prime)`` with
               ``c``/``c_prime`` optionally pinned.
``lueders``    the same family in forward order.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import Bounds, minimize
from scipy.spatial.transform import Rotation

from .channels import (
    UnitalMap,
    apply,
    decompose_rdr,
    divisibility_witness,
    is_completely_positive,
    is_positive,
    rot_y,
    rot_z,
)
from .correlators import LUEDERS_BOUND, correlators_from_maps
from .qubit import BlochVector

__all__ = [
    "C_MAX",
    "Candidate",
    "CertificateReport",
    "InfeasibleSearchError",
    "LuedersFamilyPoint",
    "SearchConfig",
    "SearchError",
    "SearchResult",
    "SweepRow",
    "TrajectoryPoint",
    "bloch_trajectory",
    "make_lueders_pair",
    "maximize_k3",
    "reversed_sequence_z",
    "search_space",
    "shrink_sweep",
    "threshold_certificate",
]

# Closed search box for the strict inequality c < 1.
C_MAX = 1.0 - 1e-6
TWO_PI = 2.0 * math.pi
_CHUNK = 1 << 22


class SearchError(RuntimeError):
    """The optimiser produced a non-finite or otherwise unusable result."""


class InfeasibleSearchError(SearchError):
    """No lattice point satisfies the active constraint set."""


@dataclass(frozen=True)
class LuedersFamilyPoint:
    phi: float
    gamma: float
    gamma_prime: float
    c: float
    c_prime: float

    def __post_init__(self):
        for name in ("c", "c_prime"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")


def make_lueders_pair(p: LuedersFamilyPoint) -> tuple[UnitalMap, UnitalMap]:
    """``(D12, D23)`` of the CPTP divisible family reaching K3 = 3/2."""
    tilt = rot_y(math.pi / 3)
    d12 = rot_z(p.phi) @ tilt @ rot_z(p.gamma) @ np.diag([p.c, p.c, 1.0])
    d23 = np.diag([p.c_prime, p.c_prime, 1.0]) @ rot_z(p.gamma_prime) @ tilt @ rot_z(-p.phi)
    return UnitalMap(d12), UnitalMap(d23)


def reversed_sequence_z(c: float, c_prime: float, gamma: float, gamma_prime: float) -> float:
    """z-component of ``D12 @ D23 @ (0, 0, 1)`` for the family applied in reversed order."""
    return 0.25 * (1.0 - 3.0 * c * c_prime * math.cos(gamma + gamma_prime))


# --------------------------------------------------------------------------- search records


@dataclass(frozen=True)
class SearchConfig:
    constraint: str = "positive"
    grid: int = 25
    tol: float = 1e-8
    seed: int = 0
    top_k: int = 8
    shrink: Optional[float] = None
    transverse: float = 0.5
    c: Optional[float] = None
    c_prime: Optional[float] = None

    def __post_init__(self):
        constraint = self.constraint
        if constraint.startswith("shrink"):
            _, _, value = constraint.partition("=")
            if value:
                object.__setattr__(self, "shrink", float(value))
            object.__setattr__(self, "constraint", "shrink")
        elif constraint in _ALIASES:
            object.__setattr__(self, "constraint", _ALIASES[constraint])
        if self.constraint not in ("positive", "cptp", "shrink", "reversed", "lueders"):
            raise ValueError(f"unknown constraint set {constraint!r}")
        if self.grid < 3:
            raise ValueError("grid resolution must be at least 3 per dimension")
        if not self.tol > 0:
            raise ValueError("refinement tolerance must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.constraint == "shrink" and (self.shrink is None or not 0.0 < self.shrink <= 1.0):
            raise ValueError("shrink-limited search needs 0 < s <= 1")
        if not 0.0 <= self.transverse <= 1.0:
            raise ValueError("transverse scaling must lie in [0, 1]")
        for name in ("c", "c_prime"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")

    @property
    def label(self) -> str:
        if self.constraint == "shrink":
            return f"shrink={self.shrink!r}"
        return self.constraint


_ALIASES = {
    "positive-unital": "positive",
    "cptp-divisible": "cptp",
    "reversed-order": "reversed",
    "shrink-limited": "shrink",
}


class Candidate(NamedTuple):
    k3: float
    params: dict
    maps: tuple  # (first, second) Delta matrices in temporal order, as nested lists


@dataclass(frozen=True)
class SearchResult:
    best_k3: float
    argmax: dict
    evaluations: int
    constraint_violations: int
    constraint: str = ""
    maps: tuple = ()
    candidates: tuple = field(default=(), repr=False)

    def as_dict(self) -> dict:
        return {
            "best_k3": self.best_k3,
            "argmax": dict(self.argmax),
            "evaluations": self.evaluations,
            "constraint_violations": self.constraint_violations,
            "constraint": self.constraint,
            "maps": [list(map(list, m)) for m in self.maps],
        }


# --------------------------------------------------------------------------- batched builders


def _rz(a: np.ndarray) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    z, o = np.zeros_like(a), np.ones_like(a)
    return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2)


def _unit(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], -1)


class _Space:
    """One constraint set: parameter names, box, lattice, and map builder."""

    names: tuple[str, ...]
    periodic: frozenset = frozenset()

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def build(self, x: Sequence[float]) -> tuple[UnitalMap, UnitalMap]:
        raise NotImplementedError

    def feasible(self, first: UnitalMap, second: UnitalMap) -> bool:
        return all(is_completely_positive(m) and divisibility_witness(m) for m in (first, second))

    def scan(self, top_k: int) -> tuple[list[tuple[float, tuple]], int, int]:
        raise NotImplementedError

    def k3(self, x: Sequence[float]) -> Optional[float]:
        first, second = self.build(x)
        if not self.feasible(first, second):
            return None
        return correlators_from_maps(first, second).k3

    def normalise(self, x: Sequence[float]) -> tuple[float, ...]:
        return tuple(float(v % TWO_PI) if n in self.periodic else float(v) for n, v in zip(self.names, x))


def _push_top(heap: list, k3: np.ndarray, points: np.ndarray, top_k: int) -> None:
    """Merge the best rows of one lattice chunk into a bounded min-heap."""
    keep = min(len(k3), 4 * top_k)
    idx = np.argpartition(-k3, keep - 1)[:keep] if keep < len(k3) else np.arange(len(k3))
    for i in idx:
        item = (round(float(k3[i]), 12), tuple(-float(v) for v in points[i]))
        if len(heap) < 4 * top_k:
            heapq.heappush(heap, item)
        elif item > heap[0]:
            heapq.heapreplace(heap, item)


def _heap_to_ranked(heap: list, top_k: int) -> list[tuple[float, tuple]]:
    # Higher K3 first, ties broken lexicographically by parameter order.
    ranked = sorted(((k, tuple(-v for v in p)) for k, p in heap), key=lambda t: (-t[0], t[1]))
    return ranked[:top_k]


class _BlockSpace(_Space):
    """Spaces where K3 depends on one column of the first map and one row of the second."""

    def __init__(self, config: SearchConfig):
        self.config = config
        g = config.grid
        self.kind = config.constraint
        self._thetas = np.linspace(0.0, math.pi, g)
        self._phis = TWO_PI * np.arange(g) / g
        if self.kind == "shrink":
            self.names = ("theta1", "theta2", "phi1", "phi2")
            self._r = (np.array([1.0]), np.array([config.shrink]))
        else:
            self.names = ("r1", "r2", "theta1", "theta2", "phi1", "phi2")
            r = np.linspace(0.0, 1.0, g)
            self._r = (r, r)
        self.periodic = frozenset({"phi1", "phi2"})

    def _split(self, x):
        p = dict(zip(self.names, x))
        if self.kind == "shrink":
            p["r1"], p["r2"] = 1.0, self.config.shrink
        return p

    def bounds(self):
        lo, hi = [], []
        r_min = max(0.0, 2.0 * self.config.transverse - 1.0) if self.kind == "cptp" else 0.0
        for n in self.names:
            if n.startswith("r"):
                lo.append(r_min), hi.append(1.0)
            elif n.startswith("theta"):
                lo.append(0.0), hi.append(math.pi)
            else:
                lo.append(-np.inf), hi.append(np.inf)
        return np.array(lo), np.array(hi)

    def build(self, x):
        p = self._split(x)
        left = rot_z(p["phi1"]) @ rot_y(p["theta1"])
        right = (rot_z(p["phi2"]) @ rot_y(p["theta2"])).T
        if self.kind == "cptp":
            c = self.config.transverse
            return (UnitalMap(left @ np.diag([c, c, p["r1"]])),
                    UnitalMap(np.diag([c, c, p["r2"]]) @ right))
        return UnitalMap(p["r1"] * left), UnitalMap(p["r2"] * right)

    def feasible(self, first, second):
        if self.kind == "positive":
            return is_positive(first) and is_positive(second)
        return super().feasible(first, second)

    def _side(self, which: int):
        """Lattice for one side: rows of (r, theta, phi), their vectors, and feasibility."""
        r_vals = self._r[which]
        ok_r = []
        for r in r_vals:
            x = {"r1": r, "r2": r, "theta1": 0.0, "theta2": 0.0, "phi1": 0.0, "phi2": 0.0}
            vec = [x[n] for n in self.names]
            maps = self.build(vec)
            m = maps[which]
            ok_r.append(is_positive(m) if self.kind == "positive"
                        else is_completely_positive(m) and divisibility_witness(m))
        r, th, ph = np.meshgrid(r_vals, self._thetas, self._phis, indexing="ij")
        ok = np.broadcast_to(np.array(ok_r)[:, None, None], r.shape)
        pts = np.stack([r.ravel(), th.ravel(), ph.ravel()], -1)
        vec = r.ravel()[:, None] * _unit(th.ravel(), ph.ravel())
        return pts, vec, ok.ravel()

    def scan(self, top_k):
        p1, u, ok1 = self._side(0)
        p2, v, ok2 = self._side(1)
        total = len(p1) * len(p2)
        violations = total - int(ok1.sum()) * int(ok2.sum())
        p1, u = p1[ok1], u[ok1]
        p2, v = p2[ok2], v[ok2]
        if len(p1) == 0 or len(p2) == 0:
            raise InfeasibleSearchError(f"no feasible lattice point for constraint {self.config.label}")
        heap: list = []
        rows = max(1, _CHUNK // len(p2))
        for start in range(0, len(p1), rows):
            ub = u[start:start + rows]
            k3 = ub[:, 2:3] + v[None, :, 2] - ub @ v.T
            flat = k3.ravel()
            # Only materialise parameter rows for the chunk's best entries.
            keep = min(flat.size, 4 * top_k)
            idx = np.argpartition(-flat, keep - 1)[:keep] if keep < flat.size else np.arange(flat.size)
            i, j = np.divmod(idx, len(p2))
            pa, pb = p1[start + i], p2[j]
            if self.kind == "shrink":
                pts = np.stack([pa[:, 1], pb[:, 1], pa[:, 2], pb[:, 2]], -1)
            else:
                pts = np.stack([pa[:, 0], pb[:, 0], pa[:, 1], pb[:, 1], pa[:, 2], pb[:, 2]], -1)
            _push_top(heap, flat[idx], pts, top_k)
        return _heap_to_ranked(heap, top_k), total, violations


class _FamilySpace(_Space):
    """The Lueders-achieving family, applied forward or reversed."""

    def __init__(self, config: SearchConfig):
        self.config = config
        self.reversed = config.constraint == "reversed"
        self.fixed = {n: getattr(config, n) for n in ("c", "c_prime") if getattr(config, n) is not None}
        self.names = tuple(n for n in ("phi", "gamma", "gamma_prime", "c", "c_prime") if n not in self.fixed)
        self.periodic = frozenset({"phi", "gamma", "gamma_prime"})

    def _point(self, x) -> LuedersFamilyPoint:
        p = dict(self.fixed)
        p.update(zip(self.names, x))
        return LuedersFamilyPoint(**{k: float(v) for k, v in p.items()})

    def bounds(self):
        lo = np.array([0.0 if n.startswith("c") else -np.inf for n in self.names])
        hi = np.array([C_MAX if n.startswith("c") else np.inf for n in self.names])
        return lo, hi

    def build(self, x):
        p = self._point(x)
        if not (0.0 <= p.c < 1.0 and 0.0 <= p.c_prime < 1.0):
            raise ValueError("family scaling outside [0, 1)")
        d12, d23 = make_lueders_pair(p)
        return (d23, d12) if self.reversed else (d12, d23)

    def k3(self, x):
        p = dict(self.fixed)
        p.update(zip(self.names, x))
        if not all(0.0 <= p[n] < 1.0 for n in ("c", "c_prime")):
            return None
        return super().k3(x)

    def scan(self, top_k):
        g = self.config.grid
        axes = [TWO_PI * np.arange(g) / g if n in self.periodic else np.linspace(0.0, C_MAX, g)
                for n in self.names]
        c_axis = np.linspace(0.0, C_MAX, g)
        # Every lattice scaling is checked once with the full channel tests.
        c_values = [self.fixed[n] for n in self.fixed] or list(c_axis)
        probe = [make_lueders_pair(LuedersFamilyPoint(0.0, 0.0, 0.0, cv, cv))[0] for cv in c_values]
        if not all(is_completely_positive(m) and divisibility_witness(m) for m in probe):
            raise InfeasibleSearchError("family lattice contains non-CPTP-divisible scalings")
        grids = np.meshgrid(*axes, indexing="ij")
        pts_all = np.stack([gr.ravel() for gr in grids], -1)
        heap: list = []
        tilt = rot_y(math.pi / 3)
        for start in range(0, len(pts_all), _CHUNK // 16):
            pts = pts_all[start:start + _CHUNK // 16]
            cols = {n: pts[:, i] for i, n in enumerate(self.names)}
            for n, v in self.fixed.items():
                cols[n] = np.full(len(pts), v)
            d1 = np.zeros((len(pts), 3, 3))
            d1[:, 0, 0] = d1[:, 1, 1] = cols["c"]
            d1[:, 2, 2] = 1.0
            d2 = np.zeros_like(d1)
            d2[:, 0, 0] = d2[:, 1, 1] = cols["c_prime"]
            d2[:, 2, 2] = 1.0
            d12 = _rz(cols["phi"]) @ tilt @ _rz(cols["gamma"]) @ d1
            d23 = d2 @ _rz(cols["gamma_prime"]) @ tilt @ _rz(-cols["phi"])
            first, second = (d23, d12) if self.reversed else (d12, d23)
            k3 = first[:, 2, 2] + second[:, 2, 2] - (second @ first)[:, 2, 2]
            _push_top(heap, k3, pts, top_k)
        return _heap_to_ranked(heap, top_k), len(pts_all), 0


def search_space(config: SearchConfig) -> _Space:
    if config.constraint in ("reversed", "lueders"):
        return _FamilySpace(config)
    return _BlockSpace(config)


# --------------------------------------------------------------------------- optimiser


def _refine(space: _Space, x0: Sequence[float], config: SearchConfig, rng: np.random.Generator,
            counters: dict) -> tuple[float, tuple]:
    lo, hi = space.bounds()

    def objective(x):
        counters["evaluations"] += 1
        k3 = space.k3(np.clip(x, lo, hi))
        if k3 is None:
            counters["violations"] += 1
            return np.inf
        return -k3

    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    step = 0.5 * np.array([
        (hi[i] - lo[i]) / (config.grid - 1) if np.isfinite(hi[i] - lo[i]) else TWO_PI / config.grid
        for i in range(len(x))
    ])
    for _ in range(2):  # one restart shakes off a collapsed simplex
        signs = rng.choice([-1.0, 1.0], size=len(x))
        simplex = np.vstack([x] + [np.clip(x + signs[i] * step[i] * np.eye(len(x))[i], lo, hi)
                                   for i in range(len(x))])
        res = minimize(objective, x, method="Nelder-Mead", bounds=Bounds(lo, hi),
                       options={"xatol": config.tol, "fatol": config.tol * 1e-2,
                                "initial_simplex": simplex, "maxiter": 20000, "maxfev": 40000})
        x = np.clip(res.x, lo, hi)
        step = step * 1e-2
    x = space.normalise(x)
    k3 = space.k3(x)
    if k3 is None or not np.isfinite(k3):
        return -np.inf, x
    return k3, x


def maximize_k3(config: SearchConfig) -> SearchResult:
    """Lattice scan then derivative-free refinement; deterministic for a fixed config."""
    space = search_space(config)
    seeds, lattice_evals, violations = space.scan(config.top_k)
    counters = {"evaluations": lattice_evals, "violations": violations}
    rng = np.random.default_rng(config.seed)
    refined = []
    for lattice_k3, x0 in seeds:
        k3, x = _refine(space, x0, config, rng, counters)
        if k3 < lattice_k3:  # refinement never returns something worse than its seed
            k3, x = space.k3(x0), space.normalise(x0)
            if k3 is None:
                continue
        refined.append((k3, x))
    refined = [(k, x) for k, x in refined if np.isfinite(k)]
    if not refined:
        raise SearchError("refinement produced no finite objective value")
    refined.sort(key=lambda t: (-round(t[0], 12), t[1]))
    candidates = []
    for k3, x in refined:
        first, second = space.build(x)
        candidates.append(Candidate(float(k3), dict(zip(space.names, x)),
                                    (first.delta.tolist(), second.delta.tolist())))
    best = candidates[0]
    return SearchResult(
        best_k3=best.k3,
        argmax=best.params,
        evaluations=counters["evaluations"],
        constraint_violations=counters["violations"],
        constraint=config.label,
        maps=best.maps,
        candidates=tuple(candidates),
    )


class SweepRow(NamedTuple):
    s: float
    max_k3: float
    argmax: dict


def shrink_sweep(s_values: Iterable[float], config: Optional[SearchConfig] = None) -> list[SweepRow]:
    """Best K3 with a unitary-like first step and a uniform shrink ``s`` in the second."""
    base = config or SearchConfig(constraint="shrink=1.0")
    rows = []
    for s in s_values:
        if not 0.0 < s <= 1.0:
            raise ValueError(f"shrink factor must lie in (0, 1], got {s}")
        res = maximize_k3(replace(base, constraint="shrink", shrink=float(s)))
        rows.append(SweepRow(float(s), res.best_k3, res.argmax))
    return rows


# --------------------------------------------------------------------------- certificate


@dataclass(frozen=True)
class CertificateReport:
    checked: int
    passed: bool
    min_norm: float
    counterexamples: tuple = ()

    def as_dict(self) -> dict:
        return {"checked": self.checked, "passed": self.passed, "min_norm": self.min_norm,
                "counterexamples": [dict(c) for c in self.counterexamples]}


def threshold_certificate(results: Iterable[SearchResult], k3_floor: float = LUEDERS_BOUND - 1e-6,
                          slack: float = 1e-6) -> CertificateReport:
    """Check ``|D23 @ z| >= 1/2`` at every near-maximal point of the given results.

    ``D23 @ z`` is the Bloch vector at t3 grown from the eigenstate found at t2.
    """
    checked, bad = 0, []
    min_norm = math.inf
    for res in results:
        points = res.candidates or (Candidate(res.best_k3, res.argmax, res.maps),)
        for cand in points:
            if cand.k3 < k3_floor:
                continue
            checked += 1
            second = np.asarray(cand.maps[1], dtype=float)
            norm = float(np.linalg.norm(second @ np.array([0.0, 0.0, 1.0])))
            min_norm = min(min_norm, norm)
            if norm < 0.5 - slack:
                bad.append({"k3": cand.k3, "norm": norm, "params": dict(cand.params)})
    return CertificateReport(checked, not bad, min_norm if checked else math.nan, tuple(bad))


# --------------------------------------------------------------------------- trajectories


class TrajectoryPoint(NamedTuple):
    leg: int
    step: int
    x: float
    y: float
    z: float
    endpoint: bool

    @property
    def vector(self) -> BlochVector:
        return BlochVector(self.x, self.y, self.z)


def _interpolator(m: UnitalMap):
    dec = decompose_rdr(m)
    rv1 = Rotation.from_matrix(dec.r1).as_rotvec()
    rv2 = Rotation.from_matrix(dec.r2).as_rotvec()

    def at(t: float) -> np.ndarray:
        r1 = Rotation.from_rotvec(t * rv1).as_matrix()
        r2 = Rotation.from_rotvec(t * rv2).as_matrix()
        d = 1.0 + t * (dec.d - 1.0)
        return r1 @ np.diag(d) @ r2

    return at


def bloch_trajectory(maps: Sequence[UnitalMap], start: Sequence[float],
                     samples_per_leg: int) -> list[TrajectoryPoint]:
    """Sample the Bloch vector along each map, legs numbered from 1.

    Interior samples interpolate the rotations along geodesics and the
    singular values linearly from 1; they are for display only. The last
    sample of each leg is the exact image under the map.
    """
    if samples_per_leg < 2:
        raise ValueError("samples_per_leg must be at least 2")
    w = np.asarray(start, dtype=float).reshape(3)
    out = []
    for leg, m in enumerate(maps, start=1):
        m = m if isinstance(m, UnitalMap) else UnitalMap(m)
        at = _interpolator(m)
        ts = np.linspace(0.0, 1.0, samples_per_leg)
        for step, t in enumerate(ts):
            if step == 0:
                p = w
            elif step == samples_per_leg - 1:
                p = np.asarray(apply(m, w))
            else:
                p = at(t) @ w
            out.append(TrajectoryPoint(leg, step, float(p[0]), float(p[1]), float(p[2]),
                                       step in (0, samples_per_leg - 1)))
        w = np.asarray(apply(m, w))
    return out
