"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from unital_lgi.channels import (
    UnitalMap,
    apply,
    is_completely_positive,
    pauli_choi_eigenvalues,
    random_unital_map,
)
from unital_lgi.correlators import UnitaryParams, correlators_from_maps, k3_algebraic, k3_unitary, params_from_maps
from unital_lgi.explorer import (
    LuedersFamilyPoint,
    SearchConfig,
    bloch_trajectory,
    make_lueders_pair,
    maximize_k3,
    reversed_sequence_z,
    shrink_sweep,
    threshold_certificate,
)
from unital_lgi.oracle import ProtocolSpec, simulate_protocol, simulate_unitary_protocol, state_independence_probe
from unital_lgi.qubit import bloch_to_density, random_bloch_vectors

PI = math.pi
Z = np.array([0.0, 0.0, 1.0])


@pytest.fixture(scope="module")
def positive_search():
    t0 = time.perf_counter()
    res = maximize_k3(SearchConfig(constraint="positive", grid=25))
    return res, time.perf_counter() - t0


def test_criterion_1_lueders_bound_recovery(positive_search, acceptance_report):
    res, elapsed = positive_search
    a = res.argmax
    gap = abs((a["phi1"] - a["phi2"] + PI) % (2 * PI) - PI)
    err = max(abs(a["r1"] - 1), abs(a["r2"] - 1), abs(a["theta1"] - PI / 3), abs(a["theta2"] - PI / 3),
              abs(gap - PI))
    ok = abs(res.best_k3 - 1.5) <= 1e-6 and err <= 1e-4 and elapsed < 60.0
    acceptance_report(1, "Lueders bound recovery", ok,
                      f"max K3 = {res.best_k3:.12f}, argmax error {err:.2e}, {res.evaluations} evaluations "
                      f"in {elapsed:.1f} s")
    assert ok


def test_criterion_2_oracle_equivalence(acceptance_report):
    rng = np.random.default_rng(2002)
    worst = 0.0
    n = 1000
    for _ in range(n):
        d12, d23 = random_unital_map(rng), random_unital_map(rng)
        rho = bloch_to_density(random_bloch_vectors(rng, 1)[0])
        oracle = simulate_protocol(ProtocolSpec(rho, d12, d23)).lg.k3
        worst = max(worst, abs(k3_algebraic(params_from_maps(d12, d23)) - oracle))
    ok = worst <= 1e-12
    acceptance_report(2, "oracle equivalence", ok, f"{n} pairs, max |algebraic - oracle| = {worst:.2e}")
    assert ok


def test_criterion_3_unitary_closed_form(acceptance_report):
    rng = np.random.default_rng(3003)
    worst = 0.0
    for _ in range(1000):
        t1, t2, g = rng.uniform(0, PI), rng.uniform(0, PI), rng.uniform(0, 2 * PI)
        phi1, xi1, phi2 = rng.uniform(-PI, PI, 3)
        # pick the remaining Euler angle so the effective relative phase equals g
        u1, u2 = (phi1, t1, xi1), (phi2, t2, g - phi1 - PI / 2)
        lg = simulate_unitary_protocol(u1, u2, rng.uniform())
        worst = max(worst, abs(lg.k3 - k3_unitary(UnitaryParams(t1, t2, g))))
    oracle_pt = simulate_unitary_protocol((0.0, PI / 6, 0.0), (0.0, PI / 6, 0.0), 0.5).k3
    closed_pt = k3_unitary(UnitaryParams(PI / 6, PI / 6, PI / 2))
    ok = worst <= 1e-12 and abs(oracle_pt - 1.5) <= 1e-12 and abs(closed_pt - 1.5) <= 1e-12
    acceptance_report(3, "unitary closed form", ok,
                      f"max deviation {worst:.2e}; at (pi/6, pi/6, pi/2) oracle {oracle_pt:.15f}, "
                      f"closed form {closed_pt:.15f}")
    assert ok


def test_criterion_4_sequencing_asymmetry(acceptance_report):
    rng = np.random.default_rng(4004)
    worst = 0.0
    for _ in range(100):
        p = LuedersFamilyPoint(*rng.uniform(0, 2 * PI, 3), *rng.uniform(0, 1, 2))
        worst = max(worst, abs(correlators_from_maps(*make_lueders_pair(p)).k3 - 1.5))
    res = maximize_k3(SearchConfig(constraint="reversed", grid=25, c=0.99, c_prime=0.99))
    expected = (3 + 3 * 0.99 * 0.99) / 4
    ok = worst <= 1e-12 and abs(res.best_k3 - expected) <= 1e-6 and res.best_k3 < 1.5
    acceptance_report(4, "sequencing asymmetry", ok,
                      f"forward max |K3 - 1.5| = {worst:.2e}; reversed max K3 = {res.best_k3:.12f} "
                      f"vs {expected:.6f}")
    assert ok


def test_criterion_5_decoherence_threshold(positive_search, dense_shrink_oracle, acceptance_report):
    s_values = (0.2, 0.4, 0.6, 0.8, 1.0)
    rows = shrink_sweep(s_values, SearchConfig(constraint="shrink=1", grid=13))
    worst = 0.0
    for r in rows:
        dense = dense_shrink_oracle(r.s)
        worst = max(worst, abs(r.max_k3 - (1 + r.s ** 2 / 2)), abs(r.max_k3 - dense))
    below = all(r.max_k3 < 1.5 - 1e-3 for r in rows if r.s < 1)
    near_opt = [positive_search[0],
                maximize_k3(SearchConfig(constraint="shrink=1", grid=13)),
                maximize_k3(SearchConfig(constraint="cptp", grid=9, transverse=0.9))]
    cert = threshold_certificate(near_opt)
    ok = worst <= 1e-6 and below and cert.passed and cert.checked > 0
    acceptance_report(5, "decoherence threshold", ok,
                      f"max sweep deviation {worst:.2e}; certificate on {cert.checked} near-optimal points, "
                      f"min |w(t3)| = {cert.min_norm:.6f}")
    assert ok


def test_criterion_6_initial_state_independence(acceptance_report):
    rng = np.random.default_rng(6006)
    pairs = [make_lueders_pair(LuedersFamilyPoint(0.4, 1.2, 2.5, 0.6, 0.3)),
             (UnitalMap.identity(), UnitalMap(np.diag([0.5, 0.2, -0.3])))]
    pairs += [(random_unital_map(rng), random_unital_map(rng)) for _ in range(3)]
    spread = max(state_independence_probe(d12, d23, 100, seed=i) for i, (d12, d23) in enumerate(pairs))
    ok = spread <= 1e-12
    acceptance_report(6, "initial-state independence", ok,
                      f"max K3 spread over 100 states and pre-maps, {len(pairs)} map pairs: {spread:.2e}")
    assert ok


def test_criterion_7_cp_cross_validation(acceptance_report):
    rng = np.random.default_rng(7007)
    tol = 1e-10
    c = rng.uniform(-1, 1, (10_000, 3))
    disagree = 0
    for row in c:
        choi = is_completely_positive(UnitalMap(np.diag(row)), tol)
        pauli = bool(pauli_choi_eigenvalues(row).min() >= -tol)
        disagree += choi != pauli
    flip = not is_completely_positive(UnitalMap(np.diag([1.0, 1.0, -1.0])), tol)
    dephasing = all(is_completely_positive(UnitalMap(np.diag([x, x, 1.0])), tol) for x in np.linspace(0, 1, 101))
    ok = disagree == 0 and flip and dephasing
    acceptance_report(7, "CP checker cross-validation", ok,
                      f"{disagree} disagreements over {len(c)} channels; diag(1,1,-1) rejected: {flip}; "
                      f"diag(c,c,1) accepted on [0,1]: {dephasing}")
    assert ok


def test_criterion_8_trajectory_endpoints(acceptance_report):
    rng = np.random.default_rng(8008)
    fwd_err, rev_err, rev_min = 0.0, 0.0, math.inf
    points = [LuedersFamilyPoint(*rng.uniform(0, 2 * PI, 3), *rng.uniform(0, 1, 2)) for _ in range(200)]
    points.append(LuedersFamilyPoint(0.0, 0.0, 0.0, 1 - 1e-9, 1 - 1e-9))
    for p in points:
        d12, d23 = make_lueders_pair(p)
        fwd = bloch_trajectory([d12, d23], Z, 9)[-1]
        fwd_err = max(fwd_err, abs(fwd.z + 0.5))
        rev = bloch_trajectory([d23, d12], Z, 9)[-1]
        rev_err = max(rev_err, abs(rev.z - reversed_sequence_z(p.c, p.c_prime, p.gamma, p.gamma_prime)))
        rev_min = min(rev_min, rev.z)
        assert rev.z == pytest.approx(apply(d12, apply(d23, Z))[2], abs=1e-15)
    ok = fwd_err <= 1e-12 and rev_err <= 1e-12 and rev_min > -0.5
    acceptance_report(8, "trajectory endpoints", ok,
                      f"forward |z + 1/2| <= {fwd_err:.2e}; reversed formula error {rev_err:.2e}; "
                      f"lowest reversed z = {rev_min:.12f}")
    assert ok
