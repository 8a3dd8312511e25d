import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unital_lgi.channels import InvalidMapError, UnitalMap, random_unital_map
from unital_lgi.correlators import (
    LGResult,
    PositiveUnitalParams,
    UnitaryParams,
    correlators_from_maps,
    k3_algebraic,
    k3_unitary,
    params_from_maps,
    phase_gap,
)
from unital_lgi.explorer import LuedersFamilyPoint, make_lueders_pair
from unital_lgi.qubit import MeasurementAxis, rotation_to_z

PI = math.pi
angle = st.floats(0, 2 * PI)


def test_correlators_identity_pair():
    lg = correlators_from_maps(UnitalMap.identity(), UnitalMap.identity())
    assert lg == LGResult(1.0, 1.0, 1.0, 1.0)


def test_correlators_depolarised_second_step():
    lg = correlators_from_maps(UnitalMap.identity(), UnitalMap(0.3 * np.eye(3)))
    assert (lg.c12, lg.c23, lg.c13) == (1.0, 0.3, 0.3)
    assert lg.k3 == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(angle, angle, angle, st.floats(0, 0.999), st.floats(0, 0.999))
def test_correlators_lueders_family(phi, gamma, gamma_p, c, c_p):
    lg = correlators_from_maps(*make_lueders_pair(LuedersFamilyPoint(phi, gamma, gamma_p, c, c_p)))
    np.testing.assert_allclose([lg.c12, lg.c23, lg.c13, lg.k3], [0.5, 0.5, -0.5, 1.5], atol=1e-12)


def test_correlators_reject_non_positive():
    with pytest.raises(InvalidMapError):
        correlators_from_maps(UnitalMap(np.diag([1.2, 1, 1])), UnitalMap.identity())


def test_correlators_along_other_axis():
    rng = np.random.default_rng(21)
    d12, d23 = random_unital_map(rng), random_unital_map(rng)
    n = np.array([0.48, 0.6, 0.64])
    lg = correlators_from_maps(d12, d23, axis=MeasurementAxis(tuple(n)))
    assert lg.c12 == pytest.approx(n @ d12.delta @ n, abs=1e-14)
    assert lg.c13 == pytest.approx(n @ d23.delta @ d12.delta @ n, abs=1e-14)


def test_k3_algebraic_examples():
    assert k3_algebraic(PositiveUnitalParams(1, PI / 3, 0.4, 1, PI / 3, 0.4 + PI)) == pytest.approx(1.5, abs=1e-15)
    assert k3_algebraic(PositiveUnitalParams(1, 0, 0, 1, 0, 0)) == 1.0
    # frozen from the density-matrix oracle on maps with these third column / row
    value = k3_algebraic(PositiveUnitalParams(0.8, PI / 3, 0.0, 0.9, PI / 4, PI / 2))
    assert value == pytest.approx(0.7818376618407357, abs=1e-12)


def test_params_from_maps_examples():
    p = params_from_maps(UnitalMap.identity(), UnitalMap.identity())
    assert (p.r1, p.theta1, p.r2, p.theta2) == (1.0, 0.0, 1.0, 0.0)
    d12, d23 = make_lueders_pair(LuedersFamilyPoint(0.8, 0.1, 2.0, 0.3, 0.6))
    p = params_from_maps(d12, d23)
    assert p.r1 == pytest.approx(1) and p.r2 == pytest.approx(1)
    assert p.theta1 == pytest.approx(PI / 3) and p.theta2 == pytest.approx(PI / 3)
    assert phase_gap(p.phi1, p.phi2) == pytest.approx(PI)
    zero = UnitalMap(np.diag([1.0, 1.0, 0.0]))
    p = params_from_maps(zero, zero)
    assert (p.r1, p.theta1, p.phi1, p.r2, p.theta2, p.phi2) == (0, 0, 0, 0, 0, 0)


def test_closed_form_and_algebraic_agree_on_random_pairs():
    rng = np.random.default_rng(22)
    for _ in range(2000):
        d12, d23 = random_unital_map(rng), random_unital_map(rng)
        assert correlators_from_maps(d12, d23).k3 == pytest.approx(
            k3_algebraic(params_from_maps(d12, d23)), abs=1e-12)


def test_k3_algebraic_never_exceeds_lueders_bound():
    rng = np.random.default_rng(23)
    n = 10 ** 6
    r1, r2 = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    t1, t2 = rng.uniform(0, PI, n), rng.uniform(0, PI, n)
    p1, p2 = rng.uniform(0, 2 * PI, n), rng.uniform(0, 2 * PI, n)
    k3 = (r1 * np.cos(t1) + r2 * np.cos(t2)
          - r1 * r2 * (np.cos(t1) * np.cos(t2) + np.sin(t1) * np.sin(t2) * np.cos(p1 - p2)))
    assert k3.max() <= 1.5 + 1e-12
    near = k3 >= 1.5 - 1e-9
    gap = np.abs((p1 - p2 + PI) % (2 * PI) - PI)
    dist = np.max(np.abs(np.stack([r1 - 1, r2 - 1, t1 - PI / 3, t2 - PI / 3, gap - PI])), axis=0)
    assert np.all(dist[near] <= 1e-4)
    # and a point at the optimum sits exactly on the bound with |C_ij| = 1/2
    assert k3_algebraic(PositiveUnitalParams(1, PI / 3, 0, 1, PI / 3, PI)) == pytest.approx(1.5, abs=1e-12)


def test_maximal_k3_pins_the_correlators():
    rng = np.random.default_rng(24)
    for _ in range(50):
        d12, d23 = make_lueders_pair(LuedersFamilyPoint(*rng.uniform(0, 2 * PI, 3), *rng.uniform(0, 0.99, 2)))
        lg = correlators_from_maps(d12, d23)
        assert abs(lg.k3 - 1.5) <= 1e-9
        np.testing.assert_allclose([lg.c12, lg.c23, lg.c13], [0.5, 0.5, -0.5], atol=1e-8)


def test_k3_unitary_examples():
    assert k3_unitary(UnitaryParams(PI / 6, PI / 6, PI / 2)) == pytest.approx(1.5, abs=1e-15)
    assert k3_unitary(UnitaryParams(0, 0, 1.234)) == 1.0
    assert k3_unitary(UnitaryParams(PI / 4, PI / 4, 0)) == pytest.approx(-1.0, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(angle, angle, angle)
def test_k3_unitary_gamma_period(t1, t2, g):
    assert k3_unitary(UnitaryParams(t1, t2, g)) == pytest.approx(k3_unitary(UnitaryParams(t1, t2, g + PI)), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, PI), st.floats(0, PI), angle, angle, angle)
def test_k3_algebraic_common_phase_shift(r1, r2, t1, t2, p1, p2, shift):
    a = k3_algebraic(PositiveUnitalParams(r1, t1, p1, r2, t2, p2))
    b = k3_algebraic(PositiveUnitalParams(r1, t1, p1 + shift, r2, t2, p2 + shift))
    assert a == pytest.approx(b, abs=1e-12)


def test_lgresult_bookkeeping():
    lg = LGResult.from_correlators(0.5, 0.5, -0.5)
    assert lg.k3 == 1.5 and lg.violates_classical_bound
    assert not LGResult.from_correlators(1, 1, 1).violates_classical_bound


def test_phase_gap():
    assert phase_gap(0.1, 0.1 + PI) == pytest.approx(PI)
    assert phase_gap(6.0, 0.2) == pytest.approx(2 * PI - 5.8)


def test_rotated_axis_equals_conjugated_maps():
    rng = np.random.default_rng(25)
    n = np.array([0.0, 0.6, 0.8])
    r = rotation_to_z(n)
    d12, d23 = random_unital_map(rng), random_unital_map(rng)
    a = correlators_from_maps(d12, d23, axis=MeasurementAxis(tuple(n)))
    b = correlators_from_maps(UnitalMap(r @ d12.delta @ r.T), UnitalMap(r @ d23.delta @ r.T))
    assert a.k3 == pytest.approx(b.k3, abs=1e-14)
