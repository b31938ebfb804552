import cmath
import math

import numpy as np
import pytest

from bowendim import (CylinderPoint, MapParams, OrbitTag, canonical,
                      classify_orbit, classify_window, cylinder_distance,
                      derivative, evaluate, fixed_points, orbit_derivative,
                      orbit_derivative_parts, param_derivative)
from conftest import random_disk_params
from oracles import fixed_point_oracle

TWO_PI = 2 * math.pi


def test_params_validation():
    with pytest.raises(ValueError):
        MapParams(1, 1.5)
    with pytest.raises(ValueError):
        MapParams(2, 3.2)  # outside D(2, 1)
    p = MapParams(2, 2.3 + 0.4j)
    assert p.multiplier == 2 - (2.3 + 0.4j)


def test_canonical_strip():
    assert canonical(1j * math.pi).imag == pytest.approx(math.pi)
    assert canonical(-1j * math.pi).imag == pytest.approx(math.pi)  # -pi -> pi
    assert canonical(2.5j * math.pi).imag == pytest.approx(0.5 * math.pi)
    p = CylinderPoint(0.0, 3 * math.pi / 2)
    assert p.im == pytest.approx(-math.pi / 2)
    assert cylinder_distance(0.1 + 1j * math.pi, 0.1 - 1j * math.pi) < 1e-15


def test_fixed_point_of_log_c(params22):
    z = evaluate(params22, cmath.log(2))
    assert abs(z - cmath.log(2)) < 1e-12


def test_evaluate_at_zero(params22):
    assert abs(evaluate(params22, 0.0) - (1 - math.log(2))) < 1e-12


def test_lift_independence(rng):
    p = MapParams(2, 2.1 + 0.3j)
    z = rng.uniform(-5, 5, 1000) + 1j * rng.uniform(-10, 10, 1000)
    k = rng.integers(-10, 11, 1000)
    a = evaluate(p, z)
    b = evaluate(p, z + TWO_PI * 1j * k)
    assert np.max(cylinder_distance(a, b)) < 1e-12


def test_conjugation_symmetry(rng):
    for p in random_disk_params(rng, 2, n=20):
        pc = p.conjugate()
        z = complex(rng.uniform(-3, 5), rng.uniform(-3, 3))
        lhs = evaluate(pc, np.conj(z))
        rhs = np.conj(evaluate(p, z))
        assert cylinder_distance(lhs, rhs) < 1e-12


def test_derivative_values(params22, rng):
    assert abs(derivative(params22, math.log(2))) < 1e-12  # critical point
    assert abs(derivative(params22, 0.0) - 1.0) < 1e-15    # ell - 1
    for ell in (2, 3):
        for p in random_disk_params(rng, ell, n=50):
            assert abs(derivative(p, p.log_c) - p.multiplier) < 1e-12


def test_param_derivative_values():
    assert param_derivative(MapParams(2, 2.0)) == pytest.approx(0.5)
    # the closed form 1 - (ell-1)/c at ell=2, c=1+0.5i (plain arithmetic;
    # that c lies outside the parameter disk, so no MapParams here)
    assert abs((1 - 1 / (1 + 0.5j)) - (0.2 + 0.4j)) < 1e-14
    got = param_derivative(MapParams(2, 1.8 + 0.5j))
    assert abs(got - (1 - 1 / (1.8 + 0.5j))) < 1e-14


def test_param_derivative_finite_difference():
    ell, z = 2, 0.4 + 0.7j

    def f_at(c):
        return evaluate(MapParams(ell, c), z)

    c0 = 2.1 + 0.2j
    pd = param_derivative(MapParams(ell, c0))
    h = 1e-5
    fd = (f_at(c0 + h) - f_at(c0 - h)) / (2 * h)
    assert abs(pd - fd) < 1e-9
    # second order: error ratio ~ 4 when h halves (at h large enough to
    # stay clear of roundoff)
    errs = []
    for h in (1e-3, 5e-4):
        fd = (f_at(c0 + h) - f_at(c0 - h)) / (2 * h)
        errs.append(abs(pd - fd))
    assert 2.5 < errs[0] / errs[1] < 6.0


def test_orbit_derivative(params22):
    z = 0.3 + 0.4j
    assert orbit_derivative(params22, z, 1) == pytest.approx(
        complex(derivative(params22, z)))
    # at a fixed point the chain rule collapses to a power
    fps = [q for q in fixed_points(params22, (1, 1)) if abs(q.multiplier) > 1]
    p = fps[0]
    d3 = orbit_derivative(params22, p.point.z, 3)
    assert abs(d3 - p.multiplier ** 3) < 1e-8 * abs(p.multiplier) ** 3
    phase, logmag = orbit_derivative_parts(params22, p.point.z, 3)
    assert abs(phase * math.exp(logmag) - d3) < 1e-9 * abs(d3)


def test_classify_fixed_point(params22):
    oc = classify_orbit(params22, params22.log_c)
    assert oc.tag == OrbitTag.ATTRACTED_TO_LOG_C
    assert oc.iterations_used == 0


def test_classify_baker_half_plane(params22):
    oc = classify_orbit(params22, -3 * params22.ell + 0.7j)
    assert oc.tag == OrbitTag.BAKER_ESCAPE
    assert oc.iterations_used == 0


def test_classify_critical_orbit():
    # the critical point is attracted to log c throughout the disk
    for c in (2.0, 2.4 + 0.3j, 1.7 - 0.4j):
        p = MapParams(2, c)
        oc = classify_orbit(p, p.critical_point, max_iter=500)
        assert oc.tag == OrbitTag.ATTRACTED_TO_LOG_C


def test_classify_window_matches_scalar(params22):
    tags = classify_window(params22, -5, 4, 12, 9, max_iter=60)
    res = np.linspace(-5, 4, 12, endpoint=False) + 9 / (2 * 12)
    ims = math.pi - (np.arange(9) + 0.5) * TWO_PI / 9
    for j in range(9):
        for i in range(12):
            oc = classify_orbit(params22, complex(res[i], ims[j]), max_iter=60)
            assert tags[j, i] == int(oc.tag)


def test_fixed_points_contract(params22):
    pts = fixed_points(params22, (-3, 3))
    assert any(abs(q.point.z - cmath.log(2)) < 1e-9 and abs(q.multiplier) < 1e-12
               for q in pts)
    for q in pts:
        img = evaluate(params22, q.point.z)
        assert cylinder_distance(img, q.point.z) < 1e-11
        re_mult = params22.ell - cmath.exp(q.point.z)
        assert abs(re_mult - q.multiplier) < 1e-12


def test_fixed_points_match_dense_oracle():
    for c in (2.0, 2.2 + 0.35j):
        p = MapParams(2, c)
        got = fixed_points(p, (-3, 3))
        ox, ok_ = fixed_point_oracle(2, c, (-6.0, 6.0), spacing=0.1, k_cap=3)
        mine = np.array([q.point.z for q in got])
        mine = mine[(mine.real >= -6) & (mine.real <= 6)]
        assert mine.size == ox.size
        for z in mine:
            assert np.min(np.abs(ox - z)) < 1e-9
