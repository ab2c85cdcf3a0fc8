import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hermcount.forms import HermitianForm, UniMat, compose_form
from hermcount.hyperbolic import (CuspHoroball, GeometryError, H3Point, PlaneChart, PlaneOfForm, act_h2,
                                  dirichlet_domain_area, foot_of_perpendicular, from_klein, h2_distance,
                                  h3_distance, mobius_h3, perp_length_pair, reduce_point, to_klein)
from hermcount.ring import Field, is_coprime_pair

from helpers import elements, sl2_elements

QI = Field(-4)
F2 = HermitianForm.f_delta(QI, 2)
FORMS = [F2, HermitianForm.f_delta(QI, 5), HermitianForm.make(QI, 1, QI.i(), -1),
         HermitianForm.make(QI, 2, (1, 1), -3), HermitianForm.make(Field(-3), 1, (1, 0), -2)]


def test_h3_distance_examples():
    assert h3_distance(H3Point(0j, 1.0), H3Point(0j, math.e)) == pytest.approx(1.0)
    assert h3_distance(H3Point(1j, 2.0), H3Point(1j, 2.0)) == 0.0
    with pytest.raises(ValueError):
        H3Point(0j, 0.0)


def _random_sl2c(rng):
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return m / cmath.sqrt(np.linalg.det(m))


def test_h3_isometry_invariance():
    rng = np.random.default_rng(3)
    for _ in range(50):
        M = _random_sl2c(rng)
        p = H3Point(complex(*rng.normal(size=2)), float(rng.uniform(0.2, 3)))
        q = H3Point(complex(*rng.normal(size=2)), float(rng.uniform(0.2, 3)))
        assert h3_distance(mobius_h3(M, p), mobius_h3(M, q)) == pytest.approx(h3_distance(p, q), rel=1e-9)


def test_perp_length_examples():
    assert perp_length_pair(F2, QI(1), QI(0)) == pytest.approx(-0.5 * math.log(2))
    assert perp_length_pair(F2, QI(3), QI(2)) == pytest.approx(-0.5 * math.log(2))
    assert perp_length_pair(F2, QI(5), QI(1)) == pytest.approx(math.log(23 / math.sqrt(2)), abs=1e-12)
    assert perp_length_pair(F2, QI(5), QI(1)) == pytest.approx(2.78892, abs=1e-5)
    with pytest.raises(ValueError):
        perp_length_pair(F2, QI(2), QI(0))


def test_foot_example_at_infinity():
    foot, length = foot_of_perpendicular(PlaneOfForm.of(F2), CuspHoroball.of_pair(QI(1), QI(0)))
    assert abs(foot.z) < 1e-12 and foot.t == pytest.approx(math.sqrt(2))
    assert length == pytest.approx(-math.log(math.sqrt(2)))


def test_horoball_diameter():
    hb = CuspHoroball.of_pair(QI(3), QI(2))
    assert hb.cusp == pytest.approx(1.5) and hb.diameter == pytest.approx(0.25)


def _min_distance_on_hemisphere(plane: PlaneOfForm, hb: CuspHoroball) -> float:
    """Brute-force minimum of the signed horosphere distance over C(f)."""
    def dist(theta, phi):
        z = plane.center + plane.radius * math.sin(theta) * cmath.exp(1j * phi)
        return hb.signed_distance(H3Point(z, plane.radius * math.cos(theta)))

    th = np.linspace(0.0, math.pi / 2, 200)[:-1]
    ph = np.linspace(0.0, 2 * math.pi, 400)
    vals = [(dist(t, p), t, p) for t in th for p in ph]
    best, t0, p0 = min(vals)
    step_t, step_p = th[1] - th[0], ph[1] - ph[0]
    for _ in range(60):
        improved = False
        for dt, dp in ((step_t, 0), (-step_t, 0), (0, step_p), (0, -step_p)):
            t, p = t0 + dt, p0 + dp
            if 0 <= t < math.pi / 2:
                v = dist(t, p)
                if v < best:
                    best, t0, p0, improved = v, t, p, True
        if not improved:
            step_t /= 2
            step_p /= 2
    return best


def test_foot_matches_numerical_minimum():
    rng = np.random.default_rng(11)
    count = 0
    while count < 8:
        f = FORMS[count % len(FORMS)]
        K = f.field
        u = K(*map(int, rng.integers(-6, 7, 2)))
        v = K(*map(int, rng.integers(-6, 7, 2)))
        if (u.is_zero() and v.is_zero()) or not is_coprime_pair(u, v) or f(u, v) == 0:
            continue
        plane = PlaneOfForm.of(f)
        hb = CuspHoroball.of_pair(u, v)
        _, length = foot_of_perpendicular(plane, hb)
        assert _min_distance_on_hemisphere(plane, hb) == pytest.approx(length, abs=1e-6)
        count += 1


def test_foot_formula_random_pairs():
    rng = np.random.default_rng(5)
    done = 0
    worst_len = worst_res = 0.0
    while done < 100:
        f = FORMS[done % len(FORMS)]
        K = f.field
        u = K(*map(int, rng.integers(-9, 10, 2)))
        v = K(*map(int, rng.integers(-9, 10, 2)))
        if (u.is_zero() and v.is_zero()) or not is_coprime_pair(u, v) or f(u, v) == 0:
            continue
        chart = PlaneChart(f)
        foot, length = foot_of_perpendicular(chart, CuspHoroball.of_pair(u, v))
        worst_len = max(worst_len, abs(length - perp_length_pair(f, u, v)))
        worst_res = max(worst_res, chart.on_plane_residual(foot))
        done += 1
    assert worst_len < 1e-9 and worst_res < 1e-9


def test_chart_rejects_bad_forms():
    with pytest.raises(GeometryError):
        PlaneChart(HermitianForm.make(QI, 1, (0, 0), 1))
    with pytest.raises(GeometryError):
        PlaneChart(HermitianForm.make(QI, 0, (1, 0), 0))


@pytest.mark.parametrize("f", FORMS)
def test_chart_is_isometry(f):
    chart = PlaneChart(f)
    plane = PlaneOfForm.of(f)
    rng = np.random.default_rng(7)
    for _ in range(30):
        w1 = complex(rng.normal(), math.exp(rng.normal()))
        w2 = complex(rng.normal(), math.exp(rng.normal()))
        p1, p2 = chart.to_h3(w1), chart.to_h3(w2)
        assert plane.contains(p1, 1e-8) and plane.contains(p2, 1e-8)
        assert h3_distance(p1, p2) == pytest.approx(float(h2_distance(w1, w2)), rel=1e-8, abs=1e-9)
        assert chart.from_h3(p1) == pytest.approx(w1, rel=1e-8)


def test_intrinsic_matrices_of_automorphs():
    chart = PlaneChart(F2)
    g = UniMat.from_ints(QI, [[3, 4], [2, 3]])
    m = chart.intrinsic_matrix(g)
    assert np.linalg.det(m) == pytest.approx(1.0)
    with pytest.raises(GeometryError):
        chart.intrinsic_matrix(UniMat.from_ints(QI, [[1, 1], [0, 1]]))
    # action on the chart commutes with the action on H^3
    w = 0.3 + 1.7j
    assert h3_distance(chart.to_h3(complex(act_h2(m, w))), mobius_h3(g.as_complex(), chart.to_h3(w))) < 1e-9


@given(g=sl2_elements(QI, 3), u=elements(QI), v=elements(QI))
def test_perp_length_invariant_under_change_of_form(g, u, v):
    if (u.is_zero() and v.is_zero()) or not is_coprime_pair(u, v) or F2(u, v) == 0:
        return
    fg = compose_form(F2, g)
    inv = g.inverse()
    u2, v2 = inv.act(u, v)
    assert perp_length_pair(fg, u2, v2) == pytest.approx(perp_length_pair(F2, u, v))


def test_klein_roundtrip():
    base = 0.1 + 1.3j
    rng = np.random.default_rng(1)
    pts = rng.normal(size=20) + 1j * np.exp(rng.normal(size=20))
    assert np.allclose(from_klein(to_klein(pts, base), base), pts)
    assert to_klein(base, base) == pytest.approx(0)
    assert to_klein(complex(np.inf, 0), base) == 1


def _f2_generators(f2_group):
    aset, fd = f2_group
    return [fd.chart.intrinsic_matrix(g) for g in aset.gens], fd.base


def test_reduce_point(f2_group):
    gens, base = _f2_generators(f2_group)
    p, word = reduce_point(base, gens, base)
    assert p == base and word == []
    q = complex(act_h2(gens[0] @ gens[1], base))
    r, word = reduce_point(q, gens, base)
    assert abs(r - base) < 1e-9 and word
    # idempotent and orbit invariant
    assert reduce_point(r, gens, base)[1] == []
    for pt in (0.4 + 2.2j, -1.3 + 0.2j):
        r1, _ = reduce_point(pt, gens, base)
        r2, _ = reduce_point(complex(act_h2(gens[2] @ np.linalg.inv(gens[0]), pt)), gens, base)
        assert float(h2_distance(r1, r2)) < 1e-7


def test_dirichlet_area_f2(f2_group):
    gens, base = _f2_generators(f2_group)
    area, poly = dirichlet_domain_area(gens, base, radius=6.0)
    assert area == pytest.approx(2 * math.pi, rel=1e-9)
    area2, _ = dirichlet_domain_area(gens, base, radius=9.0)
    assert abs(area2 - area) / area < 5e-3


def test_dirichlet_area_needs_closure():
    with pytest.raises(GeometryError):
        dirichlet_domain_area([np.array([[2.0, 0.0], [0.0, 0.5]])], 1j, radius=3.0)


def test_h3_distance_against_geodesic_integration():
    # the geodesic through (0,1) and (1,1) is the semicircle of centre 1/2 and radius sqrt(5)/2,
    # on which ds = d(theta) / sin(theta)
    R = math.sqrt(1.25)
    th = np.linspace(math.acos(0.5 / R), math.acos(-0.5 / R), 200001)
    y = 1 / np.sin(th)
    length = float(np.sum((y[1:] + y[:-1]) * np.diff(th)) / 2)
    d = h3_distance(H3Point(0j, 1.0), H3Point(1 + 0j, 1.0))
    assert d == pytest.approx(math.acosh(1.5), abs=1e-14)
    assert d == pytest.approx(float(length), abs=1e-9)


def test_foot_example_at_zero():
    _, length = foot_of_perpendicular(PlaneOfForm.of(F2), CuspHoroball.of_pair(QI(0), QI(1)))
    assert length == pytest.approx(math.log(math.sqrt(2)))


def test_null_pair_has_infinite_depth():
    # 1 + i in the basis (1, w) with w = -2 + i
    assert perp_length_pair(F2, QI(3, 1), QI(1)) == -math.inf
    assert F2(QI(3, 1), QI(1)) == 0


def test_chart_of_diagonal_form_is_trivial_first_step():
    assert np.allclose(PlaneChart(F2).g0, np.eye(2))
    assert np.allclose(PlaneChart(HermitianForm.f_delta(QI, 7)).g0, np.eye(2))


@given(g=sl2_elements(QI, 3), u=elements(QI), v=elements(QI))
def test_perp_length_automorph_invariance(g, u, v):
    A = UniMat.from_ints(QI, [[3, 4], [2, 3]])
    if (u.is_zero() and v.is_zero()) or not is_coprime_pair(u, v) or F2(u, v) == 0:
        return
    assert perp_length_pair(F2, *A.act(u, v)) == perp_length_pair(F2, u, v)


def test_reduce_point_single_generator(f2_group):
    gens, base = _f2_generators(f2_group)
    checked = 0
    for m in gens:
        if np.allclose(np.abs(m), np.eye(2)):
            continue
        _, word = reduce_point(complex(act_h2(m, base)), gens, base)
        # one step, by a generator acting as m^-1 (g and -g act alike)
        assert len(word) == 1
        prod = gens[word[0]] @ m
        assert np.allclose(prod, np.eye(2), atol=1e-8) or np.allclose(prod, -np.eye(2), atol=1e-8)
        checked += 1
    assert checked >= 4
