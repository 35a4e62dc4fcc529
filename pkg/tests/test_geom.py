import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rarebasis import geom
from rarebasis.geom import ConvexPolygon, Disk, HalfRect, Point, RotatedRect


def square(x0=0.0, y0=0.0, s=1.0):
    return ConvexPolygon([(x0, y0), (x0 + s, y0), (x0 + s, y0 + s), (x0, y0 + s)])


def verts(p):
    return [(float(v.x), float(v.y)) for v in p]


def test_to_polygon_identity_rotation():
    p = geom.to_polygon(RotatedRect(2.0, 1.0, 0.0))
    assert verts(p) == [(0, 0), (2, 0), (2, 1), (0, 1)]


def test_to_polygon_quarter_turn():
    # theta = pi/2 is outside the construction range, so use the raw rotation
    p = geom.rect_polygon(math.pi / 2, 0.0, 2.0, 0.0, 1.0)
    np.testing.assert_allclose(verts(p), [(0, 0), (0, 2), (-1, 2), (-1, 0)], atol=1e-15)


def test_to_polygon_eighth_turn():
    # oracle: rotation matrix applied by hand to the unit square corners
    h = math.sqrt(2) / 2
    p = geom.to_polygon(RotatedRect(1.0, 1.0, math.pi / 4))
    np.testing.assert_allclose(verts(p), [(0, 0), (h, h), (0, 2 * h), (-h, h)], atol=1e-15)


def test_halfrect_is_right_half():
    r = RotatedRect(4.0, 1.0, 0.0)
    assert verts(geom.to_polygon(HalfRect(r))) == [(2, 0), (4, 0), (4, 1), (2, 1)]


def test_rect_validation():
    with pytest.raises(ValueError):
        RotatedRect(0.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        RotatedRect(1.0, 1.0, math.pi / 2)
    with pytest.raises(ValueError):
        ConvexPolygon([(0, 0), (0, 1), (1, 0)])  # clockwise


def test_area_basics():
    assert geom.area(square()) == 1.0
    assert geom.area(ConvexPolygon([(0, 0), (1, 0), (0, 1)])) == 0.5
    assert geom.area(geom.to_polygon(RotatedRect(3.0, 0.5, 0.7))) == pytest.approx(1.5, rel=1e-12)
    assert geom.area(None) == 0.0


def test_intersect_shifted_squares():
    assert geom.area(geom.intersect_convex(square(), square(0.5))) == pytest.approx(0.5, rel=1e-14)


def test_intersect_boundary_contact_is_empty():
    a = geom.rect_polygon(0.0, 0.0, 10.0, 0.0, 1.0)
    b = geom.rect_polygon(math.pi / 2, 0.0, 10.0, 0.0, 1.0)
    assert geom.area(geom.intersect_convex(a, b)) < 1e-12


def test_intersect_thin_rects_against_monte_carlo():
    a = geom.rect_polygon(0.0, 0.0, 10.0, 0.0, 1.0)
    b = geom.rect_polygon(0.05, 0.0, 10.0, 0.0, 1.0)
    exact = geom.area(geom.intersect_convex(a, b))
    est = geom.mc_measure(lambda x, y: a.contains(x, y) & b.contains(x, y), (0, 0, 10, 1), 10**6, 7)
    assert abs(exact - est.value) <= 3 * est.stderr


def test_chain_intersection_matches_extremes():
    rects = [RotatedRect(20.0, 1.0, t) for t in (0.4, 0.3, 0.2, 0.1)]
    full = geom.chain_intersection_area(rects)
    ext = geom.area(geom.intersect_convex(geom.to_polygon(rects[0]), geom.to_polygon(rects[-1])))
    assert full == pytest.approx(ext, rel=1e-12)
    assert geom.chain_intersection_area([rects[0], rects[2], rects[3]]) == pytest.approx(full, rel=1e-12)


def test_chain_intersection_rejects_bad_input():
    with pytest.raises(geom.InvalidFamilyError):
        geom.chain_intersection_area([RotatedRect(2.0, 1.0, 0.1)])
    with pytest.raises(geom.InvalidFamilyError):
        geom.chain_intersection_area([RotatedRect(2.0, 1.0, 0.1), RotatedRect(2.0, 1.0, 0.2)])
    with pytest.raises(geom.InvalidFamilyError):
        geom.chain_intersection_area([RotatedRect(2.0, 1.0, 0.2), RotatedRect(3.0, 1.0, 0.1)])


def test_union_area_simple():
    assert geom.union_area([square(), square(5.0)]).value == pytest.approx(2.0)
    assert geom.union_area([square(s=3.0), square(1.0, 1.0)]).value == pytest.approx(9.0)


def test_union_area_capacity():
    with pytest.raises(geom.CapacityError):
        geom.union_area([square(float(i)) for i in range(25)])


def test_levelset_measure_simple():
    polys = [square(), square(0.5)]
    assert geom.levelset_measure(polys, 2) == pytest.approx(0.5)
    assert geom.levelset_measure(polys, 1) == pytest.approx(1.5)
    r = geom.to_polygon(RotatedRect(3.0, 0.5, 0.2))
    assert geom.levelset_measure([r], 1) == pytest.approx(1.5)
    assert geom.levelset_measure([r], 2) == 0.0
    with pytest.raises(ValueError):
        geom.levelset_measure([r], 0)


def test_union_and_levels_match_importance_sampling():
    rng = np.random.default_rng(3)
    polys = [geom.to_polygon(RotatedRect(float(rng.uniform(2, 6)), float(rng.uniform(0.3, 1)),
                                         float(rng.uniform(0, 1.2)))) for _ in range(5)]
    areas = geom.intersection_table(polys)
    ge = geom.depth_measures(areas, (1 << 5) - 1)
    lv = geom.exact_levels(ge)
    union, mc_lv = geom.mc_union_depth(polys, 10**6, 11)
    assert abs(ge[1] - union.value) <= 3 * union.stderr
    for m, v in lv.items():
        assert abs(v - mc_lv[m].value) <= 3 * mc_lv[m].stderr + 1e-12


def test_disk_polygon_area_cases():
    assert geom.disk_polygon_area(Disk(Point(0.0, 0.0), 1.0), square(s=2.0)) == pytest.approx(math.pi / 4, rel=1e-14)
    assert geom.disk_polygon_area(Disk(Point(5.0, 5.0), 1.0), square(s=10.0)) == pytest.approx(math.pi, rel=1e-14)
    assert geom.disk_polygon_area(Disk(Point(20.0, 20.0), 1.0), square()) == pytest.approx(0.0, abs=1e-15)


@given(theta=st.floats(0.0, math.pi / 4), aspect=st.floats(1.01, 1e4))
@settings(max_examples=100, deadline=None)
def test_quarter_disk_law(theta, aspect):
    ell = 1.0
    r = geom.to_polygon(RotatedRect(aspect * ell, ell, theta))
    got = geom.disk_polygon_area(Disk(Point(0.0, 0.0), ell), r)
    assert got == pytest.approx(math.pi * ell ** 2 / 4, rel=1e-9)


def test_mc_measure_oracles():
    sq = geom.mc_measure(lambda x, y: np.ones_like(x, dtype=bool), (0, 0, 1, 1), 10**4, 0)
    assert sq.value == 1.0 and sq.stderr == 0.0
    q = geom.mc_measure(lambda x, y: x * x + y * y <= 1, (0, 0, 1, 1), 10**6, 1)
    assert abs(q.value - math.pi / 4) <= 3 * q.stderr
    with pytest.raises(ValueError):
        geom.mc_measure(lambda x, y: x > 0, (0, 0, 1, 1), 100, 0)


def test_mc_measure_is_seeded():
    f = lambda x, y: x * x + y * y <= 1
    assert geom.mc_measure(f, (0, 0, 1, 1), 10**4, 5) == geom.mc_measure(f, (0, 0, 1, 1), 10**4, 5)


def test_mpf_path_handles_thin_rectangles():
    # aspect 1e30 is far beyond float resolution of the clipped vertices
    with mpmath.workprec(300):
        L, ell = mpmath.mpf(1), mpmath.mpf(10) ** -30
        a = geom.to_polygon(RotatedRect(L, ell, mpmath.mpf("1e-20")))
        b = geom.to_polygon(RotatedRect(L, ell, mpmath.mpf(0)))
        inter = geom.area(geom.intersect_convex(a, b))
        # overlap of two strips through the origin: ell**2 / tan(gap) up to the far end
        assert inter > 0
        assert inter < L * ell
        assert geom.area(a) == pytest.approx(L * ell, rel=1e-25)


@given(L=st.floats(0.1, 100.0), ell_frac=st.floats(0.001, 1.0), theta=st.floats(0.0, 1.5))
@settings(max_examples=200, deadline=None)
def test_rotation_invariance(L, ell_frac, theta):
    ell = L * ell_frac
    assert geom.area(geom.to_polygon(RotatedRect(L, ell, theta))) == pytest.approx(L * ell, rel=1e-12)


polygon_params = st.tuples(st.floats(0.5, 5.0), st.floats(0.1, 2.0), st.floats(0.0, 1.5),
                           st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))


def _poly(p):
    L, ell, th, dx, dy = p
    return geom.translate(geom.to_polygon(RotatedRect(L, ell, th)), Point(dx, dy))


@given(a=polygon_params, b=polygon_params)
@settings(max_examples=200, deadline=None)
def test_intersection_monotone(a, b):
    pa, pb = _poly(a), _poly(b)
    i = geom.area(geom.intersect_convex(pa, pb))
    assert i <= min(geom.area(pa), geom.area(pb)) * (1 + 1e-12)
    assert i == pytest.approx(geom.area(geom.intersect_convex(pb, pa)), rel=1e-9, abs=1e-12)


@given(ps=st.lists(polygon_params, min_size=1, max_size=6))
@settings(max_examples=100, deadline=None)
def test_union_bounds_and_partition_identity(ps):
    polys = [_poly(p) for p in ps]
    areas = geom.intersection_table(polys)
    ge = geom.depth_measures(areas, (1 << len(polys)) - 1)
    lv = geom.exact_levels(ge)
    total = sum(geom.area(p) for p in polys)
    assert ge[1] >= max(geom.area(p) for p in polys) * (1 - 1e-9)
    assert ge[1] <= total * (1 + 1e-9)
    assert sum(m * v for m, v in lv.items()) == pytest.approx(total, rel=1e-10)


def _halfrects_disjoint(ratio, vartheta, frac):
    ell, L = 1.0, ratio
    bound = 1 / math.sqrt(ratio ** 2 / 4 - 1)
    delta_min = math.atan(bound)
    delta = delta_min + frac * (math.pi / 2 - vartheta - delta_min)
    theta = vartheta + delta
    if theta >= math.pi / 2:
        return True
    a = geom.to_polygon(HalfRect(RotatedRect(L, ell, theta)))
    b = geom.to_polygon(HalfRect(RotatedRect(L, ell, vartheta)))
    return geom.area(geom.intersect_convex(a, b)) < 1e-12 * L * ell


@given(ratio=st.floats(2.05, 1e3), vartheta=st.floats(0.0, 0.7), frac=st.floats(0.0, 0.95))
@settings(max_examples=300, deadline=None)
def test_halfrect_disjointness_property(ratio, vartheta, frac):
    assert _halfrects_disjoint(ratio, vartheta, frac)


def test_halfrects_overlap_below_threshold():
    # just under the angle threshold the halves do meet
    ratio = 10.0
    delta = 0.8 * math.atan(1 / math.sqrt(ratio ** 2 / 4 - 1))
    a = geom.to_polygon(HalfRect(RotatedRect(ratio, 1.0, 0.3 + delta)))
    b = geom.to_polygon(HalfRect(RotatedRect(ratio, 1.0, 0.3)))
    assert geom.area(geom.intersect_convex(a, b)) > 1e-6
