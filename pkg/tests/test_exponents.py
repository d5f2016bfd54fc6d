import math
from fractions import Fraction as Fr

import pytest
from hypothesis import given
from hypothesis import strategies as st
from shapely.geometry import Point
from shapely.geometry import Polygon as ShapelyPolygon

from hslab import exponents as ex
from hslab.exponents import Exponent

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=24)
positive = st.fractions(min_value=Fr(1, 24), max_value=30, max_denominator=24)


@st.composite
def exps(draw, n=None):
    n = draw(st.integers(1, 4)) if n is None else n
    if draw(st.booleans()):
        return Exponent.finite(draw(positive), draw(rationals), n)
    return Exponent.infinite(draw(rationals), draw(st.fractions(0, 8, max_denominator=12)), n)


# views ----------------------------------------------------------------------

def test_views_finite():
    assert Exponent.finite(2, 0).views() == (Fr(1, 2), 0, 2, 0)
    assert Exponent.finite(1, -1).views() == (1, -1, 1, -1)


def test_views_infinite():
    p = Exponent.infinite(Fr(1, 3), Fr(2), n=3)
    assert p.views() == (Fr(-2, 3), Fr(1, 3), math.inf, Fr(7, 3))


def test_invalid_exponents():
    with pytest.raises(ValueError):
        Exponent.finite(0, 0)
    with pytest.raises(ValueError):
        Exponent.infinite(0, -1)
    with pytest.raises(TypeError):
        Exponent.finite(True, 0)


@given(exps())
def test_views_determine_exponent(p):
    q = Exponent.from_views(p.j, p.theta, p.n)
    assert q == p


# dual / heart ------------------------------------------------------------------

def test_dual_examples():
    assert ex.dual(Exponent.finite(4, Fr(-1, 2))) == Exponent.finite(Fr(4, 3), Fr(1, 2))
    assert ex.dual(Exponent.finite(1, 0)) == Exponent.infinite(0, 0)


def test_heart_examples():
    e = ex.energy(1)
    assert ex.heart(e) == e
    assert ex.heart(Exponent.finite(Fr(6, 5), 0, n=3)) == Exponent.finite(6, -1, n=3)


@given(exps())
def test_dual_and_heart_are_involutions(p):
    assert ex.dual(ex.dual(p)) == p
    assert ex.heart(ex.heart(p)) == p


@given(exps())
def test_dual_and_heart_are_point_reflections(p):
    d, h = ex.dual(p), ex.heart(p)
    assert (p.j + d.j, p.theta + d.theta) == (1, 0)
    assert (p.j + h.j, p.theta + h.theta) == (1, -1)


def test_float_inputs_within_tolerance():
    p = Exponent.finite(2.7, -0.3)
    assert ex.dual(ex.dual(p)).same_point(p, 1e-12)


# shift / embeds / interp ------------------------------------------------------

def test_shift_examples():
    assert ex.shift(Exponent.finite(2, 0), -1) == Exponent.finite(2, -1)
    assert ex.shift(Exponent.infinite(Fr(1, 2), 3), 1) == Exponent.infinite(Fr(3, 2), 3)


@given(exps(), rationals)
def test_shift_group_action(p, r):
    assert ex.shift(ex.shift(p, r), -r) == p


@given(exps(n=2))
def test_embeds_reflexive(p):
    assert ex.embeds(p, p)


@given(exps(n=2), st.fractions(0, 2, max_denominator=12), st.fractions(0, 2, max_denominator=12))
def test_embeds_transitive(p, a, b):
    q = Exponent.from_views(p.j - a / 2, p.theta - a, 2)
    r = Exponent.from_views(q.j - b / 2, q.theta - b, 2)
    assert ex.embeds(p, q) and ex.embeds(q, r) and ex.embeds(p, r)


@given(exps(n=2), exps(n=2))
def test_embeds_dualizes(p, q):
    assert ex.embeds(p, q) == ex.embeds(ex.dual(q), ex.dual(p))


@given(exps(n=3), exps(n=3))
def test_embeds_matches_defining_inequalities(p, q):
    want = p.theta >= q.theta and q.theta - p.theta == 3 * (q.j - p.j)
    assert ex.embeds(p, q) == want


def test_embeds_rejects_mixed_dimensions():
    with pytest.raises(ValueError):
        ex.embeds(Exponent.finite(2, 0, 1), Exponent.finite(2, 0, 2))


@given(exps(n=2), exps(n=2))
def test_interp_endpoints(p, q):
    assert ex.interp(p, q, 0) == p and ex.interp(p, q, 1) == q


@given(exps(n=2), exps(n=2), rationals, rationals, st.fractions(0, 1, max_denominator=10))
def test_interp_reiteration(p, q, e0, e1, lam):
    lhs = ex.interp(ex.interp(p, q, e0), ex.interp(p, q, e1), lam)
    assert lhs == ex.interp(p, q, (1 - lam) * e0 + lam * e1)


@given(exps(n=1), st.fractions(0, 3, max_denominator=8),
       st.fractions(0, 1, max_denominator=8), st.fractions(0, 1, max_denominator=8))
def test_interp_preserves_embedding_order(p, a, e0, e1):
    q = Exponent.from_views(p.j - a, p.theta - a, 1)
    e0, e1 = min(e0, e1), max(e0, e1)
    assert ex.embeds(ex.interp(p, q, e0), ex.interp(p, q, e1))


# regions ---------------------------------------------------------------------

def test_imax_vertices_n1():
    assert set(ex.region_imax(1).vertices()) == {(0, 0), (2, 0), (1, -1), (-1, -1)}


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_energy_in_imax(n):
    assert ex.region_imax(n).contains(ex.energy(n))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_imax_membership_matches_rasterization(n):
    region = ex.region_imax(n)
    shape = ShapelyPolygon([(float(a), float(b)) for a, b in region.vertices()])
    lo, hi = -1.0 / n - 0.2, (n + 1) / n + 0.2
    for a in range(200):
        theta = -1.1 + 1.2 * a / 199
        for b in range(200):
            j = lo + (hi - lo) * b / 199
            pt = Point(j, theta)
            if shape.exterior.distance(pt) < 1e-9:
                continue
            assert region.contains(j, theta) == shape.contains(pt)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_imax_slice_at_energy_level(n):
    region = ex.region_imax(n)
    t = Fr(-1, 2)
    lo, hi = Fr(-1, 2 * n), Fr(2 * n + 1, 2 * n)
    assert region.classify(lo, t) == "boundary-open" and region.classify(hi, t) == "boundary-open"
    assert region.contains(lo + Fr(1, 1000), t) and region.contains(hi - Fr(1, 1000), t)
    assert not region.contains(lo - Fr(1, 1000), t)


def test_imax_edges_open_and_closed():
    region = ex.region_imax(1)
    assert region.contains(Fr(1), Fr(0))           # closed top edge
    assert region.classify(Fr(0), Fr(0)) == "boundary-open"


def test_heart_of_segment_n3():
    seg = ex.region_segment(0, Fr(5, 6), Fr(1, 2))
    image = ex.region_heart(seg)
    js = sorted(v[0] for v in image.vertices())
    assert js == [Fr(1, 6), Fr(1, 2)]
    assert all(v[1] == -1 for v in image.vertices())
    assert sorted(1 / j for j in js) == [2, 6]


def test_heart_segment_general_n():
    n = 5
    seg = ex.region_segment(0, Fr(n + 2, 2 * n), Fr(1, 2))
    js = sorted(v[0] for v in ex.region_heart(seg).vertices())
    assert js == [Fr(n - 2, 2 * n), Fr(1, 2)]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_region_heart_involution(n):
    R = ex.region_imax(n)
    assert ex.region_heart(ex.region_heart(R)).vertices() == R.vertices()


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_imin_inside_imax(n):
    inner = ShapelyPolygon([(float(a), float(b)) for a, b in ex.region_imin(n).vertices()])
    outer = ShapelyPolygon([(float(a), float(b)) for a, b in ex.region_imax(n).vertices()])
    assert outer.buffer(1e-12).contains(inner)


def _decays(p: Exponent, lam) -> bool:
    """Some infinite q with p -> q has r(q) < (lam - n - 1)/2.

    Along an embedding theta - n j is constant and equals r(q) at the
    infinite end, so the search reduces to that single number.
    """
    q = Exponent.from_views(-1, p.theta - p.n * (p.j + 1), p.n)
    assert ex.embeds(p, q) and not q.is_finite
    return q.r < Fr(lam - p.n - 1, 2)


def test_region_decay_limits():
    full = ex.region_decay(1, 2)
    # lam = n + 1: the boundary j = theta / n carries the left edge of I_max
    assert full.classify(Fr(-1, 2), Fr(-1, 2)) == "boundary-open"
    assert full.classify(Fr(0), Fr(0)) == "boundary-open"
    # lam = 0, n = 1: j > theta + 1, so the energy exponent sits on the boundary
    assert ex.region_decay(1, 0).classify(Fr(1, 2), Fr(-1, 2)) == "boundary-open"
    with pytest.raises(ValueError):
        ex.region_decay(1, 3)


@given(st.integers(1, 3), st.fractions(0, 1, max_denominator=16),
       st.fractions(-2, 2, max_denominator=16), st.fractions(-2, 1, max_denominator=16))
def test_region_decay_matches_embedding_characterization(n, frac, j, t):
    lam = frac * (n + 1)
    if j <= 0 or j - t / n - Fr(n + 1 - lam, 2 * n) == 0:
        return
    p = Exponent.from_views(j, t, n)
    assert ex.region_decay(n, lam).contains(j, t) == _decays(p, lam)


@given(st.fractions(0, 2, max_denominator=16), st.fractions(0, 2, max_denominator=16),
       st.fractions(-3, 3, max_denominator=16), st.fractions(-3, 2, max_denominator=16))
def test_region_decay_monotone(l1, l2, j, t):
    l1, l2 = min(l1, l2), max(l1, l2)
    if ex.region_decay(1, l1).contains(j, t):
        assert ex.region_decay(1, l2).contains(j, t)


def test_empty_region_passes_through():
    empty = ex.Region()
    assert ex.region_heart(empty).is_empty
    assert ex.region_hull(empty, empty).is_empty


def test_region_export(tmp_path):
    vpath, gpath = ex.region_export(ex.region_imax(1), tmp_path / "imax.csv", grid=20)
    lines = vpath.read_text().splitlines()
    assert lines == ex.region_csv_lines(ex.region_imax(1))
    assert lines[0] == "j,theta,polygon_id,open_flag" and len(lines) == 5
    assert len(gpath.read_text().splitlines()) == 401
