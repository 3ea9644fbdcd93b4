import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import cat_lattice_counts, first_entry_orders
from homoclinic.manifolds import (
    BudgetExceeded, EpsTooLarge, census_smooth, dump_geometry, fundamental_domain, grow,
    homoclinically_related, intersections, local_manifold, order_smooth, polyline, segment,
    tangent_convergence,
)
from homoclinic.shift import ShiftGraph, SymbolicPoint, order_of
from homoclinic.systems import AffineHorseshoe, apply, cat_map

CAT = cat_map()
HS = AffineHorseshoe()
FULL2 = ShiftGraph.full_shift(2)


@pytest.fixture(scope="module")
def cat_census():
    return census_smooth(CAT, (0, 0), 0.05, 12)


@pytest.fixture(scope="module")
def hs_census():
    return census_smooth(HS, (0, 0), 0.5, 10)


def eig(c):
    """Eigenframe coordinates (t, s) of the vertices of a curve based at the origin."""
    return c.vertices @ CAT.eigenframe().T


def check_polyline(c):
    gaps = np.hypot(*(np.diff(c.vertices, axis=0)).T)
    same = c.comp[1:] == c.comp[:-1]
    assert (gaps[same] <= c.max_gap * (1 + 1e-12)).all()
    assert (np.diff(c.arc_param) > 0).all()


# local manifolds and fundamental domains ----------------------------------

def test_local_unstable_cat():
    c = local_manifold(CAT, (0, 0), 0.1, "unstable", max_gap=0.01)
    tc = eig(c)
    assert np.abs(tc[:, 1]).max() < 1e-15
    assert tc[:, 0].min() == pytest.approx(-0.1, abs=1e-15)
    assert tc[:, 0].max() == pytest.approx(0.1, abs=1e-15)
    assert c.length == pytest.approx(0.2, abs=1e-14)
    check_polyline(c)


def test_local_unstable_horseshoe():
    c = local_manifold(HS, (0, 0), 0.5, "unstable")
    assert np.abs(c.vertices[:, 0]).max() == 0
    assert c.vertices[:, 1].min() == 0 and c.vertices[:, 1].max() == pytest.approx(0.5)
    check_polyline(c)


def test_eps_refused():
    with pytest.raises(EpsTooLarge) as e:
        local_manifold(CAT, (0, 0), 0.6, "unstable")
    assert e.value.bound == 0.25
    with pytest.raises(EpsTooLarge):
        fundamental_domain(HS, (0, 0), 0.9, "stable")


def test_fundamental_domain_cat():
    c = fundamental_domain(CAT, (0, 0), 0.1, "unstable", max_gap=0.005)
    t = np.abs(eig(c)[:, 0])
    assert t.min() == pytest.approx(0.1 / CAT.lam_u, rel=1e-13)
    assert t.max() == pytest.approx(0.1, rel=1e-13)
    assert c.n_components == 2
    assert c.meta["open_inner"]


def test_fundamental_domain_horseshoe():
    c = fundamental_domain(HS, (0, 0), 0.5, "unstable")
    y = c.vertices[:, 1]
    assert y.min() == pytest.approx(0.1) and y.max() == pytest.approx(0.5)
    assert np.abs(c.vertices[:, 0]).max() == 0


def test_fundamental_domain_disjoint_from_preimage():
    c = fundamental_domain(CAT, (0, 0), 0.1, "unstable", max_gap=0.01)
    pre = grow(CAT, c, -1)
    # the preimage fills 0.1/lam^2 < |t| <= 0.1/lam and touches the domain only at its open inner end
    tp = np.abs(eig(pre)[:, 0])
    tc = np.abs(eig(c)[:, 0])
    assert tp.min() == pytest.approx(0.1 / CAT.lam_u ** 2, rel=1e-12)
    assert tp.max() == pytest.approx(tc.min(), rel=1e-12)
    assert c.meta["open_inner"]
    assert (tc >= tp.max() * (1 - 1e-12)).all()


def test_fundamental_domain_tiling():
    eps, K = 0.1, 6
    bu = fundamental_domain(CAT, (0, 0), eps, "unstable", max_gap=0.01)
    ranges = []
    cur = bu
    for k in range(K + 1):
        t = eig(cur)[:, 0]
        for sign in (1, -1):
            part = sign * t[sign * t > 0]
            ranges.append((k, part.min(), part.max()))
        cur = grow(CAT, cur, 1)
    for k, lo, hi in ranges:
        assert lo == pytest.approx(eps * CAT.lam_u ** (k - 1), rel=1e-12)
        assert hi == pytest.approx(eps * CAT.lam_u ** k, rel=1e-12)
    # consecutive images meet end to end (open inner ends make them disjoint)
    pos = sorted((lo, hi) for k, lo, hi in ranges[::2])
    for (lo1, hi1), (lo2, hi2) in zip(pos, pos[1:]):
        assert hi1 == pytest.approx(lo2, rel=1e-12)


# growth -------------------------------------------------------------------

def test_grow_one_step_scales_length():
    c = segment((0.3, 0.2), CAT.v_u, 0.05, max_gap=0.01)
    g = grow(CAT, c, 1)
    assert g.length == pytest.approx(CAT.lam_u * c.length, rel=1e-10)
    check_polyline(g)


def test_grow_zero_is_identity():
    c = segment((0.3, 0.2), (1, 2), 0.05, max_gap=0.01)
    g = grow(CAT, c, 0)
    assert np.array_equal(g.vertices, c.vertices)


def test_grow_fifteen_iterations():
    c = fundamental_domain(CAT, (0, 0), 0.1, "unstable")
    g = grow(CAT, c, 15, budget=10 ** 7)
    assert g.length == pytest.approx(c.length * CAT.lam_u ** 15, rel=1e-8)
    check_polyline(g)


def test_grow_budget():
    c = fundamental_domain(CAT, (0, 0), 0.1, "unstable")
    with pytest.raises(BudgetExceeded) as e:
        grow(CAT, c, 20, budget=5000)
    assert e.value.partial.vertex_count <= 5000
    assert 0 < e.value.iteration < 20
    assert e.value.needed > 5000


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0, 1, exclude_max=True), y=st.floats(0, 1, exclude_max=True),
       ang=st.floats(0, math.pi), k=st.integers(-4, 4))
def test_grow_keeps_gap_and_maps_points(x, y, ang, k):
    c = segment((x, y), (math.cos(ang), math.sin(ang)), 0.03, max_gap=0.02)
    g = grow(CAT, c, k)
    check_polyline(g)
    # the image of every original vertex lies on the grown curve's vertex set (as lifts)
    M = CAT.A if k >= 0 else CAT.Ainv
    img = c.vertices @ np.linalg.matrix_power(M, abs(k)).T
    assert np.allclose(img[0], g.vertices[0], atol=1e-9)
    assert np.allclose(img[-1], g.vertices[-1], atol=1e-9)


def test_horseshoe_grow_clips_to_square():
    c = local_manifold(HS, (0, 0), 0.5, "stable")
    g = grow(HS, c, -3)
    assert ((g.vertices >= -1e-15) & (g.vertices <= 1 + 1e-15)).all()


# intersections ------------------------------------------------------------

def test_orthogonal_segments():
    a = segment((0.5, 0.5), (1, 0), 0.1, max_gap=0.03)
    b = segment((0.52, 0.5), (0, 1), 0.1, max_gap=0.03)
    res = intersections(a, b)
    assert len(res.records) == 1
    assert res.records[0].angle == pytest.approx(math.pi / 2)
    assert np.allclose(res.records[0].point, (0.52, 0.5))


def test_parallel_segments():
    a = segment((0.5, 0.5), (1, 0), 0.1)
    b = segment((0.5, 0.5), (1, 0), 0.1)
    c = segment((0.5, 0.55), (1, 0), 0.1)
    assert intersections(a, b).records == []
    assert intersections(a, c).records == []


def test_shallow_crossing_reported_separately():
    a = segment((0.5, 0.5), (1, 0), 0.2)
    b = segment((0.5, 0.5), (1, 1e-4), 0.2)
    res = intersections(a, b, angle_min=1e-3)
    assert res.records == []
    assert len(res.rejected) == 1


def test_crossing_through_shared_vertex_is_merged():
    a = polyline([(0.4, 0.5), (0.5, 0.5), (0.6, 0.5)], 0.2)
    b = polyline([(0.5, 0.4), (0.5, 0.5), (0.5, 0.6)], 0.2)
    res = intersections(a, b)
    assert len(res.records) == 1
    assert res.merges >= 1


def test_crossing_across_the_seam():
    a = polyline([(0.95, 0.5), (1.05, 0.5)], 0.2)
    b = polyline([(0.0, 0.45), (0.0, 0.55)], 0.2)
    res = intersections(a, b)
    assert len(res.records) == 1
    assert np.allclose(np.mod(res.records[0].point, 1.0), (0.0, 0.5))


def test_cat_angles_are_right_angles(cat_census):
    assert cat_census.records
    for r in cat_census.records:
        assert abs(r.angle - math.pi / 2) <= 1e-9


# censuses -----------------------------------------------------------------

def test_cat_census_matches_lattice(cat_census):
    oracle = cat_lattice_counts(0.05, 12)
    assert [cat_census[n] for n in range(13)] == oracle
    assert all(cat_census[n] == 0 for n in range(6))


def test_cat_census_refinement_stable(cat_census):
    fine = census_smooth(CAT, (0, 0), 0.05, 12, max_gap=0.05, dedup_tol=5e-10)
    assert list(fine.items()) == list(cat_census.items())


def test_cat_census_deterministic(cat_census):
    again = census_smooth(CAT, (0, 0), 0.05, 12)
    assert list(again.items()) == list(cat_census.items())
    assert [r.location for r in again.records] == [r.location for r in cat_census.records]


def _direct_cat_orders(x, eps, n_max=40, tol=1e-7):
    """First n with f^n x within eps of 0 along v_s (and on the stable line), by iteration."""
    F = CAT.eigenframe()

    def local(pt, coord):
        d = np.asarray(pt, float)
        d = d - np.round(d)
        t, s = F @ d
        on, along = (t, s) if coord == "s" else (s, t)
        return abs(on) < tol and abs(along) <= eps

    ts = next(n for n in range(n_max) if local(apply(CAT, x, n), "s"))
    tu = next(n for n in range(n_max) if local(apply(CAT, x, -n), "u"))
    return ts, tu


def test_cat_orders_by_direct_iteration(cat_census):
    rng = random.Random(5)
    recs = rng.sample(cat_census.records, 100)
    for r in recs:
        assert _direct_cat_orders(r.location, 0.05) == (r.theta_s, r.theta_u)
        assert order_smooth(CAT, (0, 0), r, 0.05) == (r.theta_s, r.theta_u)


def test_cat_order_formula_from_offset():
    # a lattice vector m places t v_u on W^s(0); the stable coordinate gives theta_s
    F = CAT.eigenframe()
    for m in [(1, -2), (-3, 5), (8, -13), (21, -34)]:
        t, s = F @ np.array(m, float)
        if abs(t) > 0.25:
            continue
        x = tuple(np.mod(t * np.asarray(CAT.v_u), 1.0))
        want = max(0, math.ceil(math.log(abs(s) / 0.25) / math.log(CAT.lam_u)))
        assert order_smooth(CAT, (0, 0), x, 0.25)[0] == want


def _exact_hs_location(r):
    return tuple(Fraction(round(float(v) * 5 ** 14), 5 ** 14) for v in r.location)


def _direct_hs_orders(x, eps):
    def on_stable(q):
        return q[1] == 0 and 0 <= q[0] <= eps

    def on_unstable(q):
        return q[0] == 0 and 0 <= q[1] <= eps

    ts = next(n for n in range(60) if on_stable(apply(HS, x, n)))
    tu = next(n for n in range(60) if on_unstable(apply(HS, x, -n)))
    return ts, tu


def test_horseshoe_census_orders_and_itineraries(hs_census):
    counts = [hs_census[n] for n in range(11)]
    assert counts == [0, 0, 0] + [2 ** (n - 3) for n in range(3, 11)]
    for r in hs_census.records:
        x = _exact_hs_location(r)
        assert _direct_hs_orders(x, 0.5) == (r.theta_s, r.theta_u)
        # calibrated offset between the two localizations
        assert order_of(FULL2, r.itinerary, SymbolicPoint.periodic((0,))) == (r.theta_s - 1, 0)
        assert first_entry_orders(r.itinerary, 0) == (r.theta_s - 1, 0)
    per_n = {}
    for r in hs_census.records:
        per_n.setdefault(r.theta_s, []).append(r.itinerary)
    for n, its in per_n.items():
        assert len(its) == len(set(its)) == hs_census[n]


def test_horseshoe_order_example_010():
    s = SymbolicPoint((0,), (0, 1, 0), (0,), 0)
    x = order_smooth(HS, (0, 0), s, 0.5)
    assert (x[0] - 1, x[1]) == order_of(FULL2, s, SymbolicPoint.periodic((0,)))


def test_budget_truncates_census():
    t = census_smooth(CAT, (0, 0), 0.05, 12, budget=1000)
    assert t.truncated
    assert max(t.ns) < 12
    assert "budget" in t.metadata["truncated_reason"]


def test_census_refuses_non_fixed_point():
    with pytest.raises(ValueError):
        census_smooth(CAT, (Fraction(1, 5), Fraction(2, 5)), 0.05, 5)


# relation and lambda-lemma ------------------------------------------------

def test_relation_self_and_tiny_budget():
    assert homoclinically_related(CAT, (0, 0), (0, 0)).status == "related"
    q = (Fraction(1, 5), Fraction(2, 5))
    assert homoclinically_related(CAT, (0, 0), q, max_iter=1).status == "not_found"
    assert homoclinically_related(CAT, (0, 0), q, budget=10).status == "not_found"


def test_tangent_parallel_seed():
    seed = segment((0.0, 0.0), CAT.v_u, 0.05, max_gap=0.01)
    ang = tangent_convergence(CAT, seed, 10)
    assert max(ang) < 1e-15


def test_tangent_monotone():
    d = np.asarray(CAT.v_u) * math.cos(1.2) + np.asarray(CAT.v_s) * math.sin(1.2)
    seed = segment((0.0, 0.0), d, 0.05, max_gap=0.01)
    ang = tangent_convergence(CAT, seed, 20)
    assert len(ang) == 21
    assert all(b < a for a, b in zip(ang[1:], ang[2:]) if a > 1e-300)


# geometry dump ------------------------------------------------------------

def test_dump_geometry_format():
    c = polyline([(0.9, 0.5), (1.1, 0.5), (1.3, 0.6)], 0.3)
    lines = dump_geometry(c).strip().split("\n")
    assert len(lines) == 2
    f = [ln.split() for ln in lines]
    assert all(len(x) == 5 for x in f)
    assert f[0][4] == "1" and f[1][4] == "0"
