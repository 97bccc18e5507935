import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jsgraph.curves import f_length, segment
from jsgraph.domain import (
    AdmissibleDomain,
    AdmissiblePolygon,
    DomainError,
    Edge,
    PolygonSide,
    check_existence,
    domain_polygon,
    enumerate_polygons,
    point_in_domain,
    polygon_domain,
    polygon_report,
    scherk_quadrilateral,
    validate_domain,
    validate_polygon,
)
from jsgraph.metric import euclidean_r3

from conftest import B_SCHERK, R_STAR


def side_lengths(a, b, r, s):
    """Closed forms: reapers (e^a, e^b)(tan r - tan s); sides (e^b - e^a) sec."""
    return (
        math.exp(a) * (math.tan(r) - math.tan(s)),
        (math.exp(b) - math.exp(a)) / math.cos(r),
        math.exp(b) * (math.tan(r) - math.tan(s)),
        (math.exp(b) - math.exp(a)) / math.cos(s),
    )


@given(st.floats(0.05, 0.7), st.floats(0.05, 0.7), st.floats(-0.5, 0.5), st.floats(0.1, 1.5))
def test_scherk_edge_lengths_closed_form(r, s_abs, a, db):
    m = euclidean_r3(1.0)
    d = scherk_quadrilateral(m, a, a + db, r, -s_abs)
    got = [f_length(m, e.curve) for e in d.edges]
    assert np.allclose(got, side_lengths(a, a + db, r, -s_abs), rtol=1e-9)


def test_scherk_structure(r3, scherk):
    assert scherk.kinds == ("A", "C", "A", "C")
    assert scherk.signed_area() > 0
    assert validate_domain(r3, scherk).valid
    for i, e in enumerate(scherk.edges):
        assert np.array_equal(e.curve.end, scherk.edges[(i + 1) % 4].curve.start)
    assert point_in_domain(scherk, (0.0, 0.3))
    assert not point_in_domain(scherk, (1.0, 0.3))


def test_from_edges_orients_and_chains(r3):
    p = [(0, 0), (0, 1), (1, 1), (1, 0)]  # clockwise input
    d = polygon_domain(r3, p, "CCCC")
    assert d.signed_area() > 0
    e = [segment(p[0], p[1]), segment(p[2], p[1]), segment(p[2], p[3]), segment(p[3], p[0])]
    d2 = AdmissibleDomain.from_edges([Edge(c, "C", 0.0) for c in e])
    assert d2.signed_area() == pytest.approx(1.0)
    with pytest.raises(DomainError):
        AdmissibleDomain.from_edges([Edge(segment((0, 0), (1, 0)), "C", 0.0), Edge(segment((2, 0), (3, 0)), "C", 0.0)])


def test_validation_rules(r3):
    adj = scherk_quadrilateral(r3, 0.0, B_SCHERK, 0.3, -0.3, labels="AAAC")
    rules = {v.rule for v in validate_domain(r3, adj).violations}
    assert "two A edges share an endpoint" in rules
    square = polygon_domain(r3, [(0, 0), (1, 0), (1, 1), (0, 1)], "ACAC")
    bad = [v for v in validate_domain(r3, square).violations if v.rule == "f-geodesic edge"]
    assert sorted(v.edge for v in bad) == [0, 2]
    convex = polygon_domain(r3, [(0, 0), (1, 0), (1, 1), (0, 1)], "CCCC")
    assert any(v.rule == "f-convex edge" for v in validate_domain(r3, convex).violations)


def test_polygon_enumeration_quadrilateral(r3, scherk):
    enum = enumerate_polygons(r3, scherk)
    assert enum.polygons[0].is_domain(scherk)
    # the domain and four triangles cut off by the two diagonals
    assert len(enum.polygons) == 5
    assert sorted(len(p.sides) for p in enum.polygons[1:]) == [3, 3, 3, 3]


def test_polygon_report_alpha(r3, scherk):
    rep = polygon_report(r3, domain_polygon(scherk))
    L = side_lengths(0.0, B_SCHERK, 0.3, -0.3)
    assert rep.alpha_f == pytest.approx(L[0] + L[2], rel=1e-10)
    assert rep.perimeter_f == pytest.approx(sum(L), rel=1e-10)
    assert rep.beta_f == 0.0
    assert rep.passes


def test_polygon_report_needs_validation(r3, scherk):
    p = domain_polygon(scherk)
    raw = AdmissiblePolygon(p.sides, p.vertex_ids)
    with pytest.raises(DomainError):
        polygon_report(r3, raw)
    assert validate_polygon(r3, scherk, raw).validated


def test_validate_polygon_rejects_non_geodesic_chord(r3, scherk):
    v = scherk.vertices
    s = scherk.edges
    chord = PolygonSide(segment(v[2], v[0]), "chord")  # straight, not an f-geodesic
    poly = AdmissiblePolygon((PolygonSide(s[0].curve, "A", 0), PolygonSide(s[1].curve, "C", 1), chord), (0, 1, 2))
    with pytest.raises(DomainError, match="f-geodesic"):
        validate_polygon(r3, scherk, poly)


def test_existence_threshold_sides(r3):
    # 3 sin r = 1 separates pass from fail for b = log 2, s = -r
    ok = scherk_quadrilateral(r3, 0.0, B_SCHERK, R_STAR - 1e-3, -(R_STAR - 1e-3))
    bad = scherk_quadrilateral(r3, 0.0, B_SCHERK, R_STAR + 1e-3, -(R_STAR + 1e-3))
    assert check_existence(r3, ok).status == "case_a"
    v = check_existence(r3, bad)
    assert v.status == "fails"
    assert v.witness.is_domain(bad)


def test_case_b_balance(r3):
    r = math.asin(math.tanh(0.5))
    d = scherk_quadrilateral(r3, 0.0, 1.0, r, -r, labels="ABAB")
    v = check_existence(r3, d)
    assert v.status == "case_b"
    assert abs(v.balance) < 1e-12
    off = scherk_quadrilateral(r3, 0.0, 1.0, 0.2, -0.2, labels="ABAB")
    v = check_existence(r3, off)
    assert v.status == "fails" and v.balance < 0


def test_check_existence_rejects_invalid(r3):
    square = polygon_domain(r3, [(0, 0), (1, 0), (1, 1), (0, 1)], "ACAC")
    with pytest.raises(DomainError):
        check_existence(r3, square)


def test_h2xr_scherk(h2):
    assert check_existence(h2, scherk_quadrilateral(h2, 0.0, 0.7, 0.1, -0.1)).status == "case_a"
    assert check_existence(h2, scherk_quadrilateral(h2, 0.0, 0.3, 0.3, -0.3)).status == "fails"


def test_constructor_errors(r3):
    with pytest.raises(DomainError):
        scherk_quadrilateral(r3, 1.0, 0.0, 0.3, -0.3)
    with pytest.raises(DomainError):
        scherk_quadrilateral(r3, 0.0, 1.0, 0.3, 0.4)
    with pytest.raises(DomainError):
        scherk_quadrilateral(r3, 0.0, 1.0, 1.6, -0.3)
    with pytest.raises(DomainError):
        polygon_domain(r3, [(0, 0), (1, 0), (0, 1)], "AC")
