"""Admissible domains, admissible polygons and the structural existence conditions."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from shapely.geometry import LineString, Point, Polygon

from .curves import (
    DEFAULT_SPACING,
    GeodesicConnectionError,
    IntegrationError,
    ParamCurve,
    connect_geodesic,
    drift_line,
    f_curvatures,
    f_length,
    reaper_arc,
)
from .metric import MetricModel

log = logging.getLogger(__name__)

KINDS = ("A", "B", "C")
TOL_GEODESIC = 1e-4
STRICT_MARGIN = 1e-9
JOIN_TOL = 1e-9


class DomainError(ValueError):
    """Invalid domain or polygon, or a precondition on one was not met."""


Data = Callable[[np.ndarray], np.ndarray]


def _constant(value: float) -> Data:
    def data(pts):
        return np.full(np.asarray(pts).shape[:-1], float(value))

    data.constant = float(value)
    return data


@dataclass(frozen=True, eq=False)
class Edge:
    """Boundary arc: ``A`` carries +infinity, ``B`` -infinity, ``C`` finite ``data``."""

    curve: ParamCurve
    kind: str
    data: Data | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in KINDS:
            raise DomainError(f"edge kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "C":
            if self.data is None:
                raise DomainError("C edges need boundary data")
            if not callable(self.data):
                object.__setattr__(self, "data", _constant(self.data))
        elif self.data is not None:
            raise DomainError(f"{kind} edges carry infinite data; do not pass data")

    def values(self, pts) -> np.ndarray:
        if self.kind != "C":
            raise DomainError("only C edges have finite data")
        return np.asarray(self.data(np.asarray(pts, dtype=float)), dtype=float)

    def reversed(self) -> "Edge":
        return Edge(self.curve.reversed(), self.kind, self.data)


@dataclass(frozen=True, eq=False)
class AdmissibleDomain:
    """Cyclically ordered edges, each ending where the next begins, counter-clockwise."""

    edges: tuple[Edge, ...]

    @classmethod
    def from_edges(cls, edges: Sequence[Edge]) -> "AdmissibleDomain":
        """Chain edges head-to-tail (reversing where needed) and orient counter-clockwise."""
        edges = list(edges)
        if len(edges) < 2:
            raise DomainError("a domain needs at least two edges")
        chained = [edges[0]]
        for e in edges[1:]:
            end = chained[-1].curve.end
            if np.hypot(*(e.curve.start - end)) <= JOIN_TOL:
                chained.append(e)
            elif np.hypot(*(e.curve.end - end)) <= JOIN_TOL:
                chained.append(e.reversed())
            elif len(chained) == 1 and np.hypot(*(e.curve.start - chained[0].curve.start)) <= JOIN_TOL:
                chained[0] = chained[0].reversed()
                chained.append(e)
            elif len(chained) == 1 and np.hypot(*(e.curve.end - chained[0].curve.start)) <= JOIN_TOL:
                chained[0] = chained[0].reversed()
                chained.append(e.reversed())
            else:
                raise DomainError("edges do not form a chain")
        d = cls(tuple(chained))
        if d.signed_area() < 0:
            d = cls(tuple(e.reversed() for e in reversed(chained)))
        return d

    def __len__(self):
        return len(self.edges)

    @property
    def vertices(self) -> np.ndarray:
        return np.array([e.curve.start for e in self.edges])

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(e.kind for e in self.edges)

    def boundary_polyline(self) -> np.ndarray:
        """Closed boundary as one polyline without the repeated first point."""
        return np.vstack([e.curve.samples[:-1] for e in self.edges])

    def signed_area(self) -> float:
        p = self.boundary_polyline()
        x, t = p[:, 0], p[:, 1]
        return 0.5 * float(np.sum(x * np.roll(t, -1) - np.roll(x, -1) * t))

    def polygon(self) -> Polygon:
        return Polygon(self.boundary_polyline())

    def centroid(self) -> np.ndarray:
        c = self.polygon().centroid
        return np.array([c.x, c.y])

    def has_c(self) -> bool:
        return "C" in self.kinds


@dataclass
class Violation:
    rule: str
    edge: int | None = None
    sample: int | None = None
    value: float | None = None

    def __str__(self):
        where = "" if self.edge is None else f" edge {self.edge}"
        where += "" if self.sample is None else f" sample {self.sample}"
        val = "" if self.value is None else f" ({self.value:.3g})"
        return f"{self.rule}{where}{val}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid


def _edge_curvature_violation(m: MetricModel, e: Edge, idx: int, tol: float) -> Violation | None:
    k = f_curvatures(m, e.curve)
    if k.size == 0:
        return None
    if e.kind in ("A", "B"):
        j = int(np.argmax(np.abs(k)))
        if abs(k[j]) > tol:
            return Violation("f-geodesic edge", idx, j + 1, float(k[j]))
    else:
        # inward normal is the left normal on a counter-clockwise boundary
        j = int(np.argmin(k))
        if k[j] < -tol:
            return Violation("f-convex edge", idx, j + 1, float(k[j]))
    return None


def validate_domain(m: MetricModel, d: AdmissibleDomain, tol_geodesic: float = TOL_GEODESIC) -> ValidationReport:
    """Check simplicity, vertex-sharing rules and edge curvature classes."""
    report = ValidationReport()
    n = len(d.edges)
    for i, e in enumerate(d.edges):
        gap = float(np.hypot(*(d.edges[(i + 1) % n].curve.start - e.curve.end)))
        if gap > JOIN_TOL:
            report.violations.append(Violation("edges do not close up", i, value=gap))
    if not report.valid:
        return report
    ring = LineString(np.vstack([d.boundary_polyline(), d.boundary_polyline()[:1]]))
    if not ring.is_simple:
        report.violations.append(Violation("boundary is not simple"))
    if d.signed_area() <= 0:
        report.violations.append(Violation("boundary is not counter-clockwise"))
    for i in range(n):
        a, b = d.edges[i].kind, d.edges[(i + 1) % n].kind
        if a == b and a in ("A", "B") and n > 1:
            report.violations.append(Violation(f"two {a} edges share an endpoint", i))
    for i, e in enumerate(d.edges):
        try:
            m.check_chart(e.curve.samples)
        except ValueError as exc:
            report.violations.append(Violation(f"edge outside chart: {exc}", i))
            continue
        v = _edge_curvature_violation(m, e, i, tol_geodesic)
        if v is not None:
            report.violations.append(v)
    return report


# ------------------------------------------------------------------------- polygons

@dataclass(frozen=True, eq=False)
class PolygonSide:
    curve: ParamCurve
    kind: str  # "A", "B", "C" for domain edges; "chord" for interior f-geodesics
    edge: int | None = None


@dataclass(frozen=True, eq=False)
class AdmissiblePolygon:
    sides: tuple[PolygonSide, ...]
    vertex_ids: tuple[int, ...]
    validated: bool = False

    def is_domain(self, d: AdmissibleDomain) -> bool:
        return len(self.vertex_ids) == len(d.edges) and all(s.edge is not None for s in self.sides)

    def describe(self) -> str:
        parts = [f"{s.kind}{'' if s.edge is None else s.edge}" for s in self.sides]
        return f"vertices {list(self.vertex_ids)}: " + " ".join(parts)


@dataclass
class PolygonReport:
    alpha_f: float
    beta_f: float
    perimeter_f: float
    rest_alpha: float
    rest_beta: float
    passes_alpha: bool
    passes_beta: bool
    side_lengths: tuple[float, ...] = ()

    @property
    def passes(self) -> bool:
        return self.passes_alpha and self.passes_beta


def _polygon_ring(sides: Sequence[PolygonSide]) -> np.ndarray:
    return np.vstack([s.curve.samples[:-1] for s in sides])


def validate_polygon(
    m: MetricModel,
    d: AdmissibleDomain,
    polygon: AdmissiblePolygon,
    tol_geodesic: float = TOL_GEODESIC,
    containment_tol: float = 1e-7,
) -> AdmissiblePolygon:
    """Return ``polygon`` marked validated, or raise :class:`DomainError`."""
    n = len(polygon.sides)
    if n < 2:
        raise DomainError("polygon needs at least two sides")
    verts = d.vertices
    for i, s in enumerate(polygon.sides):
        nxt = polygon.sides[(i + 1) % n]
        if np.hypot(*(nxt.curve.start - s.curve.end)) > JOIN_TOL:
            raise DomainError(f"polygon sides {i} and {(i + 1) % n} do not join")
    for v in polygon.vertex_ids:
        if not 0 <= v < len(verts):
            raise DomainError(f"vertex id {v} is not a domain vertex")
    ring = _polygon_ring(polygon.sides)
    if not LineString(np.vstack([ring, ring[:1]])).is_simple:
        raise DomainError("polygon is not simple")
    region = d.polygon().buffer(containment_tol)
    for i, s in enumerate(polygon.sides):
        if s.kind == "chord":
            k = f_curvatures(m, s.curve)
            if k.size and np.max(np.abs(k)) > tol_geodesic:
                raise DomainError(f"chord {i} is not an f-geodesic (|k_f| = {np.max(np.abs(k)):.3g})")
            if not region.covers(LineString(s.curve.samples)):
                raise DomainError(f"chord {i} leaves the domain")
    return AdmissiblePolygon(polygon.sides, polygon.vertex_ids, validated=True)


def domain_polygon(d: AdmissibleDomain) -> AdmissiblePolygon:
    sides = tuple(PolygonSide(e.curve, e.kind, i) for i, e in enumerate(d.edges))
    return AdmissiblePolygon(sides, tuple(range(len(d.edges))), validated=True)


def polygon_report(
    m: MetricModel,
    p: AdmissiblePolygon,
    margin: float = STRICT_MARGIN,
    lengths: Sequence[float] | None = None,
) -> PolygonReport:
    """alpha_f, beta_f and the strict structural inequalities for one polygon.

    ``2 alpha < L`` is evaluated as ``alpha < L - alpha`` where the right side is
    summed over the non-A sides only, so the two forms agree exactly.
    """
    if not p.validated:
        raise DomainError("polygon_report needs a validated polygon")
    if lengths is None:
        lengths = [f_length(m, s.curve) for s in p.sides]
    kinds = [s.kind for s in p.sides]
    alpha = math.fsum(L for L, k in zip(lengths, kinds) if k == "A")
    beta = math.fsum(L for L, k in zip(lengths, kinds) if k == "B")
    rest_a = math.fsum(L for L, k in zip(lengths, kinds) if k != "A")
    rest_b = math.fsum(L for L, k in zip(lengths, kinds) if k != "B")
    perim = alpha + rest_a
    return PolygonReport(
        alpha_f=alpha,
        beta_f=beta,
        perimeter_f=perim,
        rest_alpha=rest_a,
        rest_beta=rest_b,
        passes_alpha=(rest_a - alpha) >= margin * perim and rest_a > alpha,
        passes_beta=(rest_b - beta) >= margin * perim and rest_b > beta,
        side_lengths=tuple(lengths),
    )


@dataclass
class Enumeration:
    polygons: list[AdmissiblePolygon]
    chord_failures: dict[tuple[int, int], str]
    cap_reached: bool


def enumerate_polygons(
    m: MetricModel,
    d: AdmissibleDomain,
    max_polygons: int = 256,
    chord_cache: dict | None = None,
    spacing: float = DEFAULT_SPACING,
) -> Enumeration:
    """Ω first, then polygons on vertex subsets joined by boundary edges or f-geodesic chords.

    Consecutive chosen vertices that are adjacent on the boundary are joined by
    the boundary edge; all other pairs by the shortest f-geodesic chord found.
    """
    if max_polygons < 1:
        raise ValueError("max_polygons must be at least 1")
    n = len(d.edges)
    verts = d.vertices
    polygons = [domain_polygon(d)]
    failures: dict[tuple[int, int], str] = {}
    cache = {} if chord_cache is None else chord_cache
    cap = False

    def chord(i: int, j: int) -> ParamCurve | None:
        key = (i, j)
        if key in cache:
            return cache[key]
        if (j, i) in cache:
            rev = cache[(j, i)]
            cache[key] = None if rev is None else rev.reversed()
            return cache[key]
        try:
            c = connect_geodesic(m, verts[i], verts[j], spacing=spacing).with_endpoints(verts[i], verts[j])
        except (GeodesicConnectionError, IntegrationError, ValueError) as exc:
            failures[(min(i, j), max(i, j))] = str(exc)
            c = None
        cache[key] = c
        return c

    for k in range(n - 1, 2, -1):
        for subset in itertools.combinations(range(n), k):
            if len(polygons) >= max_polygons:
                cap = True
                break
            sides = []
            ok = True
            for a, b in zip(subset, subset[1:] + subset[:1]):
                if (a + 1) % n == b:
                    sides.append(PolygonSide(d.edges[a].curve, d.edges[a].kind, a))
                    continue
                c = chord(a, b)
                if c is None:
                    ok = False
                    break
                sides.append(PolygonSide(c, "chord"))
            if not ok:
                continue
            try:
                polygons.append(validate_polygon(m, d, AdmissiblePolygon(tuple(sides), subset)))
            except DomainError as exc:
                log.debug("dropping candidate %s: %s", subset, exc)
        if cap:
            break
    return Enumeration(polygons, failures, cap)


@dataclass
class ExistenceVerdict:
    status: str  # "case_a" | "case_b" | "fails" | "partial"
    witness: AdmissiblePolygon | None
    reports: list[PolygonReport]
    polygons: list[AdmissiblePolygon]
    balance: float | None = None
    chord_failures: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def passes(self) -> bool:
        return self.status in ("case_a", "case_b")


def check_existence(
    m: MetricModel,
    d: AdmissibleDomain,
    tol_balance: float = 1e-6,
    max_polygons: int = 256,
    validate: bool = True,
    chord_cache: dict | None = None,
) -> ExistenceVerdict:
    """Evaluate the structural conditions over every enumerated admissible polygon.

    With C edges present every polygon must satisfy both strict inequalities
    (case a).  Without C edges Ω itself has ``L = alpha + beta``; it is tested by
    the balance ``alpha(Ω) = beta(Ω)`` and the strict inequalities are required
    of the proper polygons only (case b).
    """
    if validate:
        v = validate_domain(m, d)
        if not v.valid:
            raise DomainError("invalid domain: " + "; ".join(map(str, v.violations)))
    enum = enumerate_polygons(m, d, max_polygons, chord_cache=chord_cache)
    reports = [polygon_report(m, p) for p in enum.polygons]
    omega = reports[0]
    has_c = d.has_c()
    balance = None
    if not has_c:
        balance = omega.alpha_f - omega.beta_f
        if abs(balance) > tol_balance:
            return ExistenceVerdict(
                "fails", enum.polygons[0], reports, enum.polygons, balance, enum.chord_failures,
                reason=f"alpha_f(Ω) - beta_f(Ω) = {balance:.6g}",
            )
    for poly, rep in zip(enum.polygons, reports):
        if not has_c and poly is enum.polygons[0]:
            continue
        if not rep.passes:
            which = "alpha" if not rep.passes_alpha else "beta"
            return ExistenceVerdict(
                "fails", poly, reports, enum.polygons, balance, enum.chord_failures,
                reason=f"2 {which}_f >= L_f on {poly.describe()}",
            )
    if enum.cap_reached:
        return ExistenceVerdict("partial", None, reports, enum.polygons, balance, enum.chord_failures,
                                reason="polygon cap reached")
    return ExistenceVerdict("case_a" if has_c else "case_b", None, reports, enum.polygons, balance,
                            enum.chord_failures)


# --------------------------------------------------------------------- constructors

def scherk_quadrilateral(
    m: MetricModel,
    a: float,
    b: float,
    r: float,
    s: float,
    labels: Sequence[str] = ("A", "C", "A", "C"),
    data: Sequence[float | Data | None] | None = None,
    origin=(0.0, 0.0),
    spacing: float = DEFAULT_SPACING,
) -> AdmissibleDomain:
    """Quadrilateral of two grim reapers (heights ``a < b``) and two drift lines.

    Edges in order: bottom reaper (height ``a``), side at ``X = r``, top reaper
    (height ``b``), side at ``X = s``.  ``labels`` gives their kinds and ``data``
    their finite values (C edges; default 0).
    """
    if not a < b:
        raise DomainError("need a < b")
    if not s < r:
        raise DomainError("need s < r")
    tau, _ = m.drift_frame()
    lim = 0.5 * math.pi / float(tau @ tau)
    if not (-lim < s and r < lim):
        raise DomainError(f"need -{lim:.6g} < s < r < {lim:.6g}")
    if len(labels) != 4:
        raise DomainError("four labels needed")
    if data is None:
        data = [0.0 if k.upper() == "C" else None for k in labels]

    def phi(X):
        return -math.log(math.cos(float(tau @ tau) * X)) / float(tau @ tau)

    curves = [
        reaper_arc(m, s, r, a, origin, spacing),
        drift_line(m, r, a + phi(r), b + phi(r), origin, spacing),
        reaper_arc(m, r, s, b, origin, spacing),
        drift_line(m, s, b + phi(s), a + phi(s), origin, spacing),
    ]
    # share vertices exactly
    for i in range(4):
        curves[i] = curves[i].with_endpoints(end=curves[(i + 1) % 4].start)
    edges = [
        Edge(c, k, dat if k.upper() == "C" else None)
        for c, k, dat in zip(curves, labels, data)
    ]
    return AdmissibleDomain.from_edges(edges)


def polygon_domain(
    m: MetricModel,
    points,
    labels: Sequence[str],
    data: Sequence[float | Data | None] | None = None,
    spacing: float = DEFAULT_SPACING,
) -> AdmissibleDomain:
    """Domain bounded by straight segments between consecutive ``points``."""
    from .curves import segment

    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if len(labels) != n:
        raise DomainError("one label per side")
    if data is None:
        data = [0.0 if k.upper() == "C" else None for k in labels]
    edges = [
        Edge(segment(pts[i], pts[(i + 1) % n], spacing), k, dat if k.upper() == "C" else None)
        for i, (k, dat) in enumerate(zip(labels, data))
    ]
    return AdmissibleDomain.from_edges(edges)


def point_in_domain(d: AdmissibleDomain, p) -> bool:
    return d.polygon().covers(Point(float(p[0]), float(p[1])))
