"""Post-processing of solved fields: fluxes, normal traces, divergence sets.

Fluxes are ``F[gamma] = int rho^2 e^{ct} <grad u, nu> / W ds`` with ``nu`` the
right-hand unit normal of the path (outward for a counter-clockwise boundary).
Pointwise ``rho |grad u| / W < 1``, so ``|F| <= L_f`` whenever the integrand and
the f-length are evaluated with the same quadrature.

Boundary fluxes are taken from the discrete residual (nodal reactions).  They
sum to zero around a closed boundary up to the Newton tolerance, which trace
based fluxes only do up to O(h).
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from shapely.geometry import LineString

from .curves import ParamCurve, f_curvatures, f_length
from .domain import AdmissibleDomain
from .metric import MetricModel
from .mesh import MeshError, TriMesh
from .solver import ContractError, SolutionField, _Operator

GAUSS_X, GAUSS_W = np.polynomial.legendre.leggauss(5)


def _metric(field_: SolutionField, m: MetricModel | None) -> MetricModel:
    m = m or field_.metric
    if m is None:
        raise ValueError("field carries no metric; pass one explicitly")
    return m


def _segment_quadrature(m: MetricModel, p: np.ndarray, q: np.ndarray):
    """Gauss nodes on segment ``p -> q``: ``(s, points, weights * line_weight)``."""
    d = q - p
    ln = float(np.hypot(*d))
    s = 0.5 * (GAUSS_X + 1.0)
    pts = p + s[:, None] * d
    return s, pts, 0.5 * GAUSS_W * ln * m.line_weight(pts)


# ------------------------------------------------------------------- boundary flux

def boundary_segment_fluxes(field_: SolutionField, m: MetricModel | None = None):
    """Flux and f-length of every boundary segment of the mesh.

    Each boundary node's reaction (residual of the flux operator) is shared
    among its two boundary segments in proportion to the f-weighted hat
    function integrals, so fluxes add up exactly over any run of segments.
    """
    m = _metric(field_, m)
    mesh = field_.mesh
    op = _Operator(m, mesh, np.zeros(mesh.n_vertices))
    reaction = op.residual(field_.u)
    if field_.load is not None:
        reaction = reaction - field_.load
    nseg = len(mesh.boundary_edges)
    lengths = np.zeros(nseg)
    w_start = np.zeros(nseg)
    w_end = np.zeros(nseg)
    for k, (a, b) in enumerate(mesh.boundary_edges):
        s, _, w = _segment_quadrature(m, mesh.vertices[a], mesh.vertices[b])
        lengths[k] = w.sum()
        w_start[k] = np.sum(w * (1.0 - s))
        w_end[k] = np.sum(w * s)
    node_total = np.zeros(mesh.n_vertices)
    np.add.at(node_total, mesh.boundary_edges[:, 0], w_start)
    np.add.at(node_total, mesh.boundary_edges[:, 1], w_end)
    a, b = mesh.boundary_edges[:, 0], mesh.boundary_edges[:, 1]
    flux = reaction[a] * w_start / node_total[a] + reaction[b] * w_end / node_total[b]
    return flux, lengths


@dataclass
class FluxReport:
    flux: np.ndarray  # per domain edge
    f_length: np.ndarray  # f-length of the mesh boundary polyline of each edge
    curve_f_length: np.ndarray | None  # f-length of the exact edge curve, when known
    kinds: tuple[str, ...] = ()
    cap: float | None = None
    h: float | None = None

    @property
    def ratio(self) -> np.ndarray:
        return self.flux / self.f_length

    @property
    def total(self) -> float:
        return float(np.sum(self.flux))

    @property
    def perimeter_f(self) -> float:
        return float(np.sum(self.f_length))

    def bound_ok(self, tol: float = 1e-6) -> bool:
        return bool(np.all(np.abs(self.flux) <= self.f_length + tol))

    def balance_ok(self, constant: float = 0.05) -> bool:
        return abs(self.total) <= constant * self.h * self.perimeter_f

    def as_text(self) -> str:
        lines = [
            f"cap: {_fmt(self.cap)}",
            f"h: {_fmt(self.h)}",
            f"total_flux: {self.total:.17g}",
            f"perimeter_f: {self.perimeter_f:.17g}",
        ]
        for i, (f, l) in enumerate(zip(self.flux, self.f_length)):
            kind = self.kinds[i] if self.kinds else "?"
            lines.append(f"edge.{i}: kind={kind} flux={f:.17g} f_length={l:.17g} ratio={f / l:.17g}")
        return "\n".join(lines) + "\n"

    def csv_rows(self) -> list[list[str]]:
        rows = [["edge", "kind", "flux", "f_length", "ratio"]]
        for i, (f, l) in enumerate(zip(self.flux, self.f_length)):
            kind = self.kinds[i] if self.kinds else ""
            rows.append([str(i), kind, f"{f:.17g}", f"{l:.17g}", f"{f / l:.17g}"])
        return rows


def _fmt(v) -> str:
    return "none" if v is None else f"{v:.17g}"


def flux_report(field_: SolutionField, d: AdmissibleDomain | None = None, m: MetricModel | None = None) -> FluxReport:
    m = _metric(field_, m)
    mesh = field_.mesh
    seg_flux, seg_len = boundary_segment_fluxes(field_, m)
    n = mesh.n_domain_edges
    flux = np.bincount(mesh.boundary_tags, weights=seg_flux, minlength=n)
    length = np.bincount(mesh.boundary_tags, weights=seg_len, minlength=n)
    exact = None
    kinds: tuple[str, ...] = ()
    if d is not None:
        exact = np.array([f_length(m, e.curve) for e in d.edges])
        kinds = d.kinds
    return FluxReport(flux, length, exact, kinds, field_.cap, mesh.h_target)


# ---------------------------------------------------------------------- path flux

def recovered_gradients(field_: SolutionField) -> np.ndarray:
    """Area-weighted average of the gradients of the triangles around each vertex."""
    mesh = field_.mesh
    area, _, _ = mesh.geometry()
    gu = field_.gradients()
    acc = np.zeros((mesh.n_vertices, 2))
    wt = np.zeros(mesh.n_vertices)
    for i in range(3):
        np.add.at(acc, mesh.triangles[:, i], area[:, None] * gu)
        np.add.at(wt, mesh.triangles[:, i], area)
    return acc / wt[:, None]


def flux(
    field_: SolutionField,
    path: ParamCurve,
    side: int = 1,
    m: MetricModel | None = None,
    pieces_per_h: int = 4,
) -> tuple[float, float]:
    """Flux of ``u`` across ``path``; returns ``(F, L_f)`` on the path polyline.

    ``side = +1`` takes the normal on the right of the direction of travel,
    ``-1`` the left one.  The gradient is the recovered vertex gradient
    interpolated inside each triangle, so it is continuous across mesh edges.
    Each path segment is integrated on its own, which makes the result exactly
    additive over subdivision at sample points.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    m = _metric(field_, m)
    mesh = field_.mesh
    vg = recovered_gradients(field_)
    pts = path.polyline()
    h = max(mesh.h_target, 1e-12)
    total_f = 0.0
    total_l = 0.0
    for p, q in zip(pts[:-1], pts[1:]):
        d = q - p
        ln = float(np.hypot(*d))
        nu = side * np.array([d[1], -d[0]]) / ln
        k = max(1, int(np.ceil(pieces_per_h * ln / h)))
        for j in range(k):
            a = p + d * (j / k)
            b = p + d * ((j + 1) / k)
            _, qp, w = _segment_quadrature(m, a, b)
            idx, bary = mesh.locate(qp)
            if np.any(idx < 0):
                raise MeshError("flux path leaves the mesh")
            g = np.einsum("ki,kij->kj", bary, vg[mesh.triangles[idx]])
            rho = m.rho(qp[:, 0])
            wq = np.sqrt(1.0 + rho**2 * np.einsum("kj,kj->k", g, g))
            # integrand rho^2 e^{ct} <g, nu> / W = line_weight * rho <g, nu> / W
            total_f += float(np.sum(w * rho * (g @ nu) / wq))
            total_l += float(np.sum(w))
    return total_f, total_l


def boundary_normal_trace(field_: SolutionField, edge: int, m: MetricModel | None = None):
    """``rho <grad u, nu> / W`` at the midpoints of the boundary segments of one edge.

    Uses the gradient of the single triangle behind each segment.  Returns
    ``(midpoints, values)``; values lie in ``[-1, 1]`` by construction.
    """
    m = _metric(field_, m)
    mesh = field_.mesh
    sel = np.flatnonzero(mesh.boundary_tags == edge)
    if sel.size == 0:
        raise ValueError(f"mesh has no boundary segments on edge {edge}")
    owner = _boundary_owner(mesh)
    gu = field_.gradients()
    mids = np.empty((sel.size, 2))
    vals = np.empty(sel.size)
    for out, k in enumerate(sel):
        a, b = mesh.boundary_edges[k]
        p, q = mesh.vertices[a], mesh.vertices[b]
        d = q - p
        nu = np.array([d[1], -d[0]]) / np.hypot(*d)
        mid = 0.5 * (p + q)
        g = gu[owner[k]]
        rho = float(m.rho(mid[0]))
        vals[out] = rho * float(g @ nu) / np.sqrt(1.0 + rho**2 * float(g @ g))
        mids[out] = mid
    return mids, vals


def _boundary_owner(mesh: TriMesh) -> np.ndarray:
    if "boundary_owner" not in mesh._cache:
        key = {}
        for k, tri in enumerate(mesh.triangles):
            for i in range(3):
                key[(int(tri[i]), int(tri[(i + 1) % 3]))] = k
        mesh._cache["boundary_owner"] = np.array([key[(int(a), int(b))] for a, b in mesh.boundary_edges])
    return mesh._cache["boundary_owner"]


# ------------------------------------------------------------- divergence structure

@dataclass
class InterfacePolyline:
    """Piece of the boundary of the discrete divergence set.

    ``kind`` is ``"interior"`` for pieces crossing the domain and ``"boundary"``
    for pieces running along its boundary.
    """

    points: np.ndarray
    kind: str
    max_kf: float | None = None
    end_vertices: tuple[int, int] | None = None
    end_distances: tuple[float, float] | None = None


@dataclass
class DivergenceReport:
    rates: np.ndarray
    classified: np.ndarray  # vertices the growth test was applied to
    divergent: np.ndarray  # vertex classes after filling in the unclassified ones
    divergent_cells: np.ndarray  # triangle mask of the discrete divergence set
    polylines: list[InterfacePolyline]
    components: list[dict]
    threshold: float
    caps: tuple[float, ...]
    h: float
    mesh: TriMesh | None = field(default=None, repr=False)

    @property
    def empty(self) -> bool:
        return not bool(np.any(self.divergent_cells))

    def interface_max_kf(self, kind: str | None = None) -> float:
        vals = [p.max_kf for p in self.polylines if p.max_kf is not None and (kind is None or p.kind == kind)]
        return max(vals) if vals else 0.0

    def as_text(self) -> str:
        lines = [
            f"h: {self.h:.17g}",
            f"threshold: {self.threshold:.17g}",
            "caps: " + ",".join(f"{c:.17g}" for c in self.caps),
            f"divergent_vertices: {int(np.sum(self.divergent))}",
            f"classified_vertices: {int(np.sum(self.classified))}",
            f"divergent_cells: {int(np.sum(self.divergent_cells))}",
            f"empty: {str(self.empty).lower()}",
            f"components: {len(self.components)}",
        ]
        for i, c in enumerate(self.components):
            lines.append(f"component.{i}: cells={c['cells']} area={c['area']:.17g}")
        for i, p in enumerate(self.polylines):
            kf = "none" if p.max_kf is None else f"{p.max_kf:.17g}"
            ends = "none" if p.end_vertices is None else f"{p.end_vertices[0]},{p.end_vertices[1]}"
            dist = "none" if p.end_distances is None else f"{p.end_distances[0]:.17g},{p.end_distances[1]:.17g}"
            lines.append(f"polyline.{i}: kind={p.kind} samples={len(p.points)} max_kf={kf} ends={ends} end_distance={dist}")
        return "\n".join(lines) + "\n"

    def csv_rows(self) -> list[list[str]]:
        rows = [["polyline", "kind", "x", "t"]]
        for i, p in enumerate(self.polylines):
            for x, t in p.points:
                rows.append([str(i), p.kind, f"{x:.17g}", f"{t:.17g}"])
        return rows


def _boundary_layer(mesh: TriMesh, layers: int) -> np.ndarray:
    """Vertices within ``layers`` triangle rings of the boundary."""
    mask = mesh.is_boundary.copy()
    for _ in range(layers):
        touch = mask[mesh.triangles].any(axis=1)
        grown = mask.copy()
        grown[mesh.triangles[touch].ravel()] = True
        mask = grown
    return mask


def _vertex_neighbours(mesh: TriMesh) -> list[np.ndarray]:
    if "neighbours" not in mesh._cache:
        nb: list[set[int]] = [set() for _ in range(mesh.n_vertices)]
        for a, b, c in mesh.triangles:
            nb[a].update((b, c))
            nb[b].update((a, c))
            nb[c].update((a, b))
        mesh._cache["neighbours"] = [np.array(sorted(s), dtype=np.int64) for s in nb]
    return mesh._cache["neighbours"]


def _fill_classes(mesh: TriMesh, classified: np.ndarray, divergent: np.ndarray) -> np.ndarray:
    """Give every unclassified vertex the majority class of its assigned neighbours,
    sweeping outward from the classified region (ties count as convergent)."""
    cls = np.where(classified, divergent.astype(float), np.nan)
    nb = _vertex_neighbours(mesh)
    todo = np.flatnonzero(~classified)
    while todo.size:
        updates = {}
        for v in todo:
            vals = cls[nb[v]]
            vals = vals[~np.isnan(vals)]
            if vals.size:
                updates[v] = 1.0 if vals.mean() > 0.5 else 0.0
        if not updates:
            cls[todo] = 0.0
            break
        for v, c in updates.items():
            cls[v] = c
        todo = np.array([v for v in todo if v not in updates], dtype=np.int64)
    return cls.astype(bool)


def _directed_boundary(mesh: TriMesh, cells: np.ndarray) -> list[tuple[int, int]]:
    """Edges of the cell set traversed with the cells on the left."""
    directed = set()
    for tri in mesh.triangles[cells]:
        for i in range(3):
            directed.add((int(tri[i]), int(tri[(i + 1) % 3])))
    return sorted(e for e in directed if (e[1], e[0]) not in directed)


def _loops(edges: list[tuple[int, int]]) -> list[list[int]]:
    out_edges: dict[int, list[int]] = defaultdict(list)
    for a, b in edges:
        out_edges[a].append(b)
    for v in out_edges:
        out_edges[v].sort()
    loops = []
    remaining = {e for e in edges}
    for start, _ in edges:
        if not out_edges[start]:
            continue
        loop = [start]
        cur = start
        while out_edges[cur]:
            nxt = out_edges[cur].pop(0)
            remaining.discard((cur, nxt))
            loop.append(nxt)
            cur = nxt
            if cur == start:
                break
        if len(loop) > 1:
            loops.append(loop)
    return loops


def _split_loop(mesh: TriMesh, loop: list[int], boundary_set: set, corners: set) -> list[tuple[list[int], str]]:
    """Cut a closed vertex loop at domain vertices and at boundary/interior switches."""
    closed = loop[0] == loop[-1]
    nodes = loop[:-1] if closed else loop
    n = len(nodes)
    kinds = [
        "boundary" if (nodes[i], nodes[(i + 1) % n]) in boundary_set else "interior"
        for i in range(n if closed else n - 1)
    ]
    cut = [i for i in range(len(kinds)) if nodes[i] in corners or kinds[i] != kinds[i - 1]]
    if not closed:
        cut = sorted(set([0] + cut))
    if not cut:
        return [(nodes + [nodes[0]], kinds[0])]
    pieces = []
    m = len(kinds)
    for j, start in enumerate(cut):
        stop = cut[(j + 1) % len(cut)] if (closed or j + 1 < len(cut)) else m
        idx = []
        i = start
        while True:
            idx.append(i)
            i = (i + 1) % m if closed else i + 1
            if i == stop or (not closed and i >= m):
                break
        seq = [nodes[i] for i in idx] + [nodes[(idx[-1] + 1) % n] if closed else nodes[idx[-1] + 1]]
        pieces.append((seq, kinds[start]))
    return pieces


def smooth_polyline(points: np.ndarray, passes: int = 3) -> np.ndarray:
    """Laplacian smoothing with fixed end points."""
    p = np.array(points, dtype=float)
    for _ in range(passes):
        if len(p) < 3:
            break
        p[1:-1] = 0.25 * p[:-2] + 0.5 * p[1:-1] + 0.25 * p[2:]
    return p


def _max_kf(m: MetricModel, pts: np.ndarray) -> float | None:
    if len(pts) < 3:
        return None
    return float(np.max(np.abs(f_curvatures(m, ParamCurve(pts)))))


def _components(mesh: TriMesh, cells: np.ndarray) -> list[dict]:
    area, _, _ = mesh.geometry()
    idx = np.flatnonzero(cells)
    if idx.size == 0:
        return []
    by_edge: dict[tuple[int, int], list[int]] = defaultdict(list)
    for k in idx:
        t = mesh.triangles[k]
        for i in range(3):
            a, b = int(t[i]), int(t[(i + 1) % 3])
            by_edge[(min(a, b), max(a, b))].append(int(k))
    parent = {int(k): int(k) for k in idx}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for tris in by_edge.values():
        for other in tris[1:]:
            ra, rb = find(tris[0]), find(other)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = defaultdict(list)
    for k in idx:
        groups[find(int(k))].append(int(k))
    comps = [{"cells": len(g), "area": float(area[g].sum()), "triangles": np.array(g)} for g in groups.values()]
    comps.sort(key=lambda c: -c["area"])
    return comps


def classify_convergence(
    fields: Sequence[SolutionField],
    growth_threshold: float = 0.5,
    boundary_layers: int = 1,
    m: MetricModel | None = None,
    smoothing_passes: int = 3,
) -> DivergenceReport:
    """Split vertices into convergent and divergent ones from the last cap increment.

    A vertex is divergent when ``(u_K - u_{K-1}) / (n_K - n_{K-1}) >= growth_threshold``.
    Vertices within ``boundary_layers`` triangle rings of the boundary are not
    tested: their values are tied to the cap through one element and grow with
    it whatever the continuum limit does.  They inherit the class of their
    neighbours.  The discrete divergence set is the union of triangles with
    three divergent vertices; its boundary is cut into pieces at domain
    vertices and where it leaves or joins the domain boundary.  Interior pieces
    are smoothed before their f-curvature is measured.
    """
    fields = list(fields)
    if len(fields) < 3:
        raise ContractError(f"convergence classification needs at least 3 cap levels, got {len(fields)}")
    mesh = fields[-1].mesh
    for f in fields:
        if f.mesh is not mesh:
            raise ContractError("all fields must live on the same mesh")
    caps = tuple(float(f.cap) for f in fields)
    if any(b <= a for a, b in zip(caps, caps[1:])):
        raise ContractError("caps must be strictly increasing")
    m = m or fields[-1].metric
    a, b = fields[-2], fields[-1]
    rates = (b.u - a.u) / (caps[-1] - caps[-2])
    layer = _boundary_layer(mesh, boundary_layers)
    classified = ~layer
    if not np.any(classified):
        classified = ~mesh.is_boundary
    raw = classified & (rates >= growth_threshold)
    divergent = _fill_classes(mesh, classified, raw)
    cells = np.all(divergent[mesh.triangles], axis=1)
    polylines = interface_polylines(mesh, cells, m, smoothing_passes)
    return DivergenceReport(
        rates=rates,
        classified=classified,
        divergent=divergent,
        divergent_cells=cells,
        polylines=polylines,
        components=_components(mesh, cells),
        threshold=float(growth_threshold),
        caps=caps,
        h=mesh.h_target,
        mesh=mesh,
    )


def interface_polylines(mesh: TriMesh, cells: np.ndarray, m: MetricModel | None, smoothing_passes: int = 3):
    if not np.any(cells):
        return []
    boundary_set = {(int(a), int(b)) for a, b in mesh.boundary_edges}
    corners = {int(c) for c in mesh.corner_nodes}
    out = []
    for loop in _loops(_directed_boundary(mesh, cells)):
        for nodes, kind in _split_loop(mesh, loop, boundary_set, corners):
            pts = mesh.vertices[nodes]
            if kind == "interior":
                pts = smooth_polyline(pts, smoothing_passes)
            kf = _max_kf(m, pts) if m is not None else None
            out.append(InterfacePolyline(pts, kind, kf))
    _attach_ends(mesh, out)
    return out


def _attach_ends(mesh: TriMesh, polylines: list[InterfacePolyline]) -> None:
    corners = mesh.vertices[mesh.corner_nodes]
    for p in polylines:
        ends = []
        dists = []
        for q in (p.points[0], p.points[-1]):
            d = np.hypot(corners[:, 0] - q[0], corners[:, 1] - q[1])
            k = int(np.argmin(d))
            ends.append(k)
            dists.append(float(d[k]))
        p.end_vertices = (ends[0], ends[1])
        p.end_distances = (dists[0], dists[1])


@dataclass
class StructureFinding:
    check: str
    passed: bool
    detail: str


@dataclass
class StructureVerdict:
    findings: list[StructureFinding]

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.findings)

    def as_text(self) -> str:
        lines = [f"passed: {str(self.passed).lower()}"]
        for f in self.findings:
            lines.append(f"{f.check}: {'pass' if f.passed else 'fail'} ({f.detail})")
        return "\n".join(lines) + "\n"


def verify_divergence_structure(
    m: MetricModel,
    d: AdmissibleDomain,
    reports: DivergenceReport | Sequence[DivergenceReport],
    kf_tol: float = 0.05,
    endpoint_factor: float = 2.0,
    min_cells: int = 2,
) -> StructureVerdict:
    """Check discrete divergence sets against the structure the theory predicts.

    * interior interface pieces do not cross each other;
    * every piece has ``max |k_f| <= kf_tol`` on the finest report, or its
      maximum decreases along the reports (ordered coarse to fine);
    * interior pieces end within ``endpoint_factor * h`` of domain vertices;
    * every divergent component has at least ``min_cells`` cells and positive area.

    f-curvatures are recomputed from the stored points, so hand-made reports
    are checked the same way as computed ones.
    """
    if isinstance(reports, DivergenceReport):
        reports = [reports]
    reports = sorted(reports, key=lambda r: -r.h)
    findings: list[StructureFinding] = []
    verts = d.vertices
    kf_history = []
    for r in reports:
        tag = f"h={r.h:.4g}"
        interior = [p for p in r.polylines if p.kind == "interior"]
        crossing = 0
        lines = [LineString(p.points) for p in interior if len(p.points) >= 2]
        for i in range(len(lines)):
            for j in range(i + 1, len(lines)):
                if lines[i].crosses(lines[j]) or lines[i].overlaps(lines[j]):
                    crossing += 1
        findings.append(StructureFinding(f"disjoint interfaces [{tag}]", crossing == 0, f"{crossing} crossing pairs"))
        kfs = [k for k in (_max_kf(m, p.points) for p in r.polylines) if k is not None]
        kf_history.append(max(kfs) if kfs else 0.0)
        bad_ends = []
        for i, p in enumerate(interior):
            for q in (p.points[0], p.points[-1]):
                dist = float(np.min(np.hypot(verts[:, 0] - q[0], verts[:, 1] - q[1])))
                if dist > endpoint_factor * r.h:
                    bad_ends.append((i, dist))
        findings.append(
            StructureFinding(
                f"endpoints at domain vertices [{tag}]",
                not bad_ends,
                "all within %.3g" % (endpoint_factor * r.h) if not bad_ends
                else "; ".join(f"piece {i} ends {dd:.3g} from nearest vertex" for i, dd in bad_ends),
            )
        )
        small = [c for c in r.components if c["cells"] < min_cells or c["area"] <= 0]
        findings.append(
            StructureFinding(
                f"components have area [{tag}]",
                not small,
                f"{len(r.components)} components, {len(small)} below {min_cells} cells",
            )
        )
    finest = kf_history[-1]
    decreasing = all(b <= a for a, b in zip(kf_history, kf_history[1:]))
    ok = finest <= kf_tol or (len(kf_history) > 1 and decreasing)
    findings.append(
        StructureFinding(
            "interfaces are f-geodesic",
            ok,
            "max |k_f| by resolution: " + ", ".join(f"{k:.4g}" for k in kf_history),
        )
    )
    return StructureVerdict(findings)
