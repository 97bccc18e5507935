"""Triangle meshes of admissible domains.

Boundary nodes are placed on the edge curves themselves (evaluated through the
exact parameterisation when one exists) and the mesher is told not to add
points on the boundary, so every boundary node keeps an edge tag and the data of
that edge.  Spacing along an edge can be graded toward the domain vertices,
where Jenkins-Serrin data jump; the default is uniform because grading piles
the corner jump into short boundary segments and lets nodal fluxes there
overshoot the f-length bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle as tr

from .curves import ParamCurve
from .domain import AdmissibleDomain

MIN_ANGLE = 20.0


class MeshError(RuntimeError):
    """The domain could not be meshed with the required quality."""


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming P1 mesh.

    ``boundary_edges`` run counter-clockwise around the domain and
    ``boundary_tags[k]`` is the domain edge that boundary edge ``k`` discretises.
    ``corner_nodes[i]`` is the node sitting on domain vertex ``i``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    corner_nodes: np.ndarray
    h_target: float
    n_domain_edges: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.boundary_edges[:, 0]

    @property
    def is_boundary(self) -> np.ndarray:
        if "is_boundary" not in self._cache:
            mask = np.zeros(self.n_vertices, dtype=bool)
            mask[self.boundary_edges.ravel()] = True
            self._cache["is_boundary"] = mask
        return self._cache["is_boundary"]

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    def node_edges(self) -> list[tuple[int, ...]]:
        """Domain edges each node lies on (empty for interior nodes, two for corners)."""
        out: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for (a, b), tag in zip(self.boundary_edges, self.boundary_tags):
            out[a].add(int(tag))
            out[b].add(int(tag))
        return [tuple(sorted(s)) for s in out]

    def geometry(self):
        """Per-triangle ``(areas, grads, centroids)``; ``grads[k, i]`` is the flat
        gradient of the hat function of local node ``i`` on triangle ``k``."""
        if "geometry" not in self._cache:
            p = self.vertices[self.triangles]
            e1 = p[:, 1] - p[:, 0]
            e2 = p[:, 2] - p[:, 0]
            det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            # gradients of barycentric coordinates: rotate opposite edges
            opp = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
            grads = np.stack([-opp[..., 1], opp[..., 0]], axis=-1) / det[:, None, None]
            self._cache["geometry"] = (0.5 * det, grads, p.mean(axis=1))
        return self._cache["geometry"]

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.sum(a * b, axis=1) / (np.hypot(a[:, 0], a[:, 1]) * np.hypot(b[:, 0], b[:, 1]))
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
        return float(np.min(angles))

    def edge_lengths(self) -> np.ndarray:
        p = self.vertices
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        d = p[e[:, 1]] - p[e[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def h_max(self) -> float:
        return float(self.edge_lengths().max())

    def locate(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Triangle index and barycentric coordinates of each point (-1 if outside)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        tri = self.vertices[self.triangles]
        v0 = tri[:, 0]
        e1 = tri[:, 1] - v0
        e2 = tri[:, 2] - v0
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        idx = np.full(len(pts), -1)
        bary = np.zeros((len(pts), 3))
        tol = 1e-12
        for k, q in enumerate(pts):
            d = q - v0
            l1 = (d[:, 0] * e2[:, 1] - d[:, 1] * e2[:, 0]) / det
            l2 = (e1[:, 0] * d[:, 1] - e1[:, 1] * d[:, 0]) / det
            l0 = 1.0 - l1 - l2
            worst = np.minimum(np.minimum(l0, l1), l2)
            j = int(np.argmax(worst))
            if worst[j] >= -tol:
                idx[k] = j
                bary[k] = (l0[j], l1[j], l2[j])
        return idx, bary

    def interpolate(self, u: np.ndarray, pts) -> np.ndarray:
        idx, bary = self.locate(pts)
        if np.any(idx < 0):
            raise MeshError("point outside the mesh")
        return np.sum(np.asarray(u)[self.triangles[idx]] * bary, axis=1)


def _arclength_table(curve: ParamCurve, n: int = 2049):
    """Dense ``(r, s)`` table of flat arclength against curve parameter."""
    if curve.param is not None:
        r = np.linspace(0.0, 1.0, n)
        pts, _ = curve.param(r)
    else:
        pts = curve.samples
        seg = curve.segment_lengths()
        r = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
    d = np.diff(pts, axis=0)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(d[:, 0], d[:, 1]))])
    return r, s


def _evaluate(curve: ParamCurve, r: np.ndarray) -> np.ndarray:
    if curve.param is not None:
        return curve.param(r)[0]
    pts = curve.samples
    seg = curve.segment_lengths()
    rr = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
    return np.stack([np.interp(r, rr, pts[:, 0]), np.interp(r, rr, pts[:, 1])], axis=1)


def graded_positions(length: float, h: float, h_min: float, growth: float) -> np.ndarray:
    """Arclength positions in ``[0, length]`` with local spacing
    ``min(h, h_min + growth * distance to the nearer end)``."""
    if length <= 0:
        raise MeshError("edge of zero length")
    s = np.linspace(0.0, length, 4001)
    dist = np.minimum(s, length - s)
    size = np.minimum(h, h_min + growth * dist)
    density = np.concatenate([[0.0], np.cumsum(0.5 * (1 / size[1:] + 1 / size[:-1]) * np.diff(s))])
    n = max(1, int(math.ceil(density[-1])))
    return np.interp(np.linspace(0.0, density[-1], n + 1), density, s)


def boundary_nodes(d: AdmissibleDomain, h: float, corner_ratio: float = 1.0, growth: float = 0.3):
    """Graded nodes on every edge; returns ``(points, tags)`` with the closing
    node of each edge dropped (it is the first node of the next edge)."""
    pts, tags = [], []
    h_min = corner_ratio * h
    for k, e in enumerate(d.edges):
        r_tab, s_tab = _arclength_table(e.curve)
        s_new = graded_positions(s_tab[-1], h, min(h_min, s_tab[-1] / 4), growth)
        r_new = np.interp(s_new, s_tab, r_tab)
        r_new[0], r_new[-1] = 0.0, 1.0
        q = _evaluate(e.curve, r_new)
        q[0] = e.curve.start
        pts.append(q[:-1])
        tags.append(np.full(len(q) - 1, k))
    return np.vstack(pts), np.concatenate(tags)


def triangulate(
    d: AdmissibleDomain,
    h_target: float,
    corner_ratio: float = 1.0,
    growth: float = 0.3,
    min_angle: float = MIN_ANGLE,
) -> TriMesh:
    """Quality triangulation of ``d`` with edge length about ``h_target``.

    Boundary spacing shrinks to ``corner_ratio * h_target`` at the domain
    vertices (``corner_ratio = 1`` keeps it uniform).
    Raises :class:`MeshError` for self-intersecting boundaries, slivers the
    mesher cannot resolve, or any inverted or poorly shaped triangle.
    """
    if not h_target > 0:
        raise ValueError("h_target must be positive")
    poly = d.polygon()
    if not poly.is_valid or not poly.exterior.is_simple:
        raise MeshError("boundary is not a simple closed curve")
    # thinness: a domain narrower than a small fraction of the boundary spacing
    # cannot be meshed without slivers
    width = 2.0 * poly.area / poly.length
    if width < 1e-3 * h_target:
        raise MeshError(f"domain too thin to mesh (area/perimeter {width:.3g}) at h={h_target}")
    pts, tags = boundary_nodes(d, h_target, corner_ratio, growth)
    n = len(pts)
    seg = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    max_area = math.sqrt(3.0) / 4.0 * h_target**2
    out = tr.triangulate(
        {"vertices": pts, "segments": seg, "segment_markers": (tags + 1)[:, None]},
        f"pq{min_angle:g}a{max_area:.15f}YQ",
    )
    verts = np.asarray(out["vertices"], dtype=float)
    tris = np.asarray(out["triangles"], dtype=np.int64)
    if len(verts) < n or not np.array_equal(verts[:n], pts):
        raise MeshError("mesher moved or dropped boundary nodes")
    # counter-clockwise orientation of every triangle
    p = verts[tris]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = det < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    if np.any(np.abs(det) <= 1e-14 * h_target**2):
        raise MeshError("degenerate triangle")
    corner = np.array([int(np.flatnonzero(tags == k)[0]) for k in range(len(d.edges))])
    mesh = TriMesh(
        vertices=verts,
        triangles=tris,
        boundary_edges=seg,
        boundary_tags=tags,
        corner_nodes=corner,
        h_target=float(h_target),
        n_domain_edges=len(d.edges),
    )
    _check(mesh, min_angle)
    return mesh


def _check(mesh: TriMesh, min_angle: float) -> None:
    areas, _, _ = mesh.geometry()
    if np.any(areas <= 0):
        raise MeshError("inverted triangle")
    # each boundary segment must be an edge of exactly one triangle
    t = mesh.triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = {(int(a), int(b)) for a, b in edges}
    for a, b in mesh.boundary_edges:
        if (int(a), int(b)) not in key:
            raise MeshError("boundary segment missing from the triangulation")
    worst = mesh.min_angle()
    if worst < min_angle - 1e-6:
        raise MeshError(f"minimum angle {worst:.2f} deg below {min_angle} deg")


def mesh_from_arrays(vertices, triangles, boundary_edges, boundary_tags, h_target: float | None = None) -> TriMesh:
    """Wrap externally generated arrays (used by tests to build tiny meshes)."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    boundary_edges = np.asarray(boundary_edges, dtype=np.int64)
    boundary_tags = np.asarray(boundary_tags, dtype=np.int64)
    n_edges = int(boundary_tags.max()) + 1
    corner = np.array([int(boundary_edges[np.flatnonzero(boundary_tags == k)[0], 0]) for k in range(n_edges)])
    m = TriMesh(vertices, triangles, boundary_edges, boundary_tags, corner, float(h_target or 0.0), n_edges)
    if h_target is None:
        object.__setattr__(m, "h_target", m.h_max())
    _check(m, 0.0)
    return m
