"""P1 finite elements for the horizontal-graph translator equation.

In the flat chart the equation is the Euler-Lagrange equation of the convex
functional

    E(u) = sum_T |T| e^{ct} sqrt(1 + rho^2 |grad u|^2) - int source * u

whose first variation is the weak form ``int omega <grad u, grad v> / W``
with ``omega = rho^2 e^{ct}`` and ``W = sqrt(1 + rho^2 |grad u|^2)``.  Newton
steps are damped by a backtracking line search on ``E``; coefficients are
frozen at triangle centroids (one-point rule).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .domain import AdmissibleDomain
from .metric import MetricModel
from .mesh import TriMesh, triangulate

log = logging.getLogger(__name__)

SOLVE_TOL = 1e-10


class SolverError(RuntimeError):
    """Newton failed even with continuation; ``last`` holds the final iterate."""

    def __init__(self, message: str, last: np.ndarray | None = None):
        super().__init__(message)
        self.last = last


class ContractError(ValueError):
    """Inputs violate an operation's precondition (too few caps, mismatched meshes)."""


@dataclass(eq=False)
class SolutionField:
    mesh: TriMesh
    u: np.ndarray
    cap: float | None
    residual_norm: float
    newton_iters: int
    boundary_values: np.ndarray
    continuation_steps: int = 0
    offset: float = 0.0  # value subtracted by the C-empty normalisation
    metric: MetricModel | None = None
    load: np.ndarray | None = None  # assembled source term, None when there is no source

    def gradients(self) -> np.ndarray:
        _, grads, _ = self.mesh.geometry()
        return np.einsum("kij,ki->kj", grads, self.u[self.mesh.triangles])

    def value_at(self, pts) -> np.ndarray:
        return self.mesh.interpolate(self.u, pts)


@dataclass(frozen=True)
class CapSchedule:
    levels: tuple[float, ...]

    def __post_init__(self):
        lv = tuple(float(v) for v in self.levels)
        if not lv:
            raise ContractError("empty cap schedule")
        if lv[0] <= 0 or any(b <= a for a, b in zip(lv, lv[1:])):
            raise ContractError(f"caps must be positive and strictly increasing, got {lv}")
        object.__setattr__(self, "levels", lv)

    def __iter__(self):
        return iter(self.levels)

    def __len__(self):
        return len(self.levels)


# ---------------------------------------------------------------- discrete operator

@dataclass(eq=False)
class _Operator:
    m: MetricModel
    mesh: TriMesh
    load: np.ndarray
    area: np.ndarray = field(init=False)
    grads: np.ndarray = field(init=False)
    omega: np.ndarray = field(init=False)
    rho2: np.ndarray = field(init=False)

    def __post_init__(self):
        self.area, self.grads, cen = self.mesh.geometry()
        self.omega = self.m.area_weight(cen)
        self.rho2 = self.m.rho(cen[:, 0]) ** 2
        t = self.mesh.triangles
        self._rows = np.repeat(t, 3, axis=1).ravel()
        self._cols = np.tile(t, (1, 3)).ravel()

    def grad_u(self, u):
        return np.einsum("kij,ki->kj", self.grads, u[self.mesh.triangles])

    def _w(self, gu):
        return np.sqrt(1.0 + self.rho2 * np.einsum("kj,kj->k", gu, gu))

    def energy(self, u) -> float:
        w = self._w(self.grad_u(u))
        return float(np.sum(self.area * self.omega / self.rho2 * w) - self.load @ u)

    def residual(self, u) -> np.ndarray:
        gu = self.grad_u(u)
        w = self._w(gu)
        coef = (self.area * self.omega / w)[:, None]
        local = coef * np.einsum("kij,kj->ki", self.grads, gu)
        r = np.bincount(self.mesh.triangles.ravel(), weights=local.ravel(), minlength=self.mesh.n_vertices)
        return r - self.load

    def jacobian(self, u, frozen: bool = False) -> sparse.csr_matrix:
        """Exact Jacobian of :meth:`residual`; ``frozen=True`` drops the
        derivative of ``W`` (weighted Laplacian when ``u = 0``)."""
        gu = self.grad_u(u)
        w = self._w(gu)
        aw = self.area * self.omega
        gg = np.einsum("kia,kja->kij", self.grads, self.grads)
        local = (aw / w)[:, None, None] * gg
        if not frozen:
            gdu = np.einsum("kij,kj->ki", self.grads, gu)
            local -= (aw * self.rho2 / w**3)[:, None, None] * gdu[:, :, None] * gdu[:, None, :]
        n = self.mesh.n_vertices
        return sparse.coo_matrix((local.ravel(), (self._rows, self._cols)), shape=(n, n)).tocsr()


def source_load(mesh: TriMesh, source: Callable | None) -> np.ndarray:
    """``int source * phi_i`` with the edge-midpoint rule (exact for quadratics)."""
    if source is None:
        return np.zeros(mesh.n_vertices)
    area, _, _ = mesh.geometry()
    t = mesh.triangles
    p = mesh.vertices
    mids = [0.5 * (p[t[:, 0]] + p[t[:, 1]]), 0.5 * (p[t[:, 1]] + p[t[:, 2]]), 0.5 * (p[t[:, 2]] + p[t[:, 0]])]
    s01, s12, s20 = (np.asarray(source(q), dtype=float) for q in mids)
    local = np.stack([s01 + s20, s01 + s12, s12 + s20], axis=1) * (area / 6.0)[:, None]
    return np.bincount(t.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def _boundary_array(mesh: TriMesh, boundary_values) -> np.ndarray:
    if callable(boundary_values):
        g = np.zeros(mesh.n_vertices)
        b = mesh.is_boundary
        g[b] = boundary_values(mesh.vertices[b])
        return g
    g = np.asarray(boundary_values, dtype=float)
    if g.shape == (mesh.n_vertices,):
        return g.copy()
    if g.ndim == 0:
        return np.full(mesh.n_vertices, float(g))
    raise ValueError("boundary values must be a callable, a scalar, or one value per mesh vertex")


def _lift(op: _Operator, g: np.ndarray, interior: np.ndarray, load: np.ndarray | None = None) -> np.ndarray:
    """Weighted-Laplace (``W = 1``) extension of the boundary values in ``g``."""
    k = op.jacobian(np.zeros_like(g), frozen=True)
    u = g.copy()
    u[interior] = 0.0
    rhs = -(k @ u)[interior]
    if load is not None:
        rhs = rhs + load[interior]
    u[interior] = spsolve(k[interior][:, interior].tocsc(), rhs)
    return u


def _newton(op: _Operator, u: np.ndarray, interior: np.ndarray, tol: float, max_iter: int):
    """Damped Newton on the interior unknowns.  Returns ``(u, residual_norm, iters, ok)``."""
    r = op.residual(u)
    rn = float(np.linalg.norm(r[interior]))
    e = op.energy(u)
    for it in range(1, max_iter + 1):
        if rn <= tol:
            return u, rn, it - 1, True
        jac = op.jacobian(u)[interior][:, interior].tocsc()
        du = np.zeros_like(u)
        du[interior] = spsolve(jac, -r[interior])
        slope = float(r[interior] @ du[interior])
        if not np.all(np.isfinite(du)) or slope >= 0:
            return u, rn, it, False
        alpha = 1.0
        while True:
            trial = u + alpha * du
            e_new = op.energy(trial)
            if e_new <= e + 1e-4 * alpha * slope:
                break
            # near the minimum the energy decrease drowns in roundoff; fall back on the residual
            if abs(e_new - e) <= 64 * np.finfo(float).eps * (abs(e) + 1.0):
                r_trial = op.residual(trial)
                if np.linalg.norm(r_trial[interior]) < rn:
                    break
            alpha *= 0.5
            if alpha < 1e-12:
                return u, rn, it, False
        u, e = trial, e_new
        r = op.residual(u)
        rn = float(np.linalg.norm(r[interior]))
    return u, rn, max_iter, rn <= tol


def solve_dirichlet(
    m: MetricModel,
    mesh: TriMesh,
    boundary_values,
    source: Callable | None = None,
    initial_guess: np.ndarray | None = None,
    tol: float = SOLVE_TOL,
    max_iter: int = 60,
    max_continuation: int = 8,
    cap: float | None = None,
) -> SolutionField:
    """Solve the Dirichlet problem with the given boundary trace.

    ``boundary_values`` is a callable on points, a scalar, or an array over all
    mesh vertices (interior entries ignored).  The initial guess defaults to the
    weighted-harmonic extension; its boundary entries are overwritten.  When
    Newton stalls the boundary amplitude is ramped up by doubling, starting from
    ``2**-k`` of the target for growing ``k``.
    """
    g = _boundary_array(mesh, boundary_values)
    if not np.all(np.isfinite(g[mesh.is_boundary])):
        raise ValueError("boundary values must be finite; infinite data is realised by caps")
    load = source_load(mesh, source)
    op = _Operator(m, mesh, load)
    interior = mesh.interior_nodes
    bnd = mesh.is_boundary
    ld = load if source is not None else None
    if interior.size == 0:
        return SolutionField(mesh, g, cap, 0.0, 0, g, metric=m, load=ld)
    if initial_guess is None:
        u0 = _lift(op, g, interior, load)
    else:
        u0 = np.asarray(initial_guess, dtype=float).copy()
        u0[bnd] = g[bnd]
    u, rn, its, ok = _newton(op, u0, interior, tol, max_iter)
    total = its
    if ok:
        return SolutionField(mesh, u, cap, rn, total, g, metric=m, load=ld)
    for k in range(1, max_continuation + 1):
        log.info("newton stalled (residual %.3g); continuation with %d doublings", rn, k)
        u = _lift(op, g * 2.0**-k, interior, load * 2.0**-k)
        ok = True
        for j in range(k, -1, -1):
            s = 2.0**-j
            op_s = _Operator(m, mesh, load * s)
            start = u.copy()
            start[bnd] = s * g[bnd]
            u, rn, its, ok = _newton(op_s, start, interior, tol, max_iter)
            total += its
            if not ok:
                break
        if ok:
            return SolutionField(mesh, u, cap, rn, total, g, continuation_steps=k, metric=m, load=ld)
    raise SolverError(f"Newton failed after continuation (residual {rn:.3g})", last=u)


# ------------------------------------------------------------- Jenkins-Serrin caps

def jenkins_serrin_trace(d: AdmissibleDomain, mesh: TriMesh, cap: float) -> np.ndarray:
    """Boundary values for cap ``n``: ``n`` on A, ``-n`` on B, C data clipped to ``[-n, n]``.

    A domain vertex takes the C value when one of its edges is C (mean of both if
    two are), otherwise the mean of the capped values of its two edges.
    """
    if mesh.n_domain_edges != len(d.edges):
        raise ContractError("mesh does not belong to this domain")
    g = np.zeros(mesh.n_vertices)
    for node, edges in enumerate(mesh.node_edges()):
        if not edges:
            continue
        p = mesh.vertices[node]
        c_vals = [float(d.edges[e].values(p[None])[0]) for e in edges if d.edges[e].kind == "C"]
        if c_vals:
            g[node] = float(np.clip(np.mean(c_vals), -cap, cap))
        else:
            g[node] = float(np.mean([cap if d.edges[e].kind == "A" else -cap for e in edges]))
    return g


def reference_point(d: AdmissibleDomain) -> np.ndarray:
    poly = d.polygon()
    c = poly.centroid
    if not poly.contains(c):
        c = poly.representative_point()
    return np.array([c.x, c.y])


@dataclass(eq=False)
class CapRun:
    """Fields of a cap continuation; ``failed_at`` indexes the cap that failed, if any."""

    fields: list[SolutionField]
    schedule: CapSchedule
    mesh: TriMesh
    normalised: bool
    reference: np.ndarray | None = None
    failed_at: int | None = None
    error: str | None = None

    @property
    def complete(self) -> bool:
        return self.failed_at is None

    def __iter__(self):
        return iter(self.fields)

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i):
        return self.fields[i]


def solve_jenkins_serrin(
    m: MetricModel,
    d: AdmissibleDomain,
    schedule: CapSchedule | Sequence[float],
    h_target: float | None = None,
    mesh: TriMesh | None = None,
    tol: float = SOLVE_TOL,
    reference: np.ndarray | None = None,
) -> CapRun:
    """One Dirichlet solve per cap, each warm-started from the previous one.

    Domains without C edges are normalised by subtracting the value at
    ``reference`` (default: the centroid), a fixed-point stand-in for the
    level-set normalisation used in the existence proof.
    """
    if not isinstance(schedule, CapSchedule):
        schedule = CapSchedule(tuple(schedule))
    if mesh is None:
        if h_target is None:
            raise ValueError("give either a mesh or h_target")
        mesh = triangulate(d, h_target)
    normalise = not d.has_c()
    ref = None
    if normalise:
        ref = reference_point(d) if reference is None else np.asarray(reference, dtype=float)
    op0 = _Operator(m, mesh, np.zeros(mesh.n_vertices))
    interior = mesh.interior_nodes
    fields: list[SolutionField] = []
    prev_u = prev_g = None
    for i, n in enumerate(schedule):
        g = jenkins_serrin_trace(d, mesh, n)
        guess = None
        if prev_u is not None:
            guess = prev_u + _lift(op0, g - prev_g, interior)
        try:
            f = solve_dirichlet(m, mesh, g, initial_guess=guess, tol=tol, cap=n)
        except SolverError as exc:
            return CapRun(fields, schedule, mesh, normalise, ref, failed_at=i, error=str(exc))
        prev_u, prev_g = f.u, g
        if normalise:
            off = float(mesh.interpolate(f.u, ref[None])[0])
            f = SolutionField(mesh, f.u - off, n, f.residual_norm, f.newton_iters, g - off,
                              f.continuation_steps, offset=off, metric=m)
        fields.append(f)
    return CapRun(fields, schedule, mesh, normalise, ref)


# ------------------------------------------------------------------- comparisons

@dataclass
class ComparisonReport:
    passed: bool
    worst_violation: float  # max of u1 - u2 over vertices (positive means u1 above u2)
    worst_vertex: int
    max_abs_difference: float
    tolerance: float
    boundary_ordered: bool


def comparison_check(u1: SolutionField, u2: SolutionField, tol: float | None = None) -> ComparisonReport:
    """Check ``u1 <= u2 + tol`` at every vertex.

    ``tol`` defaults to ``1e-8`` times the larger boundary amplitude.
    """
    if u1.mesh is not u2.mesh and not (
        u1.mesh.vertices.shape == u2.mesh.vertices.shape
        and np.array_equal(u1.mesh.vertices, u2.mesh.vertices)
        and np.array_equal(u1.mesh.triangles, u2.mesh.triangles)
    ):
        raise ContractError("comparison needs both fields on the same mesh")
    b = u1.mesh.is_boundary
    amp = max(1.0, float(np.max(np.abs(u1.boundary_values[b]))), float(np.max(np.abs(u2.boundary_values[b]))))
    if tol is None:
        tol = 1e-8 * amp
    diff = u1.u - u2.u
    k = int(np.argmax(diff))
    ordered = bool(np.all(u1.u[b] <= u2.u[b] + tol))
    return ComparisonReport(
        passed=bool(diff[k] <= tol),
        worst_violation=float(diff[k]),
        worst_vertex=k,
        max_abs_difference=float(np.max(np.abs(diff))),
        tolerance=float(tol),
        boundary_ordered=ordered,
    )
