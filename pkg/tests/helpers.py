"""Manufactured-solution oracle shared by the solver and acceptance tests."""
import math

import numpy as np

from jsgraph.domain import polygon_domain
from jsgraph.mesh import triangulate
from jsgraph.solver import solve_dirichlet

PI = math.pi
# fourth-order central difference stencil
STENCIL = ((-2, 1 / 12), (-1, -2 / 3), (1, 2 / 3), (2, -1 / 12))


def u_star(p):
    return np.sin(PI * p[..., 0]) * np.sin(PI * p[..., 1])


def grad_u_star(p):
    x, t = p[..., 0], p[..., 1]
    return np.stack([PI * np.cos(PI * x) * np.sin(PI * t), PI * np.sin(PI * x) * np.cos(PI * t)], axis=-1)


def flux_vector(m, p):
    g = grad_u_star(p)
    w = np.sqrt(1.0 + m.rho(p[..., 0]) ** 2 * np.sum(g * g, axis=-1))
    return m.area_weight(p, check=False)[..., None] * g / w[..., None]


def mms_source(m, step=1e-3):
    """Strong operator ``-div(omega grad u* / W*)`` by numerical differentiation."""

    def source(p):
        p = np.asarray(p, dtype=float)
        out = 0.0
        for k in range(2):
            e = np.zeros(2)
            e[k] = step
            out = out + sum(c * flux_vector(m, p + o * e)[..., k] for o, c in STENCIL) / step
        return -out

    return source


def l2_error(mesh, u, exact):
    area, _, _ = mesh.geometry()
    verts = mesh.vertices[mesh.triangles]
    err = np.zeros(mesh.n_triangles)
    for bc in ((2 / 3, 1 / 6, 1 / 6), (1 / 6, 2 / 3, 1 / 6), (1 / 6, 1 / 6, 2 / 3)):
        bc = np.array(bc)
        pts = np.einsum("i,kij->kj", bc, verts)
        uh = u[mesh.triangles] @ bc
        err += area / 3.0 * (uh - exact(pts)) ** 2
    return math.sqrt(err.sum())


def mms_errors(m, hs):
    square = polygon_domain(m, [(0, 0), (1, 0), (1, 1), (0, 1)], "CCCC")
    src = mms_source(m)
    out = []
    for h in hs:
        mesh = triangulate(square, h)
        f = solve_dirichlet(m, mesh, 0.0, source=src)
        out.append(l2_error(mesh, f.u, u_star))
    return np.array(out)
