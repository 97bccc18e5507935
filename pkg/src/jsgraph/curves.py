"""Curves in the chart: f-length, f-curvature, f-geodesic shooting and connection.

In the flat chart an f-geodesic is a planar curve whose Euclidean curvature
equals the normal component of the drift, ``kappa = <V, N>`` with ``N`` the left
normal.  Parameterised by flat arclength with tangent angle ``theta`` this is the
first-order system

    x' = cos(theta),  t' = sin(theta),  theta' = -V_x sin(theta) + V_t cos(theta).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .metric import ChartError, MetricModel

TWO_PI = 2.0 * math.pi
DEFAULT_SPACING = 0.005


class IntegrationError(RuntimeError):
    """The geodesic integrator failed (step size underflow)."""


class GeodesicConnectionError(RuntimeError):
    """No f-geodesic joining the two points was found in the angle scan."""


@dataclass(frozen=True)
class GeodesicShot:
    start: tuple[float, float]
    angle: float
    reason: str  # "length" | "chart_exit"
    flat_length: float


# r in [0, 1] (array) -> (points (k, 2), derivatives (k, 2))
Parameterisation = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True, eq=False)
class ParamCurve:
    """Ordered samples of a curve, optionally backed by an exact parameterisation.

    When ``param`` is present, lengths are integrated on it rather than on the
    polyline; ``breaks`` lists parameter values where it is only piecewise smooth.
    """

    samples: np.ndarray
    closed: bool = False
    tangents: np.ndarray | None = None
    param: Parameterisation | None = None
    breaks: tuple[float, ...] = ()
    info: GeodesicShot | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.samples, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("a curve needs at least two (x, t) samples")
        seg = np.diff(pts, axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) == 0.0):
            raise ValueError("consecutive samples must be distinct")
        object.__setattr__(self, "samples", pts)

    def __len__(self):
        return len(self.samples)

    @property
    def start(self) -> np.ndarray:
        return self.samples[0]

    @property
    def end(self) -> np.ndarray:
        return self.samples[-1]

    def segment_lengths(self) -> np.ndarray:
        pts = self.polyline()
        d = np.diff(pts, axis=0)
        return np.hypot(d[:, 0], d[:, 1])

    def polyline(self) -> np.ndarray:
        """Samples with the first one repeated at the end for closed curves."""
        if self.closed:
            return np.vstack([self.samples, self.samples[:1]])
        return self.samples

    def flat_length(self) -> float:
        return float(self.segment_lengths().sum())

    def reversed(self) -> "ParamCurve":
        param = None
        if self.param is not None:
            inner = self.param

            def param(r, _inner=inner):
                p, d = _inner(1.0 - np.asarray(r, dtype=float))
                return p, -d

        tangents = None if self.tangents is None else -self.tangents[::-1]
        return ParamCurve(
            self.samples[::-1].copy(),
            closed=self.closed,
            tangents=tangents,
            param=param,
            breaks=tuple(sorted(1.0 - b for b in self.breaks)),
        )

    def with_endpoints(self, start=None, end=None) -> "ParamCurve":
        """Snap the end samples to given points (exact vertex matching)."""
        pts = self.samples.copy()
        if start is not None:
            pts[0] = start
        if end is not None:
            pts[-1] = end
        return replace(self, samples=pts)

    def to_csv(self, path) -> None:
        write_curve_csv(path, self)


def concat(first: ParamCurve, second: ParamCurve, tol: float = 1e-9) -> ParamCurve:
    """Concatenate two open curves; ``second`` must start where ``first`` ends."""
    if first.closed or second.closed:
        raise ValueError("cannot concatenate closed curves")
    gap = np.hypot(*(second.start - first.end))
    if gap > tol:
        raise ValueError(f"curves do not join (gap {gap:.3g})")
    pts = np.vstack([first.samples, second.samples[1:]])
    tangents = None
    if first.tangents is not None and second.tangents is not None:
        tangents = np.vstack([first.tangents, second.tangents[1:]])
    param = None
    breaks: tuple[float, ...] = ()
    if first.param is not None and second.param is not None:
        p1, p2 = first.param, second.param

        def param(r):
            r = np.atleast_1d(np.asarray(r, dtype=float))
            pts_ = np.empty((r.size, 2))
            der = np.empty((r.size, 2))
            lo = r <= 0.5
            if lo.any():
                a, b = p1(2.0 * r[lo])
                pts_[lo], der[lo] = a, 2.0 * b
            if (~lo).any():
                a, b = p2(2.0 * r[~lo] - 1.0)
                pts_[~lo], der[~lo] = a, 2.0 * b
            return pts_, der

        breaks = tuple(0.5 * b for b in first.breaks) + (0.5,) + tuple(0.5 + 0.5 * b for b in second.breaks)
    return ParamCurve(pts, tangents=tangents, param=param, breaks=breaks)


# --------------------------------------------------------------------------- lengths

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_MAX_GL_SEGMENT = 0.25


def _polyline_f_length(m: MetricModel, pts: np.ndarray) -> float:
    a, b = pts[:-1], pts[1:]
    ell = np.hypot(*(b - a).T)
    # split long segments so a fixed 10-point rule stays at round-off level
    pieces = np.maximum(1, np.ceil(ell / _MAX_GL_SEGMENT)).astype(int)
    if np.any(pieces > 1):
        aa, bb = [], []
        for p, q, k in zip(a, b, pieces):
            w = np.linspace(0.0, 1.0, k + 1)[:, None]
            nodes = p + w * (q - p)
            aa.append(nodes[:-1])
            bb.append(nodes[1:])
        a, b = np.vstack(aa), np.vstack(bb)
        ell = np.hypot(*(b - a).T)
    s = 0.5 * (_GL_NODES + 1.0)
    q = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    w = m.line_weight(q, check=False)
    return float(np.sum(0.5 * ell * (w @ _GL_WEIGHTS)))


def f_length(m: MetricModel, g: ParamCurve) -> float:
    """Weighted length ``int rho(x) e^{ct} |gamma'|`` of a curve."""
    m.check_chart(g.samples)
    if g.param is None:
        return _polyline_f_length(m, g.polyline())

    def integrand(r):
        p, d = g.param(np.array([r]))
        return float(m.line_weight(p[0], check=False) * math.hypot(d[0, 0], d[0, 1]))

    edges = [0.0, *[b for b in g.breaks if 0.0 < b < 1.0], 1.0]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)
        total += val
    return total


# ------------------------------------------------------------------------- curvature

def _triples(g: ParamCurve, idx: np.ndarray):
    n = len(g.samples)
    pts = g.samples
    return pts[(idx - 1) % n], pts[idx], pts[(idx + 1) % n]


def _fk(m: MetricModel, p0, p1, p2) -> np.ndarray:
    u, v, w = p1 - p0, p2 - p1, p2 - p0
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    nu, nv, nw = (np.hypot(z[..., 0], z[..., 1]) for z in (u, v, w))
    kappa = 2.0 * cross / (nu * nv * nw)
    normal = np.stack([-w[..., 1], w[..., 0]], axis=-1) / nw[..., None]
    drift = m.drift_vector(p1)
    k = kappa - np.sum(drift * normal, axis=-1)
    return np.exp(-0.5 * m.c * p1[..., 1]) * k


def f_curvature(m: MetricModel, g: ParamCurve, index: int) -> float:
    """f-curvature at an interior sample (left normal; circumscribed-circle estimate)."""
    n = len(g.samples)
    if not g.closed and not 0 < index < n - 1:
        raise IndexError(f"f-curvature needs an interior sample index, got {index} of {n}")
    if g.closed and n < 3:
        raise ValueError("closed curve needs three samples")
    p0, p1, p2 = _triples(g, np.array([index % n]))
    return float(_fk(m, p0, p1, p2)[0])


def f_curvatures(m: MetricModel, g: ParamCurve) -> np.ndarray:
    """f-curvature at every interior sample (every sample for closed curves)."""
    n = len(g.samples)
    idx = np.arange(n) if g.closed else np.arange(1, n - 1)
    if idx.size == 0:
        return np.zeros(0)
    return _fk(m, *_triples(g, idx))


# --------------------------------------------------------------------- analytic arcs

def _sampled(param: Parameterisation, spacing: float, flat_len: float, tangents=True) -> ParamCurve:
    n = max(2, int(math.ceil(flat_len / spacing)) + 1)
    r = np.linspace(0.0, 1.0, n)
    pts, der = param(r)
    tan = der / np.hypot(der[:, 0], der[:, 1])[:, None] if tangents else None
    return ParamCurve(pts, tangents=tan, param=param)


def segment(p, q, spacing: float = DEFAULT_SPACING) -> ParamCurve:
    """Straight segment from ``p`` to ``q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = q - p

    def param(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return p + r[:, None] * d, np.broadcast_to(d, (r.size, 2)).copy()

    return _sampled(param, spacing, float(np.hypot(*d)))


def reaper_arc(
    m: MetricModel,
    x_from: float,
    x_to: float,
    height: float = 0.0,
    origin=(0.0, 0.0),
    spacing: float = DEFAULT_SPACING,
) -> ParamCurve:
    """Grim reaper of a constant-drift model in the frame ``(sigma, tau)``.

    Points are ``origin + X sigma + (height + phi(X)) tau`` with
    ``phi(X) = -log cos(|tau|^2 X) / |tau|^2`` and ``X`` running from ``x_from``
    to ``x_to``.  For ``r3`` with ``c = 1`` this is ``t = height - log cos x``.
    """
    tau, sigma = m.drift_frame()
    L2 = float(tau @ tau)
    lim = 0.5 * math.pi / L2
    if not (-lim < x_from < lim and -lim < x_to < lim):
        raise ValueError(f"reaper parameter must lie in (-{lim:.6g}, {lim:.6g})")
    if x_from == x_to:
        raise ValueError("degenerate reaper arc")
    o = np.asarray(origin, dtype=float)
    span = x_to - x_from

    def param(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        X = x_from + r * span
        phi = -np.log(np.cos(L2 * X)) / L2
        pts = o + X[:, None] * sigma + (height + phi)[:, None] * tau
        der = span * (sigma + np.tan(L2 * X)[:, None] * tau)
        return pts, der

    # flat arclength of X sigma + phi(X) tau is |tau| * int sec(L2 X) dX
    L = math.sqrt(L2)

    def gd(X):
        return math.log(abs(1.0 / math.cos(L2 * X) + math.tan(L2 * X))) / L2

    flat_len = L * abs(gd(x_to) - gd(x_from))
    return _sampled(param, spacing, flat_len)


def drift_line(
    m: MetricModel,
    x_coord: float,
    y_from: float,
    y_to: float,
    origin=(0.0, 0.0),
    spacing: float = DEFAULT_SPACING,
) -> ParamCurve:
    """Segment ``origin + X sigma + Y tau`` with fixed ``X`` and ``Y`` from ``y_from`` to ``y_to``.

    In ``r3`` these are the vertical lines; in ``h2xr`` lines of direction ``d_x + c d_t``.
    """
    tau, sigma = m.drift_frame()
    o = np.asarray(origin, dtype=float)
    return segment(o + x_coord * sigma + y_from * tau, o + x_coord * sigma + y_to * tau, spacing)


def polyline_curve(points, closed: bool = False) -> ParamCurve:
    return ParamCurve(np.asarray(points, dtype=float), closed=closed)


def resample(g: ParamCurve, spacing: float) -> ParamCurve:
    """Uniform-in-parameter resampling (param curves) or arclength resampling (polylines)."""
    if g.param is not None:
        fine = g.param(np.linspace(0.0, 1.0, 4 * len(g.samples) + 1))[0]
        flat_len = float(np.hypot(*np.diff(fine, axis=0).T).sum())
        out = _sampled(g.param, spacing, flat_len)
        return replace(out, breaks=g.breaks, info=g.info)
    pts = g.polyline()
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    n = max(2, int(math.ceil(s[-1] / spacing)) + 1)
    si = np.linspace(0.0, s[-1], n)
    new = np.stack([np.interp(si, s, pts[:, 0]), np.interp(si, s, pts[:, 1])], axis=1)
    if g.closed:
        new = new[:-1]
    return ParamCurve(new, closed=g.closed)


# ---------------------------------------------------------------------- f-geodesics

def _rhs_factory(m: MetricModel):
    c = m.c
    dlog = m.rho_log_deriv

    def rhs(s, y):
        ct, st = math.cos(y[2]), math.sin(y[2])
        vx = float(dlog(y[0]))
        return [ct, st, -vx * st + c * ct]

    return rhs


def _chart_events(m: MetricModel):
    x0, x1, t0, t1 = m.chart
    evs = [
        lambda s, y: y[0] - x0,
        lambda s, y: x1 - y[0],
        lambda s, y: y[1] - t0,
        lambda s, y: t1 - y[1],
    ]
    for e in evs:
        e.terminal = True
        e.direction = -1
    return evs


def _integrate(m: MetricModel, p0, angle: float, max_len: float, rtol: float, atol: float):
    m.check_chart(np.asarray(p0, dtype=float))
    sol = integrate.solve_ivp(
        _rhs_factory(m),
        (0.0, max_len),
        [float(p0[0]), float(p0[1]), float(angle)],
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=_chart_events(m),
    )
    if sol.status == -1:
        raise IntegrationError(sol.message)
    reason = "chart_exit" if sol.status == 1 else "length"
    return sol.sol, float(sol.t[-1]), reason


def _curve_from_solution(dense, s_end: float, spacing: float) -> tuple[np.ndarray, np.ndarray, Parameterisation]:
    n = max(3, int(math.ceil(s_end / spacing)) + 1)
    s = np.linspace(0.0, s_end, n)
    y = dense(s)
    pts = y[:2].T.copy()
    tan = np.stack([np.cos(y[2]), np.sin(y[2])], axis=1)

    def param(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        yy = dense(r * s_end)
        return yy[:2].T.copy(), s_end * np.stack([np.cos(yy[2]), np.sin(yy[2])], axis=1)

    return pts, tan, param


def shoot_geodesic(
    m: MetricModel,
    p0,
    angle: float,
    max_flat_length: float,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    spacing: float = DEFAULT_SPACING,
) -> ParamCurve:
    """Integrate the f-geodesic leaving ``p0`` with flat tangent angle ``angle``.

    Stops at ``max_flat_length`` or when the chart is left; the reason is stored
    in ``curve.info``.
    """
    if not max_flat_length > 0:
        raise ValueError("max_flat_length must be positive")
    angle = float(angle) % TWO_PI
    dense, s_end, reason = _integrate(m, p0, angle, max_flat_length, rtol, atol)
    if s_end <= 0.0:
        raise IntegrationError("geodesic left the chart immediately")
    pts, tan, param = _curve_from_solution(dense, s_end, spacing)
    if reason == "chart_exit":
        # the event root is only located to solver tolerance
        x0, x1, t0, t1 = m.chart
        pts[-1] = np.clip(pts[-1], (x0, t0), (x1, t1))
    info = GeodesicShot((float(p0[0]), float(p0[1])), angle, reason, s_end)
    return ParamCurve(pts, tangents=tan, param=param, info=info)


def _scan_misses(m: MetricModel, p, q, angles: np.ndarray, max_len: float, steps: int = 240):
    """Cheap signed misses for many angles at once (fixed-step RK4)."""
    h = max_len / steps
    c = m.c
    x = np.full(angles.size, p[0])
    t = np.full(angles.size, p[1])
    th = angles.copy()
    alive = np.ones(angles.size, dtype=bool)
    best = np.full(angles.size, np.hypot(*(q - p)))
    sign = np.zeros(angles.size)
    x0, x1, t0, t1 = m.chart

    def f(x_, th_):
        ct, st = np.cos(th_), np.sin(th_)
        return ct, st, -m.rho_log_deriv(x_) * st + c * ct

    for _ in range(steps):
        k1 = f(x, th)
        k2 = f(x + 0.5 * h * k1[0], th + 0.5 * h * k1[2])
        k3 = f(x + 0.5 * h * k2[0], th + 0.5 * h * k2[2])
        k4 = f(x + h * k3[0], th + h * k3[2])
        x = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        t = t + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        th = th + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        alive &= (x >= x0) & (x <= x1) & (t >= t0) & (t <= t1)
        dx, dt = q[0] - x, q[1] - t
        d = np.hypot(dx, dt)
        closer = alive & (d < best)
        best[closer] = d[closer]
        cr = np.cos(th) * dt - np.sin(th) * dx
        sign[closer] = np.sign(cr[closer])
    return sign * best


def _closest_approach(dense, s_end: float, q: np.ndarray, scale: float):
    n = max(64, int(math.ceil(50 * s_end / scale)))
    s = np.linspace(0.0, s_end, n)
    y = dense(s)
    d = np.hypot(q[0] - y[0], q[1] - y[1])
    k = int(np.argmin(d))
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, n - 1)]

    def along(si):
        yy = dense(si)
        return (q[0] - yy[0]) * math.cos(yy[2]) + (q[1] - yy[1]) * math.sin(yy[2])

    # the closest point is where q - gamma is orthogonal to the tangent
    if hi > lo and along(lo) > 0.0 > along(hi):
        s_star = optimize.brentq(along, lo, hi, xtol=1e-15)
    else:
        s_star = float(s[k])
    yy = dense(s_star)
    dx, dt = q[0] - yy[0], q[1] - yy[1]
    cr = math.cos(yy[2]) * dt - math.sin(yy[2]) * dx
    return s_star, math.copysign(math.hypot(dx, dt), cr if cr != 0 else 1.0)


def connect_geodesic(
    m: MetricModel,
    p,
    q,
    window: tuple[float, float] | None = None,
    scan_step: float = math.radians(1.0),
    length_factor: float = 3.0,
    tol: float = 1e-8,
    rtol: float = 1e-10,
    atol: float = 1e-13,
    spacing: float = DEFAULT_SPACING,
    return_all: bool = False,
):
    """f-geodesic from ``p`` to ``q`` by single shooting.

    The launch angle is scanned over ``window`` (default the full circle), every
    sign change of the signed miss is refined with Brent's method, and among the
    connections that actually hit ``q`` within ``tol`` the one of least f-length
    is returned.  The last sample is snapped onto ``q``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m.check_chart(np.stack([p, q]))
    dist = float(np.hypot(*(q - p)))
    if dist == 0.0:
        raise ValueError("endpoints coincide")
    max_len = length_factor * dist
    full = window is None
    lo, hi = (0.0, TWO_PI) if full else window
    n = max(2, int(math.ceil((hi - lo) / scan_step)))
    angles = lo + (hi - lo) * np.arange(n + (0 if full else 1)) / n
    coarse = _scan_misses(m, p, q, angles, max_len)

    def miss(theta):
        dense, s_end, _ = _integrate(m, p, theta, max_len, rtol, atol)
        return _closest_approach(dense, s_end, q, dist)[1]

    pairs = [(i, i + 1) for i in range(len(angles) - 1)]
    if full:
        pairs.append((len(angles) - 1, 0))
    found = []
    for i, j in pairs:
        if coarse[i] == 0.0 or coarse[j] == 0.0 or np.sign(coarse[i]) == np.sign(coarse[j]):
            continue
        if abs(coarse[i]) + abs(coarse[j]) > 0.5 * dist:
            continue  # sign flip from a jump of the closest-approach point, not a root
        a, b = angles[i], angles[j] + (TWO_PI if j < i else 0.0)
        fa, fb = miss(a), miss(b)
        if fa == 0.0:
            theta = a
        elif np.sign(fa) == np.sign(fb):
            continue
        else:
            theta = optimize.brentq(miss, a, b, xtol=1e-13, maxiter=200)
        dense, s_end, _ = _integrate(m, p, theta, max_len, rtol, atol)
        s_star, err = _closest_approach(dense, s_end, q, dist)
        if abs(err) > tol or s_star <= 0.0:
            continue
        pts, tan, param = _curve_from_solution(dense, s_star, spacing)
        curve = ParamCurve(
            pts,
            tangents=tan,
            param=param,
            info=GeodesicShot((float(p[0]), float(p[1])), theta % TWO_PI, "target", s_star),
        ).with_endpoints(end=q)
        found.append((f_length(m, curve), abs(err), curve))
    if not found:
        raise GeodesicConnectionError(
            f"no f-geodesic from {tuple(p)} to {tuple(q)} found in angle window [{lo:.4g}, {hi:.4g}]"
        )
    found.sort(key=lambda item: item[0])
    if return_all:
        return [c for _, _, c in found]
    return found[0][2]


# ------------------------------------------------------------------------------- io

def write_curve_csv(path, g: ParamCurve) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "t"])
        for x, t in g.samples:
            w.writerow([f"{x:.17g}", f"{t:.17g}"])


def read_curve_csv(path, closed: bool = False) -> ParamCurve:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
                continue  # header
    return ParamCurve(np.array(rows), closed=closed)


__all__: Sequence[str] = [
    "ChartError",
    "GeodesicConnectionError",
    "GeodesicShot",
    "IntegrationError",
    "ParamCurve",
    "concat",
    "connect_geodesic",
    "drift_line",
    "f_curvature",
    "f_curvatures",
    "f_length",
    "polyline_curve",
    "reaper_arc",
    "read_curve_csv",
    "resample",
    "segment",
    "shoot_geodesic",
    "write_curve_csv",
]
