"""Warped-product data of the vertical plane and the weights derived from it.

Everything lives in the flat chart ``(x, t)``.  With ``phi == 1`` the induced
conformal metric is ``e^{ct}(dx^2 + dt^2)`` and every geometric quantity used
by the rest of the package reduces to one of four scalar fields:

* ``f = e^{ct/2} rho(x)``                       (length of the Killing orbits)
* ``V = ((log rho)'(x), c)``                      (drift; f-geodesics bend along it)
* ``line_weight = rho(x) e^{ct}``                (density of the f-length)
* ``area_weight = rho(x)^2 e^{ct}``              (coefficient of the weak form)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ScalarFn = Callable[[np.ndarray], np.ndarray]


class ChartError(ValueError):
    """A point lies outside the working window of the chart."""


def _one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _exp(x):
    return np.exp(np.asarray(x, dtype=float))


DEFAULT_CHART = (-20.0, 20.0, -20.0, 20.0)


@dataclass(frozen=True)
class MetricModel:
    """Speed ``c``, warping ``rho`` and base coefficient ``phi`` on a chart window.

    ``rho``, ``rho_log_deriv`` and ``phi`` must accept numpy arrays.  The chart is
    ``(x_min, x_max, t_min, t_max)``.
    """

    c: float
    rho: ScalarFn = _one
    rho_log_deriv: ScalarFn = _zero
    phi: ScalarFn | None = None
    chart: tuple[float, float, float, float] = DEFAULT_CHART
    name: str = "custom"
    # drift is constant when log(rho) is affine; both built-ins qualify
    constant_drift: bool = field(default=False)

    @property
    def flat(self) -> bool:
        return self.phi is None

    def in_chart(self, pts) -> np.ndarray:
        p = np.asarray(pts, dtype=float)
        x0, x1, t0, t1 = self.chart
        return (p[..., 0] >= x0) & (p[..., 0] <= x1) & (p[..., 1] >= t0) & (p[..., 1] <= t1)

    def check_chart(self, pts) -> np.ndarray:
        p = np.asarray(pts, dtype=float)
        if p.shape[-1] != 2:
            raise ValueError(f"points must have a trailing dimension of 2, got {p.shape}")
        if not np.all(self.in_chart(p)):
            bad = p.reshape(-1, 2)[~self.in_chart(p).reshape(-1)][0]
            raise ChartError(f"point {tuple(bad)} outside chart {self.chart}")
        return p

    def _require_flat(self):
        if not self.flat:
            raise NotImplementedError("flat-chart reductions need phi == 1")

    def f_value(self, pts) -> np.ndarray:
        p = self.check_chart(pts)
        return np.exp(0.5 * self.c * p[..., 1]) * self.rho(p[..., 0])

    def drift_vector(self, pts) -> np.ndarray:
        """Flat gradient of ``c t + log rho(x)``."""
        self._require_flat()
        p = self.check_chart(pts)
        out = np.empty(p.shape, dtype=float)
        out[..., 0] = self.rho_log_deriv(p[..., 0])
        out[..., 1] = self.c
        return out

    def log_weight(self, pts) -> np.ndarray:
        """``c t + log rho(x)``, the potential whose gradient is the drift."""
        p = np.asarray(pts, dtype=float)
        return self.c * p[..., 1] + np.log(self.rho(p[..., 0]))

    def line_weight(self, pts, check: bool = True) -> np.ndarray:
        self._require_flat()
        p = self.check_chart(pts) if check else np.asarray(pts, dtype=float)
        return self.rho(p[..., 0]) * np.exp(self.c * p[..., 1])

    def area_weight(self, pts, check: bool = True) -> np.ndarray:
        self._require_flat()
        p = self.check_chart(pts) if check else np.asarray(pts, dtype=float)
        r = self.rho(p[..., 0])
        return r * r * np.exp(self.c * p[..., 1])

    def drift_frame(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(tau, sigma)``: the (unnormalised) constant drift and its clockwise
        rotation, so that ``(sigma, tau)`` is a positive frame.

        Only defined for constant-drift models.
        """
        if not self.constant_drift:
            raise NotImplementedError(f"model {self.name!r} has no constant drift")
        tau = self.drift_vector(np.zeros(2))
        if np.hypot(*tau) == 0.0:
            raise ValueError("drift vanishes (c = 0 and rho constant); no grim reapers")
        sigma = np.array([tau[1], -tau[0]])
        return tau, sigma


def euclidean_r3(c: float = 1.0, chart=DEFAULT_CHART) -> MetricModel:
    """Vertical plane of R^3: rho = 1."""
    return MetricModel(c=float(c), chart=tuple(chart), name="r3", constant_drift=True)


def hyperbolic_h2xr(c: float = 1.0, chart=DEFAULT_CHART) -> MetricModel:
    """Vertical plane of H^2 x R with H^2 = R x_{e^x} R: rho = e^x."""
    return MetricModel(
        c=float(c),
        rho=_exp,
        rho_log_deriv=_one,
        chart=tuple(chart),
        name="h2xr",
        constant_drift=True,
    )


BUILTIN_MODELS = {"r3": euclidean_r3, "h2xr": hyperbolic_h2xr}


def model_by_name(name: str, c: float = 1.0, chart=DEFAULT_CHART) -> MetricModel:
    try:
        factory = BUILTIN_MODELS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}; expected one of {sorted(BUILTIN_MODELS)}") from None
    return factory(c, chart)
