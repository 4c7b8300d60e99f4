"""Conformal metrics on the closed unit disk and fan-beam boundary coordinates.

The surface is the closed unit disk carrying the metric ``exp(2*lam) * (dx^2 + dy^2)``.
Phase space is parametrized by ``(x, y, theta)`` where the unit tangent vector is
``v = exp(-lam) * (cos(theta), sin(theta))``; in this chart the geodesic vector field is

    X = exp(-lam) * (cos(theta) d_x + sin(theta) d_y
                     + (-lam_x sin(theta) + lam_y cos(theta)) d_theta)

and unit speed holds identically.

Fan-beam convention (fixed here, used everywhere): a boundary point at angle ``beta``
with incidence ``alpha`` measured from the inward normal corresponds to the direction

    theta = beta + pi - alpha.

With this sign, a Euclidean chord entering at ``(beta, alpha)`` exits at boundary angle
``beta + pi - 2*alpha``, and the Santalo weight is ``mu = cos(alpha)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)


class ConformalMetric:
    """Base class: conformal factor lam with first derivatives and Laplacian.

    Subclasses provide vectorized ``lam``, ``lam_x``, ``lam_y`` and ``lap_lam``
    over arrays of coordinates; everything else derives from those.
    """

    is_euclidean = False

    def lam(self, x, y):
        raise NotImplementedError

    def lam_x(self, x, y):
        raise NotImplementedError

    def lam_y(self, x, y):
        raise NotImplementedError

    def lap_lam(self, x, y):
        raise NotImplementedError

    # -- derived quantities -------------------------------------------------

    def e_lam(self, x, y):
        return np.exp(self.lam(x, y))

    def curvature(self, x, y):
        """Gaussian curvature kappa = -exp(-2 lam) * Laplacian(lam)."""
        return -np.exp(-2.0 * self.lam(x, y)) * self.lap_lam(x, y)

    def boundary_convexity_margin(self, n=512):
        """Minimum of 1 + d(lam)/dr over the boundary circle.

        The geodesic curvature of the boundary is exp(-lam) * (1 + d_r lam);
        strict convexity requires this margin to stay positive.
        """
        beta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        cx, cy = np.cos(beta), np.sin(beta)
        dr = cx * self.lam_x(cx, cy) + cy * self.lam_y(cx, cy)
        return float(np.min(1.0 + dr))

    def descriptor(self) -> dict:
        raise NotImplementedError

    @property
    def key(self) -> str:
        import hashlib
        import json

        blob = json.dumps(self.descriptor(), sort_keys=True)
        return hashlib.sha1(blob.encode()).hexdigest()[:16]


class EuclideanMetric(ConformalMetric):
    """Flat metric, lam = 0. Geodesics are straight chords."""

    is_euclidean = True

    def lam(self, x, y):
        return np.zeros_like(np.asarray(x, dtype=float))

    lam_x = lam
    lam_y = lam
    lap_lam = lam

    def descriptor(self):
        return {"family": "euclidean"}


class GaussianMetric(ConformalMetric):
    """lam(x, y) = amplitude * exp(-((x-cx)^2 + (y-cy)^2) / (2 sigma^2))."""

    def __init__(self, amplitude=0.1, center=(0.0, 0.0), sigma=0.5):
        if sigma <= 0:
            raise InputError("sigma must be positive")
        self.amplitude = float(amplitude)
        self.center = (float(center[0]), float(center[1]))
        self.sigma = float(sigma)

    def _g(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        return dx, dy, self.amplitude * np.exp(-(dx * dx + dy * dy) / (2.0 * self.sigma**2))

    def lam(self, x, y):
        return self._g(x, y)[2]

    def lam_x(self, x, y):
        dx, _, g = self._g(x, y)
        return -dx / self.sigma**2 * g

    def lam_y(self, x, y):
        _, dy, g = self._g(x, y)
        return -dy / self.sigma**2 * g

    def lap_lam(self, x, y):
        dx, dy, g = self._g(x, y)
        s2 = self.sigma**2
        return g * ((dx * dx + dy * dy) / s2 - 2.0) / s2

    def descriptor(self):
        return {
            "family": "conformal-gaussian",
            "amplitude": self.amplitude,
            "center": list(self.center),
            "sigma": self.sigma,
        }


class GridMetric(ConformalMetric):
    """Conformal factor given by samples on a uniform grid, bicubic interpolation.

    ``values[i, j]`` is lam at ``x = xs[i], y = ys[j]``; the grid must cover the
    closed disk with some margin so the tracer may evaluate slightly outside.
    """

    def __init__(self, values, extent=1.2, label="grid"):
        from scipy.interpolate import RectBivariateSpline

        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 8 or values.shape[1] < 8:
            raise InputError("grid metric needs a 2-D array of at least 8x8 samples")
        if extent < 1.0 + 1e-9:
            raise InputError("grid metric extent must cover the closed disk")
        xs = np.linspace(-extent, extent, values.shape[0])
        ys = np.linspace(-extent, extent, values.shape[1])
        self._spl = RectBivariateSpline(xs, ys, values, kx=3, ky=3)
        self.extent = float(extent)
        self._label = label
        import hashlib

        self._hash = hashlib.sha1(values.tobytes()).hexdigest()[:16]

    def lam(self, x, y):
        return self._spl.ev(x, y)

    def lam_x(self, x, y):
        return self._spl.ev(x, y, dx=1)

    def lam_y(self, x, y):
        return self._spl.ev(x, y, dy=1)

    def lap_lam(self, x, y):
        return self._spl.ev(x, y, dx=2) + self._spl.ev(x, y, dy=2)

    def descriptor(self):
        return {"family": "grid", "label": self._label, "hash": self._hash, "extent": self.extent}


@dataclass(frozen=True)
class BoundaryPoint:
    """Fan-beam coordinates of a point of the boundary sphere bundle.

    ``beta`` is the boundary angle, ``alpha`` the incidence angle from the
    normal (inward normal for inward points, outward normal for outward ones),
    both in radians. ``alpha`` lies in (-pi/2, pi/2).
    """

    beta: float
    alpha: float
    inward: bool = True

    def __post_init__(self):
        if not (-np.pi / 2 < self.alpha < np.pi / 2):
            raise DomainError(f"alpha={self.alpha} outside (-pi/2, pi/2)")

    @property
    def theta(self) -> float:
        if self.inward:
            return float(wrap_angle(self.beta + np.pi - self.alpha))
        return float(wrap_angle(self.beta - self.alpha))

    def position(self):
        return float(np.cos(self.beta)), float(np.sin(self.beta))

    def state(self):
        x, y = self.position()
        return x, y, self.theta


def fan_to_state(beta, alpha):
    """Vectorized inward fan coordinates -> phase-space state (x, y, theta)."""
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    return np.cos(beta), np.sin(beta), beta + np.pi - alpha


def state_to_fan(x, y, theta, inward=True):
    """Phase-space state on the boundary circle -> fan coordinates.

    For inward states returns (beta, alpha) with theta = beta + pi - alpha;
    for outward states alpha is measured from the outward normal.
    """
    beta = np.arctan2(y, x)
    if inward:
        alpha = wrap_angle(beta + np.pi - np.asarray(theta))
    else:
        alpha = wrap_angle(beta - np.asarray(theta))
    return beta, alpha


def santalo_weight(entry: BoundaryPoint) -> float:
    """mu = <v, nu> = cos(alpha) in fan-beam coordinates."""
    if not entry.inward:
        raise DomainError("santalo weight is defined on the inward boundary")
    return float(np.cos(entry.alpha))


def flow_derivative(metric: ConformalMetric, state):
    """Geodesic vector field X at a phase-space state (x, y, theta).

    Raises DomainError for points outside the closed disk. With lam = 0 this
    is (cos theta, sin theta, 0).
    """
    x, y, th = (float(s) for s in state)
    if x * x + y * y > 1.0 + 1e-12:
        raise DomainError(f"point ({x}, {y}) outside the closed disk")
    return flow_field(metric, np.array([x]), np.array([y]), np.array([th]))


def flow_field(metric: ConformalMetric, x, y, th):
    """Vectorized geodesic vector field; no domain validation (internal)."""
    el = np.exp(-metric.lam(x, y))
    ct, st = np.cos(th), np.sin(th)
    dth = el * (-metric.lam_x(x, y) * st + metric.lam_y(x, y) * ct)
    return el * ct, el * st, dth


METRIC_FAMILIES = {
    "euclidean": EuclideanMetric,
    "conformal-gaussian": GaussianMetric,
}


def metric_from_config(spec) -> ConformalMetric:
    """Build a metric from its CLI/config description.

    Accepts the string "euclidean", a dict with a "family" entry, or a dict
    pointing at a lam-sample grid file written in the shared array format.
    """
    if spec == "euclidean" or spec is None:
        return EuclideanMetric()
    if not isinstance(spec, dict):
        raise InputError(f"bad metric spec: {spec!r}")
    family = spec.get("family")
    if family == "euclidean":
        return EuclideanMetric()
    if family == "conformal-gaussian":
        return GaussianMetric(
            amplitude=spec.get("amplitude", 0.1),
            center=tuple(spec.get("center", (0.0, 0.0))),
            sigma=spec.get("sigma", 0.5),
        )
    if family == "grid":
        from .io import read_field

        values, meta = read_field(spec["path"])
        return GridMetric(values.real, extent=meta.get("extent", 1.2), label=spec["path"])
    raise InputError(f"unknown metric family: {family!r}")
