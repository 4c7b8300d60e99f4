"""Batched geodesic tracing on the disk: RK4 with terminal bisection.

All rays of a batch advance together with a fixed arclength step; a ray that
crosses the unit circle during a step is finished by bisecting the step
fraction until it lands on the boundary to ~1e-12 in radius. Line integrals
of user integrands are accumulated with the composite trapezoid rule at the
same step, including the shortened final segment.

For the Euclidean metric the position update is exact (straight chords), and
pure geometry queries (exit time, exit point) take a closed-form shortcut.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SimplicityError, TrappingError
from .metrics import BoundaryPoint, ConformalMetric, flow_field, state_to_fan, wrap_angle

_BISECT_ITers = 48
_R_EDGE = 1.0  # unit circle


@dataclass
class SampleSet:
    """Stored points along each ray with composite-trapezoid weights."""

    x: np.ndarray       # (n_rays, n_samples)
    y: np.ndarray
    theta: np.ndarray
    weight: np.ndarray  # quadrature weight per sample, 0 past the exit
    h: np.ndarray       # step length into each sample (h[:, 0] = 0)
    count: np.ndarray   # number of valid samples per ray


@dataclass
class TraceResult:
    tau: np.ndarray
    exit_x: np.ndarray
    exit_y: np.ndarray
    exit_theta: np.ndarray
    integrals: list
    jacobi_min: np.ndarray | None = None
    samples: SampleSet | None = None

    def exit_fan(self):
        """Exit point in fan coordinates: (beta_exit, theta_out)."""
        beta = np.arctan2(self.exit_y, self.exit_x)
        return beta, self.exit_theta


@dataclass
class GeodesicPath:
    """States (x, y, theta) at uniform arclength steps, boundary to boundary."""

    samples: np.ndarray  # (n, 3)
    tau: float
    step: float


def _rk4_step(metric, x, y, th, h):
    k1 = flow_field(metric, x, y, th)
    k2 = flow_field(metric, x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], th + 0.5 * h * k1[2])
    k3 = flow_field(metric, x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], th + 0.5 * h * k2[2])
    k4 = flow_field(metric, x + h * k3[0], y + h * k3[1], th + h * k3[2])
    xn = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    yn = y + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    thn = th + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return xn, yn, thn


def _euclid_step(x, y, th, h):
    return x + h * np.cos(th), y + h * np.sin(th), th


def euclid_exit(x0, y0, th0):
    """Exact Euclidean exit time and exit state for rays inside the disk."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    th0 = np.asarray(th0, dtype=float)
    c, s = np.cos(th0), np.sin(th0)
    along = x0 * c + y0 * s
    cross = x0 * s - y0 * c
    disc = np.maximum(1.0 - cross * cross, 0.0)
    tau = -along + np.sqrt(disc)
    return tau, x0 + tau * c, y0 + tau * s, th0


def trace_rays(
    metric: ConformalMetric,
    x0,
    y0,
    th0,
    step: float,
    integrands=(),
    want_jacobi: bool = False,
    store_samples: bool = False,
    max_length: float = 8.0,
):
    """Trace a batch of rays to the boundary.

    integrands: callables g(x, y, theta) -> array, integrated along each ray
    with the trapezoid rule. Returns a TraceResult whose ``integrals`` line up
    with the input list.
    """
    if step <= 0:
        raise DomainError("step must be positive")
    x = np.array(x0, dtype=float, copy=True).ravel()
    y = np.array(y0, dtype=float, copy=True).ravel()
    th = np.array(th0, dtype=float, copy=True).ravel()
    n = x.size
    euclid = metric.is_euclidean
    stepper = _euclid_step if euclid else (lambda xx, yy, tt, h: _rk4_step(metric, xx, yy, tt, h))

    tau = np.zeros(n)
    active = np.ones(n, dtype=bool)
    acc = [np.zeros(n, dtype=complex) for _ in integrands]
    g_prev = [np.asarray(g(x, y, th), dtype=complex) for g in integrands]

    jac = jac_d = None
    jac_min = None
    if want_jacobi:
        jac = np.zeros(n)
        jac_d = np.ones(n)
        jac_min = np.full(n, np.inf)

    rows = []
    hrows = []
    if store_samples:
        rows.append((x.copy(), y.copy(), th.copy()))
        hrows.append(np.zeros(n))

    max_steps = int(np.ceil(max_length / step)) + 4
    for it in range(max_steps):
        if not active.any():
            break
        ia = np.flatnonzero(active)
        xa, ya, tha = x[ia], y[ia], th[ia]
        xn, yn, thn = stepper(xa, ya, tha, step)
        crossed = xn * xn + yn * yn > _R_EDGE * _R_EDGE
        h = np.full(ia.size, step)

        if crossed.any():
            ic = np.flatnonzero(crossed)
            if euclid:
                t_ex, xe, ye, te = euclid_exit(xa[ic], ya[ic], tha[ic])
                h[ic] = t_ex
                xn[ic], yn[ic], thn[ic] = xe, ye, te
            else:
                lo = np.zeros(ic.size)
                hi = np.ones(ic.size)
                for _ in range(_BISECT_ITers):
                    mid = 0.5 * (lo + hi)
                    xm, ym, _ = _rk4_step(metric, xa[ic], ya[ic], tha[ic], mid * step)
                    out = xm * xm + ym * ym > _R_EDGE * _R_EDGE
                    hi = np.where(out, mid, hi)
                    lo = np.where(out, lo, mid)
                s_land = 0.5 * (lo + hi)
                h[ic] = s_land * step
                xm, ym, tm = _rk4_step(metric, xa[ic], ya[ic], tha[ic], s_land * step)
                xn[ic], yn[ic], thn[ic] = xm, ym, tm

        for idx, g in enumerate(integrands):
            g_new = np.asarray(g(xn, yn, thn), dtype=complex)
            acc[idx][ia] += 0.5 * (g_prev[idx][ia] + g_new) * h
            g_prev[idx][ia] = g_new

        if want_jacobi:
            # J'' = -kappa J along the ray, stepped with the same RK4.
            ja, jda = jac[ia], jac_d[ia]
            kap0 = metric.curvature(xa, ya)
            kap1 = metric.curvature(xn, yn)
            kapm = 0.5 * (kap0 + kap1)
            k1j, k1d = jda, -kap0 * ja
            k2j, k2d = jda + 0.5 * h * k1d, -kapm * (ja + 0.5 * h * k1j)
            k3j, k3d = jda + 0.5 * h * k2d, -kapm * (ja + 0.5 * h * k2j)
            k4j, k4d = jda + h * k3d, -kap1 * (ja + h * k3j)
            jac[ia] = ja + h / 6.0 * (k1j + 2 * k2j + 2 * k3j + k4j)
            jac_d[ia] = jda + h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
            jac_min[ia] = np.minimum(jac_min[ia], jac[ia])

        x[ia], y[ia], th[ia] = xn, yn, thn
        tau[ia] += h
        if store_samples:
            rows.append((x.copy(), y.copy(), th.copy()))
            hstep = np.zeros(n)
            hstep[ia] = h
            hrows.append(hstep)
        active[ia[crossed]] = False

    if active.any():
        raise TrappingError(
            f"{int(active.sum())} rays did not exit within length {max_length}"
        )

    samples = None
    if store_samples:
        xs = np.stack([r[0] for r in rows], axis=1)
        ys = np.stack([r[1] for r in rows], axis=1)
        ths = np.stack([r[2] for r in rows], axis=1)
        hs = np.stack(hrows, axis=1)  # hs[:, k] = step taken INTO sample k
        nsamp = hs.shape[1]
        w = np.zeros_like(hs)
        w[:, : nsamp - 1] += 0.5 * hs[:, 1:]
        w[:, 1:] += 0.5 * hs[:, 1:]
        count = (hs > 0).sum(axis=1) + 1
        samples = SampleSet(x=xs, y=ys, theta=ths, weight=w, h=hs, count=count)

    th = wrap_angle(th)
    return TraceResult(
        tau=tau, exit_x=x, exit_y=y, exit_theta=th, integrals=acc,
        jacobi_min=jac_min, samples=samples,
    )


def trace_geodesic(metric: ConformalMetric, entry: BoundaryPoint, step: float) -> GeodesicPath:
    """Trace one geodesic from an inward boundary point, storing every state."""
    if not entry.inward:
        raise DomainError("trace_geodesic expects an inward boundary point")
    x, y, th = entry.state()
    res = trace_rays(metric, [x], [y], [th], step, store_samples=True)
    k = int(res.samples.count[0])
    pts = np.stack(
        [res.samples.x[0, :k], res.samples.y[0, :k], res.samples.theta[0, :k]], axis=1
    )
    return GeodesicPath(samples=pts, tau=float(res.tau[0]), step=step)


def exit_time(metric: ConformalMetric, entry: BoundaryPoint, step: float = 1e-3) -> float:
    x, y, th = entry.state()
    if metric.is_euclidean:
        return float(euclid_exit(x, y, th)[0])
    return float(trace_rays(metric, [x], [y], [th], step).tau[0])


def scattering(metric: ConformalMetric, entry: BoundaryPoint, step: float = 1e-3) -> BoundaryPoint:
    """Scattering relation: exit point/direction of the geodesic, as an outward point."""
    if not entry.inward:
        # exit points map back to their entry point (the relation is an involution)
        x, y, th = np.cos(entry.beta), np.sin(entry.beta), entry.theta
        res = trace_rays(metric, [x], [y], [np.pi + th], step)
        beta, alpha = state_to_fan(res.exit_x[0], res.exit_y[0], res.exit_theta[0] + np.pi)
        return BoundaryPoint(float(beta), float(alpha), inward=True)
    x, y, th = entry.state()
    res = trace_rays(metric, [x], [y], [th], step)
    beta, alpha = state_to_fan(res.exit_x[0], res.exit_y[0], res.exit_theta[0], inward=False)
    return BoundaryPoint(float(beta), float(alpha), inward=False)


def scattering_fan(metric: ConformalMetric, betas, alphas, step: float = 1e-3):
    """Vectorized scattering of inward fan points -> (beta_exit, theta_out)."""
    x, y = np.cos(betas), np.sin(betas)
    th = np.asarray(betas) + np.pi - np.asarray(alphas)
    if metric.is_euclidean:
        _, xe, ye, te = euclid_exit(x, y, th)
        return np.arctan2(ye, xe), wrap_angle(te)
    res = trace_rays(metric, x, y, th, step)
    return res.exit_fan()


def antipodal_fan(metric: ConformalMetric, betas, alphas, step: float = 1e-3):
    """Antipodal scattering relation on inward fan coordinates.

    Sends (beta, alpha) to the fan coordinates of the exit point with the
    reversed direction; an involution of the inward boundary.
    """
    be, te = scattering_fan(metric, betas, alphas, step)
    return be, wrap_angle(be - te)


def entry_fan_of_states(metric: ConformalMetric, x, y, th, step: float):
    """Backward entry coordinates: fan coords of phi_{-tau(x,-v)}(x, v)."""
    th = np.asarray(th, dtype=float)
    if metric.is_euclidean:
        _, xe, ye, te = euclid_exit(np.asarray(x, float), np.asarray(y, float), th + np.pi)
    else:
        res = trace_rays(metric, x, y, th + np.pi, step)
        xe, ye, te = res.exit_x, res.exit_y, res.exit_theta
    beta = np.arctan2(ye, xe)
    return beta, wrap_angle(beta - te)


def check_simplicity(metric: ConformalMetric, n_fan: int = 64, step: float = 2e-3):
    """Fail fast if the shipped simplicity witnesses do not hold.

    Checks strict boundary convexity at boundary samples and the sign of the
    Jacobi field J(0)=0, J'(0)=1 along a fan of traced geodesics.
    """
    margin = metric.boundary_convexity_margin()
    if margin <= 0:
        raise SimplicityError(f"boundary not strictly convex (margin {margin:.3e})")
    if metric.is_euclidean:
        return
    betas = np.linspace(0, 2 * np.pi, n_fan, endpoint=False)
    alphas = np.linspace(-0.45 * np.pi, 0.45 * np.pi, 9)
    B, A = np.meshgrid(betas, alphas, indexing="ij")
    x, y = np.cos(B).ravel(), np.sin(B).ravel()
    th = (B + np.pi - A).ravel()
    res = trace_rays(metric, x, y, th, step, want_jacobi=True)
    worst = float(res.jacobi_min.min())
    if worst <= 0:
        raise SimplicityError(f"Jacobi field vanished along a fan geodesic (min {worst:.3e})")


def path_speed_error(metric: ConformalMetric, path: GeodesicPath) -> float:
    """Max deviation of g(dgamma, dgamma) from 1, velocities by 4th-order differences."""
    p = path.samples[:-1]  # last sample sits at a shortened (bisected) step
    if p.shape[0] < 5:
        return 0.0
    h = path.step
    d = (p[:-4] - 8 * p[1:-3] + 8 * p[3:-1] - p[4:]) / (12 * h)
    xm, ym = p[2:-2, 0], p[2:-2, 1]
    speed2 = np.exp(2 * metric.lam(xm, ym)) * (d[:, 0] ** 2 + d[:, 1] ** 2)
    return float(np.max(np.abs(speed2 - 1.0)))
