import numpy as np
import pytest

from geotomo import (
    BoundaryPoint,
    DomainError,
    EuclideanMetric,
    GaussianMetric,
    GridMetric,
    flow_derivative,
    metric_from_config,
    santalo_weight,
)
from geotomo.metrics import fan_to_state, state_to_fan, wrap_angle


def test_flow_euclidean_straight():
    m = EuclideanMetric()
    vx, vy, vt = flow_derivative(m, (0.0, 0.0, 0.0))
    assert np.allclose([vx, vy, vt], [[1.0], [0.0], [0.0]])
    vx, vy, vt = flow_derivative(m, (0.3, 0.1, np.pi / 2))
    assert np.allclose([vx, vy, vt], [[0.0], [1.0], [0.0]], atol=1e-15)


def test_flow_outside_disk_rejected():
    with pytest.raises(DomainError):
        flow_derivative(EuclideanMetric(), (1.2, 0.0, 0.0))


def test_flow_conformal_vs_christoffel_oracle():
    # independent oracle: second-order geodesic equation with the conformal
    # Christoffel symbols, converted to the (x, y, theta) chart
    amp, ctr, sig = 0.1, (0.0, 0.0), 1.0

    class Quad(GaussianMetric):
        pass

    m = GaussianMetric(amp, ctr, sig)
    x0, y0, th0 = 0.2, -0.1, 0.7
    lam = float(m.lam(x0, y0))
    lx, ly = float(m.lam_x(x0, y0)), float(m.lam_y(x0, y0))
    ux, uy = np.exp(-lam) * np.cos(th0), np.exp(-lam) * np.sin(th0)
    # udot^x = -(G^x_xx ux ux + 2 G^x_xy ux uy + G^x_yy uy uy), conformal G's
    ax = -(lx * ux * ux + 2 * ly * ux * uy - lx * uy * uy)
    ay = -(-ly * ux * ux + 2 * lx * ux * uy + ly * uy * uy)
    th_dot_oracle = (ay * ux - ax * uy) / (ux * ux + uy * uy)
    vx, vy, vt = flow_derivative(m, (x0, y0, th0))
    assert abs(float(vx[0]) - ux) < 1e-14
    assert abs(float(vy[0]) - uy) < 1e-14
    assert abs(float(vt[0]) - th_dot_oracle) < 1e-12


def test_curvature_formula():
    m = GaussianMetric(0.05, (0.2, 0.1), 0.6)
    # finite-difference Laplacian oracle on lam
    x, y, h = 0.1, -0.3, 1e-4
    lap = (m.lam(x + h, y) + m.lam(x - h, y) + m.lam(x, y + h) + m.lam(x, y - h)
           - 4 * m.lam(x, y)) / h**2
    kappa = m.curvature(np.array([x]), np.array([y]))[0]
    assert abs(kappa + np.exp(-2 * m.lam(x, y)) * lap) < 1e-6


def test_boundary_point_conventions():
    bp = BoundaryPoint(0.0, 0.0)
    assert np.allclose(bp.position(), (1.0, 0.0))
    assert abs(wrap_angle(bp.theta - np.pi)) < 1e-15  # diameter points at center
    with pytest.raises(DomainError):
        BoundaryPoint(0.0, np.pi / 2)


def test_fan_state_roundtrip():
    rngl = np.random.default_rng(0)
    b = rngl.uniform(0, 2 * np.pi, 50)
    a = rngl.uniform(-1.4, 1.4, 50)
    x, y, th = fan_to_state(b, a)
    b2, a2 = state_to_fan(x, y, th)
    assert np.abs(np.angle(np.exp(1j * (b2 - b)))).max() < 1e-12
    assert np.abs(a2 - a).max() < 1e-12


def test_santalo_weight_values():
    assert santalo_weight(BoundaryPoint(0.3, 0.0)) == pytest.approx(1.0)
    assert santalo_weight(BoundaryPoint(0.0, np.pi / 3)) == pytest.approx(0.5)
    assert santalo_weight(BoundaryPoint(0.0, np.pi / 2 - 1e-9)) == pytest.approx(0.0, abs=1e-8)


def test_convexity_margin():
    assert EuclideanMetric().boundary_convexity_margin() == pytest.approx(1.0)
    m = GaussianMetric(0.1, (0.0, 0.0), 0.5)
    assert m.boundary_convexity_margin() > 0.0


def test_grid_metric_matches_closed_form(tmp_path):
    base = GaussianMetric(0.06, (0.1, 0.0), 0.6)
    ext = 1.25
    xs = np.linspace(-ext, ext, 160)
    vals = base.lam(xs[:, None], xs[None, :])
    gm = GridMetric(vals, extent=ext)
    pts = np.random.default_rng(3).uniform(-0.9, 0.9, (40, 2))
    assert np.abs(gm.lam(pts[:, 0], pts[:, 1]) - base.lam(pts[:, 0], pts[:, 1])).max() < 1e-6
    assert np.abs(gm.lam_x(pts[:, 0], pts[:, 1]) - base.lam_x(pts[:, 0], pts[:, 1])).max() < 1e-4


def test_metric_from_config():
    assert metric_from_config("euclidean").is_euclidean
    m = metric_from_config({"family": "conformal-gaussian", "amplitude": 0.05})
    assert isinstance(m, GaussianMetric)
    with pytest.raises(Exception):
        metric_from_config({"family": "nope"})
