import numpy as np
import pytest

from geotomo import DiskGrid, EuclideanMetric, GridMismatchError, SMGrid
from geotomo.grids import BoundaryGrid, BoundarySMGrid, barycentric_weights


def test_disk_area_exact():
    d = DiskGrid(64)
    assert abs(d.integrate(np.ones(d.n_nodes)).real - np.pi) < 2e-4


def test_disk_quadrature_convergence():
    errs = []
    for n in (32, 64, 128):
        d = DiskGrid(n)
        f = np.exp(-(d.x**2 + 2 * d.y**2)) * (1 + 0.5 * d.x)
        # polar Gauss reference
        rr, wr = np.polynomial.legendre.leggauss(120)
        r = 0.5 * (rr + 1)
        th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        R, T = np.meshgrid(r, th, indexing="ij")
        F = np.exp(-((R * np.cos(T)) ** 2) - 2 * (R * np.sin(T)) ** 2) * (1 + 0.5 * R * np.cos(T))
        ref = (F * R).sum(axis=1).dot(0.5 * wr) * (2 * np.pi / 256)
        errs.append(abs(d.integrate(f).real - ref) / ref)
    assert errs[-1] < 5e-5
    assert errs[2] < errs[0]


def test_liouville_mass():
    sm = SMGrid(DiskGrid(64), 32, EuclideanMetric())
    assert abs(sm.liouville_mass() - 2 * np.pi**2) < 2e-3


def test_fiber_roundtrip_and_parseval(rng):
    sm = SMGrid(DiskGrid(32), 32, EuclideanMetric())
    u = rng.standard_normal(sm.shape) + 1j * rng.standard_normal(sm.shape)
    c = sm.analyze(u)
    assert np.abs(sm.analyze(sm.synthesize(c)) - c).max() < 1e-12
    # Parseval per node: sum_k |c_k|^2 = mean_j |u_j|^2 for band-limited u
    ub = sm.synthesize(c)
    lhs = (np.abs(sm.analyze(ub)) ** 2).sum(axis=1)
    rhs = (np.abs(ub) ** 2).mean(axis=1)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_pure_modes():
    sm = SMGrid(DiskGrid(16), 16, EuclideanMetric())
    u = np.exp(1j * sm.thetas)[None, :] * np.ones((sm.disk.n_nodes, 1))
    c = sm.analyze(u)
    k = np.arange(-sm.K, sm.K + 1)
    assert np.abs(c[:, k != 1]).max() < 1e-14
    assert np.abs(c[:, k == 1] - 1.0).max() < 1e-14
    const = np.ones(sm.shape, dtype=complex)
    cc = sm.analyze(const)
    assert np.abs(cc[:, k != 0]).max() < 1e-14


def test_hilbert_multiplier():
    sm = SMGrid(DiskGrid(16), 32, EuclideanMetric())
    e1 = np.exp(1j * sm.thetas)[None, :] * np.ones((sm.disk.n_nodes, 1))
    assert np.abs(sm.hilbert(e1) + 1j * e1).max() < 1e-13
    assert np.abs(sm.hilbert(np.ones(sm.shape, complex))).max() < 1e-14
    # cos -> sin
    c = np.cos(sm.thetas)[None, :] * np.ones((sm.disk.n_nodes, 1))
    s = np.sin(sm.thetas)[None, :] * np.ones((sm.disk.n_nodes, 1))
    assert np.abs(sm.hilbert(c) - s).max() < 1e-13


def test_hilbert_squared_identity(rng):
    # H o H = -(Id - mode-0 projection), exactly in spectrum space
    sm = SMGrid(DiskGrid(16), 32, EuclideanMetric())
    u = sm.synthesize(rng.standard_normal((sm.disk.n_nodes, 2 * sm.K + 1))
                      + 1j * rng.standard_normal((sm.disk.n_nodes, 2 * sm.K + 1)))
    u0 = sm.mode(u, 0)[:, None] * np.ones((1, sm.n_theta))
    assert np.abs(sm.hilbert(sm.hilbert(u)) + (u - u0)).max() < 1e-12


def test_mode_orthogonality():
    sm = SMGrid(DiskGrid(32), 32, EuclideanMetric())
    u1 = np.exp(1j * sm.thetas)[None, :] * np.ones((sm.disk.n_nodes, 1))
    u2 = np.exp(2j * sm.thetas)[None, :] * np.ones((sm.disk.n_nodes, 1))
    n1 = sm.norm(u1)
    assert abs(sm.inner(u1, u2)) < 1e-12 * n1 * sm.norm(u2)
    # <1,1> = 2 pi * area;  <e^{i t}, e^{i t}> = <1,1>
    one = np.ones(sm.shape, complex)
    assert abs(sm.inner(one, one) - 2 * np.pi * np.pi) < 3e-3
    assert abs(sm.inner(u1, u1) - sm.inner(one, one)) < 1e-12


def test_grid_mismatch_raises():
    sm = SMGrid(DiskGrid(16), 16, EuclideanMetric())
    with pytest.raises(GridMismatchError):
        sm.inner(np.zeros((3, 3)), np.zeros(sm.shape))


def test_boundary_grid_weights():
    fan = BoundaryGrid(16, 12, EuclideanMetric())
    assert np.all(fan.weight >= 0)
    assert np.all(np.abs(fan.alphas) < np.pi / 2)
    # total mu-weighted measure: int cos(a) da dbeta = 2 * 2pi
    assert abs(fan.weight.sum() - 4 * np.pi) < 1e-10


def test_bsm_grid_transforms(rng):
    bsm = BoundarySMGrid(16, 32, EuclideanMetric())
    K = bsm.n_fiber // 2 - 1
    c = rng.standard_normal((16, 2 * K + 1)) + 1j * rng.standard_normal((16, 2 * K + 1))
    f = bsm.synthesize(c)
    assert np.abs(bsm.analyze(f) - c).max() < 1e-12
    # no tangential grid directions
    assert np.abs(np.cos(bsm.abar)).min() > 1e-3
    # flip is theta -> theta + pi
    k = np.arange(-K, K + 1)
    cf = bsm.analyze(bsm.flip(f))
    assert np.abs(cf - c * (-1.0) ** k[None, :]).max() < 1e-12


def test_barycentric_exactness():
    nodes, _ = np.polynomial.legendre.leggauss(12)
    w = barycentric_weights(nodes)
    targets = np.linspace(-0.95, 0.95, 41)
    # interpolation of a degree-8 polynomial is exact
    vals = nodes**8 - 2 * nodes**3
    diff = nodes[None, :] * 0 + targets[:, None] - nodes[None, :]
    L = (w[None, :] / diff) / (w[None, :] / diff).sum(axis=1, keepdims=True)
    got = L @ vals
    assert np.abs(got - (targets**8 - 2 * targets**3)).max() < 1e-12


@pytest.fixture()
def rng():
    return np.random.default_rng(7)
