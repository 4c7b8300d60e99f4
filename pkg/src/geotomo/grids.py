"""Discretization of the disk, the sphere bundle and its boundary.

Spatial nodes are the cell centers of a uniform Cartesian lattice that fall
strictly inside the unit disk. Cells cut by the circle keep their covered
area (estimated by subsampling) as quadrature weight, together with the
centroid offset of the covered region; integrals apply a first-order centroid
correction on that boundary ring so that smooth integrands are integrated to
second order with a small constant.

Fiber angles are uniform. On the boundary sphere bundle the fiber is offset
by half a step in the *relative* angle so that no grid direction is exactly
tangent to the circle, uniformly in the base point.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, GridMismatchError
from .metrics import ConformalMetric, wrap_angle

_SUBSAMPLE = 48


class DiskGrid:
    """Uniform lattice clipped to the open unit disk."""

    def __init__(self, n: int):
        if n < 8:
            raise DomainError("disk grid needs n >= 8")
        self.n = int(n)
        self.h = 2.0 / n
        centers = -1.0 + self.h * (np.arange(n) + 0.5)
        cx, cy = np.meshgrid(centers, centers, indexing="ij")
        inside = cx * cx + cy * cy < 1.0 - 1e-12
        self.ix, self.iy = np.nonzero(inside)
        self.x = cx[inside]
        self.y = cy[inside]
        self.n_nodes = self.x.size

        # covered area and centroid of the covered region, cell by cell; cells
        # overlapping the disk but whose center lies outside hand their mass
        # to the nearest node so that the total area is exact
        h = self.h
        dx_min = np.maximum(np.abs(cx) - 0.5 * h, 0.0)
        dy_min = np.maximum(np.abs(cy) - 0.5 * h, 0.0)
        overlaps = np.hypot(dx_min, dy_min) < 1.0
        full = np.hypot(np.abs(cx) + 0.5 * h, np.abs(cy) + 0.5 * h) <= 1.0
        cut = overlaps & ~full

        mass_x = self.x * 0.0
        mass_y = self.y * 0.0
        area = np.where(full[inside], h * h, 0.0)
        ss = (np.arange(_SUBSAMPLE) + 0.5) / _SUBSAMPLE - 0.5
        sx, sy = np.meshgrid(ss, ss, indexing="ij")
        sx, sy = sx.ravel(), sy.ravel()
        ci, cj = np.nonzero(cut)
        px = cx[ci, cj][:, None] + h * sx[None, :]
        py = cy[ci, cj][:, None] + h * sy[None, :]
        inside_s = px * px + py * py < 1.0
        frac = inside_s.mean(axis=1)
        wsum = np.maximum(inside_s.sum(axis=1), 1)
        gx = np.where(inside_s, px, 0.0).sum(axis=1) / wsum
        gy = np.where(inside_s, py, 0.0).sum(axis=1) / wsum
        cell_area = frac * h * h

        self.node_index = np.full((n, n), -1, dtype=np.int64)
        self.node_index[self.ix, self.iy] = np.arange(self.n_nodes)

        mass = area.copy()
        mass_x = area * self.x
        mass_y = area * self.y
        owner = self.node_index[ci, cj]
        orphan = owner < 0
        if orphan.any():
            from scipy.spatial import cKDTree

            tree = cKDTree(np.column_stack([self.x, self.y]))
            _, near = tree.query(np.column_stack([gx[orphan], gy[orphan]]))
            owner = owner.copy()
            owner[orphan] = near
        np.add.at(mass, owner, cell_area)
        np.add.at(mass_x, owner, cell_area * gx)
        np.add.at(mass_y, owner, cell_area * gy)

        self.area = mass
        with np.errstate(invalid="ignore"):
            self.centroid_dx = np.where(mass > 0, mass_x / mass - self.x, 0.0)
            self.centroid_dy = np.where(mass > 0, mass_y / mass - self.y, 0.0)
        self.ring = np.zeros(self.n_nodes, dtype=bool)
        self.ring[owner] = True

    def descriptor(self):
        return {"kind": "disk", "n": self.n}

    @property
    def key(self):
        return f"disk{self.n}"

    def embed(self, values, fill=0.0):
        """Scatter a node vector onto the full (n, n) lattice."""
        out = np.full((self.n, self.n), fill, dtype=np.asarray(values).dtype)
        out[self.ix, self.iy] = values
        return out

    @cached_property
    def _fill_map(self):
        """For every lattice cell, the nearest node index (for interp padding)."""
        from scipy.spatial import cKDTree

        centers = -1.0 + self.h * (np.arange(self.n) + 0.5)
        gx, gy = np.meshgrid(centers, centers, indexing="ij")
        tree = cKDTree(np.column_stack([self.x, self.y]))
        _, nearest = tree.query(np.column_stack([gx.ravel(), gy.ravel()]))
        fill = nearest.reshape(self.n, self.n).astype(np.int64)
        fill[self.ix, self.iy] = np.arange(self.n_nodes)
        return fill

    def interp_matrix(self, px, py):
        """Sparse bilinear interpolation from node values to points (px, py).

        Lattice cells without a node (outside the disk) hand their weight to
        the nearest node, which keeps the operator well defined for points in
        the thin rim between the outermost nodes and the circle.
        """
        px = np.asarray(px, dtype=float).ravel()
        py = np.asarray(py, dtype=float).ravel()
        s = (px + 1.0) / self.h - 0.5
        t = (py + 1.0) / self.h - 0.5
        i0 = np.clip(np.floor(s).astype(np.int64), 0, self.n - 2)
        j0 = np.clip(np.floor(t).astype(np.int64), 0, self.n - 2)
        fs = np.clip(s - i0, 0.0, 1.0)
        ft = np.clip(t - j0, 0.0, 1.0)
        rows, cols, vals = [], [], []
        m = px.size
        fill = self._fill_map
        for di, dj, w in (
            (0, 0, (1 - fs) * (1 - ft)),
            (1, 0, fs * (1 - ft)),
            (0, 1, (1 - fs) * ft),
            (1, 1, fs * ft),
        ):
            node = fill[i0 + di, j0 + dj]
            rows.append(np.arange(m))
            cols.append(node)
            vals.append(w)
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m, self.n_nodes),
        )
        mat.sum_duplicates()
        return mat

    def _diff_matrix(self, axis):
        """Sparse d/dx or d/dy on node vectors; one-sided at the rim."""
        n, h = self.n, self.h
        idx = self.node_index
        rows, cols, vals = [], [], []
        shift = (1, 0) if axis == 0 else (0, 1)

        def nb(k):
            ii = self.ix + k * shift[0]
            jj = self.iy + k * shift[1]
            ok = (ii >= 0) & (ii < n) & (jj >= 0) & (jj < n)
            res = np.full(self.n_nodes, -1, dtype=np.int64)
            res[ok] = idx[ii[ok] % n, jj[ok] % n]
            res[~ok] = -1
            return res

        nm2, nm1, np1, np2 = nb(-2), nb(-1), nb(1), nb(2)
        me = np.arange(self.n_nodes)
        central = (nm1 >= 0) & (np1 >= 0)
        fwd = ~central & (np1 >= 0) & (np2 >= 0)
        bwd = ~central & ~fwd & (nm1 >= 0) & (nm2 >= 0)
        fwd1 = ~central & ~fwd & ~bwd & (np1 >= 0)
        bwd1 = ~central & ~fwd & ~bwd & ~fwd1 & (nm1 >= 0)

        def add(mask, nodes, coeffs):
            k = np.flatnonzero(mask)
            for node_arr, c in zip(nodes, coeffs):
                rows.append(k)
                cols.append(node_arr[k])
                vals.append(np.full(k.size, c / h))

        add(central, (np1, nm1), (0.5, -0.5))
        add(fwd, (me, np1, np2), (-1.5, 2.0, -0.5))
        add(bwd, (me, nm1, nm2), (1.5, -2.0, 0.5))
        add(fwd1, (np1, me), (1.0, -1.0))
        add(bwd1, (me, nm1), (1.0, -1.0))
        quality = np.zeros(self.n_nodes, dtype=np.int8)
        quality[fwd | bwd] = 1
        quality[fwd1 | bwd1] = 2
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_nodes, self.n_nodes),
        )
        return mat, quality

    @cached_property
    def ddx(self):
        return self._diff_matrix(0)[0]

    @cached_property
    def ddy(self):
        return self._diff_matrix(1)[0]

    @cached_property
    def stencil_quality(self):
        """0 = central, 1 = one-sided 2nd order, 2 = first order (per axis max)."""
        qx = self._diff_matrix(0)[1]
        qy = self._diff_matrix(1)[1]
        return np.maximum(qx, qy)

    def integrate(self, values, corrected=True):
        """Disk integral of a node field, centroid-corrected on the rim.

        The correction shifts each rim cell's evaluation to the covered-area
        centroid via the field's discrete gradient; disable it for fields
        carrying one-sided stencil noise at the rim.
        """
        values = np.asarray(values)
        s = np.sum(values * self.area)
        ridx = np.flatnonzero(self.ring) if corrected else np.array([], dtype=int)
        if ridx.size:
            gx = self.ddx @ values
            gy = self.ddy @ values
            s = s + np.sum(
                self.area[ridx]
                * (gx[ridx] * self.centroid_dx[ridx] + gy[ridx] * self.centroid_dy[ridx])
            )
        return s

    def core_mask(self, r_max=0.85):
        return np.hypot(self.x, self.y) <= r_max


class SMGrid:
    """Disk nodes x uniform fiber angles, with Liouville quadrature weights."""

    def __init__(self, disk: DiskGrid, n_theta: int, metric: ConformalMetric):
        if n_theta % 2:
            raise DomainError("n_theta must be even")
        self.disk = disk
        self.n_theta = int(n_theta)
        self.metric = metric
        self.thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
        self.K = n_theta // 2 - 1
        self.e2lam = np.exp(2.0 * metric.lam(disk.x, disk.y))
        self.node_weight = disk.area * self.e2lam
        self.dtheta = 2.0 * np.pi / n_theta

    def descriptor(self):
        return {"kind": "sm", "n": self.disk.n, "n_theta": self.n_theta}

    @property
    def key(self):
        return f"sm{self.disk.n}x{self.n_theta}"

    @property
    def shape(self):
        return (self.disk.n_nodes, self.n_theta)

    def liouville_mass(self):
        return float(self.disk.integrate(self.e2lam).real) * 2.0 * np.pi

    def check(self, field):
        field = np.asarray(field)
        if field.shape != self.shape:
            raise GridMismatchError(f"field shape {field.shape} != {self.shape}")
        return field

    def integrate(self, field):
        """Integral over SM with the Liouville measure."""
        f = self.check(field).sum(axis=1) * self.dtheta * self.e2lam
        return self.disk.integrate(f)

    def inner(self, u, v):
        g = (self.check(u) * np.conj(self.check(v))).sum(axis=1) * self.dtheta * self.e2lam
        return complex(self.disk.integrate(g))

    def norm(self, u):
        return float(np.sqrt(max(self.inner(u, u).real, 0.0)))

    # -- fiber Fourier calculus ---------------------------------------------

    def analyze(self, field):
        """Fiber Fourier coefficients c_k, k = -K..K, shape (n_nodes, 2K+1)."""
        f = np.fft.fft(self.check(field), axis=1) / self.n_theta
        ks = np.arange(-self.K, self.K + 1)
        return f[:, ks % self.n_theta]

    def synthesize(self, coeffs):
        coeffs = np.asarray(coeffs)
        ks = np.arange(-self.K, self.K + 1)
        spec = np.zeros((coeffs.shape[0], self.n_theta), dtype=complex)
        spec[:, ks % self.n_theta] = coeffs
        return np.fft.ifft(spec * self.n_theta, axis=1)

    def mode(self, field, k):
        """Single fiber mode coefficient c_k as a node vector."""
        if abs(k) > self.n_theta // 2 - 1:
            raise DomainError(f"mode {k} not resolved at n_theta={self.n_theta}")
        ph = np.exp(-1j * k * self.thetas)
        return (self.check(field) * ph).mean(axis=1)

    def mode_mass(self, field, ks):
        """Liouville-weighted squared mass of the selected fiber modes."""
        c = self.analyze(field)
        off = self.K
        total = 0.0
        for k in ks:
            if abs(k) <= self.K:
                ck = c[:, off + k]
                total += float(self.disk.integrate(np.abs(ck) ** 2 * self.e2lam).real)
        return 2.0 * np.pi * total

    def hilbert(self, field):
        """Fiberwise Hilbert transform: mode k -> -i sgn(k) mode k."""
        f = np.fft.fft(self.check(field), axis=1)
        ks = np.fft.fftfreq(self.n_theta, d=1.0 / self.n_theta)
        f *= -1j * np.sign(ks)[None, :]
        return np.fft.ifft(f, axis=1)

    def flip(self, field):
        """The antipodal map in the fiber: u(x, theta) -> u(x, theta + pi)."""
        return np.roll(self.check(field), self.n_theta // 2, axis=1)

    def odd_part(self, field):
        return 0.5 * (self.check(field) - self.flip(field))


def gauss_legendre_alpha(n_alpha):
    """Gauss-Legendre nodes/weights on (-pi/2, pi/2)."""
    xs, ws = np.polynomial.legendre.leggauss(n_alpha)
    return 0.5 * np.pi * xs, 0.5 * np.pi * ws


def barycentric_weights(nodes):
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    scale = 4.0 / (nodes.max() - nodes.min())
    w = np.ones(n)
    for j in range(n):
        d = (nodes[j] - nodes) * scale
        d[j] = 1.0
        w[j] = 1.0 / np.prod(d)
    return w


class BoundaryGrid:
    """Fan-beam grid on the inward boundary: beta uniform x alpha Gauss."""

    def __init__(self, n_beta: int, n_alpha: int, metric: ConformalMetric):
        self.n_beta = int(n_beta)
        self.n_alpha = int(n_alpha)
        self.metric = metric
        self.betas = 2.0 * np.pi * np.arange(n_beta) / n_beta
        self.alphas, self.w_alpha = gauss_legendre_alpha(n_alpha)
        self.mu = np.cos(self.alphas)
        bx, by = np.cos(self.betas), np.sin(self.betas)
        self.w_beta = (2.0 * np.pi / n_beta) * np.exp(metric.lam(bx, by))
        self.weight = np.outer(self.w_beta, self.w_alpha * self.mu)
        B, A = np.meshgrid(self.betas, self.alphas, indexing="ij")
        self.B, self.A = B, A
        self.bary_w = barycentric_weights(self.alphas)

    def descriptor(self):
        return {"kind": "fan", "n_beta": self.n_beta, "n_alpha": self.n_alpha}

    @property
    def key(self):
        return f"fan{self.n_beta}x{self.n_alpha}"

    @property
    def shape(self):
        return (self.n_beta, self.n_alpha)

    def check(self, field):
        field = np.asarray(field)
        if field.shape != self.shape:
            raise GridMismatchError(f"field shape {field.shape} != {self.shape}")
        return field

    def inner_mu(self, u, v):
        return complex(np.sum(self.check(u) * np.conj(self.check(v)) * self.weight))

    def norm_mu(self, u):
        return float(np.sqrt(max(self.inner_mu(u, u).real, 0.0)))

    def states(self):
        """Phase-space states of all grid points, raveled (beta fastest last)."""
        x = np.cos(self.B).ravel()
        y = np.sin(self.B).ravel()
        th = (self.B + np.pi - self.A).ravel()
        return x, y, th

    def alpha_interp_weights(self, alpha_targets):
        """Barycentric Lagrange weights (targets x n_alpha), rows sum to 1.

        Targets outside the node hull are clamped to the closest node.
        """
        a = np.asarray(alpha_targets, dtype=float).ravel()
        a = np.clip(a, self.alphas.min(), self.alphas.max())
        diff = a[:, None] - self.alphas[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-14)
        safe = np.where(exact, 1.0, diff)
        w = self.bary_w[None, :] / safe
        w[exact.any(axis=1)] = 0.0
        w[exact] = 1.0
        return w / w.sum(axis=1, keepdims=True)

    def eval_fourier_beta(self, field, beta_targets, alpha_weights):
        """Evaluate a fan field at arbitrary points.

        Spectral (trigonometric) in beta, barycentric in alpha:
        ``beta_targets`` (m,) and ``alpha_weights`` (m, n_alpha) from
        :meth:`alpha_interp_weights`.
        """
        f = self.check(field)
        fh = np.fft.fft(f, axis=0) / self.n_beta
        ks = np.fft.fftfreq(self.n_beta, d=1.0 / self.n_beta)
        phase = np.exp(1j * np.asarray(beta_targets).ravel()[:, None] * ks[None, :])
        cols = phase @ fh  # (m, n_alpha): field at (beta_t, alpha_node)
        return np.sum(cols * alpha_weights, axis=1)


class BoundarySMGrid:
    """Full boundary sphere bundle: beta uniform x fiber angle uniform-offset.

    The fiber is parametrized by the relative angle abar in (-pi/2, 3pi/2),
    with theta = beta + pi - abar; abar in (-pi/2, pi/2) is the inward sheet.
    The half-step offset keeps every grid direction transversal.
    """

    def __init__(self, n_beta: int, n_fiber: int, metric: ConformalMetric):
        if n_fiber % 4:
            raise DomainError("n_fiber must be a multiple of 4")
        self.n_beta = int(n_beta)
        self.n_fiber = int(n_fiber)
        self.metric = metric
        self.betas = 2.0 * np.pi * np.arange(n_beta) / n_beta
        self.abar = -0.5 * np.pi + 2.0 * np.pi * (np.arange(n_fiber) + 0.5) / n_fiber
        self.inward = np.cos(self.abar) > 0.0
        self.theta = self.betas[:, None] + np.pi - self.abar[None, :]
        # theta[i, j] = theta0_i - 2 pi j / n_fiber
        self.theta0 = self.betas + 1.5 * np.pi - np.pi / self.n_fiber
        self.mu = np.cos(self.abar)

    def descriptor(self):
        return {"kind": "bsm", "n_beta": self.n_beta, "n_fiber": self.n_fiber}

    @property
    def key(self):
        return f"bsm{self.n_beta}x{self.n_fiber}"

    @property
    def shape(self):
        return (self.n_beta, self.n_fiber)

    def check(self, field):
        field = np.asarray(field)
        if field.shape != self.shape:
            raise GridMismatchError(f"field shape {field.shape} != {self.shape}")
        return field

    def states(self):
        x = np.repeat(np.cos(self.betas), self.n_fiber)
        y = np.repeat(np.sin(self.betas), self.n_fiber)
        th = self.theta.ravel()
        return x, y, th

    def analyze(self, field):
        """Fiber Fourier coefficients per boundary point, k = -K..K."""
        f = self.check(field)
        K = self.n_fiber // 2 - 1
        raw = np.fft.ifft(f, axis=1)  # (1/n) sum u_j e^{+i 2pi kj/n}
        ks = np.arange(-K, K + 1)
        coeffs = raw[:, ks % self.n_fiber]
        coeffs *= np.exp(-1j * np.outer(self.theta0, ks))
        return coeffs

    def synthesize(self, coeffs):
        K = self.n_fiber // 2 - 1
        ks = np.arange(-K, K + 1)
        ph = coeffs * np.exp(1j * np.outer(self.theta0, ks))
        spec = np.zeros((self.n_beta, self.n_fiber), dtype=complex)
        spec[:, ks % self.n_fiber] = ph
        return np.fft.fft(spec, axis=1)

    def eval_at(self, coeffs, beta_index, thetas):
        """Mode-sum evaluation at fiber angle(s) over given beta grid lines."""
        K = self.n_fiber // 2 - 1
        ks = np.arange(-K, K + 1)
        ph = np.exp(1j * np.outer(np.asarray(thetas, dtype=float), ks))
        return np.sum(coeffs[beta_index] * ph, axis=1)

    def hilbert(self, field):
        """Fiberwise Hilbert transform on the boundary fibers."""
        c = self.analyze(field)
        K = self.n_fiber // 2 - 1
        ks = np.arange(-K, K + 1)
        return self.synthesize(c * (-1j) * np.sign(ks)[None, :])

    def mode(self, field, k):
        c = self.analyze(field)
        K = self.n_fiber // 2 - 1
        return c[:, K + k]

    def flip(self, field):
        """u(x, v) -> u(x, -v): abar -> abar + pi is an exact index roll."""
        return np.roll(self.check(field), -self.n_fiber // 2, axis=1)

    def fan_alpha_of_inward(self):
        """Fan alpha values of the inward-sheet fiber nodes (= abar there)."""
        return self.abar[self.inward]
