"""Poisson solves on the disk, Hodge splittings, and holomorphic bases.

The Dirichlet solver uses the Shortley-Weller stencil: at nodes whose lattice
neighbor falls outside the unit circle, the stencil arm is shortened to the
circle intersection where the boundary value is imposed, keeping second-order
accuracy for curved-boundary Dirichlet problems.

Conformal invariance of the 2-D Laplacian is used throughout: harmonicity,
harmonic conjugates and the degree-0 kernels of the ladder operators do not
see the conformal factor, while zero-order terms and right-hand sides pick up
explicit exp(2 lam) factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .calculus import (
    delta_oneform,
    eta_minus_mode,
    eta_plus_mode,
    star_d_scalar,
)
from .errors import DecompositionError, DomainError
from .grids import DiskGrid
from .transport import Attenuation, Geometry, Pair


class DirichletSolver:
    """Factorized Shortley-Weller discretization of -Lap + c(x) on the disk."""

    def __init__(self, disk: DiskGrid, zero_order=None):
        self.disk = disk
        n, h = disk.n, disk.h
        idx = disk.node_index
        N = disk.n_nodes
        me = np.arange(N)
        x, y = disk.x, disk.y

        # per direction: neighbor node index, or arm length t*h to the circle
        arm = {}
        for dix, diy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ii, jj = disk.ix + dix, disk.iy + diy
            ok = (ii >= 0) & (ii < n) & (jj >= 0) & (jj < n)
            nb = np.full(N, -1, dtype=np.int64)
            nb[ok] = idx[ii[ok], jj[ok]]
            t = np.ones(N)
            short = nb < 0
            if short.any():
                b = x[short] * dix + y[short] * diy
                r2 = x[short] ** 2 + y[short] ** 2
                t_s = (-b + np.sqrt(np.maximum(b * b - (r2 - 1.0), 0.0))) / h
                t[short] = np.clip(t_s, 1e-6, 1.0)
            arm[(dix, diy)] = (nb, t)

        h2 = h * h
        rows, cols, vals = [], [], []
        diag = np.zeros(N)
        self._boundary_terms = []
        for dp, dm in (((1, 0), (-1, 0)), ((0, 1), (0, -1))):
            nbp, tp = arm[dp]
            nbm, tm = arm[dm]
            cp = 2.0 / (tp * (tp + tm)) / h2
            cm = 2.0 / (tm * (tp + tm)) / h2
            diag += cp + cm
            for nb, c, t, e in ((nbp, cp, tp, dp), (nbm, cm, tm, dm)):
                has = nb >= 0
                rows.append(me[has])
                cols.append(nb[has])
                vals.append(-c[has].astype(complex))
                sidx = np.flatnonzero(~has)
                if sidx.size:
                    bx = x[sidx] + t[sidx] * h * e[0]
                    by = y[sidx] + t[sidx] * h * e[1]
                    self._boundary_terms.append((sidx, c[sidx], bx, by))

        dvals = diag.astype(complex)
        if zero_order is not None:
            dvals = dvals + np.asarray(zero_order, dtype=complex)
        rows.append(me)
        cols.append(me)
        vals.append(dvals)
        A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(N, N),
        )
        self._lu = splu(A.tocsc())
        self._A = A

    def solve(self, rhs, boundary_values=None):
        """Solve (-Lap + c) u = rhs with u = g on the circle.

        ``boundary_values`` is a callable g(x, y) evaluated at the circle
        points cut by the stencil arms; defaults to zero.
        """
        b = np.asarray(rhs, dtype=complex).copy()
        if boundary_values is not None:
            for sidx, c, bx, by in self._boundary_terms:
                b[sidx] += c * np.asarray(boundary_values(bx, by), dtype=complex)
        u = self._lu.solve(b)
        res = self._A @ u - b
        rel = np.linalg.norm(res) / max(np.linalg.norm(b), 1e-300)
        if rel > 1e-8:
            raise DecompositionError(f"Dirichlet solve residual {rel:.2e}")
        return u


def _solver(geom: Geometry, kind, zero_order=None):
    key = ("dirichlet", kind)
    if key in geom._memo:
        return geom._memo[key]
    s = DirichletSolver(geom.disk, zero_order=zero_order)
    geom._memo[key] = s
    return s


def poisson_dirichlet(geom: Geometry, rhs, a: Attenuation | None = None):
    """Solve (-Lap_g + |a|^2) u = rhs with u = 0 on the boundary.

    In the flat chart this is (-Lap + e^{2 lam} |a|^2) u = e^{2 lam} rhs.
    """
    e2 = geom.sm.e2lam
    if a is None or a.is_zero:
        return _solver(geom, "laplace").solve(e2 * np.asarray(rhs, dtype=complex))
    c = e2 * np.abs(a(geom.disk.x, geom.disk.y)) ** 2
    key = ("dirichlet", "helmholtz", a.key)
    if key not in geom._memo:
        geom._memo[key] = DirichletSolver(geom.disk, zero_order=c)
    return geom._memo[key].solve(e2 * np.asarray(rhs, dtype=complex))


def harmonic_extension(geom: Geometry, boundary_fn):
    """Harmonic function with prescribed boundary values (conformally invariant)."""
    N = geom.disk.n_nodes
    return _solver(geom, "laplace").solve(np.zeros(N, dtype=complex), boundary_values=boundary_fn)


# ---------------------------------------------------------------------------
# boundary traces and circle-mode fits
# ---------------------------------------------------------------------------

def boundary_trace(geom: Geometry, values, n_beta=None):
    """Trace of a node field on the unit circle, by cubic interpolation.

    Interpolates at radius 1 - h/2 and 1 - 3h/2 along each ray and
    extrapolates linearly to the circle, avoiding the rim cells' one-sided
    noise. Returns samples at the fan beta grid (or n_beta uniform angles).
    """
    disk = geom.disk
    nb = n_beta or geom.fan.n_beta
    betas = 2.0 * np.pi * np.arange(nb) / nb
    # rings deep enough that every bilinear stencil corner is a real node
    rings = [1.0 - (1.75 + k) * disk.h for k in range(3)]
    vs = [
        disk.interp_matrix(r * np.cos(betas), r * np.sin(betas)) @ values for r in rings
    ]
    out = np.zeros(nb, dtype=complex)
    for k in range(3):
        w = 1.0
        for l in range(3):
            if l != k:
                w *= (1.0 - rings[l]) / (rings[k] - rings[l])
        out += w * vs[k]
    return out


def fit_circle_modes(trace, side, max_modes=None):
    """Least-squares fit of a circle trace in e^{i p beta} with one-sided p.

    side=+1 keeps p >= 0 (boundary values of holomorphic z^p), side=-1 keeps
    p <= 0 (antiholomorphic). Returns (coeffs, rel_residual); coeffs[p] is
    the coefficient of z^{p} resp. conj(z)^{p}.
    """
    trace = np.asarray(trace, dtype=complex)
    nb = trace.size
    P = max_modes if max_modes is not None else nb // 2 - 1
    fh = np.fft.fft(trace) / nb
    ks = np.fft.fftfreq(nb, d=1.0 / nb).astype(int)
    keep = (ks * side >= 0) & (np.abs(ks) <= P)
    coeffs = np.zeros(P + 1, dtype=complex)
    for k, c in zip(ks[keep], fh[keep]):
        coeffs[abs(k)] = c
    dropped = fh[~keep]
    resid = np.linalg.norm(dropped) / max(np.linalg.norm(fh), 1e-300)
    return coeffs, float(resid)


def eval_circle_modes(geom: Geometry, coeffs, side):
    """Evaluate sum_p c_p z^p (side=+1) or c_p conj(z)^p (side=-1) at nodes."""
    z = geom.disk.x + 1j * geom.disk.y
    if side < 0:
        z = np.conj(z)
    out = np.zeros(geom.disk.n_nodes, dtype=complex)
    zp = np.ones_like(z)
    for c in coeffs:
        out += c * zp
        zp = zp * z
    return out


def g_kernel_solve(geom: Geometry, side, trace, max_modes=24):
    """Interior field in a degree-0 ladder kernel from its boundary trace.

    ``side`` names the pipeline unknown: +1 is the g_+ of the reconstruction
    formulas, annihilated by eta_minus (holomorphic, z powers); -1 is g_-,
    annihilated by eta_plus (conj(z) powers). Returns (field, fit_residual).
    """
    s = +1 if side > 0 else -1
    coeffs, resid = fit_circle_modes(np.asarray(trace), s, max_modes=max_modes)
    return eval_circle_modes(geom, coeffs, s), resid


# ---------------------------------------------------------------------------
# Hodge decompositions
# ---------------------------------------------------------------------------

def hodge_oneform(geom: Geometry, ax, ay):
    """alpha = d f' + star d h with f'|_boundary = 0 and h of zero boundary mean.

    Returns (f_prime, h, diagnostics). The h-problem is solved as a Dirichlet
    problem with boundary data obtained by integrating the normal component
    of the solenoidal remainder along the circle.
    """
    disk = geom.disk
    ax = np.asarray(ax, dtype=complex)
    ay = np.asarray(ay, dtype=complex)
    # f': -Lap f' = -(div alpha) in the flat chart (conformal invariance)
    div = disk.ddx @ ax + disk.ddy @ ay
    f_prime = _solver(geom, "laplace").solve(-div.astype(complex))
    rx = ax - disk.ddx @ f_prime
    ry = ay - disk.ddy @ f_prime
    # boundary data of h: dh/dbeta = -(rho_x cos b + rho_y sin b) on the circle
    nb = geom.fan.n_beta
    betas = 2.0 * np.pi * np.arange(nb) / nb
    rxb = boundary_trace(geom, rx, nb)
    ryb = boundary_trace(geom, ry, nb)
    dh = -(rxb * np.cos(betas) + ryb * np.sin(betas))
    fh = np.fft.fft(dh) / nb
    flux = fh[0]
    ks = np.fft.fftfreq(nb, d=1.0 / nb)
    with np.errstate(divide="ignore", invalid="ignore"):
        hh = np.where(ks != 0, fh / (1j * ks), 0.0)
    h_bd = np.fft.ifft(hh * nb)
    h_bd -= h_bd.mean()

    def h_boundary(bx, by):
        ang = np.arctan2(by, bx)
        ph = np.exp(1j * np.outer(ang, ks))
        return ph @ np.where(ks != 0, hh, 0.0)

    curl = disk.ddx @ ry - disk.ddy @ rx
    h = _solver(geom, "laplace").solve(-curl.astype(complex), boundary_values=h_boundary)
    # normalization: zero boundary mean already enforced through h_boundary
    sdx, sdy = star_d_scalar(disk, h)
    resx = ax - (disk.ddx @ f_prime) - sdx
    resy = ay - (disk.ddy @ f_prime) - sdy
    scale = np.sqrt(abs(disk.integrate(np.abs(ax) ** 2 + np.abs(ay) ** 2)))
    res = np.sqrt(abs(disk.integrate(np.abs(resx) ** 2 + np.abs(resy) ** 2)))
    diag = {"residual": float(res / max(scale, 1e-300)), "flux": abs(complex(flux))}
    return f_prime, h, diag


def _d_a_operator(geom: Geometry, a: Attenuation):
    """Weighted discrete d_a (gradient stack + multiplication) and its LU.

    Realizes the weak problem (d_a b, d_a b') = <-delta_a p, b'> as weighted
    normal equations, with a strong penalty pinning the boundary trace to
    zero; the returned solve minimizes || p - d_a b || in the pair norm.
    """
    key = ("d_a_lsq", a.key)
    if key in geom._memo:
        return geom._memo[key]
    disk = geom.disk
    w1 = np.sqrt(disk.area)
    wf = np.sqrt(disk.area * geom.sm.e2lam)
    Dx = sp.diags(w1) @ disk.ddx
    Dy = sp.diags(w1) @ disk.ddy
    Ma = sp.diags(wf * a(disk.x, disk.y))
    nb = 2 * geom.fan.n_beta
    betas = 2.0 * np.pi * np.arange(nb) / nb
    r_tr = 1.0 - 0.5 * disk.h
    T = disk.interp_matrix(r_tr * np.cos(betas), r_tr * np.sin(betas))
    pen = 300.0 / disk.h * np.sqrt(2.0 * np.pi * r_tr / nb)
    D = sp.vstack([Dx, Dy, Ma, pen * T]).tocsc()
    A = (D.getH() @ D).tocsc()
    lu = splu(A)
    geom._memo[key] = (Dx, Dy, Ma, lu, w1, wf)
    return geom._memo[key]


def pair_decompose(geom: Geometry, a: Attenuation, p: Pair):
    """[alpha, f] = [beta, h] + d_a b with b -> 0 at the boundary.

    Solved variationally: b minimizes the pair norm of p - d_a b, so the
    solenoidal remainder is orthogonal to every a-potential pair in the
    discrete inner product. The reported residual is the interior relative
    L2 norm of delta_a applied to the remainder.
    """
    disk = geom.disk
    Dx, Dy, Ma, lu, w1, wf = _d_a_operator(geom, a)
    rhs = (
        Dx.getH() @ (w1 * p.ax)
        + Dy.getH() @ (w1 * p.ay)
        + Ma.getH() @ (wf * p.f)
    )
    b = lu.solve(np.asarray(rhs, dtype=complex))
    sol = Pair(
        p.ax - disk.ddx @ b,
        p.ay - disk.ddy @ b,
        p.f - a(disk.x, disk.y) * b,
    )
    resid = delta_oneform(geom.metric, disk, sol.ax, sol.ay) - np.conj(
        a(disk.x, disk.y)
    ) * sol.f
    core = disk.core_mask(0.85)
    scale = np.sqrt(abs(disk.integrate(
        np.abs(p.ax) ** 2 + np.abs(p.ay) ** 2 + np.abs(p.f) ** 2
    ))) + 1e-300
    rnorm = np.sqrt(float(np.sum((np.abs(resid) ** 2 * disk.area)[core])))
    return sol, b, {"delta_a_residual": float(rnorm / scale)}


def canonical_rep(geom: Geometry, a: Attenuation, p: Pair):
    """(h, f) with I_a[alpha, b] = I_a[star dh, f]: h from the Hodge split,
    f = b - a f'."""
    f_prime, h, diag = hodge_oneform(geom, p.ax, p.ay)
    f = p.f - a(geom.disk.x, geom.disk.y) * f_prime
    return h, f, diag


def harmonic_conjugate(geom: Geometry, u):
    """v with du = star dv and zero boundary mean; raises off non-harmonic input.

    The conjugate differential is integrated along the circle to produce
    Dirichlet data (line integration of the rotated gradient from a base
    boundary point); the loop integral must close for harmonic input.
    """
    disk = geom.disk
    u = np.asarray(u, dtype=complex)
    ux = disk.ddx @ u
    uy = disk.ddy @ u
    nb = geom.fan.n_beta
    betas = 2.0 * np.pi * np.arange(nb) / nb
    uxb = boundary_trace(geom, ux, nb)
    uyb = boundary_trace(geom, uy, nb)
    # dv = u_y dx - u_x dy; along the circle dv/dbeta = -u_y sin b - u_x cos b ... rotated
    dv = uyb * (-np.sin(betas)) - uxb * np.cos(betas)
    fh = np.fft.fft(dv) / nb
    loop = abs(complex(fh[0]))
    scale = max(float(np.abs(dv).max()), 1e-300)
    if loop / scale > 5e-2:
        raise DecompositionError(f"conjugate loop integral does not close ({loop:.2e})")
    ks = np.fft.fftfreq(nb, d=1.0 / nb)
    with np.errstate(divide="ignore", invalid="ignore"):
        vh = np.where(ks != 0, fh / (1j * ks), 0.0)

    def v_boundary(bx, by):
        ang = np.arctan2(by, bx)
        ph = np.exp(1j * np.outer(ang, ks))
        return ph @ vh

    v = harmonic_extension(geom, v_boundary)
    return v


def split_h(geom: Geometry, h):
    """h = h0 + h_plus + h_minus with h0 vanishing on the boundary.

    h_plus = (u + iv)/2 and h_minus = (u - iv)/2, u the harmonic extension of
    the trace of h and v its conjugate; h_plus is annihilated by eta_plus
    (a function of conj(z)) and h_minus by eta_minus (a function of z).
    """
    h = np.asarray(h, dtype=complex)
    nb = geom.fan.n_beta
    tr = boundary_trace(geom, h, nb)
    ks = np.fft.fftfreq(nb, d=1.0 / nb)
    fh = np.fft.fft(tr) / nb

    def h_boundary(bx, by):
        ang = np.arctan2(by, bx)
        return np.exp(1j * np.outer(ang, ks)) @ fh

    u = harmonic_extension(geom, h_boundary)
    v = harmonic_conjugate(geom, u)
    h0 = h - u
    h_plus = 0.5 * (u + 1j * v)
    h_minus = 0.5 * (u - 1j * v)
    return h0, h_plus, h_minus


# ---------------------------------------------------------------------------
# orthonormal bases of the degree +-1 ladder kernels
# ---------------------------------------------------------------------------

@dataclass
class HoloBasis:
    """Orthonormal members of ker eta_minus (degree +1) or ker eta_plus (-1).

    Member p has fiber factor e^{i degree theta} and coefficient stored both
    as node arrays (``coeff[:, p]``) and as a closed form: a combination of
    e^{-lam} z^p (or conjugates), with combination matrix ``comb``.
    """

    degree: int
    coeff: np.ndarray     # (n_nodes, P)
    comb: np.ndarray      # (P, P): member_p = sum_q comb[q, p] * seed_q
    gram_error: float

    @property
    def count(self):
        return self.coeff.shape[1]

    def member_fn(self, geom, p):
        comb = self.comb[:, p]
        deg = self.degree

        def fn(x, y):
            z = np.asarray(x) + 1j * np.asarray(y)
            if deg < 0:
                z = np.conj(z)
            el = np.exp(-geom.metric.lam(x, y))
            out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
            zp = np.ones_like(z)
            for q in range(comb.size):
                out += comb[q] * zp
                zp = zp * z
            return el * out

        return fn


def holo_basis(geom: Geometry, degree: int, count: int = 8) -> HoloBasis:
    """Gram-Schmidt the seeds e^{-lam} z^p (degree +1; conjugates for -1).

    The seeds lie exactly in the ladder kernel for any conformal factor; the
    orthonormalization runs in the sphere-bundle inner product restricted to
    the fiber degree, i.e. 2 pi int c cbar' e^{2 lam} dx dy.
    """
    if degree not in (+1, -1):
        raise DomainError("degree must be +1 or -1")
    if count > 16:
        raise DomainError("basis size capped at 16")
    disk = geom.disk
    z = disk.x + 1j * disk.y
    if degree < 0:
        z = np.conj(z)
    el = np.exp(-geom.metric.lam(disk.x, disk.y))
    seeds = np.stack([el * z**p for p in range(count)], axis=1)

    w = 2.0 * np.pi * disk.area * geom.sm.e2lam

    def gram(Acols, Bcols):
        return (Acols.conj().T * w[None, :]) @ Bcols

    G = gram(seeds, seeds)
    # Cholesky-based orthonormalization; fall back to reduced count on
    # numerical rank loss
    for trial in range(count, 1, -1):
        try:
            L = np.linalg.cholesky(G[:trial, :trial])
            break
        except np.linalg.LinAlgError:
            continue
    else:
        raise DecompositionError("holomorphic basis Gram matrix is singular")
    if trial < count:
        import warnings

        warnings.warn(f"holo basis reduced to {trial} members (ill-conditioned Gram)")
    comb = np.linalg.inv(L).conj().T  # seeds @ comb is orthonormal
    coeff = seeds[:, :trial] @ comb
    Gc = gram(coeff, coeff)
    gram_error = float(np.abs(Gc - np.eye(trial)).max())
    return HoloBasis(degree=degree, coeff=coeff, comb=comb, gram_error=gram_error)


def holo_member_kernel_residual(geom: Geometry, basis: HoloBasis, p: int) -> float:
    """Ladder-kernel residual of member p, by an angular-spectrum oracle.

    Kernel membership in the conformal gauge means c * e^{lam} is analytic
    in z (degree +1) or conj(z) (degree -1): on any circle its angular
    spectrum must be one-sided. Sampled mass of the wrong-side modes over a
    few circles is returned relative to the total; this is exact up to
    round-off for true members, independent of grid stencils.
    """
    fn = basis.member_fn(geom, p)
    wrong = total = 0.0
    phis = 2.0 * np.pi * np.arange(256) / 256
    for r in (0.3, 0.55, 0.8):
        x, y = r * np.cos(phis), r * np.sin(phis)
        vals = fn(x, y) * np.exp(geom.metric.lam(x, y))
        spec = np.fft.fft(vals) / phis.size
        ks = np.fft.fftfreq(phis.size, d=1.0 / phis.size)
        bad = (ks * basis.degree) < 0
        wrong += float(np.sum(np.abs(spec[bad]) ** 2))
        total += float(np.sum(np.abs(spec) ** 2))
    return float(np.sqrt(wrong / max(total, 1e-300)))
