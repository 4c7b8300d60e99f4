"""The vector fields X, X_perp, V on the sphere bundle and the ladder operators.

In the isothermal chart (x, y, theta):

    X      = e^{-lam} (cos t d_x + sin t d_y + (-lam_x sin t + lam_y cos t) d_t)
    X_perp = -e^{-lam} (-sin t d_x + cos t d_y - (lam_x cos t + lam_y sin t) d_t)
    V      = d_theta

Angular derivatives are spectral; spatial derivatives use the grid stencils
unless exact derivative arrays (from closed-form phantoms) are supplied. On a
single fiber mode c(x) e^{i k theta} the ladder operators act as

    eta_plus : c -> e^{-lam} (del c - k (del lam) c),      del  = (d_x - i d_y)/2
    eta_minus: c -> e^{-lam} (dbar c + k (dbar lam) c),    dbar = (d_x + i d_y)/2

shifting the mode to k+1 / k-1.
"""

from __future__ import annotations

import numpy as np

from .grids import DiskGrid, SMGrid
from .metrics import ConformalMetric


def _spatial_derivs(disk: DiskGrid, U, dUx=None, dUy=None):
    if dUx is None:
        dUx = disk.ddx @ U
    if dUy is None:
        dUy = disk.ddy @ U
    return dUx, dUy


def apply_V(sm: SMGrid, U):
    """Fiber derivative d/dtheta, computed spectrally."""
    f = np.fft.fft(sm.check(U), axis=1)
    ks = np.fft.fftfreq(sm.n_theta, d=1.0 / sm.n_theta)
    return np.fft.ifft(1j * ks[None, :] * f, axis=1)


def apply_X(metric: ConformalMetric, sm: SMGrid, U, dUx=None, dUy=None):
    """Geodesic vector field applied to a sphere-bundle field."""
    disk = sm.disk
    dUx, dUy = _spatial_derivs(disk, sm.check(U), dUx, dUy)
    dUt = apply_V(sm, U)
    el = np.exp(-metric.lam(disk.x, disk.y))[:, None]
    ct = np.cos(sm.thetas)[None, :]
    st = np.sin(sm.thetas)[None, :]
    lx = metric.lam_x(disk.x, disk.y)[:, None]
    ly = metric.lam_y(disk.x, disk.y)[:, None]
    return el * (ct * dUx + st * dUy + (-lx * st + ly * ct) * dUt)


def apply_Xperp(metric: ConformalMetric, sm: SMGrid, U, dUx=None, dUy=None):
    disk = sm.disk
    dUx, dUy = _spatial_derivs(disk, sm.check(U), dUx, dUy)
    dUt = apply_V(sm, U)
    el = np.exp(-metric.lam(disk.x, disk.y))[:, None]
    ct = np.cos(sm.thetas)[None, :]
    st = np.sin(sm.thetas)[None, :]
    lx = metric.lam_x(disk.x, disk.y)[:, None]
    ly = metric.lam_y(disk.x, disk.y)[:, None]
    return -el * (-st * dUx + ct * dUy - (lx * ct + ly * st) * dUt)


def eta_pm(metric, sm, U, sign, dUx=None, dUy=None):
    """eta_{+-} = (X +- i X_perp) / 2 on a sphere-bundle field."""
    a = apply_X(metric, sm, U, dUx, dUy)
    b = apply_Xperp(metric, sm, U, dUx, dUy)
    return 0.5 * (a + 1j * sign * b)


def eta_plus_mode(metric, disk: DiskGrid, c, k, dcx=None, dcy=None):
    """eta_plus on the mode coefficient of an Omega_k field; lands in Omega_{k+1}."""
    dcx, dcy = _spatial_derivs(disk, np.asarray(c), dcx, dcy)
    dl = 0.5 * (metric.lam_x(disk.x, disk.y) - 1j * metric.lam_y(disk.x, disk.y))
    el = np.exp(-metric.lam(disk.x, disk.y))
    return el * (0.5 * (dcx - 1j * dcy) - k * dl * c)


def eta_minus_mode(metric, disk: DiskGrid, c, k, dcx=None, dcy=None):
    """eta_minus on the mode coefficient of an Omega_k field; lands in Omega_{k-1}."""
    dcx, dcy = _spatial_derivs(disk, np.asarray(c), dcx, dcy)
    dbl = 0.5 * (metric.lam_x(disk.x, disk.y) + 1j * metric.lam_y(disk.x, disk.y))
    el = np.exp(-metric.lam(disk.x, disk.y))
    return el * (0.5 * (dcx + 1j * dcy) + k * dbl * c)


# -- one-forms <-> fiber modes -----------------------------------------------

def oneform_to_sm(metric, sm: SMGrid, ax, ay):
    """One-form (ax dx + ay dy) as the function alpha(v) on the sphere bundle."""
    disk = sm.disk
    el = np.exp(-metric.lam(disk.x, disk.y))[:, None]
    ct = np.cos(sm.thetas)[None, :]
    st = np.sin(sm.thetas)[None, :]
    return el * (np.asarray(ax)[:, None] * ct + np.asarray(ay)[:, None] * st)


def oneform_modes(metric, disk: DiskGrid, ax, ay):
    """Coefficients (c_plus, c_minus) of alpha(v) = c_+ e^{i t} + c_- e^{-i t}."""
    el = np.exp(-metric.lam(disk.x, disk.y))
    cp = 0.5 * el * (np.asarray(ax) - 1j * np.asarray(ay))
    cm = 0.5 * el * (np.asarray(ax) + 1j * np.asarray(ay))
    return cp, cm


def modes_to_oneform(metric, disk: DiskGrid, cp, cm):
    el = np.exp(metric.lam(disk.x, disk.y))
    ax = el * (np.asarray(cp) + np.asarray(cm))
    ay = 1j * el * (np.asarray(cp) - np.asarray(cm))
    return ax, ay


# -- exterior calculus on the disk --------------------------------------------

def star_d_scalar(disk: DiskGrid, h, dhx=None, dhy=None):
    """The one-form star(dh) = -h_y dx + h_x dy (conformally invariant)."""
    dhx, dhy = _spatial_derivs(disk, np.asarray(h), dhx, dhy)
    return -dhy, dhx


def star_d_oneform(metric, disk: DiskGrid, ax, ay, daxy=None, dayx=None):
    """star(d alpha) = e^{-2 lam} (d_x ay - d_y ax), a function."""
    if dayx is None:
        dayx = disk.ddx @ np.asarray(ay)
    if daxy is None:
        daxy = disk.ddy @ np.asarray(ax)
    return np.exp(-2.0 * metric.lam(disk.x, disk.y)) * (dayx - daxy)


def delta_oneform(metric, disk: DiskGrid, ax, ay):
    """delta(alpha) = e^{-2 lam} (d_x ax + d_y ay).

    Sign convention: (delta alpha | h) + (alpha | dh) = boundary term, so
    that delta d = Lap_g and -delta_a d_a = -Lap_g + |a|^2 on functions.
    """
    div = disk.ddx @ np.asarray(ax) + disk.ddy @ np.asarray(ay)
    return np.exp(-2.0 * metric.lam(disk.x, disk.y)) * div


# -- diagnostics ---------------------------------------------------------------

def structure_residuals(metric, sm: SMGrid, U, core_r=0.85):
    """Relative residuals of [X,V]=X_perp, [X_perp,V]=-X, [X,X_perp]=-kappa V.

    Measured in the Liouville L2 norm over the interior core, where the grid
    stencils are full centered differences.
    """
    disk = sm.disk
    core = disk.core_mask(core_r)

    def nrm(F):
        g = (np.abs(F) ** 2).sum(axis=1) * sm.dtheta * sm.e2lam
        return np.sqrt(max(float(np.sum((g * disk.area)[core])), 0.0))

    X = lambda W: apply_X(metric, sm, W)
    Xp = lambda W: apply_Xperp(metric, sm, W)
    V = lambda W: apply_V(sm, W)
    kap = metric.curvature(disk.x, disk.y)[:, None]

    r1 = X(V(U)) - V(X(U)) - Xp(U)
    r2 = Xp(V(U)) - V(Xp(U)) + X(U)
    r3 = X(Xp(U)) - Xp(X(U)) + kap * V(U)
    scale = nrm(X(U)) + nrm(Xp(U)) + 1e-300
    return {
        "XV": nrm(r1) / scale,
        "XperpV": nrm(r2) / scale,
        "XXperp": nrm(r3) / scale,
    }


def commutator_residual(metric, sm: SMGrid, a_vals, U, core_r=0.85):
    """Relative residual of [H, X+a] u = X_perp u_0 + (X_perp u)_0."""
    disk = sm.disk
    core = disk.core_mask(core_r)
    A = np.asarray(a_vals)[:, None]

    def op(W):
        return apply_X(metric, sm, W) + A * W

    HU = sm.hilbert(U)
    lhs = sm.hilbert(op(U)) - op(HU)
    u0 = sm.mode(U, 0)
    t1 = apply_Xperp(metric, sm, np.repeat(u0[:, None], sm.n_theta, axis=1))
    t2 = sm.mode(apply_Xperp(metric, sm, U), 0)
    rhs = t1 + np.repeat(t2[:, None], sm.n_theta, axis=1)
    res = lhs - rhs

    def nrm(F):
        g = (np.abs(F) ** 2).sum(axis=1) * sm.dtheta * sm.e2lam
        return np.sqrt(max(float(np.sum((g * disk.area)[core])), 0.0))

    return nrm(res) / (nrm(rhs) + 1e-300)
