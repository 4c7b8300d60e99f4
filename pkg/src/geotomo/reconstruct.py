"""Exact inversion pipeline: recover (f, h0, omega_+, omega_-) from fan data.

The harmonic one-form components are read off first, by pairing the data
with traces of one-sided adjoint transport solutions built on an orthonormal
kernel basis; their forward data is subtracted, and the remaining pair
(f, h0) is reconstructed through holomorphized transport solutions and
boundary fits in the degree-0 ladder kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import eta_minus_mode, eta_plus_mode
from .errors import DomainError
from .hodge import HoloBasis, fit_circle_modes, eval_circle_modes, holo_basis
from .holo import (
    first_integral,
    holo_integrating_factor,
    holomorphizer,
    integrating_factor_field,
)
from .transport import (
    Attenuation,
    Geometry,
    boundary_data_field,
    forward_I0,
    forward_Ipm1,
    forward_Iperp,
    op_Q,
)

_ZERO = Attenuation.zero()


@dataclass
class Quadruple:
    """f, h0 (vanishing at the boundary), and the harmonic one-form parts.

    The omegas are stored as coefficients in the orthonormal kernel bases
    together with the assembled mode-coefficient node fields.
    """

    f: np.ndarray
    h0: np.ndarray
    omega_plus: np.ndarray       # mode (+1) coefficient field
    omega_minus: np.ndarray      # mode (-1) coefficient field
    coeff_plus: np.ndarray
    coeff_minus: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _first_integrals(geom: Geometry, a: Attenuation, basis: HoloBasis):
    key = ("first_integrals", a.key, basis.degree, basis.count)

    def build():
        return [
            first_integral(geom, a, basis.coeff[:, p], basis.degree)
            for p in range(basis.count)
        ]

    return geom._get(key, build)


def omega_bases(geom: Geometry, count=8):
    key = ("omega_bases", count)
    return geom._get(
        key, lambda: (holo_basis(geom, +1, count), holo_basis(geom, -1, count))
    )


def recover_omegas(geom: Geometry, a: Attenuation, D, count=8):
    """Coefficients of the holomorphic/antiholomorphic one-form parts.

    c_p = <D, trace of the p-th first integral>_mu; the series is truncated
    at the basis size and the Bessel mass is reported.
    """
    bp, bm = omega_bases(geom, count)
    fip = _first_integrals(geom, a, bp)
    fim = _first_integrals(geom, a, bm)
    cp = np.array([geom.fan.inner_mu(D, fi.trace_fan) for fi in fip])
    cm = np.array([geom.fan.inner_mu(D, fi.trace_fan) for fi in fim])
    omega_p = bp.coeff @ cp
    omega_m = bm.coeff @ cm
    diag = {
        "bessel_plus": float(np.sum(np.abs(cp) ** 2)),
        "bessel_minus": float(np.sum(np.abs(cm) ** 2)),
        "first_integral_residuals": [fi.diagnostics["transport_residual"] for fi in fip + fim],
    }
    return omega_p, omega_m, cp, cm, diag


def _omega_fn(geom, basis: HoloBasis, coeffs):
    members = [basis.member_fn(geom, p) for p in range(basis.count)]

    def fn(x, y):
        out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for c, m in zip(coeffs, members):
            out = out + c * m(x, y)
        return out

    return fn


def forward_omegas(geom: Geometry, a: Attenuation, cp, cm, count=8):
    """Forward data of the recovered harmonic one-form parts (exact integrands)."""
    bp, bm = omega_bases(geom, count)
    dp = forward_Ipm1(geom, a, None, +1, c_fn=_omega_fn(geom, bp, cp))
    dm = forward_Ipm1(geom, a, None, -1, c_fn=_omega_fn(geom, bm, cm))
    return dp + dm


def g_kernel_solve(geom: Geometry, side, trace, max_modes=24):
    """Degree-0 ladder-kernel field from its boundary trace (delegated fit).

    side=+1 is the holomorphic unknown g_+ of the inversion formulas
    (annihilated by eta_minus), side=-1 the antiholomorphic g_-.
    """
    s = +1 if side > 0 else -1
    coeffs, resid = fit_circle_modes(np.asarray(trace), s, max_modes=max_modes)
    return eval_circle_modes(geom, coeffs, s), resid


def recover_f_h0(geom: Geometry, a: Attenuation, I, svd_cutoff=1e-6):
    """Invert data of the form I_a[star d h0, f] for (f, h0).

    Implements the holomorphization-based formulas: transport solutions are
    conjugated by one-sided integrating factors, holomorphized through
    boundary processing, and the degree-0 unknowns are completed by
    holomorphic/antiholomorphic fits of their boundary traces.
    """
    H = holomorphizer(geom, svd_cutoff)
    u_bd = boundary_data_field(geom, I)       # data on the full boundary bundle
    disk, sm = geom.disk, geom.sm
    a_nodes = a(disk.x, disk.y)
    nt_f = geom.theta_fine
    th_f = geom.fine_thetas()

    def one_side(side):
        fac = holo_integrating_factor(geom, a, side)
        w_bsm = integrating_factor_field(geom, fac, "bsm")
        v_bd = u_bd * np.exp(-w_bsm)
        B = H.forward(v_bd) if side == "holo" else H.backward(v_bd)
        v_psi = (geom.psi_matrix(fine=True) @ B.ravel()).reshape(disk.n_nodes, nt_f)
        w_fine = integrating_factor_field(geom, fac, "fine")
        Dfield = np.exp(w_fine) * v_psi
        modes = {
            k: (Dfield * np.exp(-1j * k * th_f)[None, :]).mean(axis=1)
            for k in (-1, 0, 1)
        }
        # boundary trace of D on the bundle, for the g fits
        v_bsm = op_Q(geom, _ZERO, B)
        D_bsm = np.exp(w_bsm) * v_bsm
        return modes, D_bsm, fac

    fwd_modes, Df_bsm, fac_f = one_side("holo")
    bwd_modes, Db_bsm, fac_b = one_side("anti")

    tr_f = geom.bsm.mode(u_bd - Df_bsm, 0)
    tr_b = geom.bsm.mode(u_bd - Db_bsm, 0)
    g_plus, res_p = g_kernel_solve(geom, +1, -1j * tr_f)
    g_minus, res_m = g_kernel_solve(geom, -1, +1j * tr_b)

    h0 = 0.5 * (g_plus + g_minus) - 0.5j * (fwd_modes[0] - bwd_modes[0])
    f = (
        -eta_plus_mode(geom.metric, disk, fwd_modes[-1], -1)
        - eta_minus_mode(geom.metric, disk, bwd_modes[1], +1)
        - 0.5 * a_nodes * (fwd_modes[0] + bwd_modes[0] + 1j * (g_plus - g_minus))
    )
    diag = {
        "g_plus_fit": res_p,
        "g_minus_fit": res_m,
        "factor_fwd": fac_f.diagnostics,
        "factor_bwd": fac_b.diagnostics,
    }
    return f, h0, diag


def decompose_data(geom: Geometry, a: Attenuation, D, count=8, svd_cutoff=1e-6):
    """Full pipeline: D -> (f, h0, omega_+, omega_-) with diagnostics."""
    D = geom.fan.check(D)
    omega_p, omega_m, cp, cm, diag_o = recover_omegas(geom, a, D, count)
    D1 = D - forward_omegas(geom, a, cp, cm, count)
    f, h0, diag_f = recover_f_h0(geom, a, D1, svd_cutoff)
    diag = {"omegas": diag_o, "fh0": diag_f}
    return Quadruple(
        f=f, h0=h0, omega_plus=omega_p, omega_minus=omega_m,
        coeff_plus=cp, coeff_minus=cm, diagnostics=diag,
    )


def forward_quadruple(geom: Geometry, a: Attenuation, q: Quadruple):
    """Re-forward a recovered quadruple (self-consistency check)."""
    disk = geom.disk
    data = forward_omegas(geom, a, q.coeff_plus, q.coeff_minus, q.coeff_plus.size)
    data = data + forward_I0(geom, a, q.f)
    data = data + forward_Iperp(geom, a, q.h0)
    return data


def projections(geom: Geometry, a: Attenuation, count=8, svd_cutoff=1e-6):
    """The four range projections, as callables on fan data.

    p_plus1 / p_minus1 return the forward data of the recovered harmonic
    one-form parts; p_0 / p_perp re-forward the function / perpendicular
    component recovered from the remainder.
    """

    def p_plus1(u):
        _, _, cp, cm, _ = recover_omegas(geom, a, u, count)
        return forward_omegas(geom, a, cp, np.zeros_like(cm), count)

    def p_minus1(u):
        _, _, cp, cm, _ = recover_omegas(geom, a, u, count)
        return forward_omegas(geom, a, np.zeros_like(cp), cm, count)

    def _remainder(u):
        _, _, cp, cm, _ = recover_omegas(geom, a, u, count)
        return u - forward_omegas(geom, a, cp, cm, count)

    def p_0(u):
        f, _, _ = recover_f_h0(geom, a, _remainder(u), svd_cutoff)
        return forward_I0(geom, a, f)

    def p_perp(u):
        _, h0, _ = recover_f_h0(geom, a, _remainder(u), svd_cutoff)
        return forward_Iperp(geom, a, h0)

    return {"p_plus1": p_plus1, "p_minus1": p_minus1, "p_0": p_0, "p_perp": p_perp}
