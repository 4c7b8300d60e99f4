import numpy as np
import pytest

from geotomo import (
    Attenuation,
    decompose_data,
    forward_I0,
    forward_Iperp,
    forward_quadruple,
    g_kernel_solve,
    phantoms,
    projections,
    recover_f_h0,
    recover_omegas,
)
from geotomo.reconstruct import forward_omegas, omega_bases


@pytest.fixture(scope="module")
def att_rec():
    return Attenuation.gaussian(0.7 + 0.7j, (0.1, -0.05), 0.45)


def _l2(disk, got, true):
    w = disk.area
    return float(np.sqrt(np.sum(np.abs(got - true) ** 2 * w)
                         / max(np.sum(np.abs(true) ** 2 * w), 1e-300)))


def test_g_kernel_solve(geom_mid):
    nb = geom_mid.fan.n_beta
    betas = 2 * np.pi * np.arange(nb) / nb
    g, res = g_kernel_solve(geom_mid, +1, np.exp(3j * betas))
    z = geom_mid.disk.x + 1j * geom_mid.disk.y
    assert res < 1e-8
    assert np.abs(g - z**3).max() < 1e-10
    gc, res0 = g_kernel_solve(geom_mid, +1, np.ones(nb))
    assert res0 < 1e-12 and np.abs(gc - 1).max() < 1e-12
    _, res_bad = g_kernel_solve(geom_mid, +1, np.exp(-1j * betas))
    assert res_bad > 0.9


def test_recover_f_unattenuated(geom_mid):
    f = phantoms.gaussian(1.0, (0.15, -0.1), 0.35)
    I = forward_I0(geom_mid, Attenuation.zero(), None, f_fn=f.fn)
    fr, h0r, diag = recover_f_h0(geom_mid, Attenuation.zero(), I)
    d = geom_mid.disk
    assert _l2(d, fr, f.fn(d.x, d.y)) < 5e-2
    assert np.sqrt(np.sum(np.abs(h0r) ** 2 * d.area)) \
        < 2e-2 * np.sqrt(np.sum(np.abs(f.fn(d.x, d.y)) ** 2 * d.area))


def test_recover_h0_attenuated(geom_mid, att_rec):
    h0 = phantoms.poly_bump(1.0, 2)
    I = forward_Iperp(geom_mid, att_rec, None, h_grad_fn=h0.grad)
    fr, h0r, diag = recover_f_h0(geom_mid, att_rec, I)
    d = geom_mid.disk
    assert _l2(d, h0r, h0.fn(d.x, d.y)) < 5e-2
    assert np.sqrt(np.sum(np.abs(fr) ** 2 * d.area)) \
        < 5e-2 * np.sqrt(np.sum(np.abs(h0.fn(d.x, d.y)) ** 2 * d.area))


def test_recover_zero_data(geom_mid, att_rec):
    f, h0, _ = recover_f_h0(geom_mid, att_rec, np.zeros(geom_mid.fan.shape, complex))
    assert np.abs(f).max() < 1e-10
    assert np.abs(h0).max() < 1e-10


def test_omega_recovery_in_span(geom_mid, att_rec, rng):
    P = 6
    cp = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) * np.exp(-0.3 * np.arange(P))
    cm = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) * np.exp(-0.3 * np.arange(P))
    D = forward_omegas(geom_mid, att_rec, cp, cm, P)
    op, om, cpr, cmr, diag = recover_omegas(geom_mid, att_rec, D, P)
    bp, bm = omega_bases(geom_mid, P)
    d = geom_mid.disk
    assert _l2(d, op, bp.coeff @ cp) < 3e-2
    assert _l2(d, om, bm.coeff @ cm) < 3e-2
    # Bessel mass bounded by the data-side energy surrogate
    assert diag["bessel_plus"] <= np.sum(np.abs(cp) ** 2) * 1.2 + 1e-12


def test_omega_insensitivity(geom_mid, att_rec, rng):
    f = phantoms.random_smooth(rng, 2)
    h0 = phantoms.poly_bump(1.0, 2)
    D = forward_I0(geom_mid, att_rec, None, f_fn=f.fn) \
        + forward_Iperp(geom_mid, att_rec, None, h_grad_fn=h0.grad)
    _, _, cp, cm, _ = recover_omegas(geom_mid, att_rec, D, 6)
    scale = geom_mid.fan.norm_mu(D)
    assert np.abs(cp).max() < 2e-2 * scale
    assert np.abs(cm).max() < 2e-2 * scale


def test_omega_zero_data(geom_mid, att_rec):
    op, om, cp, cm, _ = recover_omegas(geom_mid, att_rec,
                                       np.zeros(geom_mid.fan.shape, complex), 6)
    assert np.abs(op).max() == 0.0 and np.abs(cm).max() == 0.0


def test_decompose_full_quadruple(geom_mid, att_rec, rng):
    P = 6
    cp = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) * np.exp(-0.3 * np.arange(P))
    cm = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) * np.exp(-0.3 * np.arange(P))
    f = phantoms.gaussian(1.0, (0.15, -0.1), 0.35)
    h0 = phantoms.poly_bump(1.0, 2)
    D = (forward_omegas(geom_mid, att_rec, cp, cm, P)
         + forward_I0(geom_mid, att_rec, None, f_fn=f.fn)
         + forward_Iperp(geom_mid, att_rec, None, h_grad_fn=h0.grad))
    q = decompose_data(geom_mid, att_rec, D, count=P)
    d = geom_mid.disk
    bp, bm = omega_bases(geom_mid, P)
    assert _l2(d, q.f, f.fn(d.x, d.y)) < 8e-2
    assert _l2(d, q.h0, h0.fn(d.x, d.y)) < 8e-2
    assert _l2(d, q.omega_plus, bp.coeff @ cp) < 8e-2
    assert _l2(d, q.omega_minus, bm.coeff @ cm) < 8e-2
    back = forward_quadruple(geom_mid, att_rec, q)
    assert geom_mid.fan.norm_mu(back - D) / geom_mid.fan.norm_mu(D) < 5e-2


def test_decompose_zero(geom_mid, att_rec):
    q = decompose_data(geom_mid, att_rec, np.zeros(geom_mid.fan.shape, complex), count=4)
    assert np.abs(q.f).max() < 1e-10
    assert np.abs(q.h0).max() < 1e-10
    assert np.abs(q.coeff_plus).max() == 0.0


def test_projection_idempotence_and_completeness(geom_mid, att_rec, rng):
    P = 6
    cp = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) * np.exp(-0.5 * np.arange(P))
    cm = np.zeros(P, complex)
    f = phantoms.gaussian(1.0, (0.1, 0.0), 0.4)
    h0 = phantoms.poly_bump(0.7, 2)
    D = (forward_omegas(geom_mid, att_rec, cp, cm, P)
         + forward_I0(geom_mid, att_rec, None, f_fn=f.fn)
         + forward_Iperp(geom_mid, att_rec, None, h_grad_fn=h0.grad))
    proj = projections(geom_mid, att_rec, count=P)
    nD = geom_mid.fan.norm_mu(D)
    total = np.zeros_like(D)
    for name in ("p_plus1", "p_minus1", "p_0", "p_perp"):
        Pu = proj[name](D)
        PPu = proj[name](Pu)
        assert geom_mid.fan.norm_mu(PPu - Pu) / nD < 2e-2, name
        total = total + Pu
    assert geom_mid.fan.norm_mu(total - D) / nD < 5e-2


def test_projection_sorting(geom_mid, att_rec):
    # data of a pure function phantom: P_0 reproduces it, P_perp kills it
    f = phantoms.gaussian(1.0, (0.0, 0.1), 0.4)
    D = forward_I0(geom_mid, att_rec, None, f_fn=f.fn)
    proj = projections(geom_mid, att_rec, count=6)
    nD = geom_mid.fan.norm_mu(D)
    assert geom_mid.fan.norm_mu(proj["p_0"](D) - D) / nD < 5e-2
    assert geom_mid.fan.norm_mu(proj["p_perp"](D)) / nD < 5e-2
    assert geom_mid.fan.norm_mu(proj["p_plus1"](D)) / nD < 5e-2
