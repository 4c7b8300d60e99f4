import numpy as np
import pytest

from geotomo import (
    Attenuation,
    forward_I0,
    forward_Iperp,
    forward_pair,
    phantoms,
    range_test_I0,
    range_test_I1sol,
    range_test_pair,
)
from geotomo.range_ops import _p_matrix, _p_pinv


@pytest.fixture(scope="module")
def att_range():
    return Attenuation.gaussian(0.6 + 0.4j, (0.1, 0.0), 0.5)


def test_zero_data_passes(geom_mid, att_range):
    rep = range_test_pair(geom_mid, att_range, np.zeros(geom_mid.fan.shape, complex))
    assert rep.verdict and rep.residual_relative == 0.0


def test_in_range_pair_probe(geom_mid, att_range, rng):
    p = phantoms.random_pair(geom_mid, rng)
    u = forward_pair(geom_mid, att_range, p)
    rep = range_test_pair(geom_mid, att_range, u)
    assert rep.residual_relative < 1e-2
    assert rep.verdict


def test_out_of_range_probe(geom_mid, att_range, rng):
    # random data minus its projection onto the resolved range: residual ~ 1
    Pm = _p_matrix(geom_mid, att_range).entries
    Pd = _p_pinv(geom_mid, att_range, 1e-6).entries
    noise = rng.standard_normal(geom_mid.fan.shape) \
        + 1j * rng.standard_normal(geom_mid.fan.shape)
    proj = (Pm @ (Pd @ noise.ravel())).reshape(geom_mid.fan.shape)
    u = noise - proj
    rep = range_test_pair(geom_mid, att_range, u)
    assert not rep.verdict
    assert rep.residual_relative > 0.5


def test_separation_ratio(geom_mid, att_range, rng):
    ins, outs = [], []
    Pm = _p_matrix(geom_mid, att_range).entries
    Pd = _p_pinv(geom_mid, att_range, 1e-6).entries
    for _ in range(4):
        p = phantoms.random_pair(geom_mid, rng)
        ins.append(range_test_pair(geom_mid, att_range,
                                   forward_pair(geom_mid, att_range, p)).residual_relative)
        noise = rng.standard_normal(geom_mid.fan.shape) \
            + 1j * rng.standard_normal(geom_mid.fan.shape)
        u = noise - (Pm @ (Pd @ noise.ravel())).reshape(geom_mid.fan.shape)
        outs.append(range_test_pair(geom_mid, att_range, u).residual_relative)
    assert np.median(outs) > 10 * np.median(ins)


def test_right_inverse_on_resolved_range(geom_mid, att_range, rng):
    Pm = _p_matrix(geom_mid, att_range).entries
    Pd = _p_pinv(geom_mid, att_range, 1e-6)
    U, s, Vh = np.linalg.svd(Pm, full_matrices=False)
    keep = s >= 1e-6 * s[0]
    # y in the span of retained left singular vectors
    coef = rng.standard_normal(int(keep.sum())) + 1j * rng.standard_normal(int(keep.sum()))
    y = U[:, keep] @ coef
    res = Pm @ (Pd.entries @ y) - y
    assert np.linalg.norm(res) / np.linalg.norm(y) < 1e-6


def test_I0_membership(geom_mid, att_range, rng):
    f = phantoms.random_smooth(rng, 2)
    u = forward_I0(geom_mid, att_range, None, f_fn=f.fn)
    rep = range_test_I0(geom_mid, att_range, u)
    assert rep.residual_relative < 2e-2
    assert rep.condition_flags["sharp_mode0"] < 2e-2
    assert rep.verdict


def test_I0_rejects_perp_data(geom_mid, att_range, rng):
    h = phantoms.random_smooth(rng, 2)
    u = forward_Iperp(geom_mid, att_range, None, h_grad_fn=h.grad)
    rep = range_test_I0(geom_mid, att_range, u)
    # fit or constraint must fail visibly
    assert (not rep.verdict) and (
        rep.condition_flags["sharp_mode0"] > 5e-2 or rep.residual_relative > 5e-2
    )


def test_I1sol_membership(geom_mid, att_range, rng):
    h = phantoms.random_smooth(rng, 2)
    u = forward_Iperp(geom_mid, att_range, None, h_grad_fn=h.grad)
    rep = range_test_I1sol(geom_mid, att_range, u)
    assert rep.residual_relative < 2e-2
    assert rep.verdict


def test_report_json(geom_mid, att_range, rng):
    import json

    p = phantoms.random_pair(geom_mid, rng)
    rep = range_test_pair(geom_mid, att_range, forward_pair(geom_mid, att_range, p))
    blob = json.loads(rep.to_json(grid_descriptor={"n": 48}))
    assert set(blob) >= {"residual_relative", "verdict", "tolerance", "grid"}
    assert blob["svd_spectrum"]["count"] > 0
