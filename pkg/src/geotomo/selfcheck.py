"""The invariant battery behind the selfcheck command."""

from __future__ import annotations

import numpy as np

from . import phantoms
from .adjoints import adjoint_I, factorization_residual
from .calculus import commutator_residual, structure_residuals
from .errors import InputError
from .tracing import antipodal_fan, euclid_exit
from .transport import d_a_pair, forward_I0, forward_pair, pair_norm


def check_involution(geom, a, rng):
    n = 400
    b = rng.uniform(0, 2 * np.pi, n)
    al = rng.uniform(-1.4, 1.4, n)
    bA, aA = antipodal_fan(geom.metric, b, al, step=1e-3)
    bAA, aAA = antipodal_fan(geom.metric, bA, aA, step=1e-3)
    db = np.abs(np.angle(np.exp(1j * (bAA - b))))
    return float(max(db.max(), np.abs(aAA - al).max())), 1e-6


def check_exactness(geom, a, rng):
    if not geom.metric.is_euclidean:
        return 0.0, 1e-8  # chord law only defined for the flat disk
    from .metrics import BoundaryPoint
    from .tracing import exit_time

    worst = 0.0
    for _ in range(24):
        beta = rng.uniform(0, 2 * np.pi)
        al = rng.uniform(-1.35, 1.35)
        tau = exit_time(geom.metric, BoundaryPoint(beta, al), step=1e-3)
        ref = 2.0 * np.cos(al)
        worst = max(worst, abs(tau - ref) / ref)
    return float(worst), 1e-8


def check_structure(geom, a, rng):
    U = phantoms.random_sm_field(geom.sm, rng, k_range=(-3, 3))
    res = structure_residuals(geom.metric, geom.sm, U)
    return float(max(res.values())), 1e-2


def check_commutator(geom, a, rng):
    U = phantoms.random_sm_field(geom.sm, rng, k_range=(-3, 3))
    a_vals = a(geom.disk.x, geom.disk.y)
    return float(commutator_residual(geom.metric, geom.sm, a_vals, U)), 1e-2


def check_duality(geom, a, rng):
    worst = 0.0
    for _ in range(5):
        f = phantoms.random_smooth(rng, 2)
        h = phantoms.random_boundary_field(geom.fan, rng)
        data = forward_I0(geom, a, None, f_fn=f.fn)
        lhs = geom.fan.inner_mu(data, h)
        G = adjoint_I(geom, a, h)
        F = np.repeat(f.fn(geom.disk.x, geom.disk.y)[:, None], geom.sm.n_theta, axis=1)
        rhs = geom.sm.inner(F, G)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    return float(worst), 1e-3


def check_kernel(geom, a, rng):
    worst = 0.0
    for _ in range(4):
        g = phantoms.random_smooth(rng, 2)
        bump = phantoms.poly_bump(1.0, 2)
        m_fn = lambda x, y: bump.fn(x, y) * g.fn(x, y)

        def grad(x, y):
            bx, by = bump.grad(x, y)
            gx, gy = g.grad(x, y)
            return bx * g.fn(x, y) + bump.fn(x, y) * gx, by * g.fn(x, y) + bump.fn(x, y) * gy

        p = d_a_pair(geom, a, m_fn(geom.disk.x, geom.disk.y), m_fn=m_fn, grad_fn=grad)
        data = forward_pair(geom, a, p)
        worst = max(worst, geom.fan.norm_mu(data) / pair_norm(geom, p))
    return float(worst), 1e-3


def check_factorization(geom, a, rng):
    worst = 0.0
    for _ in range(3):
        w = phantoms.random_boundary_field(geom.fan, rng)
        worst = max(worst, factorization_residual(geom, a, w))
    return float(worst), 1e-2


_TABLE = {
    "involution": check_involution,
    "exactness": check_exactness,
    "structure": check_structure,
    "commutator": check_commutator,
    "duality": check_duality,
    "kernel": check_kernel,
    "factorization": check_factorization,
}


def run_check(name, geom, a, rng):
    if name not in _TABLE:
        raise InputError(f"unknown selfcheck {name!r}")
    return _TABLE[name](geom, a, rng)
