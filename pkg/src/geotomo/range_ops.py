"""Numerical range characterizations of the attenuated transform.

Membership in the range of the transform over pairs is tested by least
squares against the assembled boundary operator P_a; the sub-ranges over
functions and solenoidal one-forms add weighted linear constraint rows on
the preimage (vanishing fiber average of w_sharp, respectively exactness of
its degree +-1 one-form). A second characterization composes the
reconstruction-based projections.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .adjoints import OperatorMatrix, assemble, pinv
from .errors import DomainError
from .transport import Attenuation, Geometry

from .holo import antipodal_pullback, antipodal_split  # noqa: F401 (re-export)


@dataclass
class RangeReport:
    residual_relative: float
    witness_w: np.ndarray
    condition_flags: dict
    verdict: bool
    tolerance: float
    spectrum: np.ndarray | None = None

    def to_json(self, grid_descriptor=None):
        out = {
            "residual_relative": self.residual_relative,
            "conditions": {k: float(v) for k, v in self.condition_flags.items()},
            "verdict": bool(self.verdict),
            "tolerance": self.tolerance,
        }
        if grid_descriptor:
            out["grid"] = grid_descriptor
        if self.spectrum is not None:
            s = np.asarray(self.spectrum)
            out["svd_spectrum"] = {
                "max": float(s.max()),
                "min": float(s.min()),
                "count": int(s.size),
            }
        return json.dumps(out, indent=1)


def _mode_matrix(geom: Geometry, a: Attenuation, k):
    """Sparse map: fan data w -> fiber mode k of w_sharp on disk nodes."""
    sm = geom.sm
    n_nodes, nt = geom.disk.n_nodes, sm.n_theta
    U = geom.sm_batch().u_field(a)
    ph = np.exp(-1j * k * sm.thetas) / nt
    rows = np.repeat(np.arange(n_nodes), nt)
    cols = np.arange(n_nodes * nt)
    Mk = sp.csr_matrix((np.tile(ph, n_nodes) * U, (rows, cols)),
                       shape=(n_nodes, n_nodes * nt))
    return Mk @ geom.psi_matrix()


def _sharp_mode0_matrix(geom, a):
    return geom._get(("sharp_mode0", a.key), lambda: _mode_matrix(geom, a, 0))


def _curl_pm1_matrix(geom, a):
    """Rows: curl of the one-form carried by modes -1/+1 of w_sharp."""

    def build():
        from .calculus import modes_to_oneform

        Mp = _mode_matrix(geom, a, +1)
        Mm = _mode_matrix(geom, a, -1)
        el = np.exp(geom.metric.lam(geom.disk.x, geom.disk.y))
        Ax = sp.diags(el) @ (Mp + Mm)
        Ay = 1j * sp.diags(el) @ (Mp - Mm)
        return (geom.disk.ddx @ Ay - geom.disk.ddy @ Ax).tocsr()

    return geom._get(("curl_pm1", a.key), build)


def _p_matrix(geom, a):
    return assemble(geom, "op_P", a)


def _p_pinv(geom, a, cutoff):
    key = ("op_P_pinv", a.key, cutoff)
    return geom._get(key, lambda: pinv(_p_matrix(geom, a), cutoff))


def range_test_pair(geom: Geometry, a: Attenuation, u, tol=2e-2, svd_cutoff=1e-6):
    """Least-squares membership test for the range of the transform on pairs."""
    u = geom.fan.check(u)
    un = geom.fan.norm_mu(u)
    if un == 0.0:
        return RangeReport(0.0, np.zeros_like(u), {}, True, tol)
    Pm = _p_matrix(geom, a)
    Pd = _p_pinv(geom, a, svd_cutoff)
    w = (Pd.entries @ u.ravel()).reshape(geom.fan.shape)
    res = (Pm.entries @ w.ravel()).reshape(geom.fan.shape) - u
    r = geom.fan.norm_mu(res) / un
    return RangeReport(float(r), w, {}, bool(r <= tol), tol, spectrum=Pd.spectrum)


def _constrained_test(geom, a, u, C, tol, svd_cutoff, flag_name, weight=None):
    u = geom.fan.check(u)
    un = geom.fan.norm_mu(u)
    if un == 0.0:
        return RangeReport(0.0, np.zeros_like(u), {flag_name: 0.0}, True, tol)
    Pm = _p_matrix(geom, a).entries
    C = C.toarray() if sp.issparse(C) else np.asarray(C)
    if weight is None:
        pscale = np.linalg.norm(Pm) / np.sqrt(Pm.shape[0])
        cscale = np.linalg.norm(C) / np.sqrt(C.shape[0])
        weight = 3.0 * pscale / max(cscale, 1e-300)
    key = ("range_constrained", a.key, flag_name, float(weight), svd_cutoff)

    def build():
        A = np.concatenate([Pm, weight * C], axis=0)
        U_, s, Vh = np.linalg.svd(A, full_matrices=False)
        keep = s >= svd_cutoff * s[0]
        inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
        return (Vh.conj().T * inv[None, :]) @ U_.conj().T

    Ainv = geom._get(key, build)
    y = np.concatenate([u.ravel(), np.zeros(C.shape[0], dtype=complex)])
    w = (Ainv @ y).reshape(geom.fan.shape)
    fit = (Pm @ w.ravel()).reshape(geom.fan.shape) - u
    r = geom.fan.norm_mu(fit) / un
    cres = np.linalg.norm(C @ w.ravel())
    cscale_u = np.linalg.norm(C) / np.sqrt(C.shape[0]) * np.linalg.norm(w.ravel())
    crel = float(cres / max(cscale_u, 1e-300))
    flags = {flag_name: crel}
    verdict = bool(r <= tol and crel <= tol)
    return RangeReport(float(r), w, flags, verdict, tol)


def range_test_I0(geom: Geometry, a: Attenuation, u, tol=2e-2, svd_cutoff=1e-6):
    """Membership in the range over functions: preimage with (w_sharp)_0 = 0."""
    C0 = _sharp_mode0_matrix(geom, a)
    return _constrained_test(geom, a, u, C0, tol, svd_cutoff, "sharp_mode0")


def range_test_I1sol(geom: Geometry, a: Attenuation, u, tol=2e-2, svd_cutoff=1e-6):
    """Membership in the range over solenoidal one-forms.

    The preimage constraint asks the degree +-1 one-form of w_sharp to be
    exact, tested through its curl (the domain is simply connected).
    """
    C1 = _curl_pm1_matrix(geom, a)
    return _constrained_test(geom, a, u, C1, tol, svd_cutoff, "curl_pm1")


def range_test_charac2(geom: Geometry, a: Attenuation, u, which, tol=2e-2,
                       svd_cutoff=1e-6, pipeline=None):
    """Projection-based characterization of the sub-ranges.

    which="I0": pass if u is in the pair range and the degree +-1 and
    perpendicular projections of u vanish; which="I1sol": the function
    projection must vanish instead.
    """
    from .reconstruct import projections

    base = range_test_pair(geom, a, u, tol=tol, svd_cutoff=svd_cutoff)
    un = geom.fan.norm_mu(geom.fan.check(u))
    if un == 0.0:
        return base
    proj = pipeline or projections(geom, a)
    flags = dict(base.condition_flags)
    if which == "I0":
        for name in ("p_plus1", "p_minus1", "p_perp"):
            flags[name] = geom.fan.norm_mu(proj[name](u)) / un
    elif which == "I1sol":
        flags["p_0"] = geom.fan.norm_mu(proj["p_0"](u)) / un
    else:
        raise DomainError("which must be 'I0' or 'I1sol'")
    verdict = bool(base.residual_relative <= tol and all(v <= tol for v in flags.values()))
    return RangeReport(base.residual_relative, base.witness_w, flags, verdict, tol,
                       spectrum=base.spectrum)
