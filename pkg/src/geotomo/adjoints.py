"""Adjoint transforms by weighted backprojection, P = B H Q, dense assembly.

The adjoint of the attenuated transform with respect to the mu-weighted
boundary product and the Liouville product is ``U_{-conj(a)} h_psi``; its
fiber modes give the adjoints over functions (factor 2 pi) and one-forms
(factor pi on modes -1 and +1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import modes_to_oneform
from .errors import DomainError
from .transport import (
    Attenuation,
    Geometry,
    forward_I0,
    forward_Ipm1,
    forward_Iperp,
    op_B,
    op_Q,
    psi_extension,
)


def adjoint_I(geom: Geometry, a: Attenuation, h, fine=False):
    """I_a^* h = U_{-conj(a)} h_psi on the sphere-bundle grid."""
    batch = geom.sm_fine_batch() if fine else geom.sm_batch()
    nt = geom.theta_fine if fine else geom.sm.n_theta
    U = batch.u_field(a.minus_conj()).reshape(geom.disk.n_nodes, nt)
    return U * psi_extension(geom, h, fine=fine)


def adjoint_I0(geom: Geometry, a: Attenuation, h):
    """(I_a^0)^* h = 2 pi (U_{-conj(a)} h_psi)_0, a function on the disk."""
    return 2.0 * np.pi * geom.sm.mode(adjoint_I(geom, a, h), 0)


def adjoint_I1(geom: Geometry, a: Attenuation, h):
    """(I_a^1)^* h: one-form with modes pi (.)_{-1} + pi (.)_{+1}."""
    G = adjoint_I(geom, a, h)
    cp = np.pi * geom.sm.mode(G, +1)
    cm = np.pi * geom.sm.mode(G, -1)
    return modes_to_oneform(geom.metric, geom.disk, cp, cm)


def op_P(geom: Geometry, a: Attenuation, w):
    """P_a w = B_a H Q_a w on the fan grid.

    The fiberwise Hilbert transform of the boundary restriction of w_sharp
    coincides with the fiberwise transform of Q_a w on the boundary circles
    (H acts only along the fiber), which is what is computed here.
    """
    return op_B(geom, a, geom.bsm.hilbert(op_Q(geom, a, w)))


def factorization_residual(geom: Geometry, a: Attenuation, w):
    """Relative residual of -2 pi P_a w = I_a [ star d F , star d A ].

    F = (I^0_{-conj a})^* w (a function, giving the one-form slot) and
    A = (I^1_{-conj a})^* w (a one-form, giving the function slot).
    """
    from .calculus import star_d_oneform, star_d_scalar
    from .transport import Pair, forward_pair

    amc = a.minus_conj()
    F = adjoint_I0(geom, amc, w)
    Ax, Ay = adjoint_I1(geom, amc, w)
    ox, oy = star_d_scalar(geom.disk, F)
    f_slot = star_d_oneform(geom.metric, geom.disk, Ax, Ay)
    rhs = forward_pair(geom, a, Pair(ox, oy, f_slot))
    lhs = -2.0 * np.pi * op_P(geom, a, w)
    return geom.fan.norm_mu(lhs - rhs) / max(geom.fan.norm_mu(rhs), 1e-300)


# ---------------------------------------------------------------------------
# dense operator assembly
# ---------------------------------------------------------------------------

@dataclass
class OperatorMatrix:
    """Dense realization of a discretized linear operator.

    ``w_in`` / ``w_out`` are the quadrature weights of the domain and
    codomain inner products (flattened); the weighted adjoint is then
    ``diag(1/w_in) A^H diag(w_out)``.
    """

    entries: np.ndarray
    in_descriptor: dict
    out_descriptor: dict
    w_in: np.ndarray
    w_out: np.ndarray

    @property
    def shape(self):
        return self.entries.shape

    def apply(self, v):
        return self.entries @ np.asarray(v).ravel()

    def adjoint_matrix(self):
        A = self.entries
        return OperatorMatrix(
            entries=(A.conj().T * self.w_out[None, :]) / self.w_in[:, None],
            in_descriptor=self.out_descriptor,
            out_descriptor=self.in_descriptor,
            w_in=self.w_out,
            w_out=self.w_in,
        )

    def svd(self):
        if not hasattr(self, "_svd"):
            self._svd = np.linalg.svd(self.entries, full_matrices=False)
        return self._svd


def pinv(m: OperatorMatrix, rel_cutoff: float = 1e-6) -> OperatorMatrix:
    """Truncated-SVD pseudoinverse, dropping sigma < rel_cutoff * sigma_max."""
    if not (0.0 < rel_cutoff < 1.0):
        raise DomainError("rel_cutoff must lie in (0, 1)")
    U, s, Vh = m.svd()
    if s.size == 0 or s[0] == 0.0:
        raise DomainError("cannot invert a rank-0 matrix")
    keep = s >= rel_cutoff * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    entries = (Vh.conj().T * inv[None, :]) @ U.conj().T
    out = OperatorMatrix(
        entries=entries,
        in_descriptor=m.out_descriptor,
        out_descriptor=m.in_descriptor,
        w_in=m.w_out,
        w_out=m.w_in,
    )
    out.spectrum = s
    out.rank = int(keep.sum())
    return out


_MATRIX_BUDGET = 12_000 * 12_000


def _apply_named(geom, name, a, vec, fan_shape):
    from .transport import forward_I0 as f0, forward_Ipm1 as fpm, forward_Iperp as fperp

    if name == "op_P":
        return op_P(geom, a, vec.reshape(fan_shape)).ravel()
    if name == "forward_I0":
        return f0(geom, a, vec).ravel()
    if name == "forward_Iperp":
        return fperp(geom, a, vec).ravel()
    if name == "forward_Ip1":
        return fpm(geom, a, vec, +1).ravel()
    if name == "forward_Im1":
        return fpm(geom, a, vec, -1).ravel()
    if name == "adjoint_I0":
        return adjoint_I0(geom, a, vec.reshape(fan_shape))
    if name == "adjoint_I1":
        ax, ay = adjoint_I1(geom, a, vec.reshape(fan_shape))
        return np.concatenate([ax, ay])
    raise DomainError(f"unknown operator name {name!r}")


def assemble(geom: Geometry, name: str, a: Attenuation, cache=True) -> OperatorMatrix:
    """Dense matrix of a named operator, by applying it to basis vectors.

    Known names: op_P, forward_I0, forward_Iperp, forward_Ip1, forward_Im1,
    adjoint_I0, adjoint_I1. Results are memoized on the geometry and written
    to the geometry's disk cache when one is configured.
    """
    key = ("assemble", name, a.key)

    def build():
        fan = geom.fan
        n_fan = fan.n_beta * fan.n_alpha
        n_nodes = geom.disk.n_nodes
        w_fan = fan.weight.ravel()
        w_node = (geom.disk.area * geom.sm.e2lam).astype(float)
        domains = {
            "op_P": (n_fan, w_fan, n_fan, w_fan),
            "forward_I0": (n_nodes, w_node, n_fan, w_fan),
            "forward_Iperp": (n_nodes, w_node, n_fan, w_fan),
            "forward_Ip1": (n_nodes, w_node, n_fan, w_fan),
            "forward_Im1": (n_nodes, w_node, n_fan, w_fan),
            "adjoint_I0": (n_fan, w_fan, n_nodes, w_node),
            "adjoint_I1": (n_fan, w_fan, 2 * n_nodes, np.concatenate([geom.disk.area] * 2)),
        }
        if name not in domains:
            raise DomainError(f"unknown operator name {name!r}")
        n_in, w_in, n_out, w_out = domains[name]
        if n_in * n_out > _MATRIX_BUDGET:
            raise DomainError(
                f"assembled {name} would be {n_out}x{n_in}, over the size budget"
            )

        from .cache import get_cache

        store = get_cache(geom) if cache else None
        parts = ["assemble", name, a.key, geom.key]
        if store is not None:
            hit = store.load(parts)
            if hit is not None:
                return OperatorMatrix(hit["entries"], {"name": name, "side": "in"},
                                      {"name": name, "side": "out"}, w_in, w_out)

        cols = np.zeros((n_out, n_in), dtype=complex)
        basis = np.zeros(n_in, dtype=complex)
        for j in range(n_in):
            basis[j] = 1.0
            cols[:, j] = _apply_named(geom, name, a, basis, geom.fan.shape)
            basis[j] = 0.0
        mat = OperatorMatrix(cols, {"name": name, "side": "in"},
                             {"name": name, "side": "out"}, w_in, w_out)
        if store is not None:
            store.store(parts, {"entries": cols})
        return mat

    return geom._get(key, build)


def assemble_from_apply(geom, apply_fn, n_in, n_out, w_in, w_out, desc):
    """Dense matrix of an arbitrary linear map given by its action."""
    if n_in * n_out > _MATRIX_BUDGET:
        raise DomainError("assembled operator over the size budget")
    cols = np.zeros((n_out, n_in), dtype=complex)
    basis = np.zeros(n_in, dtype=complex)
    for j in range(n_in):
        basis[j] = 1.0
        cols[:, j] = apply_fn(basis)
        basis[j] = 0.0
    return OperatorMatrix(cols, {"name": desc, "side": "in"},
                          {"name": desc, "side": "out"}, np.asarray(w_in), np.asarray(w_out))
