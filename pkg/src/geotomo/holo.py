"""Holomorphic integrating factors, one-sided first integrals, holomorphization.

The constructions reduce to least-squares problems for boundary data of
flow-invariant functions. Unknowns are expanded in a closed-form basis on the
fan (flat-disk invariant seeds plus generic trigonometric columns), so the
flow-invariant extension of any candidate is evaluated *exactly* at the
backward entry coordinates of each phase-space point: no fan interpolation
enters these solves.

The holomorphization operator combines fiberwise Hilbert transforms with a
right inverse of the unattenuated boundary operator P, built from
truncated-SVD pseudoinverses of its antipodal blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .adjoints import OperatorMatrix, assemble, pinv
from .calculus import eta_minus_mode, eta_plus_mode
from .errors import DomainError
from .transport import (
    Attenuation,
    Geometry,
    op_B,
    op_Q,
    fan_theta_eval,
)

_ZERO = Attenuation.zero()
_N_SEEDS = 10
_K_RESP = tuple(range(-8, 9))


# ---------------------------------------------------------------------------
# closed-form solve basis on the fan
# ---------------------------------------------------------------------------

class FanSolveBasis:
    """Closed-form boundary-data basis with exact off-grid evaluation.

    Columns: flat-disk invariant seeds w_p = e^{i(p+1)theta} Im(z e^{-i
    theta})^p / s_p (flow invariant with modes {1, .., 2p+1} and mode-1 part
    z^p), their conjugates, and generic columns e^{i m beta + i k alpha}.
    """

    def __init__(self, geom, n_four=12, n_alpha_modes=10):
        self.geom = geom
        self.n_four = n_four
        self.n_alpha_modes = n_alpha_modes
        psi = 2.0 * np.pi * np.arange(512) / 512
        s = [(np.sin(psi) ** p * np.exp(-1j * p * psi)).mean() for p in range(_N_SEEDS)]
        # normalize seeds to unit sup on the fan
        self.seed_scale = np.array([1.0 / abs(s[p]) for p in range(_N_SEEDS)])
        self.s_p = np.asarray(s)
        self.n_seeds = _N_SEEDS
        ms = np.arange(-n_four, n_four + 1)
        kk = np.arange(-n_alpha_modes, n_alpha_modes + 1)
        self.ms, self.kk = ms, kk
        self.n_generic = ms.size * kk.size
        self.n_cols = 2 * self.n_seeds + self.n_generic
        self.tik_mask = np.concatenate(
            [np.zeros(2 * self.n_seeds), np.ones(self.n_generic)]
        )

    def evaluate(self, coeffs, beta, alpha):
        """Exact evaluation of the combination at arbitrary fan coordinates."""
        beta = np.asarray(beta, dtype=float).ravel()
        alpha = np.asarray(alpha, dtype=float).ravel()
        th = beta + np.pi - alpha
        a_inv = -np.sin(alpha)
        out = np.zeros(beta.size, dtype=complex)
        for p in range(self.n_seeds):
            # unit-sup seed: |a_inv| <= 1 so sup |w_raw| = 1/|s_p|
            w = np.exp(1j * (p + 1) * th) * a_inv**p * (abs(self.s_p[p]) / self.s_p[p])
            out += coeffs[p] * w
            out += coeffs[self.n_seeds + p] * np.conj(w)
        g = coeffs[2 * self.n_seeds :].reshape(self.ms.size, self.kk.size)
        e1 = np.exp(1j * np.outer(beta, self.ms))
        e2 = np.exp(1j * np.outer(alpha, self.kk))
        out += np.einsum("tm,mk,tk->t", e1, g, e2, optimize=True)
        return out

    def column_values(self, beta, alpha):
        """Generator of per-column values at given points (bulk evaluation)."""
        beta = np.asarray(beta, dtype=float).ravel()
        alpha = np.asarray(alpha, dtype=float).ravel()
        th = beta + np.pi - alpha
        a_inv = -np.sin(alpha)
        for p in range(self.n_seeds):
            yield np.exp(1j * (p + 1) * th) * a_inv**p * (abs(self.s_p[p]) / self.s_p[p])
        for p in range(self.n_seeds):
            yield np.conj(
                np.exp(1j * (p + 1) * th) * a_inv**p * (abs(self.s_p[p]) / self.s_p[p])
            )
        E1 = np.exp(1j * np.outer(beta, self.ms))
        E2 = np.exp(1j * np.outer(alpha, self.kk))
        for mi in range(self.ms.size):
            for ki in range(self.kk.size):
                yield E1[:, mi] * E2[:, ki]

    def columns_on_fan(self):
        fan = self.geom.fan
        B, A = fan.B.ravel(), fan.A.ravel()
        return np.stack(list(self.column_values(B, A)), axis=1)


def solve_basis(geom: Geometry) -> FanSolveBasis:
    return geom._get("solve_basis", lambda: FanSolveBasis(geom))


def _entry_coords(geom, where):
    if where == "sm":
        return geom.sm_batch().entry_beta_alpha()
    if where == "fine":
        return geom.sm_fine_batch().entry_beta_alpha()
    if where == "bsm":
        return geom.bsm_batch().entry_beta_alpha()
    raise DomainError(f"unknown grid {where!r}")


def invariant_field(geom: Geometry, coeffs, where="sm"):
    """Flow-invariant extension of basis data, exactly, on a chosen grid."""
    bas = solve_basis(geom)
    be, al = _entry_coords(geom, where)
    vals = bas.evaluate(coeffs, be, al)
    if where == "sm":
        return vals.reshape(geom.sm.shape)
    if where == "fine":
        return vals.reshape(geom.disk.n_nodes, geom.theta_fine)
    return vals.reshape(geom.bsm.shape)


def _node_subsample(geom, target=1200):
    n = geom.disk.n_nodes
    stride = max(1, int(np.ceil(n / target)))
    return np.arange(0, n, stride)


def _mode_responses(geom: Geometry):
    """Fiber-mode responses of the basis' invariant extensions.

    Returns (R_sub, sub, R1_full, Rm1_full): R_sub[k] holds mode k at the
    subsampled nodes for k in a window around zero; modes +-1 are kept at
    every node for the ladder-operator stencils of the correction solve.
    """

    def build():
        bas = solve_basis(geom)
        sm = geom.sm
        sub = _node_subsample(geom)
        nc = bas.n_cols
        R_sub = {k: np.zeros((sub.size, nc), dtype=complex) for k in _K_RESP}
        R1 = np.zeros((geom.disk.n_nodes, nc), dtype=complex)
        Rm1 = np.zeros((geom.disk.n_nodes, nc), dtype=complex)
        be, al = _entry_coords(geom, "sm")
        for j, vals in enumerate(bas.column_values(be, al)):
            F = vals.reshape(sm.shape)
            C = np.fft.fft(F, axis=1) / sm.n_theta
            for k in _K_RESP:
                R_sub[k][:, j] = C[sub, k % sm.n_theta]
            R1[:, j] = C[:, 1]
            Rm1[:, j] = C[:, -1 % sm.n_theta]
        return R_sub, sub, R1, Rm1

    return geom._get("mode_responses", build)


def _correction_matrix(geom: Geometry):
    """Columns: (X_perp odd(invariant(basis_j)))_0 on disk nodes."""

    def build():
        _, _, R1, Rm1 = _mode_responses(geom)
        nc = R1.shape[1]
        out = np.zeros((geom.disk.n_nodes, nc), dtype=complex)
        for j in range(nc):
            out[:, j] = 1j * (
                eta_minus_mode(geom.metric, geom.disk, R1[:, j], +1)
                - eta_plus_mode(geom.metric, geom.disk, Rm1[:, j], -1)
            )
        return out

    return geom._get("corr_matrix", build)


def _interior_weight(geom):
    r = np.hypot(geom.disk.x, geom.disk.y)
    t = np.clip((0.95 - r) / 0.13, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t) * np.sqrt(geom.disk.area)


def _masked_lstsq(geom, A, y, cutoff):
    """Least squares with light Tikhonov on the generic basis columns."""
    bas = solve_basis(geom)
    tik = 1e-6 * np.linalg.norm(A) / np.sqrt(A.shape[1])
    A = np.concatenate([A, tik * np.diag(bas.tik_mask).astype(complex)], axis=0)
    y = np.concatenate([y, np.zeros(bas.n_cols, dtype=complex)])
    sol, *_ = np.linalg.lstsq(A, y, rcond=cutoff)
    return sol


# ---------------------------------------------------------------------------
# integrating factors
# ---------------------------------------------------------------------------

@dataclass
class IntegratingFactor:
    """One-sided odd solution w of X w = -b, with its defect diagnostics."""

    side: str                 # "holo" (modes >= 1) or "anti" (modes <= -1)
    b: Attenuation
    coeffs: np.ndarray        # solve-basis coefficients of the odd correction
    w_sm: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    ok: bool = True


class _FineFiber:
    """Fiberwise transforms on the fine-theta node grid."""

    def __init__(self, n_theta):
        self.n_theta = n_theta

    def hilbert(self, f):
        F = np.fft.fft(f, axis=1)
        ks = np.fft.fftfreq(self.n_theta, d=1.0 / self.n_theta)
        return np.fft.ifft(-1j * np.sign(ks)[None, :] * F, axis=1)

    def flip(self, f):
        return np.roll(f, self.n_theta // 2, axis=1)


def _fiber_ops(geom, where):
    if where == "sm":
        return geom.sm
    if where == "fine":
        return _FineFiber(geom.theta_fine)
    if where == "bsm":
        return geom.bsm
    raise DomainError(f"unknown grid {where!r}")


def _one_sided(ops, f, side):
    """(Id + iH) doubles positive modes, kills negative ones; 'anti' mirrors."""
    if side == "holo":
        return f + 1j * ops.hilbert(f)
    return f - 1j * ops.hilbert(f)


def holo_integrating_factor(geom: Geometry, b: Attenuation, side: str,
                            cutoff: float = 1e-8) -> IntegratingFactor:
    """Odd, one-sided solution w of X w = -b by defect correction.

    Starting from the symmetrized beam primitive u (X u = -b, odd), the
    fiber-degree-0 defect i (X_perp u)_0 is cancelled by an odd flow-
    invariant correction fitted over the fan boundary data; (Id +- iH) then
    yields w with the wrong-side modes exactly absent.
    """
    if side not in ("holo", "anti"):
        raise DomainError("side must be 'holo' or 'anti'")
    key = ("ifac", b.key, side)
    if key in geom._memo:
        return geom._memo[key]

    sm = geom.sm
    u = geom.sm_batch().beam_odd(b).reshape(sm.shape)
    defect = 1j * (
        eta_minus_mode(geom.metric, geom.disk, sm.mode(u, +1), +1)
        - eta_plus_mode(geom.metric, geom.disk, sm.mode(u, -1), -1)
    )
    M = _correction_matrix(geom)
    wgt = _interior_weight(geom)
    sol = _masked_lstsq(geom, M * wgt[:, None], -defect * wgt, cutoff)

    P = _odd_invariant(geom, sol, "sm")
    w = _one_sided(sm, u + P, side)

    odd_dev = float(np.abs(w + sm.flip(w)).max() / max(np.abs(w).max(), 1e-300))
    K = sm.K
    wrong = range(-K, 1) if side == "holo" else range(0, K + 1)
    mass_w = sm.mode_mass(w, wrong)
    mass_t = sm.mode_mass(w, range(-K, K + 1))
    from .calculus import apply_X

    res = apply_X(geom.metric, sm, w) + b(geom.disk.x, geom.disk.y)[:, None]
    core = geom.disk.core_mask(0.85)

    def nrm(F):
        g = (np.abs(F) ** 2).sum(axis=1) * sm.dtheta * sm.e2lam
        return np.sqrt(max(float(np.sum((g * geom.disk.area)[core])), 0.0))

    bn = nrm(np.repeat(b(geom.disk.x, geom.disk.y)[:, None], sm.n_theta, axis=1))
    diag = {
        "oddness": odd_dev,
        "wrong_side_mass": float(np.sqrt(mass_w / max(mass_t, 1e-300))),
        "transport_residual": float(nrm(res) / max(bn, 1e-300)),
    }
    fac = IntegratingFactor(side=side, b=b, coeffs=sol, w_sm=w,
                            diagnostics=diag, ok=diag["transport_residual"] < 5e-2)
    geom._memo[key] = fac
    return fac


def _odd_invariant(geom, coeffs, where):
    F = invariant_field(geom, coeffs, where)
    ops = _fiber_ops(geom, where)
    if where == "bsm":
        return 0.5 * (F - geom.bsm.flip(F))
    return 0.5 * (F - ops.flip(F)) if hasattr(ops, "flip") else 0.5 * (
        F - np.roll(F, F.shape[1] // 2, axis=1)
    )


def integrating_factor_field(geom: Geometry, fac: IntegratingFactor, where: str):
    """The factor w on another grid ('fine' node-fiber grid or 'bsm')."""
    if where == "sm":
        return fac.w_sm
    if where == "fine":
        u = geom.sm_fine_batch().beam_odd(fac.b).reshape(
            geom.disk.n_nodes, geom.theta_fine
        )
    else:
        u = geom.bsm_batch().beam_odd(fac.b).reshape(geom.bsm.shape)
    P = _odd_invariant(geom, fac.coeffs, where)
    return _one_sided(_fiber_ops(geom, where), u + P, fac.side)


# ---------------------------------------------------------------------------
# invariant functions with prescribed fiber mode
# ---------------------------------------------------------------------------

def invariant_with_mode(geom: Geometry, m: int, f_target, side: str,
                        penalty: float = 30.0, cutoff: float = 1e-8):
    """Flow-invariant w with w_m = f and one-sided spectrum.

    side="up" suppresses modes k < m, side="down" modes k > m, through
    weighted penalty rows (the weight is exposed because it trades target
    fidelity against leakage). Returns (coeffs, w_sm, diagnostics).
    """
    if side not in ("up", "down"):
        raise DomainError("side must be 'up' or 'down'")
    R_sub, sub, _, _ = _mode_responses(geom)
    if m not in R_sub:
        raise DomainError(f"mode {m} outside the assembled response range")
    wgt_t = np.sqrt(geom.disk.area)[sub]
    wgt_p = _interior_weight(geom)[sub]
    rows = [R_sub[m] * wgt_t[:, None]]
    rhs = [np.asarray(f_target, dtype=complex)[sub] * wgt_t]
    bad = [k for k in _K_RESP if (k < m if side == "up" else k > m)]
    for k in bad:
        rows.append(penalty * R_sub[k] * wgt_p[:, None])
        rhs.append(np.zeros(sub.size, dtype=complex))
    sol = _masked_lstsq(geom, np.concatenate(rows, axis=0), np.concatenate(rhs), cutoff)

    w = invariant_field(geom, sol, "sm")
    sm = geom.sm
    got = sm.mode(w, m)
    tgt = np.asarray(f_target, dtype=complex)
    wnode = geom.disk.area * sm.e2lam
    match = np.sqrt(float(np.sum(np.abs(got - tgt) ** 2 * wnode))
                    / max(float(np.sum(np.abs(tgt) ** 2 * wnode)), 1e-300))
    wrong_mass = sm.mode_mass(w, bad)
    total = sm.mode_mass(w, range(-sm.K, sm.K + 1))
    diag = {
        "mode_match": float(match),
        "wrong_side_mass": float(np.sqrt(wrong_mass / max(total, 1e-300))),
    }
    return sol, w, diag


# ---------------------------------------------------------------------------
# first integrals for the omega reconstruction
# ---------------------------------------------------------------------------

@dataclass
class FirstIntegral:
    """w = e^W v' with (X - conj(a)) w = 0 and prescribed degree component."""

    degree: int
    w_sm: np.ndarray
    trace_fan: np.ndarray
    diagnostics: dict


def first_integral(geom: Geometry, a: Attenuation, phi_coeff, degree: int) -> FirstIntegral:
    """Adjoint transport solution w = phi + one-sided higher modes.

    phi_coeff is the mode coefficient of a member of ker eta_minus (degree
    +1) or ker eta_plus (degree -1); w solves X w = conj(a) w, so that the
    mu-pairing of boundary data with w's trace extracts the coefficient of
    the corresponding harmonic one-form.
    """
    if degree not in (+1, -1):
        raise DomainError("degree must be +1 or -1")
    side = "holo" if degree == +1 else "anti"
    updown = "up" if degree == +1 else "down"
    bfac = a.conj().neg()  # X w' = conj(a)
    fac = holo_integrating_factor(geom, bfac, side)
    c_v, v_sm, diag_v = invariant_with_mode(geom, degree, phi_coeff, updown)

    w_sm = np.exp(fac.w_sm) * v_sm

    w_bsm_fac = integrating_factor_field(geom, fac, "bsm")
    fac_fan = fan_theta_eval(geom, w_bsm_fac)
    p_v = solve_basis(geom).evaluate(c_v, geom.fan.B.ravel(), geom.fan.A.ravel())
    trace = np.exp(fac_fan) * p_v.reshape(geom.fan.shape)

    sm = geom.sm
    got = sm.mode(w_sm, degree)
    tgt = np.asarray(phi_coeff, dtype=complex)
    wnode = geom.disk.area * sm.e2lam
    match = np.sqrt(float(np.sum(np.abs(got - tgt) ** 2 * wnode))
                    / max(float(np.sum(np.abs(tgt) ** 2 * wnode)), 1e-300))

    from .calculus import apply_X

    res = apply_X(geom.metric, sm, w_sm) - np.conj(
        a(geom.disk.x, geom.disk.y)
    )[:, None] * w_sm
    core = geom.disk.core_mask(0.85)

    def nrm(F):
        g = (np.abs(F) ** 2).sum(axis=1) * sm.dtheta * sm.e2lam
        return np.sqrt(max(float(np.sum((g * geom.disk.area)[core])), 0.0))

    diag = {
        "mode_match": float(match),
        "transport_residual": float(nrm(res) / max(nrm(w_sm), 1e-300)),
        "factor": fac.diagnostics,
        "invariant": diag_v,
    }
    return FirstIntegral(degree=degree, w_sm=w_sm, trace_fan=trace, diagnostics=diag)


# ---------------------------------------------------------------------------
# antipodal machinery and holomorphization
# ---------------------------------------------------------------------------

def _fan_pullback_matrix(geom: Geometry):
    """Pullback along the antipodal scattering relation on the fan grid.

    Spectral (Dirichlet kernel) in beta, barycentric in alpha: smooth fields
    pull back with near-spectral accuracy and the double pullback is the
    identity to tracing tolerance.
    """

    def build():
        fan = geom.fan
        fb = geom.fan_batch()
        bA, aA = fb.antipodal_fan()
        n = fan.n_beta
        ksb = np.fft.fftfreq(n, d=1.0 / n)
        W_alpha = fan.alpha_interp_weights(aA)  # (n_fan, n_alpha)
        kernel = np.exp(1j * np.outer(bA, ksb)) @ np.exp(
            -1j * np.outer(ksb, fan.betas)
        ) / n  # (n_fan, n_beta)
        rows, cols, vals = [], [], []
        for ip in range(fan.n_beta):
            col_block = ip * fan.n_alpha + np.arange(fan.n_alpha)
            w = kernel[:, ip][:, None] * W_alpha
            nz = np.nonzero(np.abs(w) > 1e-14)
            rows.append(nz[0])
            cols.append(col_block[nz[1]])
            vals.append(w[nz])
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(fan.n_beta * fan.n_alpha, fan.n_beta * fan.n_alpha),
        )

    return geom._get("antipodal_matrix", build)


def antipodal_pullback(geom: Geometry, w):
    """alpha_A^* w on the fan grid."""
    return (_fan_pullback_matrix(geom) @ geom.fan.check(w).ravel()).reshape(
        geom.fan.shape
    )


def antipodal_split(geom: Geometry, w):
    """w = w_plus + w_minus: symmetric/antisymmetric antipodal parts."""
    Aw = antipodal_pullback(geom, w)
    return 0.5 * (w + Aw), 0.5 * (w - Aw)


class Holomorphizer:
    """The boundary holomorphization operator and its anti counterpart.

    Assembles the unattenuated P on the fan grid, splits it into antipodal
    blocks, takes their truncated-SVD right inverses, and applies the
    defining combination of fiberwise Hilbert transforms and transport
    extensions to boundary-bundle fields.
    """

    def __init__(self, geom: Geometry, svd_cutoff: float = 1e-6):
        self.geom = geom
        self.svd_cutoff = svd_cutoff
        P0 = assemble(geom, "op_P", _ZERO).entries
        A = _fan_pullback_matrix(geom)
        n = P0.shape[0]
        eye = sp.identity(n, format="csr")
        Pip = 0.5 * (eye + A)
        Pim = 0.5 * (eye - A)
        # Pi_minus P0 Pi_plus maps V_plus into V_minus and vice versa
        Mp = (Pip.T @ (Pim @ P0).T).T
        Mm = (Pim.T @ (Pip @ P0).T).T
        w_fan = geom.fan.weight.ravel()
        om = lambda E: OperatorMatrix(np.asarray(E), {"name": "P-block", "side": "in"},
                                      {"name": "P-block", "side": "out"}, w_fan, w_fan)
        self._Pip, self._Pim = Pip, Pim
        self._pinv_p = pinv(om(Mp), svd_cutoff)
        self._pinv_m = pinv(om(Mm), svd_cutoff)
        self._P0 = P0

    def p_dagger(self, y):
        """Right inverse of P on its resolved range, via the antipodal blocks."""
        y = self.geom.fan.check(y).ravel()
        out = self._pinv_m.entries @ (self._Pip @ y) + self._pinv_p.entries @ (
            self._Pim @ y
        )
        return out.reshape(self.geom.fan.shape)

    def forward(self, h_bsm):
        """B-> h for a boundary-bundle field h (returns fan data)."""
        geom = self.geom
        bsm = geom.bsm
        h1 = h_bsm - 1j * bsm.hilbert(h_bsm)          # (Id - iH) h
        b1 = op_B(geom, _ZERO, h1)                    # A_-^* (Id - iH) h
        b2 = self.p_dagger(b1)
        b3 = op_Q(geom, _ZERO, b2)                    # A_+ P^dagger ...
        b4 = 1j * (b3 + 1j * bsm.hilbert(b3))         # i (Id + iH) ...
        return 0.5 * (fan_theta_eval(geom, h1) + fan_theta_eval(geom, b4))

    def backward(self, h_bsm):
        """B<- h = conj(B->(conj h))."""
        return np.conj(self.forward(np.conj(h_bsm)))


def holomorphizer(geom: Geometry, svd_cutoff: float = 1e-6) -> Holomorphizer:
    return geom._get(("holomorphizer", svd_cutoff), lambda: Holomorphizer(geom, svd_cutoff))
