"""Named phantom families and seeded random smooth probes."""

from __future__ import annotations

import numpy as np

from .errors import InputError


class ScalarPhantom:
    """Closed-form scalar field with exact gradient."""

    def __init__(self, fn, grad, desc):
        self.fn = fn
        self.grad = grad
        self.desc = desc

    def __call__(self, x, y):
        return self.fn(x, y)


def gaussian(amplitude=1.0, center=(0.0, 0.0), sigma=0.3):
    amp = complex(amplitude)
    cx, cy = float(center[0]), float(center[1])
    s2 = 2.0 * float(sigma) ** 2

    def fn(x, y):
        return amp * np.exp(-((np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2) / s2)

    def grad(x, y):
        g = fn(x, y)
        return -2.0 * (np.asarray(x) - cx) / s2 * g, -2.0 * (np.asarray(y) - cy) / s2 * g

    return ScalarPhantom(fn, grad, {
        "family": "gaussian", "amplitude": [amp.real, amp.imag],
        "center": [cx, cy], "sigma": float(sigma),
    })


def poly_bump(amplitude=1.0, power=2):
    amp = complex(amplitude)
    m = int(power)

    def fn(x, y):
        r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
        return amp * np.maximum(1.0 - r2, 0.0) ** m

    def grad(x, y):
        r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
        base = amp * m * np.maximum(1.0 - r2, 0.0) ** (m - 1)
        return -2.0 * np.asarray(x) * base, -2.0 * np.asarray(y) * base

    return ScalarPhantom(fn, grad, {"family": "poly-bump",
                                    "amplitude": [amp.real, amp.imag], "power": m})


def zero_phantom():
    z = lambda x, y: np.zeros(np.broadcast(x, y).shape, dtype=complex)
    return ScalarPhantom(z, lambda x, y: (z(x, y), z(x, y)), {"family": "zero"})


def random_smooth(rng, n_bumps=3, sigma_range=(0.3, 0.55), center_box=0.4,
                  complex_amp=True):
    """Sum of random Gaussians: a smooth probe with moderate derivatives."""
    parts = []
    for _ in range(n_bumps):
        c = rng.standard_normal() + (1j * rng.standard_normal() if complex_amp else 0.0)
        cx, cy = rng.uniform(-center_box, center_box, 2)
        s = rng.uniform(*sigma_range)
        parts.append(gaussian(c, (cx, cy), s))

    def fn(x, y):
        return sum(p.fn(x, y) for p in parts)

    def grad(x, y):
        gs = [p.grad(x, y) for p in parts]
        return sum(g[0] for g in gs), sum(g[1] for g in gs)

    return ScalarPhantom(fn, grad, {"family": "random-smooth", "n": n_bumps})


def random_boundary_field(grid, rng, n_beta_modes=3, n_alpha_modes=3, taper=2):
    """Random smooth fan field vanishing to order ``taper`` at grazing angles."""
    B, A = grid.B, grid.A
    out = np.zeros(grid.shape, dtype=complex)
    for _ in range(4):
        m = int(rng.integers(-n_beta_modes, n_beta_modes + 1))
        k = int(rng.integers(1, n_alpha_modes + 1))
        c = rng.standard_normal() + 1j * rng.standard_normal()
        out += c * np.exp(1j * m * B) * np.cos((2 * k - 1) * A)
    return out * np.cos(A) ** taper


def random_sm_field(sm, rng, k_range=(-4, 4), n_bumps=1):
    """Band-limited random field on the sphere bundle (closed-form modes)."""
    d = sm.disk
    out = np.zeros(sm.shape, dtype=complex)
    for k in range(k_range[0], k_range[1] + 1):
        p = random_smooth(rng, n_bumps=n_bumps)
        out += p.fn(d.x, d.y)[:, None] * np.exp(1j * k * sm.thetas)[None, :]
    return out


def random_pair(geom, rng):
    """Random smooth pair with closed-form components."""
    from .transport import Pair

    pax = random_smooth(rng, 2)
    pay = random_smooth(rng, 2)
    pf = random_smooth(rng, 2)
    d = geom.disk
    return Pair(
        pax.fn(d.x, d.y), pay.fn(d.x, d.y), pf.fn(d.x, d.y),
        fns={"ax": pax.fn, "ay": pay.fn, "f": pf.fn},
    )


def scalar_from_config(spec) -> ScalarPhantom:
    if spec is None or spec == "zero" or spec.get("family") == "zero":
        return zero_phantom()
    fam = spec.get("family")
    if fam == "gaussian":
        amp = spec.get("amplitude", 1.0)
        if isinstance(amp, (list, tuple)):
            amp = complex(amp[0], amp[1])
        return gaussian(amp, tuple(spec.get("center", (0.0, 0.0))), spec.get("sigma", 0.3))
    if fam == "poly-bump":
        amp = spec.get("amplitude", 1.0)
        if isinstance(amp, (list, tuple)):
            amp = complex(amp[0], amp[1])
        return poly_bump(amp, spec.get("power", 2))
    raise InputError(f"unknown phantom family {fam!r}")
