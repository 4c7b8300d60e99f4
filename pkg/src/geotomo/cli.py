"""Command-line interface: phantom | forward | reconstruct | rangetest | selfcheck.

One JSON config drives every command; array files use the shared binary
format with JSON sidecars. Exit codes: 0 success, 2 tolerance failure,
3 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import phantoms
from .errors import GeotomoError, InputError
from .io import read_field, write_field
from .metrics import metric_from_config
from .transport import Attenuation, Geometry

EXIT_OK = 0
EXIT_TOLERANCE = 2
EXIT_INPUT = 3

_POW2 = {2**k for k in range(1, 14)}


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    grids = cfg.setdefault("grids", {})
    grids.setdefault("n", 64)
    grids.setdefault("n_theta", 64)
    grids.setdefault("n_beta", 64)
    grids.setdefault("n_alpha", 48)
    for key in ("n_theta", "n_beta"):
        if grids[key] not in _POW2:
            raise InputError(f"grid size {key}={grids[key]} must be a power of two")
    if grids["n"] % 2:
        raise InputError("spatial grid size n must be even")
    cfg.setdefault("basis_size", 8)
    cfg.setdefault("svd_cutoff", 1e-6)
    cfg.setdefault("seed", 0)
    cfg.setdefault("tolerances", {})
    tol = cfg["tolerances"]
    tol.setdefault("range", 2e-2)
    tol.setdefault("reforward", 8e-2)
    for k, v in tol.items():
        if not v > 0:
            raise InputError(f"tolerance {k} must be positive")
    return cfg


def build_geometry(cfg, cache_dir=None):
    metric = metric_from_config(cfg.get("metric", "euclidean"))
    g = cfg["grids"]
    return Geometry(
        metric,
        n=g["n"],
        n_theta=g["n_theta"],
        n_beta=g["n_beta"],
        n_alpha=g["n_alpha"],
        cache_dir=cache_dir or cfg.get("cache_dir"),
    )


def attenuation_from_config(spec) -> Attenuation:
    if spec is None or spec == "zero":
        return Attenuation.zero()
    if isinstance(spec, dict):
        fam = spec.get("family")
        if fam == "zero":
            return Attenuation.zero()
        if fam == "constant":
            v = spec.get("value", 0.0)
            if isinstance(v, (list, tuple)):
                v = complex(v[0], v[1])
            return Attenuation.constant(v)
        if fam == "gaussian":
            amp = spec.get("amplitude", 1.0)
            if isinstance(amp, (list, tuple)):
                amp = complex(amp[0], amp[1])
            return Attenuation.gaussian(amp, tuple(spec.get("center", (0, 0))),
                                        spec.get("sigma", 0.4))
        if fam == "grid":
            vals, meta = read_field(spec["path"])
            from scipy.interpolate import RectBivariateSpline

            ext = meta.get("extent", 1.2)
            xs = np.linspace(-ext, ext, vals.shape[0])
            ys = np.linspace(-ext, ext, vals.shape[1])
            sre = RectBivariateSpline(xs, ys, vals.real)
            sim = RectBivariateSpline(xs, ys, vals.imag)
            return Attenuation(lambda x, y: sre.ev(x, y) + 1j * sim.ev(x, y),
                               {"family": "grid", "path": spec["path"]})
    raise InputError(f"unknown attenuation spec {spec!r}")


def write_pgm(path, disk, values):
    """Binary PGM (P5) of |values| embedded on the lattice, 0 outside."""
    img = np.abs(disk.embed(np.abs(values)))
    top = img.max()
    scaled = np.zeros_like(img) if top == 0 else img / top
    pix = (255 * scaled).round().astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pix.shape[1]} {pix.shape[0]}\n255\n".encode())
        fh.write(pix.T[::-1].tobytes())


def _outdir(cfg, args):
    out = args.out or cfg.get("output_dir", "geotomo-out")
    os.makedirs(out, exist_ok=True)
    return out


def _phantom_fields(cfg, geom):
    spec = cfg.get("phantom", {})
    f = phantoms.scalar_from_config(spec.get("f"))
    h0 = phantoms.scalar_from_config(spec.get("h0"))
    P = cfg["basis_size"]
    cp = np.asarray([complex(c[0], c[1]) for c in spec.get("omega_plus", [])],
                    dtype=complex)
    cm = np.asarray([complex(c[0], c[1]) for c in spec.get("omega_minus", [])],
                    dtype=complex)
    cp = np.concatenate([cp, np.zeros(max(0, P - cp.size), complex)])[:P]
    cm = np.concatenate([cm, np.zeros(max(0, P - cm.size), complex)])[:P]
    return f, h0, cp, cm


def cmd_phantom(cfg, args):
    geom = build_geometry(cfg)
    out = _outdir(cfg, args)
    f, h0, cp, cm = _phantom_fields(cfg, geom)
    d = geom.disk
    gd = geom.disk.descriptor()
    write_field(os.path.join(out, "f.bin"), f(d.x, d.y), field="f", grid=gd)
    write_field(os.path.join(out, "h0.bin"), h0(d.x, d.y), field="h0", grid=gd)
    write_field(os.path.join(out, "omega_plus.bin"), cp, field="omega_plus_coeffs")
    write_field(os.path.join(out, "omega_minus.bin"), cm, field="omega_minus_coeffs")
    print(f"wrote phantom fields to {out}")
    return EXIT_OK


def cmd_forward(cfg, args):
    geom = build_geometry(cfg)
    out = _outdir(cfg, args)
    a = attenuation_from_config(cfg.get("attenuation"))
    f, h0, cp, cm = _phantom_fields(cfg, geom)
    from .reconstruct import forward_omegas
    from .transport import forward_I0, forward_Iperp

    data = forward_I0(geom, a, None, f_fn=f.fn)
    data = data + forward_Iperp(geom, a, None, h_grad_fn=h0.grad)
    if np.any(cp) or np.any(cm):
        data = data + forward_omegas(geom, a, cp, cm, cfg["basis_size"])
    snr = cfg.get("noise_snr")
    if snr is not None and np.isfinite(snr):
        rng = np.random.default_rng(cfg["seed"])
        rms = np.sqrt(np.mean(np.abs(data) ** 2))
        sigma = rms / float(snr)
        data = data + sigma * (
            rng.standard_normal(data.shape) + 1j * rng.standard_normal(data.shape)
        ) / np.sqrt(2.0)
    write_field(os.path.join(out, "data.bin"), data, field="boundary_data",
                grid=geom.fan.descriptor())
    print(f"wrote boundary data to {out}/data.bin")
    return EXIT_OK


def _load_data(cfg, args, geom):
    path = args.data or os.path.join(cfg.get("output_dir", "geotomo-out"), "data.bin")
    vals, meta = read_field(path)
    if tuple(vals.shape) != geom.fan.shape:
        raise InputError(
            f"data shape {vals.shape} does not match fan grid {geom.fan.shape}"
        )
    return np.asarray(vals, dtype=complex)


def cmd_reconstruct(cfg, args):
    geom = build_geometry(cfg)
    out = _outdir(cfg, args)
    a = attenuation_from_config(cfg.get("attenuation"))
    data = _load_data(cfg, args, geom)
    from .reconstruct import decompose_data, forward_quadruple

    q = decompose_data(geom, a, data, count=cfg["basis_size"],
                       svd_cutoff=args.svd_cutoff or cfg["svd_cutoff"])
    gd = geom.disk.descriptor()
    write_field(os.path.join(out, "f_rec.bin"), q.f, field="f", grid=gd)
    write_field(os.path.join(out, "h0_rec.bin"), q.h0, field="h0", grid=gd)
    write_field(os.path.join(out, "omega_plus_rec.bin"), q.coeff_plus,
                field="omega_plus_coeffs")
    write_field(os.path.join(out, "omega_minus_rec.bin"), q.coeff_minus,
                field="omega_minus_coeffs")
    write_pgm(os.path.join(out, "f_rec.pgm"), geom.disk, q.f)
    write_pgm(os.path.join(out, "h0_rec.pgm"), geom.disk, q.h0)
    back = forward_quadruple(geom, a, q)
    scale = geom.fan.norm_mu(data)
    re_err = geom.fan.norm_mu(back - data) / scale if scale > 0 else 0.0
    manifest = {
        "reforward_relative": float(re_err),
        "diagnostics": _plain(q.diagnostics),
        "grid": cfg["grids"],
    }
    with open(os.path.join(out, "reconstruction.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    print(f"reforward relative error: {re_err:.3e}")
    if re_err > cfg["tolerances"]["reforward"]:
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_rangetest(cfg, args):
    geom = build_geometry(cfg)
    out = _outdir(cfg, args)
    a = attenuation_from_config(cfg.get("attenuation"))
    data = _load_data(cfg, args, geom)
    from .range_ops import range_test_I0, range_test_I1sol, range_test_pair

    which = cfg.get("rangetest", "pair")
    tol = cfg["tolerances"]["range"]
    cut = args.svd_cutoff or cfg["svd_cutoff"]
    if which == "pair":
        rep = range_test_pair(geom, a, data, tol=tol, svd_cutoff=cut)
    elif which == "I0":
        rep = range_test_I0(geom, a, data, tol=tol, svd_cutoff=cut)
    elif which == "I1sol":
        rep = range_test_I1sol(geom, a, data, tol=tol, svd_cutoff=cut)
    else:
        raise InputError(f"unknown rangetest kind {which!r}")
    path = os.path.join(out, "rangetest.json")
    with open(path, "w") as fh:
        fh.write(rep.to_json(grid_descriptor=cfg["grids"]))
    print(f"range residual {rep.residual_relative:.3e} -> "
          f"{'pass' if rep.verdict else 'FAIL'} ({path})")
    return EXIT_OK if rep.verdict else EXIT_TOLERANCE


_CHECKS = ("involution", "exactness", "structure", "commutator", "duality",
           "kernel", "factorization")


def cmd_selfcheck(cfg, args):
    geom = build_geometry(cfg)
    out = _outdir(cfg, args)
    a = attenuation_from_config(cfg.get("attenuation"))
    rng = np.random.default_rng(cfg["seed"])
    checks = cfg.get("checks", list(_CHECKS))
    report = {}
    from . import selfcheck as sc

    for name in checks:
        if name not in _CHECKS:
            raise InputError(f"unknown selfcheck {name!r}")
        value, tol = sc.run_check(name, geom, a, rng)
        report[name] = {"value": float(value), "tolerance": float(tol),
                        "pass": bool(value <= tol)}
    path = os.path.join(out, "selfcheck.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    for name, entry in report.items():
        state = "pass" if entry["pass"] else "FAIL"
        print(f"{name:14s} {entry['value']:.3e}  (tol {entry['tolerance']:.1e})  {state}")
    print(f"scorecard: {path}")
    return EXIT_OK


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def main(argv=None):
    ap = argparse.ArgumentParser(prog="geotomo",
                                 description="attenuated geodesic X-ray transform toolkit")
    ap.add_argument("command", choices=["phantom", "forward", "reconstruct",
                                        "rangetest", "selfcheck"])
    ap.add_argument("--config", required=True)
    ap.add_argument("--svd-cutoff", type=float, default=None, dest="svd_cutoff")
    ap.add_argument("--out", default=None)
    ap.add_argument("--data", default=None, help="boundary data file (reconstruct/rangetest)")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        handler = {
            "phantom": cmd_phantom,
            "forward": cmd_forward,
            "reconstruct": cmd_reconstruct,
            "rangetest": cmd_rangetest,
            "selfcheck": cmd_selfcheck,
        }[args.command]
        return handler(cfg, args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GeotomoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
