"""Flat binary array files with a JSON sidecar header.

Data file: raw little-endian values (complex128 or float64), C order.
Sidecar ``<path>.json``: {"dtype", "shape", "field", "grid"} plus any extra
metadata the writer wants to attach.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import InputError

_DTYPES = {"complex128": "<c16", "float64": "<f8"}


def write_field(path, values, field="field", grid=None, **extra):
    values = np.asarray(values)
    if np.iscomplexobj(values):
        dtype = "complex128"
        raw = values.astype("<c16")
    else:
        dtype = "float64"
        raw = values.astype("<f8")
    meta = {"dtype": dtype, "shape": list(values.shape), "field": field}
    if grid is not None:
        meta["grid"] = grid
    meta.update(extra)
    with open(path, "wb") as fh:
        fh.write(raw.tobytes(order="C"))
    with open(str(path) + ".json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)


def read_field(path):
    sidecar = str(path) + ".json"
    if not os.path.exists(sidecar):
        raise InputError(f"missing sidecar header {sidecar}")
    try:
        with open(sidecar) as fh:
            meta = json.load(fh)
        dtype = _DTYPES[meta["dtype"]]
        shape = tuple(int(s) for s in meta["shape"])
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"corrupt sidecar header {sidecar}: {exc}") from exc
    raw = np.fromfile(path, dtype=dtype)
    expected = int(np.prod(shape)) if shape else raw.size
    if raw.size != expected:
        raise InputError(
            f"{path}: file holds {raw.size} values, header promises {expected}"
        )
    return raw.reshape(shape), meta
