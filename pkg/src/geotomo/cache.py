"""Disk cache for assembled operators, keyed by content hashes."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np


def _key(parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str)
    return hashlib.sha1(blob.encode()).hexdigest()


class OperatorCache:
    """npz files under a directory, guarded by a lock file."""

    def __init__(self, directory):
        self.directory = str(directory)
        os.makedirs(self.directory, exist_ok=True)

    def _path(self, parts):
        return os.path.join(self.directory, _key(parts) + ".npz")

    def load(self, parts):
        path = self._path(parts)
        if not os.path.exists(path):
            return None
        try:
            with np.load(path, allow_pickle=False) as z:
                return {k: z[k] for k in z.files}
        except (OSError, ValueError):
            return None

    def store(self, parts, arrays: dict):
        from filelock import FileLock

        path = self._path(parts)
        with FileLock(os.path.join(self.directory, "cache.lock")):
            tmp = path + ".tmp"
            np.savez(tmp, **arrays)
            os.replace(tmp + ".npz" if os.path.exists(tmp + ".npz") else tmp, path)


def get_cache(geom) -> OperatorCache | None:
    if geom.cache_dir is None:
        return None
    return OperatorCache(geom.cache_dir)
