"""Shared helpers: seeding, worker caps, float formatting."""
from __future__ import annotations

import json
import os

import numpy as np

THREADS_ENV = "SCBENCH_THREADS"


def worker_count() -> int:
    """Worker cap taken from SCBENCH_THREADS, at least 1.

    Only ever used to size pools over independent deterministic jobs, so
    results never depend on the value.
    """
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return os.cpu_count() or 1
    return max(1, n)


def seeded_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator derived from (seed, key); same inputs give the same stream."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def fmt_float(x: float) -> str:
    """Serialize with 17 significant digits; round-trips float64 exactly."""
    return format(float(x), ".17g")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
