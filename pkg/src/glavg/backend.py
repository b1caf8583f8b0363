"""Kernel backend selection.

Two interchangeable kernel implementations exist: a compiled Cython
extension with per-path scalar loops (fast at small batch sizes) and a
pure-numpy implementation vectorized across paths (fast at large batch
sizes).  `select(batch)` applies the policy; the GLAVG_KERNEL environment
variable ("cython", "numpy", "auto") overrides the default policy.

The choice is deterministic given the policy and the workload, so runs
remain reproducible; the active policy is recorded in run manifests.
"""

from __future__ import annotations

import os

from . import _kernels_np

try:
    from . import _kernels_cy

    HAVE_CYTHON = True
except ImportError:
    _kernels_cy = None
    HAVE_CYTHON = False

# numpy's SIMD transcendentals win once the batch is wide enough
AUTO_BATCH_CUTOVER = 16


def policy() -> str:
    p = os.environ.get("GLAVG_KERNEL", "auto").lower()
    if p not in ("auto", "cython", "numpy"):
        raise ValueError(f"GLAVG_KERNEL must be auto, cython or numpy, got {p!r}")
    return p


def select(batch: int = 1):
    """Return the kernel module for a workload of `batch` concurrent paths."""
    p = policy()
    if p == "numpy":
        return _kernels_np
    if p == "cython":
        if not HAVE_CYTHON:
            raise RuntimeError(
                "GLAVG_KERNEL=cython but the compiled extension is not available"
            )
        return _kernels_cy
    if HAVE_CYTHON and batch < AUTO_BATCH_CUTOVER:
        return _kernels_cy
    return _kernels_np


def describe() -> dict:
    return {
        "policy": policy(),
        "cython_available": HAVE_CYTHON,
        "single_path": select(1).BACKEND,
        "batched": select(64).BACKEND,
    }
