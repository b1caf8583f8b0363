"""Mode-indexed noise sources feeding the time steppers.

Each scalar noise process (one per stream kind, path and signed mode) owns
an independent RngStream seeded through `stable.stream_seed`, so:

  * extending the path count leaves existing paths' draws untouched,
  * truncating to fewer modes reuses the retained modes' draws exactly
    (Galerkin refinement shares low-mode noise across resolutions),
  * the L, Z and Zbar streams of a path never share state.

A source yields blocks of standard SaS step increments shaped (K, 2m) in
the coefficient layout; callers scale them by the per-mode convolution
increment scales.  Block boundaries do not affect the sequence.
"""

from __future__ import annotations

import numpy as np

from .stable import RngStream, mode_codes, sas_from_uniforms, stream_seed


class ModeNoiseSource:
    """Standard SaS step-increment source for one (kind, path) pair."""

    def __init__(self, master_seed: int, kind: int, path: int, m: int, alpha: float):
        self.alpha = alpha
        self.m = m
        self.streams = [
            RngStream(stream_seed(master_seed, kind, path, code))
            for code in mode_codes(m)
        ]

    def standard_block(self, nsteps: int) -> np.ndarray:
        """Next (nsteps, 2m) block of standard SaS increments."""
        u0 = np.empty((nsteps, 2 * self.m))
        u1 = np.empty((nsteps, 2 * self.m))
        for i, stream in enumerate(self.streams):
            u0[:, i], u1[:, i] = stream.uniform_pairs(nsteps)
        return sas_from_uniforms(self.alpha, u0, u1)


class BatchNoiseSource:
    """Sources for a batch of paths, emitting (nsteps, P, 2m) blocks."""

    def __init__(self, master_seed: int, kind: int, paths: list[int], m: int, alpha: float):
        self.sources = [
            ModeNoiseSource(master_seed, kind, path, m, alpha) for path in paths
        ]
        self.m = m
        self.alpha = alpha

    def standard_block(self, nsteps: int) -> np.ndarray:
        P = len(self.sources)
        m2 = 2 * self.m
        u0 = np.empty((nsteps, P, m2))
        u1 = np.empty((nsteps, P, m2))
        for p, src in enumerate(self.sources):
            for i, stream in enumerate(src.streams):
                u0[:, p, i], u1[:, p, i] = stream.uniform_pairs(nsteps)
        return sas_from_uniforms(self.alpha, u0, u1)
