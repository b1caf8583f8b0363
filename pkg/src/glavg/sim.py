"""Time integration of the coupled slow-fast Galerkin system.

The stepper advances the mild formulation with an exponential Euler rule:
the linear part decays exactly per mode, the drift is evaluated at the
step's left endpoint and weighted by phi(h, lambda) = (1 - e^{-lambda h})/lambda,
and the stochastic convolution increments are exact in law (see stable.py).

    X <- e^{-lambda dt} X + phi(dt, lambda) [N(X) + f(X, Y)]_k + dL_k
    Y <- e^{-lambda dt/eps} Y + phi(dt/eps, lambda) [g(X, Y)]_k + dZ_k

A companion pair whose coupling arguments are frozen at the last breakpoint
t(delta) = floor(t/delta) delta can be advanced in lockstep with the true
pair on the same noise (`khasminskii_pair`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .basis import analysis_matrix, basis_matrix, eigenvalues
from .config import SystemConfig, require_valid
from .couplings import Coupling
from .noise import ModeNoiseSource
from .stable import KIND_L, KIND_Z, convolution_scale


@dataclass
class Trajectory:
    """Snapshots of one component on a uniform record grid."""

    times: np.ndarray  # (n_snap,)
    coeffs: np.ndarray  # (n_snap, 2m)
    label: str
    m: int

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coeffs**2, axis=1))

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")


@dataclass
class PairResult:
    x: Trajectory
    y: Trajectory
    blow_step: int  # -1 when the path stayed finite
    dt: float

    @property
    def blow_time(self) -> float | None:
        return None if self.blow_step < 0 else (self.blow_step + 1) * self.dt


@dataclass
class KhasminskiiResult:
    x: Trajectory
    y: Trajectory
    x_hat: Trajectory
    y_hat: Trajectory
    int_gap_y: float  # integral of ||Y - Yhat|| dt over [0, T]
    sup_gap_x: float  # sup over the step grid of ||X - Xhat||
    blow_step: int
    dt: float


class StepperContext:
    """Precomputed per-config arrays shared by all steppers."""

    def __init__(self, cfg: SystemConfig):
        cfg = require_valid(cfg)
        self.cfg = cfg
        m = cfg.m
        self.m2 = 2 * m
        self.n = cfg.n_quad
        self.lam = eigenvalues(m)
        self.bsyn = basis_matrix(m, self.n)
        self.bana = analysis_matrix(m, self.n)
        dt = cfg.dt
        self.dt = dt
        self.decx = np.exp(-self.lam * dt)
        self.phx = -np.expm1(-self.lam * dt) / self.lam
        self.decy = np.exp(-self.lam * (dt / cfg.eps))
        self.phy = -np.expm1(-self.lam * (dt / cfg.eps)) / self.lam
        self.coupling: Coupling = cfg.coupling_obj()
        self.cpar = self.coupling.params
        self.cid = self.coupling.cid
        sig_l = cfg.spectrum_l().sigmas
        sig_z = cfg.spectrum_z().sigmas
        self.scale_l = convolution_scale(self.lam, sig_l, dt, 1.0, cfg.alpha)
        self.scale_z = convolution_scale(self.lam, sig_z, dt, cfg.eps, cfg.alpha)

    def grid(self, coeffs: np.ndarray) -> np.ndarray:
        """Evaluate coefficient rows on the quadrature grid."""
        return coeffs @ self.bsyn.T


def _record_plan(n_steps: int, stride: int) -> list[int]:
    """Block lengths whose boundaries are the record points (plus T)."""
    plan = [stride] * (n_steps // stride)
    if n_steps % stride:
        plan.append(n_steps % stride)
    return plan


def simulate_pair(cfg: SystemConfig, path_index: int = 0) -> PairResult:
    """One full path of the coupled pair on [0, T]; deterministic in
    (config, seed, path_index)."""
    ctx = StepperContext(cfg)
    cfg = ctx.cfg
    kern = backend.select(1)
    x = cfg.x0_coeffs()[None, :].copy()
    y = cfg.y0_coeffs()[None, :].copy()
    src_l = ModeNoiseSource(cfg.seed, KIND_L, path_index, cfg.m, cfg.alpha)
    src_z = ModeNoiseSource(cfg.seed, KIND_Z, path_index, cfg.m, cfg.alpha)
    blow = np.full(1, -1, dtype=np.int64)
    n_steps = cfg.n_steps()
    times = [0.0]
    snap_x = [x[0].copy()]
    snap_y = [y[0].copy()]
    step = 0
    for K in _record_plan(n_steps, cfg.record_stride):
        dL = (
            src_l.standard_block(K)[:, None, :] * ctx.scale_l
            if cfg.enable_noise_l
            else None
        )
        dZ = (
            src_z.standard_block(K)[:, None, :] * ctx.scale_z
            if cfg.enable_noise_z
            else None
        )
        kern.pair_block(
            K, x, y, dL, dZ, ctx.decx, ctx.phx, ctx.decy, ctx.phy,
            ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar,
            cfg.enable_n, cfg.enable_f, cfg.enable_g,
            None, None, None, blow, step, cfg.blow_thresh,
        )
        step += K
        times.append(step * ctx.dt)
        snap_x.append(x[0].copy())
        snap_y.append(y[0].copy())
    tgrid = np.asarray(times)
    return PairResult(
        x=Trajectory(tgrid, np.asarray(snap_x), "X", cfg.m),
        y=Trajectory(tgrid, np.asarray(snap_y), "Y", cfg.m),
        blow_step=int(blow[0]),
        dt=ctx.dt,
    )


def khasminskii_pair(cfg: SystemConfig, path_index: int = 0) -> KhasminskiiResult:
    """True pair plus the block-frozen companion pair on shared noise.

    The companion's coupling arguments freeze the slow state at the latest
    multiple of delta; both pairs consume the same L and Z draws as a plain
    `simulate_pair` run with the same seed and path index.
    """
    ctx = StepperContext(cfg)
    cfg = ctx.cfg
    kern = backend.select(1)
    x = cfg.x0_coeffs()[None, :].copy()
    y = cfg.y0_coeffs()[None, :].copy()
    xh = x.copy()
    yh = y.copy()
    src_l = ModeNoiseSource(cfg.seed, KIND_L, path_index, cfg.m, cfg.alpha)
    src_z = ModeNoiseSource(cfg.seed, KIND_Z, path_index, cfg.m, cfg.alpha)
    blow = np.full(1, -1, dtype=np.int64)
    gap_int = np.zeros(1)
    gap_sup = np.zeros(1)
    n_steps = cfg.n_steps()
    s_delta = int(round(cfg.delta / ctx.dt))
    stride = math.gcd(cfg.record_stride, s_delta)
    times = [0.0]
    snaps = [[x[0].copy()], [y[0].copy()], [xh[0].copy()], [yh[0].copy()]]
    xf_grid = ctx.grid(x)
    step = 0
    for K in _record_plan(n_steps, stride):
        if step % s_delta == 0:
            xf_grid = ctx.grid(x)
        dL = (
            src_l.standard_block(K)[:, None, :] * ctx.scale_l
            if cfg.enable_noise_l
            else None
        )
        dZ = (
            src_z.standard_block(K)[:, None, :] * ctx.scale_z
            if cfg.enable_noise_z
            else None
        )
        kern.aux_block(
            K, x, y, xh, yh, dL, dZ, ctx.decx, ctx.phx, ctx.decy, ctx.phy,
            ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar,
            cfg.enable_n, cfg.enable_f, cfg.enable_g,
            xf_grid, gap_int, gap_sup, ctx.dt, blow, step, cfg.blow_thresh,
        )
        step += K
        if step % cfg.record_stride == 0 or step == n_steps:
            times.append(step * ctx.dt)
            for buf, state in zip(snaps, (x, y, xh, yh)):
                buf.append(state[0].copy())
    tgrid = np.asarray(times)
    return KhasminskiiResult(
        x=Trajectory(tgrid, np.asarray(snaps[0]), "X", cfg.m),
        y=Trajectory(tgrid, np.asarray(snaps[1]), "Y", cfg.m),
        x_hat=Trajectory(tgrid, np.asarray(snaps[2]), "Xhat", cfg.m),
        y_hat=Trajectory(tgrid, np.asarray(snaps[3]), "Yhat", cfg.m),
        int_gap_y=float(gap_int[0]),
        sup_gap_x=float(gap_sup[0]),
        blow_step=int(blow[0]),
        dt=ctx.dt,
    )


def stopping_time(traj: Trajectory, radius: float) -> float:
    """First grid time with ||X|| >= radius, or +inf when never reached."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    hits = np.nonzero(traj.norms() >= radius)[0]
    return float(traj.times[hits[0]]) if hits.size else math.inf
