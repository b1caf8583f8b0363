"""Frozen fast equation, ergodic drift averaging and the averaged equation.

The frozen equation holds the slow state fixed at x and runs the fast
dynamics at unit time scale:

    dY = [A Y + g(x, Y)] dt + dZbar,

driven by the Zbar streams, which are independent of the L and Z streams
of the same master seed.  Its unique invariant measure defines the
averaged drift fbar(x) = int f(x, y) mu^x(dy), estimated here by a single
long trajectory with burn-in; batch means over consecutive sub-windows
give a distribution-free spread proxy (heavy tails make CLT bars
unreliable).

The averaged equation

    dXbar = [A Xbar + N(Xbar) + fbar(Xbar)] dt + dL

reuses the slow stepper with fbar supplied in one of three modes: "exact"
(f does not depend on y), "nested" (a warm-started inner frozen chain is
re-averaged every refresh interval), or "tabulated" (offsets precomputed
on a probe set; additively separable couplings only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .basis import analysis_matrix, basis_matrix, eigenvalues
from .config import LAMBDA_1, SystemConfig, require_valid
from .noise import BatchNoiseSource, ModeNoiseSource
from .sim import Trajectory, _record_plan
from .stable import KIND_L, KIND_ZBAR, convolution_scale


class AveragingError(ValueError):
    pass


@dataclass
class FrozenConfig:
    """Parameters of a frozen-equation run tied to a parent system config."""

    system: SystemConfig
    t_burn: float | None = None  # default 5 relaxation times
    t_avg: float | None = None  # default 20 relaxation times
    dt: float = 0.002
    n_batches: int = 8
    spread_threshold: float = 0.05
    path_index: int = 0

    def __post_init__(self):
        self.system = require_valid(self.system)
        rate = self.relax_rate()
        if self.t_burn is None:
            self.t_burn = 5.0 / rate
        if self.t_avg is None:
            self.t_avg = 20.0 / rate
        if self.t_burn <= 0 or self.t_avg <= 0 or self.dt <= 0:
            raise AveragingError("t_burn, t_avg and dt must be positive")

    def relax_rate(self) -> float:
        gap = LAMBDA_1 - self.system.coupling_obj().lip_g
        if gap <= 0:
            raise AveragingError("condition A4: lambda1 - L_g must be positive")
        return gap


@dataclass
class FbarEstimate:
    """Ergodic average of the slow drift with a batch-means spread proxy."""

    value: np.ndarray  # (2m,)
    batch_means: np.ndarray  # (n_batches, 2m)
    spread: float  # L2 norm of the per-mode batch standard error
    n_steps: int
    low_confidence: bool
    degenerate: bool = False


class FrozenContext:
    """Precomputed arrays for frozen-equation stepping (unit time scale)."""

    def __init__(self, cfg: SystemConfig, dt: float):
        cfg = require_valid(cfg)
        self.cfg = cfg
        self.dt = dt
        m = cfg.m
        self.n = cfg.n_quad
        self.lam = eigenvalues(m)
        self.bsyn = basis_matrix(m, self.n)
        self.bana = analysis_matrix(m, self.n)
        self.dec = np.exp(-self.lam * dt)
        self.ph = -np.expm1(-self.lam * dt) / self.lam
        self.coupling = cfg.coupling_obj()
        self.cpar = self.coupling.params
        self.cid = self.coupling.cid
        self.scale_z = convolution_scale(
            self.lam, cfg.spectrum_z().sigmas, dt, 1.0, cfg.alpha
        )

    def grid(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.bsyn.T


def _as_states(vec: np.ndarray, copies: int) -> np.ndarray:
    return np.tile(np.asarray(vec, dtype=np.float64), (copies, 1))


def simulate_frozen(
    x: np.ndarray, y0: np.ndarray, fcfg: FrozenConfig, T: float, record_stride: int = 10
) -> Trajectory:
    """One frozen-equation path on [0, T] with strided snapshots."""
    sys_cfg = fcfg.system
    ctx = FrozenContext(sys_cfg, fcfg.dt)
    kern = backend.select(1)
    y = _as_states(y0, 1)
    xf_grid = ctx.grid(_as_states(x, 1))
    src = ModeNoiseSource(sys_cfg.seed, KIND_ZBAR, fcfg.path_index, sys_cfg.m, sys_cfg.alpha)
    blow = np.full(1, -1, dtype=np.int64)
    n_steps = int(round(T / fcfg.dt))
    times = [0.0]
    snaps = [y[0].copy()]
    step = 0
    for K in _record_plan(n_steps, record_stride):
        dZ = (
            src.standard_block(K)[:, None, :] * ctx.scale_z
            if sys_cfg.enable_noise_z
            else None
        )
        kern.frozen_block(
            K, y, dZ, ctx.dec, ctx.ph, ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar,
            sys_cfg.enable_g, xf_grid, 0, None, None, blow, step, sys_cfg.blow_thresh,
        )
        step += K
        times.append(step * fcfg.dt)
        snaps.append(y[0].copy())
    return Trajectory(np.asarray(times), np.asarray(snaps), "Yfrozen", sys_cfg.m)


def contraction_gap(
    x: np.ndarray,
    y1: np.ndarray,
    y2: np.ndarray,
    T: float,
    dt: float,
    cfg: SystemConfig,
    path_index: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """||Y^{x,y1}_t - Y^{x,y2}_t|| on the step grid, under one Zbar path.

    The same noise drives both chains, so the gap solves a deterministic
    difference equation and contracts at least at rate lambda1 - L_g.
    """
    return _synchronized_gap(x, x, y1, y2, T, dt, cfg, path_index)


def frozen_state_gap(
    x1: np.ndarray,
    x2: np.ndarray,
    y0: np.ndarray,
    T: float,
    dt: float,
    cfg: SystemConfig,
    path_index: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gap between frozen chains at two slow states, same start and noise."""
    return _synchronized_gap(x1, x2, y0, y0, T, dt, cfg, path_index)


def _synchronized_gap(xa, xb, ya, yb, T, dt, cfg, path_index):
    ctx = FrozenContext(cfg, dt)
    kern = backend.select(2)
    y = np.stack([np.asarray(ya, dtype=np.float64), np.asarray(yb, dtype=np.float64)])
    xf_grid = np.concatenate([ctx.grid(_as_states(xa, 1)), ctx.grid(_as_states(xb, 1))])
    src = ModeNoiseSource(cfg.seed, KIND_ZBAR, path_index, cfg.m, cfg.alpha)
    blow = np.full(2, -1, dtype=np.int64)
    n_steps = int(round(T / dt))
    gaps = np.empty(n_steps + 1)
    gaps[0] = float(np.linalg.norm(y[0] - y[1]))
    step = 0
    block = 1024
    while step < n_steps:
        K = min(block, n_steps - step)
        if cfg.enable_noise_z:
            std = src.standard_block(K) * ctx.scale_z
            dZ = np.ascontiguousarray(np.repeat(std[:, None, :], 2, axis=1))
        else:
            dZ = None
        yrec = np.empty((K, 2, 2 * cfg.m))
        kern.frozen_block(
            K, y, dZ, ctx.dec, ctx.ph, ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar,
            cfg.enable_g, xf_grid, 0, None, yrec, blow, step, cfg.blow_thresh,
        )
        d = yrec[:, 0, :] - yrec[:, 1, :]
        gaps[step + 1 : step + K + 1] = np.sqrt(np.sum(d * d, axis=1))
        step += K
    times = np.arange(n_steps + 1) * dt
    return times, gaps


def estimate_fbar(x: np.ndarray, fcfg: FrozenConfig, y0: np.ndarray | None = None) -> FbarEstimate:
    """Time-average of f(x, Y_s) over the frozen chain after burn-in.

    The averaging window is split into n_batches consecutive batches; the
    spread is the L2 norm of the per-mode standard error across batches.
    """
    sys_cfg = fcfg.system
    rate = fcfg.relax_rate()
    if fcfg.t_burn < 5.0 / rate - 1e-12:
        raise AveragingError(
            f"t_burn={fcfg.t_burn:g} too short: need at least 5 relaxation times "
            f"({5.0 / rate:g})"
        )
    ctx = FrozenContext(sys_cfg, fcfg.dt)
    kern = backend.select(1)
    y = _as_states(y0 if y0 is not None else sys_cfg.y0_coeffs(), 1)
    xf_grid = ctx.grid(_as_states(x, 1))
    src = ModeNoiseSource(sys_cfg.seed, KIND_ZBAR, fcfg.path_index, sys_cfg.m, sys_cfg.alpha)
    blow = np.full(1, -1, dtype=np.int64)
    burn_steps = int(round(fcfg.t_burn / fcfg.dt))
    batch_steps = int(round(fcfg.t_avg / fcfg.n_batches / fcfg.dt))
    if batch_steps < 1:
        raise AveragingError("t_avg too short for the requested batch count")

    def run(K, facc_mode, facc):
        dZ = (
            src.standard_block(K)[:, None, :] * ctx.scale_z
            if sys_cfg.enable_noise_z
            else None
        )
        kern.frozen_block(
            K, y, dZ, ctx.dec, ctx.ph, ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar,
            sys_cfg.enable_g, xf_grid, facc_mode, facc, None, blow, 0,
            sys_cfg.blow_thresh,
        )

    run(burn_steps, 0, None)
    batches = np.zeros((fcfg.n_batches, 2 * sys_cfg.m))
    for b in range(fcfg.n_batches):
        acc = np.zeros((1, 2 * sys_cfg.m))
        run(batch_steps, 2, acc)
        batches[b] = acc[0] / batch_steps
    if blow[0] >= 0:
        raise AveragingError(
            f"frozen chain blew up at inner time {blow[0] * fcfg.dt:g}"
        )
    value = batches.mean(axis=0)
    se = batches.std(axis=0, ddof=1) / math.sqrt(fcfg.n_batches)
    spread = float(np.linalg.norm(se))
    return FbarEstimate(
        value=value,
        batch_means=batches,
        spread=spread,
        n_steps=fcfg.n_batches * batch_steps,
        low_confidence=spread > fcfg.spread_threshold,
    )


def fbar_lipschitz_probe(
    x1: np.ndarray, x2: np.ndarray, fcfg: FrozenConfig
) -> FbarEstimate | dict:
    """Ratio ||fbar(x1) - fbar(x2)|| / ||x1 - x2|| under common randomness."""
    dx = float(np.linalg.norm(np.asarray(x1) - np.asarray(x2)))
    if dx == 0.0:
        return {"ratio": 0.0, "degenerate": True}
    e1 = estimate_fbar(x1, fcfg)
    e2 = estimate_fbar(x2, fcfg)
    return {
        "ratio": float(np.linalg.norm(e1.value - e2.value)) / dx,
        "degenerate": False,
        "spread": math.hypot(e1.spread, e2.spread),
    }


def ensemble_f_mean(
    x: np.ndarray,
    y0: np.ndarray,
    cfg: SystemConfig,
    T: float,
    dt: float,
    n_paths: int,
    path_offset: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean of pi_m f(x, Y_t) at every step over n_paths chains.

    Returns (times, means) with means shaped (n_steps, 2m); used to probe
    the exponential ergodic decay toward fbar(x).
    """
    ctx = FrozenContext(cfg, dt)
    kern = backend.select(n_paths)
    y = _as_states(y0, n_paths)
    xf_grid = np.ascontiguousarray(np.tile(ctx.grid(_as_states(x, 1)), (n_paths, 1)))
    blow = np.full(n_paths, -1, dtype=np.int64)
    n_steps = int(round(T / dt))
    facc = np.zeros((n_steps, 2 * cfg.m))
    srcs = [
        ModeNoiseSource(cfg.seed, KIND_ZBAR, path_offset + p, cfg.m, cfg.alpha)
        for p in range(n_paths)
    ]
    dZ = np.empty((n_steps, n_paths, 2 * cfg.m))
    for p, src in enumerate(srcs):
        dZ[:, p, :] = src.standard_block(n_steps) * ctx.scale_z
    kern.frozen_block(
        n_steps, y, dZ if cfg.enable_noise_z else None, ctx.dec, ctx.ph,
        ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar, cfg.enable_g, xf_grid,
        3, facc, None, blow, 0, cfg.blow_thresh,
    )
    times = (np.arange(n_steps) + 1) * dt
    return times, facc / n_paths


class AveragedDriver:
    """Advances a batch of averaged-equation paths with pluggable fbar.

    Modes: "exact" needs f independent of y; "nested" re-averages a
    warm-started inner frozen chain every `refresh_steps` outer steps
    (live x-part plus held offset for separable couplings, fully held
    fbar otherwise); "tabulated" holds per-probe offsets and picks the
    nearest probe state (separable couplings only).
    """

    def __init__(
        self,
        ctx,
        paths: list[int],
        fbar_mode: str,
        fcfg: FrozenConfig | None = None,
        refresh_steps: int | None = None,
        probe_offsets: list[tuple[np.ndarray, np.ndarray]] | None = None,
    ):
        cfg = ctx.cfg
        self.ctx = ctx
        self.kern = backend.select(len(paths))
        self.cfg = cfg
        self.paths = list(paths)
        self.mode = fbar_mode
        P = len(paths)
        self.x = _as_states(cfg.x0_coeffs(), P)
        self.blow = np.full(P, -1, dtype=np.int64)
        self.step = 0
        coupling = ctx.coupling
        if fbar_mode == "exact":
            if cfg.enable_f and coupling.f_depends_on_y:
                raise AveragingError(
                    f"fbar_mode=exact requires f independent of y; coupling "
                    f"{coupling.name!r} depends on y"
                )
            self.live_f = cfg.enable_f
            self.foff = None
        elif fbar_mode == "nested":
            if fcfg is None:
                fcfg = FrozenConfig(system=cfg)
            self.fcfg = fcfg
            self.live_f = cfg.enable_f and coupling.separable
            self.foff = np.zeros_like(self.x)
            self.refresh_steps = refresh_steps or max(1, int(round(0.01 / ctx.dt)))
            self._init_inner(P)
        elif fbar_mode == "tabulated":
            if not coupling.separable:
                raise AveragingError(
                    "fbar_mode=tabulated is only valid for couplings declared "
                    "state-separable"
                )
            if not probe_offsets:
                raise AveragingError("tabulated mode needs a non-empty probe set")
            self.live_f = cfg.enable_f
            self.probes = [np.asarray(s, dtype=np.float64) for s, _ in probe_offsets]
            self.offsets = [np.asarray(o, dtype=np.float64) for _, o in probe_offsets]
            self.foff = np.zeros_like(self.x)
            self._tabulate_offsets()
        else:
            raise AveragingError(f"unknown fbar_mode {fbar_mode!r}")

    # nested machinery -----------------------------------------------------

    def _init_inner(self, P: int):
        fcfg = self.fcfg
        cfg = self.cfg
        self.inner_ctx = FrozenContext(cfg, fcfg.dt)
        self.inner_y = _as_states(cfg.y0_coeffs(), P)
        self.inner_blow = np.full(P, -1, dtype=np.int64)
        self.inner_src = BatchNoiseSource(cfg.seed, KIND_ZBAR, self.paths, cfg.m, cfg.alpha)
        self.inner_burn = int(round(fcfg.t_burn / fcfg.dt))
        rate = fcfg.relax_rate()
        self.inner_reburn = max(1, int(round(1.0 / rate / fcfg.dt)))
        self.inner_avg = max(1, int(round(fcfg.t_avg / fcfg.dt)))

    def _inner_block(self, K, xf_grid, facc_mode, facc):
        cfg = self.cfg
        ctx = self.inner_ctx
        dZ = self.inner_src.standard_block(K) * ctx.scale_z
        self.kern.frozen_block(
            K, self.inner_y, dZ if cfg.enable_noise_z else None, ctx.dec, ctx.ph,
            ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar, cfg.enable_g, xf_grid,
            facc_mode, facc, None, self.inner_blow, 0, cfg.blow_thresh,
        )

    def _refresh_offset(self, first: bool = False):
        xf_grid = np.ascontiguousarray(self.ctx.grid(self.x))
        burn = self.inner_burn if first else self.inner_reburn
        self._inner_block(burn, xf_grid, 0, None)
        acc = np.zeros_like(self.foff)
        mode = 1 if self.live_f else 2
        self._inner_block(self.inner_avg, xf_grid, mode, acc)
        self.foff[:] = acc / self.inner_avg
        if not self.cfg.enable_f:
            self.foff[:] = 0.0

    # tabulated machinery ---------------------------------------------------

    def _tabulate_offsets(self):
        probes = np.stack(self.probes)
        d = np.sum((self.x[:, None, :] - probes[None, :, :]) ** 2, axis=2)
        nearest = np.argmin(d, axis=1)
        for p, idx in enumerate(nearest):
            self.foff[p] = self.offsets[idx]

    # stepping ---------------------------------------------------------------

    def advance(self, K: int, dL, xrec=None, supx=None):
        cfg = self.cfg
        ctx = self.ctx
        if self.mode == "nested":
            into_block = self.step % self.refresh_steps
            if into_block + K > self.refresh_steps:
                raise AveragingError(
                    "advance block crosses an fbar refresh boundary; use blocks "
                    f"of at most {self.refresh_steps} steps aligned to it"
                )
            if into_block == 0:
                self._refresh_offset(first=(self.step == 0))
        if self.mode == "tabulated":
            self._tabulate_offsets()
        self.kern.slow_block(
            K, self.x, dL, ctx.decx, ctx.phx, ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar,
            cfg.enable_n, self.live_f, self.foff, xrec, supx,
            self.blow, self.step, cfg.blow_thresh,
        )
        self.step += K


def simulate_averaged(
    cfg: SystemConfig,
    fbar_mode: str = "nested",
    path_index: int = 0,
    fcfg: FrozenConfig | None = None,
    probe_offsets=None,
    refresh_steps: int | None = None,
) -> Trajectory:
    """One averaged-equation path driven by the same L stream as the
    multiscale run with the same seed and path index."""
    from .sim import StepperContext

    ctx = StepperContext(cfg)
    cfg = ctx.cfg
    driver = AveragedDriver(
        ctx, [path_index], fbar_mode, fcfg=fcfg, probe_offsets=probe_offsets,
        refresh_steps=refresh_steps,
    )
    src_l = ModeNoiseSource(cfg.seed, KIND_L, path_index, cfg.m, cfg.alpha)
    n_steps = cfg.n_steps()
    times = [0.0]
    snaps = [driver.x[0].copy()]
    step = 0
    if fbar_mode == "nested":
        stride = math.gcd(cfg.record_stride, driver.refresh_steps)
    else:
        stride = cfg.record_stride
    for K in _record_plan(n_steps, stride):
        dL = (
            src_l.standard_block(K)[:, None, :] * ctx.scale_l
            if cfg.enable_noise_l
            else None
        )
        driver.advance(K, dL)
        step += K
        if step % cfg.record_stride == 0 or step == n_steps:
            times.append(step * ctx.dt)
            snaps.append(driver.x[0].copy())
    return Trajectory(np.asarray(times), np.asarray(snaps), "Xbar", cfg.m)
