"""Coupled-pair stepping: exactness oracles, determinism, freezing."""

from dataclasses import replace

import numpy as np
import pytest

from glavg.config import SystemConfig
from glavg.noise import ModeNoiseSource
from glavg.sim import (
    StepperContext,
    khasminskii_pair,
    simulate_pair,
    stopping_time,
)
from glavg.stable import (
    KIND_L,
    convolution_scale,
    empirical_cf,
    sas_from_uniforms,
    stream_seed,
    RngStream,
)

LAM1 = 4 * np.pi**2


def linear_cfg(**kw):
    """All drift terms and noises off unless re-enabled."""
    base = dict(
        eps=0.1, T=0.1, m=4, seed=3, x0="e1", y0="0",
        enable_n=False, enable_f=False, enable_g=False,
        enable_noise_l=False, enable_noise_z=False, record_stride=1,
    )
    base.update(kw)
    return SystemConfig(**base).resolved()


class TestLinearMode:
    def test_pure_heat_flow(self):
        cfg = linear_cfg()
        res = simulate_pair(cfg)
        for t, row in zip(res.x.times, res.x.coeffs):
            assert row[0] == pytest.approx(np.exp(-LAM1 * t), rel=1e-12)
            assert np.all(row[1:] == 0)

    def test_step_halving_is_exact(self):
        cfg1 = linear_cfg(dt=0.005, T=0.05)
        cfg2 = linear_cfg(dt=0.0025, T=0.05)
        a = simulate_pair(cfg1).x.coeffs[-1]
        b = simulate_pair(cfg2).x.coeffs[-1]
        assert np.max(np.abs(a - b)) < 1e-12

    def test_noise_only_one_mode_law(self):
        # with all drifts off, mode k of X_T is SaS with the exact
        # whole-interval convolution scale
        cfg = linear_cfg(enable_noise_l=True, m=2, T=0.05, dt=0.0025, x0="0")
        ctx = StepperContext(cfg)
        n_paths = 30_000
        finals = np.empty(n_paths)
        import glavg.backend as backend

        kern = backend.select(n_paths)
        x = np.zeros((n_paths, 4))
        y = np.zeros((n_paths, 4))
        blow = np.full(n_paths, -1, dtype=np.int64)
        src = RngStream(stream_seed(cfg.seed, KIND_L, 0, 1))
        n_steps = cfg.n_steps()
        for j in range(n_steps):
            dL = np.zeros((1, n_paths, 4))
            u0, u1 = src.uniform_pairs(n_paths)
            dL[0, :, 0] = ctx.scale_l[0] * sas_from_uniforms(cfg.alpha, u0, u1)
            kern.pair_block(
                1, x, y, dL, None, ctx.decx, ctx.phx, ctx.decy, ctx.phy,
                ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar, False, False, False,
                None, None, None, blow, j, cfg.blow_thresh,
            )
        finals = x[:, 0]
        sigma1 = cfg.spectrum_l().sigmas[0]
        want_scale = convolution_scale(LAM1, sigma1, cfg.T, 1.0, cfg.alpha)
        for h in (0.5, 1.0, 2.0):
            want = np.exp(-np.abs(want_scale * h) ** cfg.alpha)
            assert abs(empirical_cf(finals / 1.0, h) - want) < 0.015


class TestDeterminismAndDecoupling:
    def test_same_seed_bitwise(self):
        cfg = SystemConfig(eps=0.05, T=0.2, m=8, seed=21).resolved()
        a = simulate_pair(cfg)
        b = simulate_pair(cfg)
        assert np.array_equal(a.x.coeffs, b.x.coeffs)
        assert np.array_equal(a.y.coeffs, b.y.coeffs)

    def test_slow_path_ignores_fast_when_decoupled(self):
        # f = F(x): the X path must not react to the fast component at all
        cfg = SystemConfig(eps=0.05, T=0.2, m=8, seed=21, coupling="slow_only").resolved()
        a = simulate_pair(cfg)
        b = simulate_pair(replace(cfg, y0="5*e1"))
        c = simulate_pair(replace(cfg, enable_noise_z=False))
        assert np.array_equal(a.x.coeffs, b.x.coeffs)
        assert np.array_equal(a.x.coeffs, c.x.coeffs)
        assert not np.array_equal(a.y.coeffs, b.y.coeffs)

    def test_fast_statistics_stable_under_eps(self):
        # the rescaled fast process equilibrates: time-average of ||Y||
        # over the second half is eps-independent up to MC noise
        stats = []
        for eps in (0.1, 0.05):
            cfg = SystemConfig(
                eps=eps, T=1.0, m=8, seed=33, record_stride=20, dt=eps / 20
            ).resolved()
            res = simulate_pair(cfg)
            half = res.y.norms()[len(res.y.times) // 2 :]
            stats.append(np.median(half))
        assert abs(stats[0] - stats[1]) / stats[1] < 0.5


class TestBlowup:
    def test_flagged_with_step(self):
        cfg = SystemConfig(eps=0.05, T=0.1, m=4, seed=2, blow_thresh=1e-4).resolved()
        res = simulate_pair(cfg)
        assert res.blow_step >= 0
        assert res.blow_time is not None and res.blow_time <= cfg.T


class TestKhasminskii:
    def test_freeze_has_no_effect_when_couplings_ignore_x(self):
        cfg = SystemConfig(eps=0.05, T=0.2, m=6, seed=13, coupling="y_only").resolved()
        res = khasminskii_pair(cfg)
        assert np.array_equal(res.x.coeffs, res.x_hat.coeffs)
        assert np.array_equal(res.y.coeffs, res.y_hat.coeffs)
        assert res.int_gap_y == 0.0 and res.sup_gap_x == 0.0

    def test_companion_shares_noise_with_plain_run(self):
        cfg = SystemConfig(eps=0.05, T=0.2, m=6, seed=13).resolved()
        plain = simulate_pair(cfg)
        aux = khasminskii_pair(cfg)
        assert np.array_equal(plain.x.coeffs, aux.x.coeffs)
        assert np.array_equal(plain.y.coeffs, aux.y.coeffs)

    def test_single_block_equals_freezing_at_start(self):
        # delta = T: the companion's couplings stay frozen at x0 throughout;
        # rebuild that run directly from the kernel primitives
        import glavg.backend as backend
        from glavg.noise import ModeNoiseSource
        from glavg.stable import KIND_Z

        cfg = SystemConfig(
            eps=0.05, T=0.2, m=6, seed=29, delta=0.2, record_stride=1
        ).resolved()
        aux = khasminskii_pair(cfg)
        ctx = StepperContext(cfg)
        kern = backend.select(1)
        x = cfg.x0_coeffs()[None, :].copy()
        y = cfg.y0_coeffs()[None, :].copy()
        xh = x.copy()
        yh = y.copy()
        xf = ctx.grid(x)
        src_l = ModeNoiseSource(cfg.seed, KIND_L, 0, cfg.m, cfg.alpha)
        src_z = ModeNoiseSource(cfg.seed, KIND_Z, 0, cfg.m, cfg.alpha)
        blow = np.full(1, -1, dtype=np.int64)
        gi, gs = np.zeros(1), np.zeros(1)
        K = cfg.n_steps()
        dL = src_l.standard_block(K)[:, None, :] * ctx.scale_l
        dZ = src_z.standard_block(K)[:, None, :] * ctx.scale_z
        kern.aux_block(
            K, x, y, xh, yh, dL, dZ, ctx.decx, ctx.phx, ctx.decy, ctx.phy,
            ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar, True, True, True,
            xf, gi, gs, ctx.dt, blow, 0, cfg.blow_thresh,
        )
        assert np.array_equal(aux.x_hat.coeffs[-1], xh[0])
        assert np.array_equal(aux.y_hat.coeffs[-1], yh[0])

    def test_breakpoint_schedule(self):
        # companion differs from the true pair only after the slow state
        # moves; with delta = T/2 the frozen state changes exactly once
        cfg = SystemConfig(eps=0.05, T=0.2, m=6, seed=31, delta=0.1).resolved()
        res = khasminskii_pair(cfg)
        assert res.sup_gap_x > 0
        assert res.int_gap_y > 0


class TestStoppingTime:
    def test_sentinel_when_never_reached(self):
        cfg = linear_cfg()
        res = simulate_pair(cfg)
        assert stopping_time(res.x, 50.0) == np.inf

    def test_immediate_hit_at_t0(self):
        cfg = linear_cfg()
        res = simulate_pair(cfg)
        assert stopping_time(res.x, 1e-9) == 0.0

    def test_monotone_in_radius(self):
        cfg = SystemConfig(eps=0.05, T=0.3, m=6, seed=41, record_stride=1).resolved()
        res = simulate_pair(cfg)
        radii = [0.01, 0.1, 0.5, 1.0, 2.0]
        taus = [stopping_time(res.x, r) for r in radii]
        assert all(a <= b for a, b in zip(taus, taus[1:]))

    def test_radius_validation(self):
        cfg = linear_cfg()
        res = simulate_pair(cfg)
        with pytest.raises(ValueError):
            stopping_time(res.x, 0.0)
