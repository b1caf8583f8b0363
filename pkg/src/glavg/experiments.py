"""Monte-Carlo studies: averaging convergence, block-freezing sweep,
Galerkin refinement and the property-validation report.

All studies share the common-random-numbers discipline: path i always
draws from the streams keyed by path index i, every compared system of a
path consumes the same slow-noise draws, and paths are processed in fixed
chunks of CHUNK so that per-path results are bit-stable under changes of
the total path count (partial chunks are padded with extra simulated but
discarded paths).

Heavy-tail hygiene: gated statistics are medians and trimmed means; raw
means of p-th powers are reported but never used as pass criteria, and
p >= alpha is refused outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .averaging import (
    AveragedDriver,
    FrozenConfig,
    contraction_gap,
    ensemble_f_mean,
    estimate_fbar,
)
from .basis import SpectralField, apply_N, inner_product_N, sobolev_norm
from .config import LAMBDA_1, ConfigError, SystemConfig, require_valid, validate_config
from .noise import BatchNoiseSource
from .sim import StepperContext
from .stable import (
    KIND_L,
    KIND_Z,
    RngStream,
    empirical_cf,
    hill_alpha,
    sample_sas,
    stream_seed,
)

CHUNK = 50


class StudyAbort(RuntimeError):
    """Raised when too many paths blow up for the statistics to be trusted."""


@dataclass
class ErrorTable:
    """Per-epsilon statistics of sup-norm errors against the averaged path."""

    p: float
    rows: list[dict]
    per_path: dict  # eps -> per-path error array (nan where flagged)

    def column(self, key: str) -> np.ndarray:
        return np.array([row[key] for row in self.rows])


@dataclass
class SweepTable:
    rows: list[dict]
    slope_y: float  # log-log slope of the median Y discrepancy vs delta

    def column(self, key: str) -> np.ndarray:
        return np.array([row[key] for row in self.rows])


@dataclass
class GalerkinTable:
    rows: list[dict]

    def column(self, key: str) -> np.ndarray:
        return np.array([row[key] for row in self.rows])


def _chunks(n_paths: int):
    """Fixed-width chunk index lists covering 0..n_paths-1 (padded)."""
    out = []
    start = 0
    while start < n_paths:
        out.append(list(range(start, start + CHUNK)))
        start += CHUNK
    return out


def _stats_row(tag_key, tag_value, errors: np.ndarray, p: float) -> dict:
    ok = errors[np.isfinite(errors)]
    n_flagged = int(np.sum(~np.isfinite(errors)))
    q = np.quantile(ok, [0.25, 0.5, 0.75]) if ok.size else [math.nan] * 3
    srt = np.sort(ok)
    drop = int(0.1 * srt.size)
    trimmed = float(np.mean(srt[drop : srt.size - drop])) if srt.size > 2 * drop else math.nan
    return {
        tag_key: tag_value,
        "n_paths": int(errors.size),
        "n_flagged": n_flagged,
        "mean_err_p": float(np.mean(ok**p)) if ok.size else math.nan,
        "median_err": float(q[1]),
        "trimmed_mean_10pct": trimmed,
        "q25": float(q[0]),
        "q75": float(q[2]),
    }


def _check_flagged(rows, label: str, max_frac: float = 0.2):
    for row in rows:
        if row["n_flagged"] > max_frac * row["n_paths"]:
            raise StudyAbort(
                f"{label}: {row['n_flagged']} of {row['n_paths']} paths flagged "
                f"(> {max_frac:.0%})"
            )


def convergence_study(
    cfg: SystemConfig,
    eps_grid: list[float],
    n_paths: int,
    fbar_mode: str = "nested",
    fcfg: FrozenConfig | None = None,
    refresh_steps: int | None = None,
) -> ErrorTable:
    """Sup-norm error of the slow component against the averaged path.

    One L stream per path index drives the averaged run and every
    eps-run on the same step grid, so the pathwise errors isolate the
    time-scale parameter.  The step size must resolve the fastest run:
    dt <= min(eps)/20.
    """
    if not eps_grid or any(not 0 < e < 1 for e in eps_grid):
        raise ConfigError("eps_grid entries must lie in (0,1)")
    eps_min = min(eps_grid)
    base = cfg if cfg.dt is not None else replace(cfg, dt=min(eps_min / 20.0, cfg.delta / 4.0))
    base = base.resolved()
    if base.p >= base.alpha:
        raise ConfigError(
            f"p={base.p} must satisfy p < alpha={base.alpha} (moments beyond alpha do not exist)"
        )
    cfgs = {e: require_valid(replace(base, eps=e)) for e in eps_grid}
    ctxs = {e: StepperContext(cfgs[e]) for e in eps_grid}
    ctx_ref = ctxs[eps_min]
    if fbar_mode == "nested" and fcfg is None:
        # longer inner averaging than the frozen-run default keeps the
        # estimator noise imprint on the reference path below the smallest
        # epsilon's averaging residual (cost knob, see README)
        fcfg = FrozenConfig(system=cfgs[eps_min], t_avg=2.0)
    n_steps = base.n_steps()
    m2 = 2 * base.m

    errors = {e: np.full(n_paths, np.nan) for e in eps_grid}
    for paths in _chunks(n_paths):
        P = len(paths)
        src_l = BatchNoiseSource(base.seed, KIND_L, paths, base.m, base.alpha)
        src_z = BatchNoiseSource(base.seed, KIND_Z, paths, base.m, base.alpha)
        driver = AveragedDriver(
            ctx_ref, paths, fbar_mode, fcfg=fcfg, refresh_steps=refresh_steps
        )
        if fbar_mode == "nested":
            seg = driver.refresh_steps
        else:
            seg = 256
        x0 = base.x0_coeffs()
        y0 = base.y0_coeffs()
        xs = {e: np.tile(x0, (P, 1)) for e in eps_grid}
        ys = {e: np.tile(y0, (P, 1)) for e in eps_grid}
        blows = {e: np.full(P, -1, dtype=np.int64) for e in eps_grid}
        sup = {e: np.zeros(P) for e in eps_grid}
        refbuf = np.empty((seg, P, m2))
        kern = backend.select(P)
        step = 0
        while step < n_steps:
            K = min(seg, n_steps - step)
            dL = src_l.standard_block(K) * ctx_ref.scale_l if base.enable_noise_l else None
            sz = src_z.standard_block(K) if base.enable_noise_z else None
            driver.advance(K, dL, xrec=refbuf[:K])
            for e in eps_grid:
                c = cfgs[e]
                ctx = ctxs[e]
                dZ = (
                    np.ascontiguousarray(sz * ctx.scale_z)
                    if sz is not None
                    else None
                )
                kern.pair_block(
                    K, xs[e], ys[e], dL, dZ, ctx.decx, ctx.phx, ctx.decy, ctx.phy,
                    ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar,
                    c.enable_n, c.enable_f, c.enable_g,
                    refbuf[:K], sup[e], None, blows[e], step, c.blow_thresh,
                )
            step += K
        for e in eps_grid:
            for i, path in enumerate(paths):
                if path >= n_paths:
                    continue
                flagged = blows[e][i] >= 0 or driver.blow[i] >= 0
                errors[e][path] = np.nan if flagged else sup[e][i]

    rows = [_stats_row("eps", e, errors[e], base.p) for e in eps_grid]
    _check_flagged(rows, "convergence_study")
    return ErrorTable(p=base.p, rows=rows, per_path=errors)


def delta_sweep(cfg: SystemConfig, delta_grid: list[float], n_paths: int) -> SweepTable:
    """Discrepancy between the pair and its block-frozen companion per delta.

    Reports the median of int ||Y - Yhat|| dt and of sup ||X - Xhat|| over
    a common set of noise paths, plus the log-log slope of the former.
    """
    base = cfg.resolved()
    int_y = {d: np.full(n_paths, np.nan) for d in delta_grid}
    sup_x = {d: np.full(n_paths, np.nan) for d in delta_grid}
    for d in delta_grid:
        c = require_valid(replace(base, delta=d))
        ctx = StepperContext(c)
        s_delta = int(round(d / ctx.dt))
        n_steps = c.n_steps()
        kern = None
        for paths in _chunks(n_paths):
            P = len(paths)
            kern = backend.select(P)
            src_l = BatchNoiseSource(c.seed, KIND_L, paths, c.m, c.alpha)
            src_z = BatchNoiseSource(c.seed, KIND_Z, paths, c.m, c.alpha)
            x = np.tile(c.x0_coeffs(), (P, 1))
            y = np.tile(c.y0_coeffs(), (P, 1))
            xh = x.copy()
            yh = y.copy()
            blow = np.full(P, -1, dtype=np.int64)
            gi = np.zeros(P)
            gs = np.zeros(P)
            step = 0
            while step < n_steps:
                K = min(s_delta, n_steps - step)
                xf_grid = np.ascontiguousarray(ctx.grid(x))
                dL = src_l.standard_block(K) * ctx.scale_l if c.enable_noise_l else None
                dZ = src_z.standard_block(K) * ctx.scale_z if c.enable_noise_z else None
                kern.aux_block(
                    K, x, y, xh, yh, dL, dZ, ctx.decx, ctx.phx, ctx.decy, ctx.phy,
                    ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar,
                    c.enable_n, c.enable_f, c.enable_g,
                    xf_grid, gi, gs, ctx.dt, blow, step, c.blow_thresh,
                )
                step += K
            for i, path in enumerate(paths):
                if path >= n_paths or blow[i] >= 0:
                    continue
                int_y[d][path] = gi[i]
                sup_x[d][path] = gs[i]

    rows = []
    for d in delta_grid:
        row = _stats_row("delta", d, int_y[d], base.p)
        ok = sup_x[d][np.isfinite(sup_x[d])]
        row["median_int_gap_y"] = row.pop("median_err")
        row["median_sup_gap_x"] = float(np.median(ok)) if ok.size else math.nan
        for drop in ("mean_err_p", "trimmed_mean_10pct", "q25", "q75"):
            row.pop(drop)
        rows.append(row)
    _check_flagged(rows, "delta_sweep")
    med = np.array([r["median_int_gap_y"] for r in rows])
    ds = np.array(delta_grid, dtype=float)
    good = med > 0
    slope = (
        float(np.polyfit(np.log(ds[good]), np.log(med[good]), 1)[0])
        if np.sum(good) >= 2
        else math.nan
    )
    return SweepTable(rows=rows, slope_y=slope)


def _embed(coeffs: np.ndarray, m_from: int, m_to: int) -> np.ndarray:
    """Map a (P, 2 m_from) coefficient block into the 2 m_to layout."""
    P = coeffs.shape[0]
    out = np.zeros((P, 2 * m_to))
    k = min(m_from, m_to)
    out[:, :k] = coeffs[:, :k]
    out[:, m_to : m_to + k] = coeffs[:, m_from : m_from + k]
    return out


def galerkin_study(cfg: SystemConfig, m_grid: list[int], n_paths: int = 16) -> GalerkinTable:
    """||X^m_T - X^{2m}_T|| for each m, with low-mode noise shared across
    resolutions through the mode-indexed streams."""
    base = cfg.resolved()
    all_m = sorted(set(m_grid) | {2 * m for m in m_grid})
    finals = {}
    flags = {}
    for m in all_m:
        c = require_valid(replace(base, m=m, n_quad=None, x0=base.x0, y0=base.y0))
        ctx = StepperContext(c)
        n_steps = c.n_steps()
        finals[m] = np.zeros((n_paths, 2 * m))
        flags[m] = np.zeros(n_paths, dtype=bool)
        for paths in _chunks(n_paths):
            P = len(paths)
            kern = backend.select(P)
            src_l = BatchNoiseSource(c.seed, KIND_L, paths, m, c.alpha)
            src_z = BatchNoiseSource(c.seed, KIND_Z, paths, m, c.alpha)
            x = np.tile(c.x0_coeffs(), (P, 1))
            y = np.tile(c.y0_coeffs(), (P, 1))
            blow = np.full(P, -1, dtype=np.int64)
            step = 0
            while step < n_steps:
                K = min(512, n_steps - step)
                dL = src_l.standard_block(K) * ctx.scale_l if c.enable_noise_l else None
                dZ = src_z.standard_block(K) * ctx.scale_z if c.enable_noise_z else None
                kern.pair_block(
                    K, x, y, dL, dZ, ctx.decx, ctx.phx, ctx.decy, ctx.phy,
                    ctx.bsyn, ctx.bana, ctx.cid, ctx.cpar,
                    c.enable_n, c.enable_f, c.enable_g,
                    None, None, None, blow, step, c.blow_thresh,
                )
                step += K
            for i, path in enumerate(paths):
                if path < n_paths:
                    finals[m][path] = x[i]
                    flags[m][path] = blow[i] >= 0
    rows = []
    for m in sorted(m_grid):
        a = _embed(finals[m], m, 2 * m)
        b = finals[2 * m]
        ok = ~(flags[m] | flags[2 * m])
        diffs = np.sqrt(np.sum((a - b) ** 2, axis=1))
        rows.append(
            {
                "m": m,
                "n_paths": n_paths,
                "n_flagged": int(np.sum(~ok)),
                "median_diff": float(np.median(diffs[ok])) if ok.any() else math.nan,
            }
        )
    _check_flagged(rows, "galerkin_study")
    return GalerkinTable(rows=rows)


# --- property validation ---------------------------------------------------


@dataclass
class PropertyResult:
    name: str
    passed: bool
    margin: float
    detail: str


@dataclass
class PropertyReport:
    results: list[PropertyResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        out = []
        for r in self.results:
            out.append(
                f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail} "
                f"(margin {r.margin:.3g})"
            )
        out.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return out


def _random_field(m: int, amp: float, rng: np.random.Generator) -> SpectralField:
    return SpectralField(m, rng.uniform(-amp, amp, size=2 * m))


def validate_properties(cfg: SystemConfig, heavy: bool = False) -> PropertyReport:
    """Run the operator, sampler and contraction checks; collect margins.

    The heavy flag scales the sample counts up to the sizes used by the
    acceptance suite; the default is a fast smoke-level pass for the CLI.
    """
    results: list[PropertyResult] = []
    base = cfg.resolved()
    rng = np.random.Generator(np.random.PCG64(stream_seed(base.seed, 0x56, 0, 0)))

    # config gates (reported as a property so the CLI surfaces them)
    problems = validate_config(base)
    results.append(
        PropertyResult(
            "config admissibility",
            not problems,
            0.0 if problems else 1.0,
            "; ".join(problems) if problems else "all gates hold",
        )
    )
    if problems:
        return PropertyReport(results)

    # cubic dissipativity bound <x, N(x)> <= 1/4 on unprojected quadrature
    n_fields = 10_000 if heavy else 1_000
    worst = -math.inf
    for m in (4, 16, 64):
        amps = rng.uniform(0.0, 2.0, size=n_fields)
        for amp in amps:
            v = inner_product_N(_random_field(m, max(amp, 1e-3), rng))
            worst = max(worst, v)
    results.append(
        PropertyResult(
            "cubic pairing bound",
            worst <= 0.25 + 1e-9,
            0.25 + 1e-9 - worst,
            f"max <x,N(x)> = {worst:.6g} over {3 * n_fields} fields (bound 1/4)",
        )
    )

    # difference and negative-norm ratio suprema, stable under doubling
    n_ratio = 2_000 if heavy else 400
    m = base.m
    r3 = _p3_ratios(m, 2 * n_ratio, rng)
    half_max, full_max = float(np.max(r3[:n_ratio])), float(np.max(r3))
    results.append(
        PropertyResult(
            "difference-bound ratio",
            full_max <= 1.25 * half_max and np.isfinite(full_max),
            1.25 * half_max - full_max,
            f"sup ratio {full_max:.4g}; doubling grew it by "
            f"{full_max / half_max - 1:.2%}",
        )
    )
    worst_growth = 0.0
    detail = []
    ok2 = True
    for sigma in (0.0, 0.25, 0.49):
        r2 = _p2_ratios(m, 2 * n_ratio, sigma, rng)
        h, f = float(np.max(r2[:n_ratio])), float(np.max(r2))
        growth = f / h - 1
        worst_growth = max(worst_growth, growth)
        ok2 = ok2 and np.isfinite(f) and f <= 1.25 * h
        detail.append(f"sigma={sigma}: sup {f:.4g}")
    results.append(
        PropertyResult(
            "negative-norm cubic ratio",
            ok2,
            0.25 - worst_growth,
            "; ".join(detail),
        )
    )

    # coupling declarations (Lipschitz ratios and the f bound)
    cp = base.coupling_obj()
    n_pairs = 400 if heavy else 100
    worst_f, worst_g, worst_bound = 0.0, 0.0, 0.0
    ctx = StepperContext(base)
    for _ in range(n_pairs):
        a = _random_field(m, 2.0, rng).coeffs
        b = _random_field(m, 2.0, rng).coeffs
        ya = _random_field(m, 2.0, rng).coeffs
        yb = _random_field(m, 2.0, rng).coeffs
        ga, gb = ctx.grid(a[None])[0], ctx.grid(b[None])[0]
        gya, gyb = ctx.grid(ya[None])[0], ctx.grid(yb[None])[0]
        df = ctx.bana @ (cp.f_grid(ga, gya) - cp.f_grid(gb, gyb))
        dg = ctx.bana @ (cp.g_grid(ga, gya) - cp.g_grid(gb, gyb))
        dx = np.linalg.norm(a - b)
        dy = np.linalg.norm(ya - yb)
        if cp.lip_f > 0:
            worst_f = max(worst_f, np.linalg.norm(df) / (cp.lip_f * (dx + dy)))
        gbound = cp.cg * dx + cp.lip_g * dy
        if gbound > 0:
            worst_g = max(worst_g, np.linalg.norm(dg) / gbound)
        if cp.f_bound > 0:
            worst_bound = max(
                worst_bound, np.linalg.norm(ctx.bana @ cp.f_grid(ga, gya)) / cp.f_bound
            )
    tol = 1e-9
    results.append(
        PropertyResult(
            "coupling declarations",
            max(worst_f, worst_g, worst_bound) <= 1 + tol,
            1 + tol - max(worst_f, worst_g, worst_bound),
            f"Lipschitz ratio f {worst_f:.4f}, g {worst_g:.4f}, "
            f"f-bound ratio {worst_bound:.4f} (declared constants = 1.0)",
        )
    )

    # sampler law at the configured alpha
    n_draws = 10**6 if heavy else 10**5
    stream = RngStream(stream_seed(base.seed, 0x57, 0, 0))
    draws = sample_sas(base.alpha, 1.0, stream, size=n_draws)
    worst_cf = max(
        abs(empirical_cf(draws, h) - math.exp(-(h**base.alpha))) for h in (0.5, 1.0, 2.0)
    )
    hill = hill_alpha(draws)
    cf_tol = 0.01 if heavy else 0.02
    hill_tol = 0.1 if heavy else 0.15
    ok = worst_cf < cf_tol and abs(hill - base.alpha) < hill_tol
    results.append(
        PropertyResult(
            "stable sampler law",
            ok,
            min(cf_tol - worst_cf, hill_tol - abs(hill - base.alpha)),
            f"max CF error {worst_cf:.4f} at {n_draws} draws; Hill {hill:.3f} "
            f"vs alpha {base.alpha}",
        )
    )

    # frozen-equation contraction at the declared rate
    n_gap = 20 if heavy else 5
    dt_gap = 1e-4
    T_gap = 0.5
    rate = LAMBDA_1 - cp.lip_g
    worst_ratio = 0.0
    for trial in range(n_gap):
        x = _random_field(m, 1.0, rng).coeffs
        y1 = _random_field(m, 1.0, rng).coeffs
        y2 = _random_field(m, 1.0, rng).coeffs
        times, gaps = contraction_gap(x, y1, y2, T_gap, dt_gap, base, path_index=trial)
        bound = np.linalg.norm(y1 - y2) * np.exp(-rate * times)
        worst_ratio = max(worst_ratio, float(np.max(gaps / bound)))
    results.append(
        PropertyResult(
            "frozen contraction",
            worst_ratio <= 1 + 1e-6,
            1 + 1e-6 - worst_ratio,
            f"max gap/bound ratio {worst_ratio:.8f} over {n_gap} synchronized pairs",
        )
    )
    return PropertyReport(results)


def _p3_ratios(m: int, count: int, rng) -> np.ndarray:
    out = np.empty(count)
    for i in range(count):
        x = _random_field(m, 2.0, rng)
        y = _random_field(m, 2.0, rng)
        num = np.linalg.norm(apply_N(x).coeffs - apply_N(y).coeffs)
        den = (
            1.0 + sobolev_norm(x, 0.5) ** 2 + sobolev_norm(y, 0.5) ** 2
        ) * np.linalg.norm(x.coeffs - y.coeffs)
        out[i] = num / den if den > 0 else 0.0
    return out


def _p2_ratios(m: int, count: int, sigma: float, rng) -> np.ndarray:
    out = np.empty(count)
    for i in range(count):
        x = _random_field(m, 2.0, rng)
        num = sobolev_norm(apply_N(x), -sigma)
        den = 1.0 + sobolev_norm(x, (1.0 - sigma) / 3.0) ** 3
        out[i] = num / den
    return out
