"""Symmetric alpha-stable sampling and cylindrical noise spectra.

A standard SaS(scale) variate has characteristic function
E[exp(i h X)] = exp(-scale^alpha |h|^alpha).  Scalar draws use the
Chambers-Mallows-Stuck construction.  Per-mode stochastic convolutions
through the heat semigroup are advanced exactly in law: over a step dt the
mode-k convolution state decays by exp(-lambda_k dt / eps) and receives an
independent SaS increment with scale

    sigma_k * [(1 - exp(-alpha lambda_k dt / eps)) / (alpha lambda_k)]^(1/alpha),

which is free of eps once dt/eps is fixed (the eps^{-1/alpha} prefactor of
the fast noise cancels under time rescaling).  The slow noise is the
eps = 1 case.

Reproducibility: every scalar noise stream is keyed by (master seed,
stream kind, path index, signed mode index) through the splitmix64-based
derivation in `stream_seed`, so draws for a given mode do not depend on how
many modes, paths, or other streams a run uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import eigenvalues

MASK64 = (1 << 64) - 1

# stream kind tags (documented in the README; part of the output contract)
KIND_L = 0x4C
KIND_Z = 0x5A
KIND_ZBAR = 0x5B


class NoiseError(ValueError):
    """Raised on invalid sampler or spectrum arguments."""


def splitmix64(x: int) -> int:
    """One splitmix64 output step; the documented seed-mixing primitive."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master: int, kind: int, path: int, mode: int) -> int:
    """Derive the 64-bit seed of one scalar noise stream.

    mode is the signed basis index (positive cosine, negative sine); it is
    reduced modulo 2^64 so negative indices map to their two's complement.
    Chained mixing: s = sm64(master ^ kind); s = sm64(s ^ path);
    s = sm64(s ^ (mode mod 2^64)).
    """
    s = splitmix64((master & MASK64) ^ (kind & MASK64))
    s = splitmix64(s ^ (path & MASK64))
    return splitmix64(s ^ (mode & MASK64))


def mode_codes(m: int) -> list[int]:
    """Signed mode indices in coefficient-layout order [1..m, -1..-m]."""
    return list(range(1, m + 1)) + [-k for k in range(1, m + 1)]


@dataclass
class RngStream:
    """A deterministic scalar draw stream (one owner at a time).

    Stream consumption is defined in uniforms: draw j of the stream uses
    the uniforms at positions 2j and 2j+1, so the sample sequence does not
    depend on how the draws are batched.
    """

    seed: int
    gen: np.random.Generator = field(init=False)

    def __post_init__(self):
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform_pairs(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        u = self.gen.random(2 * size)
        return u[0::2], u[1::2]


def sas_from_uniforms(alpha: float, u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
    """Chambers-Mallows-Stuck map from two uniforms to one standard SaS draw.

    u0 gives the angle U = pi (u0 - 1/2) on (-pi/2, pi/2); u1 gives the
    unit exponential E = -log(1 - u1) by inversion (kept strictly positive).
    """
    u = (u0 - 0.5) * np.pi
    e = np.maximum(-np.log1p(-u1), np.finfo(np.float64).tiny)
    return (
        np.sin(alpha * u)
        / np.cos(u) ** (1.0 / alpha)
        * (np.cos(u - alpha * u) / e) ** ((1.0 - alpha) / alpha)
    )


def sample_sas(alpha: float, scale: float, rng: RngStream, size=None):
    """Draw from SaS(scale): E[e^{ihX}] = exp(-scale^alpha |h|^alpha).

    scale = 0 returns exactly 0 (degenerate law) without consuming draws.
    """
    if not 1.0 < alpha < 2.0:
        raise NoiseError(f"alpha out of (1,2): got {alpha}")
    if scale < 0:
        raise NoiseError(f"scale must be >= 0, got {scale}")
    if scale == 0.0:
        return 0.0 if size is None else np.zeros(size)
    n = 1 if size is None else size
    u0, u1 = rng.uniform_pairs(n)
    x = scale * sas_from_uniforms(alpha, u0, u1)
    return float(x[0]) if size is None else x


def convolution_scale(lam, sigma, dt: float, eps: float, alpha: float):
    """Exact one-step increment scale of the per-mode stable convolution."""
    r = dt / eps
    return sigma * (-np.expm1(-alpha * lam * r) / (alpha * lam)) ** (1.0 / alpha)


def stationary_scale(lam, sigma, alpha: float):
    """Large-time limit of the convolution scale: sigma (alpha lam)^(-1/alpha)."""
    return sigma * (alpha * lam) ** (-1.0 / alpha)


def convolution_step(
    state_k: float,
    lambda_k: float,
    sigma_k: float,
    dt: float,
    eps: float,
    alpha: float,
    rng: RngStream,
) -> float:
    """Advance one mode of the stochastic convolution by dt, exactly in law.

    Slow noise corresponds to eps = 1.  The increment scale depends on
    (dt, eps) only through dt/eps.
    """
    if dt <= 0:
        raise NoiseError(f"dt must be > 0, got {dt}")
    if eps <= 0:
        raise NoiseError(f"eps must be > 0, got {eps}")
    dec = np.exp(-lambda_k * (dt / eps))
    xi = sample_sas(alpha, float(convolution_scale(lambda_k, sigma_k, dt, eps, alpha)), rng)
    return float(dec * state_k + xi)


@dataclass(frozen=True)
class NoiseSpectrum:
    """Per-mode scales of a cylindrical SaS process, with its stability
    index and (for power-law spectra) the decay exponent."""

    alpha: float
    sigmas: np.ndarray  # shape (2m,), layout [c_1..c_m, s_1..s_m]
    beta: float | None = None  # decay exponent when sigma_k = c0 lambda_k^{-beta}
    c0: float = 1.0

    @property
    def m(self) -> int:
        return len(self.sigmas) // 2

    @staticmethod
    def power_law(m: int, alpha: float, decay: float, c0: float = 1.0) -> "NoiseSpectrum":
        lam = eigenvalues(m)
        return NoiseSpectrum(alpha, c0 * lam ** (-decay), beta=decay, c0=c0)


def validate_spectrum(spec: NoiseSpectrum, require_beta_bound: bool = True) -> list[str]:
    """Check the admissibility conditions; returns a list of violations.

    For an L-type spectrum (power law with exponent beta) the decay must
    satisfy beta > 1/2 + 1/(2 alpha) (condition A2).  For a Z-type spectrum
    the truncated sum sum_k sigma_k^alpha / lambda_k must be finite, and a
    power-law tail fit warns when the untruncated series would diverge
    (condition A2, second clause).
    """
    out = []
    a = spec.alpha
    if not 1.0 < a < 2.0:
        out.append(f"alpha out of (1,2): got {a}")
        return out
    if np.any(np.asarray(spec.sigmas) <= 0) or not np.all(np.isfinite(spec.sigmas)):
        out.append("noise scales must be positive and finite")
        return out
    if require_beta_bound:
        thresh = 0.5 + 1.0 / (2.0 * a)
        if spec.beta is None:
            out.append("condition A2: slow spectrum must declare a decay exponent beta")
        elif spec.beta <= thresh:
            out.append(
                f"condition A2: beta <= 1/2 + 1/(2*alpha) (beta={spec.beta}, "
                f"threshold={thresh:.6g})"
            )
    lam = eigenvalues(spec.m)
    s = float(np.sum(np.asarray(spec.sigmas) ** a / lam))
    if not np.isfinite(s):
        out.append("condition A2: truncated sum of sigma_k^alpha / lambda_k is not finite")
    elif spec.m >= 4:
        # tail fit on the cosine block: sigma_k ~ lambda_k^{-r}; the series
        # sum sigma^alpha/lambda ~ sum k^{-2(r alpha + 1)} diverges iff
        # r <= -1/(2 alpha).
        half = spec.m // 2
        ll = np.log(lam[half : spec.m])
        ls = np.log(np.asarray(spec.sigmas)[half : spec.m])
        r_hat = -np.polyfit(ll, ls, 1)[0]
        if r_hat <= -1.0 / (2.0 * a) + 1e-12:
            out.append(
                "condition A2: fitted tail exponent suggests "
                f"sum sigma_k^alpha/lambda_k diverges (r_hat={r_hat:.4g})"
            )
    return out


def empirical_cf(draws: np.ndarray, h: float) -> float:
    """Real part of the empirical characteristic function at frequency h."""
    return float(np.mean(np.cos(h * np.asarray(draws))))


def hill_alpha(draws: np.ndarray, tail_frac: float = 0.001) -> float:
    """Hill tail-index estimate from the largest |draws|.

    The default fraction 0.001 keeps the second-order tail bias of stable
    laws below the estimator noise across alpha in (1,2); much larger
    fractions bias the estimate upward near alpha = 2.
    """
    a = np.sort(np.abs(np.asarray(draws, dtype=np.float64)))[::-1]
    n = len(a)
    k = max(10, int(np.ceil(tail_frac * n)))
    if k + 1 >= n:
        raise NoiseError("too few draws for the requested tail fraction")
    logs = np.log(a[:k]) - np.log(a[k])
    return float(1.0 / np.mean(logs))
