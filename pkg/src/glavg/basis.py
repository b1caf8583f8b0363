"""Spectral representation of mean-zero fields on the unit torus.

Fields live in the span of the trigonometric Laplacian eigenbasis

    e_k = sqrt(2) cos(2 pi k xi)   for k = 1..m   (cosine modes)
    e_{-k} = sqrt(2) sin(2 pi k xi) for k = 1..m   (sine modes)

with eigenvalues lambda_k = 4 pi^2 k^2.  The constant mode is excluded, so
every represented field has zero mean.  Coefficients are stored as a single
real vector of length 2m laid out as [c_1..c_m, s_1..s_m], where c_k is the
coefficient of the cosine mode k and s_k of the sine mode k.

All operations here are pure functions; nothing mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI_SQ = 4.0 * np.pi**2


class FieldError(ValueError):
    """Raised on invalid field or grid arguments."""


def eigenvalues(m: int) -> np.ndarray:
    """Eigenvalue vector (length 2m) matching the coefficient layout.

    lambda_k = 4 pi^2 k^2 for both the cosine and sine block.
    """
    if m < 1:
        raise FieldError(f"mode count must be >= 1, got {m}")
    k = np.arange(1, m + 1, dtype=np.float64)
    lam = TWO_PI_SQ * k * k
    return np.concatenate([lam, lam])


@dataclass(frozen=True)
class SpectralField:
    """A mean-zero field as real coefficients on the cos/sin basis."""

    m: int
    coeffs: np.ndarray  # shape (2m,), float64

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (2 * self.m,):
            raise FieldError(
                f"coefficient vector must have shape ({2 * self.m},), got {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise FieldError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @staticmethod
    def zero(m: int) -> "SpectralField":
        return SpectralField(m, np.zeros(2 * m))

    @staticmethod
    def unit_mode(m: int, k: int) -> "SpectralField":
        """Basis field e_k.  Positive k is a cosine mode, negative a sine mode."""
        if k == 0 or abs(k) > m:
            raise FieldError(f"mode index must satisfy 1 <= |k| <= {m}, got {k}")
        c = np.zeros(2 * m)
        c[k - 1 if k > 0 else m + (-k) - 1] = 1.0
        return SpectralField(m, c)

    def norm(self) -> float:
        """L2 norm (coefficients are orthonormal-basis coordinates)."""
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class PhysicalGrid:
    """Point values x(xi_j) on the uniform grid xi_j = j/n."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.n,):
            raise FieldError(f"values must have shape ({self.n},), got {v.shape}")
        object.__setattr__(self, "values", v)


def basis_matrix(m: int, n: int) -> np.ndarray:
    """Synthesis matrix B with B[j, i] = e_i(j/n), shape (n, 2m).

    Column i < m is the cosine mode i+1, column m+i the sine mode i+1.
    """
    xi = np.arange(n, dtype=np.float64) / n
    k = np.arange(1, m + 1, dtype=np.float64)
    phase = 2.0 * np.pi * np.outer(xi, k)
    return np.sqrt(2.0) * np.concatenate([np.cos(phase), np.sin(phase)], axis=1)


def analysis_matrix(m: int, n: int) -> np.ndarray:
    """Quadrature projection matrix W, shape (2m, n), so that W @ values
    gives the coefficients of the degree-m projection (mean dropped).

    Exact for bandlimited inputs when n >= 2m + 1.
    """
    return np.ascontiguousarray(basis_matrix(m, n).T) / n


def sobolev_norm(field: SpectralField, s: float) -> float:
    """Fractional Sobolev norm sqrt(sum_k lambda_k^s u_k^2).

    s = 0 gives the L2 norm; negative s gives the dual norm restricted to
    the represented modes.
    """
    lam = eigenvalues(field.m)
    return float(np.sqrt(np.sum(lam**s * field.coeffs**2)))


def semigroup_apply(field: SpectralField, t: float) -> SpectralField:
    """Heat semigroup: multiply each coefficient by exp(-lambda_k t)."""
    if t < 0:
        raise FieldError(f"semigroup time must be >= 0, got {t}")
    lam = eigenvalues(field.m)
    return SpectralField(field.m, field.coeffs * np.exp(-lam * t))


def to_physical(field: SpectralField, n: int) -> PhysicalGrid:
    """Evaluate the field on the uniform n-point grid."""
    if n < 2 * field.m + 1:
        raise FieldError(
            f"grid size {n} too small for {field.m} modes; need n >= {2 * field.m + 1}"
        )
    return PhysicalGrid(n, basis_matrix(field.m, n) @ field.coeffs)


def from_physical(grid: PhysicalGrid, m: int) -> SpectralField:
    """Project grid values onto the first m modes, dropping the mean.

    The round trip to_physical -> from_physical is exact (up to rounding)
    when the grid has n >= 2m + 1 points.
    """
    if grid.n < 2 * m + 1:
        raise FieldError(
            f"grid size {grid.n} too small for {m} modes; need n >= {2 * m + 1}"
        )
    return SpectralField(m, analysis_matrix(m, grid.n) @ grid.values)


def dealias_points(m: int) -> int:
    """Smallest grid exact for projected cubics of an m-mode field.

    The cubic of an m-bandlimited field has modes up to 3m; its product with
    a retained test mode reaches 4m, so quadrature needs n >= 4m + 1.
    """
    return 4 * m + 1


def apply_N(field: SpectralField, n: int | None = None) -> SpectralField:
    """Cubic reaction term x - x^3 evaluated pseudo-spectrally.

    The field is synthesized on a dealiased grid (default 4m + 1 points,
    exact for the cubic), the pointwise map applied, and the result
    projected back onto the m retained modes with the mean removed.
    """
    m = field.m
    if n is None:
        n = dealias_points(m)
    vals = to_physical(field, n).values
    return from_physical(PhysicalGrid(n, vals - vals**3), m)


def inner_product_N(field: SpectralField, n: int | None = None) -> float:
    """Quadrature value of <x, N(x)> against the unprojected cubic.

    Uses int x^2 - x^4 on a grid with n >= 4m + 1 points, where the
    quadrature is exact; the value is then bounded by 1/4.
    """
    if n is None:
        n = dealias_points(field.m)
    vals = to_physical(field, n).values
    return float(np.mean(vals**2 - vals**4))


def parse_field_expr(expr: str, m: int) -> SpectralField:
    """Parse a linear combination of basis modes, e.g. "e1 + 0.5*e2 - 2*e-3".

    Positive indices are cosine modes, negative are sine modes.  "0" or an
    empty string gives the zero field.
    """
    text = expr.replace(" ", "")
    coeffs = np.zeros(2 * m)
    if text in ("", "0", "0.0"):
        return SpectralField(m, coeffs)
    # normalize leading sign, then split on +/- kept as term signs
    terms = []
    cur = ""
    for ch in text:
        if ch in "+-" and cur and cur[-1] not in "e*+-":
            terms.append(cur)
            cur = ch
        else:
            cur += ch
    terms.append(cur)
    for term in terms:
        if not term:
            continue
        sign = 1.0
        body = term
        while body and body[0] in "+-":
            if body[0] == "-":
                sign = -sign
            body = body[1:]
        if "*" in body:
            amp_s, mode_s = body.split("*", 1)
            amp = float(amp_s)
        else:
            amp, mode_s = 1.0, body
        if not mode_s.startswith("e"):
            raise FieldError(f"cannot parse field term {term!r} in {expr!r}")
        k = int(mode_s[1:])
        if k == 0 or abs(k) > m:
            raise FieldError(f"mode e{k} outside 1 <= |k| <= {m} in {expr!r}")
        idx = k - 1 if k > 0 else m + (-k) - 1
        coeffs[idx] += sign * amp
    return SpectralField(m, coeffs)
