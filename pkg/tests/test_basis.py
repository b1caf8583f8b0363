"""Spectral core: norms, semigroup, transforms and the cubic term.

Expected values are either trivial basis identities or frozen from the
independent quadrature oracle in `cubic_oracle` below.
"""

import numpy as np
import pytest

from glavg.basis import (
    FieldError,
    PhysicalGrid,
    SpectralField,
    apply_N,
    basis_matrix,
    dealias_points,
    eigenvalues,
    from_physical,
    inner_product_N,
    parse_field_expr,
    semigroup_apply,
    sobolev_norm,
    to_physical,
)


def cubic_oracle(field: SpectralField, n: int = 2048) -> np.ndarray:
    """Brute-force projection of x - x^3 by dense quadrature."""
    B = basis_matrix(field.m, n)
    vals = B @ field.coeffs
    w = vals - vals**3
    return (B.T / n) @ w


class TestEigenvalues:
    def test_values_and_layout(self):
        lam = eigenvalues(3)
        base = 4 * np.pi**2
        assert np.allclose(lam, base * np.array([1, 4, 9, 1, 4, 9]))

    def test_strictly_increasing_in_k(self):
        lam = eigenvalues(8)[:8]
        assert np.all(np.diff(lam) > 0)
        assert lam[0] == pytest.approx(4 * np.pi**2)


class TestSobolevNorm:
    def test_unit_mode_l2(self):
        assert sobolev_norm(SpectralField.unit_mode(4, 1), 0.0) == pytest.approx(1.0)

    def test_unit_mode_h1(self):
        # lambda_1^(1/2) = 2 pi
        f = SpectralField.unit_mode(4, 1)
        assert sobolev_norm(f, 1.0) == pytest.approx(2 * np.pi, rel=1e-12)

    def test_dual_norm_mode_two(self):
        # lambda_2 = 16 pi^2, so the -1 norm of e_2 is 1/(4 pi)
        f = SpectralField.unit_mode(4, 2)
        assert sobolev_norm(f, -1.0) == pytest.approx(1 / (4 * np.pi), rel=1e-12)

    def test_zero_field(self):
        assert sobolev_norm(SpectralField.zero(3), 2.0) == 0.0

    def test_parseval_against_quadrature(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            f = SpectralField(6, rng.uniform(-2, 2, 12))
            n = 256
            vals = to_physical(f, n).values
            quad = np.sqrt(np.mean(vals**2))
            assert abs(sobolev_norm(f, 0.0) ** 2 - quad**2) < 1e-10


class TestSemigroup:
    def test_t_zero_is_identity(self):
        f = SpectralField(3, np.array([1.0, -2.0, 0.5, 0.0, 3.0, -1.0]))
        g = semigroup_apply(f, 0.0)
        assert np.array_equal(f.coeffs, g.coeffs)

    def test_mode_one_decay(self):
        # t = 1/(4 pi^2) turns e_1 into e^{-1} e_1
        f = SpectralField.unit_mode(2, 1)
        g = semigroup_apply(f, 1.0 / (4 * np.pi**2))
        assert g.coeffs[0] == pytest.approx(np.exp(-1.0), rel=1e-13)

    def test_contraction_at_slowest_rate(self):
        f = parse_field_expr("e1 + e2", 4)
        for t in (0.01, 0.1, 1.0):
            g = semigroup_apply(f, t)
            assert g.norm() <= np.exp(-4 * np.pi**2 * t) * f.norm() * (1 + 1e-12)

    def test_composition_matches_single_step(self):
        f = SpectralField(4, np.linspace(-1, 1, 8))
        a = semigroup_apply(semigroup_apply(f, 0.013), 0.027)
        b = semigroup_apply(f, 0.040)
        assert np.allclose(a.coeffs, b.coeffs, rtol=5e-15, atol=0)

    def test_negative_time_rejected(self):
        with pytest.raises(FieldError):
            semigroup_apply(SpectralField.zero(2), -0.1)


class TestTransforms:
    def test_cosine_mode_at_origin(self):
        # e_1(0) = sqrt(2)
        grid = to_physical(SpectralField.unit_mode(3, 1), 16)
        assert grid.values[0] == pytest.approx(np.sqrt(2.0), rel=1e-14)

    def test_zero_grid_zero_field(self):
        f = from_physical(PhysicalGrid(16, np.zeros(16)), 4)
        assert np.all(f.coeffs == 0)

    def test_constant_grid_projects_to_zero(self):
        f = from_physical(PhysicalGrid(32, np.full(32, 5.0)), 4)
        assert np.max(np.abs(f.coeffs)) < 1e-13

    def test_round_trip_identity(self):
        rng = np.random.default_rng(11)
        for m, n in [(4, 9), (4, 16), (16, 33), (16, 64)]:
            f = SpectralField(m, rng.uniform(-3, 3, 2 * m))
            g = from_physical(to_physical(f, n), m)
            assert np.max(np.abs(f.coeffs - g.coeffs)) < 1e-12

    def test_grid_too_small_rejected(self):
        with pytest.raises(FieldError):
            to_physical(SpectralField.zero(8), 16)
        with pytest.raises(FieldError):
            from_physical(PhysicalGrid(16, np.zeros(16)), 8)


class TestCubic:
    def test_zero_maps_to_zero(self):
        out = apply_N(SpectralField.zero(5))
        assert np.all(out.coeffs == 0)

    def test_unit_cosine_mode(self):
        # cos^3 t = (3 cos t + cos 3t)/4 gives -1/2 on e_1 and e_3
        out = apply_N(SpectralField.unit_mode(4, 1))
        expect = np.zeros(8)
        expect[0] = -0.5
        expect[2] = -0.5
        assert np.allclose(out.coeffs, expect, atol=1e-13)
        assert np.allclose(out.coeffs, cubic_oracle(SpectralField.unit_mode(4, 1)), atol=1e-12)

    def test_small_amplitude_mode(self):
        c = 0.1
        f = SpectralField(4, np.zeros(8))
        f.coeffs[0] = c
        out = apply_N(f)
        assert out.coeffs[0] == pytest.approx(c - 1.5 * c**3, abs=1e-15)
        assert out.coeffs[2] == pytest.approx(-0.5 * c**3, abs=1e-15)

    def test_matches_dense_quadrature_oracle(self):
        rng = np.random.default_rng(7)
        for m in (3, 8, 17):
            f = SpectralField(m, rng.uniform(-2, 2, 2 * m))
            out = apply_N(f)
            assert np.max(np.abs(out.coeffs - cubic_oracle(f))) < 1e-11

    def test_dealias_grid_is_exact(self):
        # the default grid must already agree with a much finer one
        f = SpectralField(6, np.random.default_rng(9).uniform(-2, 2, 12))
        a = apply_N(f)
        b = apply_N(f, n=4096)
        assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-11

    def test_pairing_bound_random_fields(self):
        rng = np.random.default_rng(13)
        worst = -np.inf
        for m in (4, 16):
            for _ in range(300):
                f = SpectralField(m, rng.uniform(-2, 2, 2 * m))
                worst = max(worst, inner_product_N(f))
        assert worst <= 0.25 + 1e-9

    def test_dealias_points(self):
        assert dealias_points(16) == 65


class TestFieldExpr:
    def test_default_initial_state(self):
        f = parse_field_expr("e1 + 0.5*e2", 4)
        assert f.coeffs[0] == 1.0 and f.coeffs[1] == 0.5
        assert np.sum(f.coeffs != 0) == 2

    def test_sine_mode_and_signs(self):
        f = parse_field_expr("-2*e-3 + e1", 4)
        assert f.coeffs[4 + 2] == -2.0
        assert f.coeffs[0] == 1.0

    def test_zero(self):
        assert np.all(parse_field_expr("0", 4).coeffs == 0)

    def test_out_of_range_mode(self):
        with pytest.raises(FieldError):
            parse_field_expr("e9", 4)

    def test_garbage(self):
        with pytest.raises((FieldError, ValueError)):
            parse_field_expr("q3 + e1", 4)
