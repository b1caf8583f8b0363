"""Study harness: common random numbers, degenerate cases, reports."""

from dataclasses import replace

import numpy as np
import pytest

from glavg.config import ConfigError, SystemConfig
from glavg.experiments import (
    StudyAbort,
    convergence_study,
    delta_sweep,
    galerkin_study,
    validate_properties,
)


def study_cfg(**kw):
    base = dict(m=6, T=0.2, seed=19, coupling="slow_only")
    base.update(kw)
    return SystemConfig(**base)


class TestConvergenceStudy:
    def test_degenerate_coupling_gives_exact_zeros(self):
        tab = convergence_study(study_cfg(), [0.1, 0.02], n_paths=6, fbar_mode="exact")
        for e in (0.1, 0.02):
            assert np.all(tab.per_path[e] == 0.0)
        assert all(row["median_err"] == 0.0 for row in tab.rows)

    def test_repeatable(self):
        a = convergence_study(study_cfg(coupling="default"), [0.1], 4)
        b = convergence_study(study_cfg(coupling="default"), [0.1], 4)
        assert np.array_equal(a.per_path[0.1], b.per_path[0.1])

    def test_path_count_extension_preserves_prefix(self):
        cfg = study_cfg(coupling="default")
        small = convergence_study(cfg, [0.1], 4)
        big = convergence_study(cfg, [0.1], 8)
        assert np.array_equal(small.per_path[0.1], big.per_path[0.1][:4])

    def test_p_at_least_alpha_refused(self):
        with pytest.raises(ConfigError):
            convergence_study(study_cfg(p=1.5, alpha=1.5), [0.1], 4)

    def test_eps_grid_range_checked(self):
        with pytest.raises(ConfigError):
            convergence_study(study_cfg(), [1.5], 4)

    def test_blowup_abort(self):
        cfg = study_cfg(coupling="default", blow_thresh=1e-6)
        with pytest.raises(StudyAbort):
            convergence_study(cfg, [0.1], 4)


class TestDeltaSweep:
    def test_x_independent_couplings_give_zero(self):
        cfg = study_cfg(coupling="y_only", T=0.4)
        tab = delta_sweep(cfg, [0.2, 0.1, 0.05], n_paths=4)
        assert all(row["median_int_gap_y"] == 0.0 for row in tab.rows)
        assert all(row["median_sup_gap_x"] == 0.0 for row in tab.rows)

    def test_median_gap_decreases_with_delta(self):
        cfg = study_cfg(coupling="default", T=0.4, record_stride=1)
        tab = delta_sweep(cfg, [0.2, 0.1, 0.05], n_paths=24)
        med = tab.column("median_int_gap_y")
        assert med[0] >= med[1] >= med[2]
        assert tab.slope_y > 0


class TestGalerkinStudy:
    def test_refinement_differences_decrease(self):
        cfg = study_cfg(coupling="default", T=0.2, eps=0.1)
        tab = galerkin_study(cfg, [4, 8, 16], n_paths=8)
        med = tab.column("median_diff")
        assert np.all(np.diff(med) < 0)

    def test_exact_when_state_resolved_and_linear(self):
        # without the cubic term or couplings the modes never mix, so a
        # field contained in the coarse space evolves identically
        cfg = study_cfg(
            coupling="zero", enable_n=False, enable_f=False, enable_g=False,
            enable_noise_z=False, enable_noise_l=False, T=0.1, x0="e1 + 0.5*e2",
        )
        tab = galerkin_study(cfg, [4, 8], n_paths=2)
        assert np.all(tab.column("median_diff") == 0.0)


class TestValidateProperties:
    def test_default_config_passes(self):
        report = validate_properties(SystemConfig(m=8))
        assert report.passed, "\n".join(report.lines())

    def test_alpha_out_of_range_fails_admissibility(self):
        report = validate_properties(SystemConfig(m=8, alpha=2.5))
        assert not report.passed
        text = "\n".join(report.lines())
        assert "alpha out of (1,2)" in text

    def test_dissipativity_gate_fails_for_large_bg(self):
        report = validate_properties(SystemConfig(m=8, b_g=50.0))
        assert not report.passed
        assert any("condition A4" in line for line in "\n".join(report.lines()).splitlines())

    def test_report_lines_have_verdicts(self):
        report = validate_properties(SystemConfig(m=6))
        lines = report.lines()
        assert all(line.startswith(("[PASS]", "[FAIL]", "overall")) for line in lines)
