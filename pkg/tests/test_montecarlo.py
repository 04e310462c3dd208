import math

import numpy as np
import pytest
from scipy.special import ndtr

from conjrisk import (
    EncounterFrame,
    InvalidInputError,
    PropertyViolationError,
    calibration_study,
    coverage_study,
    mc_pc,
    pc_hat,
    significance_probability,
    theorem_sweep,
)
from conjrisk import rng
from conjrisk.montecarlo import sweep_frames
from oracles import FIG1, FROZEN_FIG1_MC, FROZEN_PC

RAYLEIGH = 1.0 - math.exp(-0.5)


class TestStreams:
    def test_rows_do_not_depend_on_slicing(self):
        whole = rng.normals(11, rng.MC_PC, 0, 10_000, 2)
        parts = np.concatenate([rng.normals(11, rng.MC_PC, s, 1234, 2)[: min(1234, 10_000 - s)] for s in range(0, 10_000, 1234)])
        assert whole.tobytes() == parts.tobytes()

    def test_streams_are_distinct(self):
        a = rng.uniforms(1, rng.SWEEP, 0, 100)
        b = rng.uniforms(1, rng.CALIBRATION, 0, 100)
        c = rng.uniforms(2, rng.SWEEP, 0, 100)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)


class TestMcPc:
    def test_deterministic(self):
        frame = EncounterFrame(*FIG1)
        a = mc_pc(frame, frame.x, 100_000, 5)
        b = mc_pc(frame, frame.x, 100_000, 5)
        assert a == b

    def test_fig1_frozen(self):
        frame = EncounterFrame(*FIG1)
        est = mc_pc(frame, frame.x, 10_000_000, 20240101)
        assert (est.estimate, est.std_error) == FROZEN_FIG1_MC

    def test_full_mass(self):
        frame = EncounterFrame(3.0, 4.0, 2.0, 1.0, 1e6 * 2.0 + 5.0)
        est = mc_pc(frame, frame.x, 10_000, 1)
        assert est.estimate == 1.0 and est.std_error == 0.0

    def test_tiny_disk(self):
        est = mc_pc(EncounterFrame(0, 0, 1, 1, 1e-300), (0.0, 0.0), 10_000, 1)
        assert est.estimate == 0.0

    def test_rayleigh(self):
        est = mc_pc(EncounterFrame(0, 0, 1, 1, 1), (0.0, 0.0), 1_000_000, 3)
        assert abs(est.estimate - RAYLEIGH) <= 3 * est.std_error
        assert est.std_error == pytest.approx(math.sqrt(est.estimate * (1 - est.estimate) / 1e6), rel=1e-15)

    @pytest.mark.parametrize("frame", [f for f, v in FROZEN_PC.items() if v > 1e-3])
    def test_agrees_with_quadrature(self, frame):
        f = EncounterFrame(*frame)
        est = mc_pc(f, f.x, 1_000_000, 9)
        assert abs(est.estimate - pc_hat(f)) <= 3 * est.std_error

    def test_minimum_samples(self):
        with pytest.raises(InvalidInputError):
            mc_pc(EncounterFrame(*FIG1), (0.0, 0.0), 999, 1)

    def test_bad_center(self):
        with pytest.raises(InvalidInputError):
            mc_pc(EncounterFrame(*FIG1), (math.inf, 0.0), 1000, 1)


class TestSweep:
    def test_frames_cover_cases(self):
        x1, x2, d1, d2, hbr, case = sweep_frames(300, 4)
        norm = np.hypot(x1, x2)
        assert np.all(d1 >= d2)
        assert np.all(hbr[case == 0] > norm[case == 0])
        assert np.array_equal(hbr[case == 1], norm[case == 1])
        assert np.all(hbr[case == 2] < norm[case == 2])
        assert (d1 / d2).max() > 1e4

    def test_frames_are_partition_independent(self):
        whole = sweep_frames(100, 4)
        tail = sweep_frames(40, 4, start=60)
        for a, b in zip(whole, tail):
            assert np.array_equal(a[60:], b)

    def test_small_sweep(self):
        report = theorem_sweep(600, 3)
        assert report.violations == 0
        assert report.boundary_checks == 200
        assert report.max_excess <= 1e-12

    def test_axis_boundary_frame(self):
        frame = EncounterFrame(2.5, 0.0, 1.0, 0.1, 2.5)
        assert significance_probability(frame, frame.hbr) == 0.5
        assert pc_hat(frame) < 0.5

    @pytest.mark.parametrize("x,d,hbr", [(3.0, 1.0, 1.0), (0.2, 0.5, 1.0), (10.0, 4.0, 0.1)])
    def test_isotropic_closed_forms(self, x, d, hbr):
        frame = EncounterFrame(x, 0.0, d, d, hbr)
        p_obs = significance_probability(frame, hbr)
        assert p_obs == pytest.approx(float(ndtr(-(x - hbr) / d)), rel=1e-12)
        est = mc_pc(frame, frame.x, 1_000_000, 17)
        assert abs(est.estimate - pc_hat(frame)) <= 3 * est.std_error + 1e-12
        assert pc_hat(frame) <= p_obs

    def test_violation_is_reported(self, monkeypatch):
        import conjrisk.montecarlo as mc

        monkeypatch.setattr(mc, "pc_quadrature_many", lambda *a, **k: np.ones(a[0].size))
        with pytest.raises(PropertyViolationError) as info:
            theorem_sweep(9, 1)
        assert info.value.report.violations > 0
        report = theorem_sweep(9, 1, raise_on_violation=False)
        assert report.offending and report.offending[0]["pc_hat"] == 1.0

    def test_needs_configs(self):
        with pytest.raises(InvalidInputError):
            theorem_sweep(0, 1)


class TestCalibration:
    def test_small_covariance_is_calibrated(self):
        report = calibration_study(0.01, 0.01, 1.0, replicates=10_000, seed=0)
        assert report.calibrated
        assert report.critical_value == pytest.approx(1.63 / 100)
        qs = list(report.empirical_quantiles.values())
        assert qs == sorted(qs)

    def test_anisotropic_small_covariance(self):
        assert calibration_study(0.01, 0.003, 1.0, replicates=10_000, seed=2).calibrated

    def test_large_covariance_reported(self):
        report = calibration_study(1.5, 1.5, 1.0, replicates=2000, seed=2)
        assert 0.0 < report.ks_statistic <= 1.0

    def test_deterministic(self):
        assert calibration_study(0.01, 0.01, 1.0, replicates=2000, seed=4) == calibration_study(
            0.01, 0.01, 1.0, replicates=2000, seed=4
        )

    @pytest.mark.parametrize(
        "args", [(0.0, 0.01, 1.0), (0.01, 0.01, 0.0), (0.01, 0.01, 1.0, 0), (0.01, 0.01, 1.0, 36, 999)]
    )
    def test_validation(self, args):
        with pytest.raises(InvalidInputError):
            calibration_study(*args)


class TestCoverage:
    def test_ninety_five(self):
        report = coverage_study(0.01, 0.01, 1.0, level=0.95, replicates=10_000, seed=0)
        assert abs(report.coverage - 0.95) <= 0.01

    def test_fifty(self):
        report = coverage_study(0.01, 0.01, 1.0, level=0.5, replicates=10_000, seed=0)
        assert abs(report.coverage - 0.5) <= 0.02

    def test_counts(self):
        report = coverage_study(0.001, 0.001, 1.0, level=0.9, replicates=2000, seed=8)
        assert report.coverage == report.covered / report.replicates
        assert abs(report.coverage - 0.9) <= 0.03
