import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import ndtr

from conjrisk import (
    EncounterFrame,
    InvalidInputError,
    QuadratureConfig,
    QuadratureError,
    dilution_curve,
    pc_chan,
    pc_hat,
    pc_max,
    pc_quadrature,
    significance_probability,
)
from conjrisk.collision import pc_chan_value, pc_hat_many, pc_quadrature_many, scaled
from oracles import FIG1, FROZEN_EDGE_GAP, FROZEN_FIG1_MC, FROZEN_PC, chan_grid

RAYLEIGH = 1.0 - math.exp(-0.5)

log_sd = st.floats(-2.0, 2.0)
coord = st.floats(-20.0, 20.0, allow_nan=False)


@st.composite
def frames(draw):
    d1, d2 = sorted((10 ** draw(log_sd), 10 ** draw(log_sd)), reverse=True)
    hbr = 10 ** draw(st.floats(-2.0, 1.5))
    return EncounterFrame(draw(coord), draw(coord), d1, d2, hbr)


class TestQuadrature:
    def test_rayleigh_closed_form(self):
        assert pc_quadrature(EncounterFrame(0, 0, 1, 1, 1), (0.0, 0.0)) == pytest.approx(RAYLEIGH, rel=1e-13)

    @pytest.mark.parametrize("sigma,hbr", [(1.0, 3.0), (2.5, 0.1), (1e-3, 2e-3), (40.0, 1.0)])
    def test_rayleigh_family(self, sigma, hbr):
        expected = -math.expm1(-(hbr * hbr) / (2 * sigma * sigma))
        frame = EncounterFrame(0, 0, sigma, sigma, hbr)
        assert pc_quadrature(frame, (0.0, 0.0)) == pytest.approx(expected, rel=1e-11)

    @pytest.mark.parametrize("frame,expected", list(FROZEN_PC.items()), ids=lambda v: str(v))
    def test_frozen_oracle(self, frame, expected):
        value = pc_hat(EncounterFrame(*frame))
        if expected == 0.0:
            assert value == 0.0
        else:
            assert value == pytest.approx(expected, rel=1e-12)

    def test_fig1_against_monte_carlo(self):
        estimate, se = FROZEN_FIG1_MC
        assert abs(pc_hat(EncounterFrame(*FIG1)) - estimate) <= 3 * se

    def test_pc_hat_is_centered_quadrature(self):
        frame = EncounterFrame(*FIG1)
        assert pc_hat(frame) == pc_quadrature(frame, (4.0, 3.0))

    def test_off_center(self):
        frame = EncounterFrame(0, 0, 1.5, 0.8, 1.0)
        assert pc_quadrature(frame, (4.0, 3.0)) == pytest.approx(FROZEN_PC[FIG1], rel=1e-12)

    def test_vanishing_disk(self):
        values = [pc_hat(EncounterFrame(0.3, 0.1, 1, 1, h)) for h in (1e-2, 1e-4, 1e-8, 1e-150)]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert values[-1] < 1e-290

    def test_full_mass(self):
        assert pc_hat(EncounterFrame(5, 0, 1, 1e-3, 1000)) == pytest.approx(1.0, abs=1e-12)

    def test_simpson_rule_agrees(self):
        cfg = QuadratureConfig(rule="simpson")
        for frame in list(FROZEN_PC)[:5]:
            assert pc_hat(EncounterFrame(*frame), cfg) == pytest.approx(FROZEN_PC[frame], rel=1e-9)

    def test_nonconvergence_carries_estimate(self):
        cfg = QuadratureConfig(max_refinements=1, rule="simpson")
        with pytest.raises(QuadratureError) as info:
            pc_hat(EncounterFrame(*FIG1), cfg)
        assert info.value.estimate == pytest.approx(FROZEN_PC[FIG1], rel=1e-4)
        assert info.value.error_bound > 0

    @pytest.mark.parametrize(
        "kwargs",
        [{"relative_tolerance": 0.0}, {"relative_tolerance": 0.1}, {"max_refinements": 0}, {"max_refinements": 2.5}, {"rule": "trapezoid"}],
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(InvalidInputError):
            QuadratureConfig(**kwargs)

    def test_rejects_bad_center(self):
        with pytest.raises(InvalidInputError):
            pc_quadrature(EncounterFrame(*FIG1), (math.nan, 0.0))

    def test_batch_matches_single(self):
        frames_ = [EncounterFrame(*f) for f in FROZEN_PC]
        batch = pc_hat_many(frames_)
        assert batch.tolist() == [pc_hat(f) for f in frames_]

    def test_batch_is_partition_independent(self):
        rng = np.random.default_rng(3)
        cols = [rng.normal(0, 3, 150), rng.normal(0, 3, 150), 10 ** rng.uniform(-1, 1, 150), 10 ** rng.uniform(-1, 1, 150), 10 ** rng.uniform(-1, 1, 150)]
        whole = pc_quadrature_many(*cols)
        parts = np.concatenate([pc_quadrature_many(*[c[i : i + 7] for c in cols]) for i in range(0, 150, 7)])
        assert whole.tobytes() == parts.tobytes()

    @given(frames())
    def test_bounds(self, frame):
        assert 0.0 <= pc_hat(frame) <= 1.0

    @given(frames())
    def test_reflection_symmetry(self, frame):
        base = pc_hat(frame)
        for s1, s2 in ((-1, 1), (1, -1), (-1, -1)):
            mirrored = EncounterFrame(s1 * frame.x1, s2 * frame.x2, frame.d1, frame.d2, frame.hbr)
            assert pc_hat(mirrored) == pytest.approx(base, rel=1e-9, abs=1e-300)

    @given(frames())
    def test_ordering(self, frame):
        assert pc_hat(frame) <= significance_probability(frame, frame.hbr) + 1e-12


class TestBoundary:
    @pytest.mark.parametrize("frame,gap", list(FROZEN_EDGE_GAP.items()), ids=lambda v: str(v))
    def test_gap_below_half(self, frame, gap):
        value = pc_hat(EncounterFrame(*frame))
        assert value < 0.5
        assert 0.5 - value == pytest.approx(gap, rel=1e-3, abs=1e-17)

    def test_axis_boundary(self):
        frame = EncounterFrame(2.0, 0.0, 0.7, 0.3, 2.0)
        assert pc_hat(frame) < 0.5
        assert significance_probability(frame, 2.0) == 0.5

    def test_edge_path_continuity(self):
        # frames just inside and outside the near-edge region agree
        base = (10.0, 0.0, 1.0, 0.31, 10.0)
        a = pc_hat(EncounterFrame(*base))
        b = pc_hat(EncounterFrame(10.0, 0.0, 1.0, 0.32, 10.0))
        assert abs(a - b) < 5e-3
        assert a < 0.5 and b < 0.5


class TestChan:
    def test_center_is_rayleigh(self):
        assert pc_chan(EncounterFrame(0, 0, 1, 1, 1)) == pytest.approx(RAYLEIGH, rel=1e-15)

    def test_tiny_disk(self):
        assert pc_chan(EncounterFrame(1, 1, 1, 1, 1e-200)) == pytest.approx(0.0, abs=1e-300)

    def test_explicit_center(self):
        frame = EncounterFrame(0, 0, 1.5, 0.8, 1.0)
        assert pc_chan(frame, (4.0, 3.0)) == pc_chan(EncounterFrame(*FIG1))

    def test_max_order_validation(self):
        with pytest.raises(InvalidInputError):
            pc_chan(EncounterFrame(*FIG1), max_order=0)

    def test_series_matches_direct_sum(self):
        c1, c2, d1, d2, hbr = 1.2, -0.7, 1.3, 0.9, 0.8
        u = hbr * hbr / (d1 * d2)
        v = c1 * c1 / (d1 * d1) + c2 * c2 / (d2 * d2)
        total = 0.0
        for k in range(60):
            inner = sum((u / 2) ** j / math.factorial(j) for j in range(k + 1))
            total += math.exp(-v / 2) * (v / 2) ** k / math.factorial(k) * (1 - math.exp(-u / 2) * inner)
        assert pc_chan_value(c1, c2, d1, d2, hbr) == pytest.approx(total, rel=1e-13)

    @pytest.mark.parametrize("config", chan_grid()[::7])
    def test_grid_subset(self, config):
        frame = EncounterFrame(*config)
        q, c = pc_hat(frame), pc_chan(frame)
        assert 0.0 <= c <= 1.0
        assert abs(q - c) <= 1e-3 * q or (q < 1e-9 and c < 1e-9 and abs(q - c) <= 1e-12)


class TestDilution:
    def test_curve_scales_covariance(self):
        frame = EncounterFrame(*FIG1)
        (c, value), = dilution_curve(frame, [0.25])
        assert c == 0.25
        assert value == pc_hat(EncounterFrame(4, 3, 0.75, 0.4, 1))

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(InvalidInputError):
            dilution_curve(EncounterFrame(*FIG1), [1.0, 0.0])

    def test_outside_limits(self):
        curve = dilution_curve(EncounterFrame(*FIG1), [1e-6, 1e6])
        assert curve[0][1] < 1e-300
        assert curve[1][1] < 1e-5

    def test_inside_limit(self):
        (_, value), = dilution_curve(EncounterFrame(0.2, 0.1, 1.5, 0.8, 1.0), [1e-6])
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_scaled_rejects_nonpositive(self):
        with pytest.raises(InvalidInputError):
            scaled(EncounterFrame(*FIG1), -1.0)


class TestPcMax:
    def test_isotropic_against_dense_scan(self):
        frame = EncounterFrame(6.0, 8.0, 1.0, 1.0, 0.01)
        result = pc_max(frame)
        assert not result.on_boundary
        logs = np.linspace(1.5, 2.5, 10_001)
        dense = max(p for _, p in dilution_curve(frame, 10.0**logs))
        assert result.pc_max >= dense * (1 - 1e-9)
        # small-disk limit: effective sigma near rho / sqrt(2)
        assert math.sqrt(result.c_star) == pytest.approx(10.0 / math.sqrt(2), rel=1e-3)

    def test_inside_flagged_at_boundary(self):
        result = pc_max(EncounterFrame(0.2, 0.1, 1.5, 0.8, 1.0))
        assert result.on_boundary
        assert result.c_star == pytest.approx(1e-6)
        assert result.pc_max == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("t", [1e-3, 7.0, 250.0])
    def test_scale_invariance(self, t):
        base = pc_max(EncounterFrame(*FIG1))
        moved = pc_max(EncounterFrame(4 * t, 3 * t, 1.5 * t, 0.8 * t, t))
        assert moved.pc_max == pytest.approx(base.pc_max, rel=1e-9)
        assert moved.c_star == pytest.approx(base.c_star, rel=1e-4)

    def test_grid_validation(self):
        with pytest.raises(InvalidInputError):
            pc_max(EncounterFrame(*FIG1), grid=2)
        with pytest.raises(InvalidInputError):
            pc_max(EncounterFrame(*FIG1), log_c_range=(1.0, -1.0))

    def test_matches_phi_bound(self):
        # the maximum over scales still respects the ordering at the same scale
        frame = EncounterFrame(*FIG1)
        result = pc_max(frame)
        at_star = scaled(frame, result.c_star)
        assert result.pc_max <= significance_probability(at_star, frame.hbr) + 1e-12
        assert significance_probability(at_star, frame.hbr) <= ndtr(0.0)
