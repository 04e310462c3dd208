import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conjrisk import (
    DegenerateCovarianceError,
    DegenerateGeometryError,
    EncounterFrame,
    FullStateCovariance,
    InvalidInputError,
    PositionCovariance,
    RelativeState,
    StateVector,
    encounter_basis,
    geometric_miss_distance,
    project_to_encounter_frame,
    relative_state,
)
from oracles import eig2

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec = st.tuples(finite, finite, finite)


def rotation(seed):
    q, r = np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def spd(seed, scale=1.0):
    a = np.random.default_rng(seed).normal(size=(3, 3)) * scale
    return a @ a.T + 1e-3 * scale**2 * np.eye(3)


class TestTypes:
    def test_state_vector_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            StateVector([0, 0, math.nan], [0, 0, 0])

    def test_state_vector_shape(self):
        with pytest.raises(InvalidInputError):
            StateVector([0, 0], [0, 0, 0])

    def test_covariance_must_be_symmetric(self):
        with pytest.raises(InvalidInputError):
            PositionCovariance([[1, 0.1, 0], [0, 1, 0], [0, 0, 1]])

    def test_covariance_must_be_psd(self):
        with pytest.raises(InvalidInputError):
            PositionCovariance(np.diag([1.0, -0.1, 1.0]))

    def test_covariance_tolerates_round_off(self):
        m = np.diag([1.0, 1.0, -1e-14])
        assert PositionCovariance(m).matrix[2, 2] == pytest.approx(-1e-14)

    def test_from_lower_order(self):
        c = PositionCovariance.from_lower(4, 1, 5, 0.5, 2, 6)
        assert c.matrix.tolist() == [[4, 1, 0.5], [1, 5, 2], [0.5, 2, 6]]

    def test_full_state_covariance(self):
        assert FullStateCovariance(np.eye(6)).matrix.shape == (6, 6)
        with pytest.raises(InvalidInputError):
            FullStateCovariance(np.eye(3))

    @pytest.mark.parametrize("field", ["d1", "d2", "hbr"])
    def test_frame_positive(self, field):
        kw = dict(x1=1.0, x2=1.0, d1=1.0, d2=1.0, hbr=1.0)
        kw[field] = 0.0
        with pytest.raises(InvalidInputError, match=field):
            EncounterFrame(**kw)

    def test_frame_finite(self):
        with pytest.raises(InvalidInputError):
            EncounterFrame(math.inf, 0, 1, 1, 1)


class TestRelativeState:
    def test_identical_states(self):
        s = StateVector([7000, 0, 0], [0, 7.5, 0])
        rel = relative_state(s, PositionCovariance(np.eye(3)), s, PositionCovariance(np.eye(3)))
        assert rel.mu.tolist() == [0, 0, 0]
        assert rel.nu.tolist() == [0, 0, 0]

    def test_subtraction(self):
        zero = PositionCovariance(np.zeros((3, 3)))
        rel = relative_state(StateVector([0, 0, 0], [0, 0, 0]), zero, StateVector([4, 3, 0], [0, 0, 7.5]), zero)
        assert rel.mu.tolist() == [4, 3, 0]
        assert rel.nu.tolist() == [0, 0, 7.5]

    def test_covariances_add(self):
        s = StateVector([0, 0, 0], [1, 0, 0])
        rel = relative_state(s, PositionCovariance(np.diag([1.0, 0, 0])), s, PositionCovariance(np.diag([0, 1.0, 0])))
        assert np.array_equal(rel.covariance.matrix, np.diag([1.0, 1.0, 0.0]))


class TestBasis:
    def test_z_velocity(self):
        nu = np.array([0.0, 0.0, 1.0])
        e1, e2 = encounter_basis(nu)
        for a, b in [(e1, nu), (e2, nu), (e1, e2)]:
            assert abs(a @ b) < 1e-15
        assert np.linalg.norm(e1) == pytest.approx(1.0) and np.linalg.norm(e2) == pytest.approx(1.0)

    def test_x_velocity_spans_yz(self):
        e1, e2 = encounter_basis([1.0, 0.0, 0.0])
        assert abs(e1[0]) < 1e-15 and abs(e2[0]) < 1e-15

    def test_zero_velocity(self):
        with pytest.raises(DegenerateGeometryError):
            encounter_basis([0.0, 0.0, 1e-13])

    @given(vec)
    def test_gram_identity(self, nu):
        nu = np.array(nu)
        if np.linalg.norm(nu) <= 1e-9:
            return
        e1, e2 = encounter_basis(nu)
        b = np.column_stack([e1, e2, nu / np.linalg.norm(nu)])
        assert np.abs(b.T @ b - np.eye(3)).max() < 1e-12


class TestProjection:
    def test_fig1_configuration(self):
        rel = RelativeState([4, 3, 0], [0, 0, 7.5], PositionCovariance(np.diag([1.5**2, 0.8**2, 9.0])))
        f = project_to_encounter_frame(rel, 1.0)
        assert (f.d1, f.d2) == pytest.approx((1.5, 0.8), rel=1e-14)
        assert (abs(f.x1), abs(f.x2)) == pytest.approx((4.0, 3.0), rel=1e-14)
        assert f.x1 >= 0

    def test_isotropic(self):
        mu = np.array([1.0, -2.0, 0.5])
        nu = np.array([0.3, 0.2, 7.0])
        rel = RelativeState(mu, nu, PositionCovariance(0.04 * np.eye(3)))
        f = project_to_encounter_frame(rel, 0.01)
        assert f.d1 == pytest.approx(0.2, rel=1e-12) and f.d2 == pytest.approx(0.2, rel=1e-12)
        assert f.psi_hat == pytest.approx(geometric_miss_distance(mu, nu), rel=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_eigen_oracle(self, seed):
        cov = spd(seed)
        nu = np.random.default_rng(100 + seed).normal(size=3)
        rel = RelativeState([1.0, 2.0, 3.0], nu, PositionCovariance(cov))
        f = project_to_encounter_frame(rel, 1.0)
        e1, e2 = encounter_basis(nu)
        b = np.column_stack([e1, e2])
        c2 = b.T @ cov @ b
        big, small = eig2(mp.mpf(c2[0, 0]), mp.mpf(c2[0, 1]), mp.mpf(c2[1, 1]))
        assert f.d1**2 == pytest.approx(float(big), rel=1e-12)
        assert f.d2**2 == pytest.approx(float(small), rel=1e-12)

    def test_singular_projection(self):
        rel = RelativeState([1, 0, 0], [0, 0, 1], PositionCovariance(np.diag([1.0, 0.0, 1.0])))
        with pytest.raises(DegenerateCovarianceError):
            project_to_encounter_frame(rel, 1.0)

    def test_sign_convention(self):
        rel = RelativeState([-4, -3, 0], [0, 0, 7.5], PositionCovariance(np.diag([2.25, 0.64, 9.0])))
        f = project_to_encounter_frame(rel, 1.0)
        assert f.x1 >= 0.0 and f.d1 >= f.d2

    @pytest.mark.parametrize("seed", range(8))
    def test_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        mu, nu, cov = rng.normal(size=3), rng.normal(size=3) * 7, spd(seed + 50)
        r = rotation(seed + 99)
        f0 = project_to_encounter_frame(RelativeState(mu, nu, PositionCovariance(cov)), 1.0)
        f1 = project_to_encounter_frame(RelativeState(r @ mu, r @ nu, PositionCovariance(r @ cov @ r.T)), 1.0)
        assert f1.psi_hat == pytest.approx(f0.psi_hat, rel=1e-9)
        assert f1.d1 == pytest.approx(f0.d1, rel=1e-9)
        assert f1.d2 == pytest.approx(f0.d2, rel=1e-9)

    @pytest.mark.parametrize("seed", range(8))
    def test_mahalanobis_preserved(self, seed):
        rng = np.random.default_rng(seed)
        mu, nu, cov = rng.normal(size=3), rng.normal(size=3), spd(seed + 7)
        f = project_to_encounter_frame(RelativeState(mu, nu, PositionCovariance(cov)), 1.0)
        e1, e2 = encounter_basis(nu)
        b = np.column_stack([e1, e2])
        m = b.T @ mu
        direct = m @ np.linalg.solve(b.T @ cov @ b, m)
        assert f.x1**2 / f.d1**2 + f.x2**2 / f.d2**2 == pytest.approx(direct, rel=1e-9)
        assert f.d1 >= f.d2 > 0


class TestMissDistance:
    def test_perpendicular(self):
        assert geometric_miss_distance([4, 3, 0], [0, 0, 7.5]) == pytest.approx(5.0)

    def test_parallel(self):
        assert geometric_miss_distance([1, 2, 3], [2, 4, 6]) == pytest.approx(0.0, abs=1e-15)

    def test_zero_velocity(self):
        with pytest.raises(DegenerateGeometryError):
            geometric_miss_distance([1, 0, 0], [0, 0, 0])

    @given(vec, vec)
    def test_bounded_by_norm(self, mu, nu):
        if np.linalg.norm(nu) == 0.0:
            return
        assert geometric_miss_distance(mu, nu) <= np.linalg.norm(mu) * (1 + 1e-12) + 1e-300


class TestValueEquality:
    def test_state_vectors_compare_by_value(self):
        a = StateVector([1, 2, 3], [4, 5, 6])
        b = StateVector(np.array([1.0, 2.0, 3.0]), [4, 5, 6])
        assert a == b and hash(a) == hash(b)
        assert a != StateVector([1, 2, 3], [4, 5, 7])

    def test_covariances_compare_by_value(self):
        assert PositionCovariance(np.eye(3)) == PositionCovariance.from_lower(1, 0, 1, 0, 0, 1)
        assert PositionCovariance(np.eye(3)) != PositionCovariance(2 * np.eye(3))
