"""EKF prediction/update and the frozen-Jacobian covariance recursion."""

import numpy as np
import pytest

from avcodesign.ekf import (
    CovarianceError,
    EkfState,
    covariance_sequence,
    ekf_predict,
    ekf_update,
    predict_covariance,
    update_covariance,
)
from avcodesign.order import LoewnerPsd, Outcome, PointwiseSequence
from avcodesign.vehicle import VehicleParams

PARAMS = VehicleParams()


def straight_reference(n, v=1.0, dt=0.01):
    return [(v * dt * k, 0.0, 0.0, 0.0, v) for k in range(n)]


class TestPredict:
    def test_zero_noise_zero_covariance_stays_zero(self):
        ekf = EkfState.initial((0, 0, 0, 0, 1), np.zeros((5, 5)))
        for _ in range(10):
            ekf = ekf_predict(ekf, (0, 0), 0.01, np.zeros((5, 5)), PARAMS)
        assert np.all(ekf.P == 0.0)
        assert ekf.s_hat == pytest.approx((0.1, 0, 0, 0, 1), abs=1e-12)

    def test_small_step_covariance_first_order(self):
        ekf = EkfState.initial((0, 0, 0, 0, 1), np.zeros((5, 5)))
        dt = 1e-3
        out = ekf_predict(ekf, (0, 0), dt, np.eye(5), PARAMS)
        assert np.max(np.abs(out.P - dt * np.eye(5))) <= 1e-6

    def test_trace_never_decreases_on_straight_runs(self):
        ekf = EkfState.initial((0, 0, 0, 0, 2), 1e-4 * np.eye(5))
        W = np.diag([1e-4, 1e-4, 1e-4, 1e-4, 1e-3])
        prev = np.trace(ekf.P)
        for _ in range(100):
            ekf = ekf_predict(ekf, (0, 0), 0.01, W, PARAMS)
            cur = np.trace(ekf.P)
            assert cur >= prev - 1e-15
            prev = cur

    def test_jacobian_recorded(self):
        ekf = EkfState.initial((0, 0, 0, 0, 3), np.zeros((5, 5)))
        out = ekf_predict(ekf, (0, 0), 0.01, np.zeros((5, 5)), PARAMS)
        assert out.F is not None
        assert out.F[0, 4] == pytest.approx(1.0)

    def test_indefinite_covariance_rejected(self):
        with pytest.raises(CovarianceError):
            EkfState.initial((0, 0, 0, 0, 1), -np.eye(5))

    def test_bad_dt_rejected(self):
        ekf = EkfState.initial((0, 0, 0, 0, 1), np.zeros((5, 5)))
        with pytest.raises(ValueError):
            ekf_predict(ekf, (0, 0), 0.0, np.zeros((5, 5)), PARAMS)


class TestUpdate:
    def test_unit_covariance_halves(self):
        ekf = EkfState.initial((0, 0, 0, 0, 1), np.eye(5))
        out = ekf_update(ekf, np.zeros(5), np.eye(5))
        assert np.allclose(out.K, 0.5 * np.eye(5), atol=1e-12)
        assert np.allclose(out.P, 0.5 * np.eye(5), atol=1e-12)

    def test_estimate_moves_halfway(self):
        ekf = EkfState.initial((1, 2, 3, 0.1, 5), np.eye(5))
        y = np.array([2.0, 2.0, 3.0, 0.1, 6.0])
        out = ekf_update(ekf, y, np.eye(5))
        assert out.s_hat == pytest.approx((1.5, 2.0, 3.0, 0.1, 5.5), abs=1e-12)

    def test_dropped_changes_nothing(self):
        ekf = EkfState.initial((1, 2, 3, 0.1, 5), 0.3 * np.eye(5))
        assert ekf_update(ekf, None, np.eye(5)) is ekf

    def test_huge_noise_ignores_measurement(self):
        P = np.diag([1.0, 2.0, 3.0, 4.0, 5.0])
        ekf = EkfState.initial((0, 0, 0, 0, 1), P)
        out = ekf_update(ekf, np.full(5, 7.0), 1e12 * np.eye(5))
        assert np.max(np.abs(out.K)) <= 1e-9
        assert np.allclose(out.P, P, rtol=1e-6)

    def test_singular_sum_regularized_and_flagged(self):
        ekf = EkfState.initial((0, 0, 0, 0, 1), np.zeros((5, 5)))
        out = ekf_update(ekf, np.ones(5), np.zeros((5, 5)))
        assert out.regularized
        assert np.allclose(out.P, 0.0)

    def test_bad_observation_shape_rejected(self):
        ekf = EkfState.initial((0, 0, 0, 0, 1), np.eye(5))
        with pytest.raises(ValueError):
            ekf_update(ekf, np.zeros(4), np.eye(5))


class TestClosedLoopConsistency:
    def test_noiseless_filter_tracks_truth(self):
        from avcodesign.vehicle import step

        s = (0.0, 0.0, 0.0, 0.0, 5.0)
        ekf = EkfState.initial(s, np.zeros((5, 5)))
        for k in range(100):
            u = (0.05, 0.2)
            s = step(s, u, 0.01, PARAMS)
            ekf = ekf_predict(ekf, u, 0.01, np.zeros((5, 5)), PARAMS)
            if (k + 1) % 2 == 0:
                ekf = ekf_update(ekf, np.asarray(s), np.zeros((5, 5)))
        assert ekf.s_hat == pytest.approx(s, abs=1e-7)


class TestFrozenRecursion:
    def setup_method(self):
        self.refs = straight_reference(60, v=5.0)
        self.updates = [(k + 1) % 2 == 0 for k in range(60)]
        self.P0 = 1e-4 * np.eye(5)
        self.seq_poset = PointwiseSequence(LoewnerPsd(dim=5))

    def _seq(self, scale_v, scale_w, updates=None):
        V = scale_v * np.diag([0.01, 0.01, 2.5e-3, 2.5e-3, 0.04])
        W = scale_w * np.diag([1e-4, 1e-4, 1e-4, 1e-4, 1e-3])
        return covariance_sequence(self.refs, 0.01, W, V,
                                   updates or self.updates, self.P0, PARAMS)

    def test_better_sensor_dominates_pointwise(self):
        lo = self._seq(1.0, 1.0)
        hi = self._seq(4.0, 4.0)
        assert self.seq_poset.compare(tuple(lo), tuple(hi)).implies_le()

    def test_monotone_in_measurement_noise_alone(self):
        assert self.seq_poset.compare(
            tuple(self._seq(1.0, 1.0)), tuple(self._seq(9.0, 1.0))).implies_le()

    def test_monotone_in_process_noise_alone(self):
        assert self.seq_poset.compare(
            tuple(self._seq(1.0, 1.0)), tuple(self._seq(1.0, 9.0))).implies_le()

    def test_more_drops_dominate(self):
        rng = np.random.default_rng(8)
        u = rng.uniform(size=60)
        base = [(k + 1) % 2 == 0 for k in range(60)]
        updates_lo = [b and not (u[k] < 0.1) for k, b in enumerate(base)]
        updates_hi = [b and not (u[k] < 0.4) for k, b in enumerate(base)]
        lo = self._seq(1.0, 1.0, updates=updates_lo)
        hi = self._seq(1.0, 1.0, updates=updates_hi)
        assert self.seq_poset.compare(tuple(lo), tuple(hi)).implies_le()

    def test_skipping_an_update_never_helps(self):
        none_dropped = self._seq(1.0, 1.0)
        all_dropped = self._seq(1.0, 1.0, updates=[False] * 60)
        c = self.seq_poset.compare(tuple(none_dropped), tuple(all_dropped))
        assert c is Outcome.LESS_OR_EQUAL

    def test_update_shrinks_covariance(self):
        P = np.diag([1.0, 2.0, 3.0, 4.0, 5.0])
        out = update_covariance(P, np.eye(5))
        assert LoewnerPsd(dim=5).compare(out, P).implies_le()

    def test_prediction_grows_covariance_with_noise(self):
        P = 1e-3 * np.eye(5)
        F = np.zeros((5, 5))
        out = predict_covariance(P, F, np.eye(5), 0.01)
        assert np.allclose(out, P + 0.01 * np.eye(5), atol=1e-15)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            covariance_sequence(self.refs, 0.01, np.eye(5), np.eye(5),
                                [True] * 10, self.P0, PARAMS)
