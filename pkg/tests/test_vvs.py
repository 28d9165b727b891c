"""Tests for the surrogate visual odometry and the observation conversion."""

from __future__ import annotations

import numpy as np
import pytest

from vinsim import earth, so3
from vinsim.scenario import Turn, generate_truth
from vinsim.vvs import (
    DT_IMG,
    VVS_DECIMATION,
    SurrogateVo,
    VisualPose,
    VoConfig,
    VvsConverter,
    vvs_geodetic_rate,
    vvs_position,
    vvs_velocity,
)

from helpers import make_config
from oracles import meridian_radius_fd, transverse_radius_fd

ZERO_ERROR = VoConfig(
    drift=0.0, pos_noise=0.0, alt_pull=1.0, alt_noise=0.0,
    att_pull=1.0, att_noise=0.0, att_clamp=np.pi,
)


def _pose(t, T, q=None):
    if q is None:
        q = so3.quat_identity()
    return VisualPose(t=float(t), q=q, T=np.asarray(T, dtype=float))


class TestGeodeticRate:
    def test_decimation_matches_rates(self):
        # Ten 100 Hz filter executions per 10 Hz image.
        assert VVS_DECIMATION == 10
        np.testing.assert_allclose(DT_IMG / 0.01, VVS_DECIMATION)

    def test_identical_poses_zero_rate(self):
        p0 = _pose(0.0, [0.3, 0.7, 1200.0])
        p1 = _pose(DT_IMG, [0.3, 0.7, 1200.0])
        np.testing.assert_array_equal(vvs_geodetic_rate(p1, p0), 0.0)

    def test_lon_step_arithmetic(self):
        p0 = _pose(5.0, [0.3, 0.7, 1200.0])
        p1 = _pose(5.0 + DT_IMG, [0.3 + 1e-5, 0.7, 1200.0])
        rate = vvs_geodetic_rate(p1, p0)
        np.testing.assert_allclose(rate[0], 1e-4, rtol=1e-10)

    def test_random_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a = rng.normal(0.0, 1.0, 3)
            b = a + rng.normal(0.0, 1e-4, 3)
            p0 = _pose(1.0, a)
            p1 = _pose(1.0 + DT_IMG, b)
            np.testing.assert_allclose(
                vvs_geodetic_rate(p1, p0), (b - a) / DT_IMG, rtol=1e-12
            )

    def test_non_consecutive_rejected(self):
        p0 = _pose(0.0, [0.0, 0.0, 0.0])
        p1 = _pose(2 * DT_IMG, [0.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            vvs_geodetic_rate(p1, p0)


class TestVelocity:
    def test_zero_rate(self):
        np.testing.assert_array_equal(
            vvs_velocity(np.zeros(3), np.array([0.1, 0.8, 900.0])), 0.0
        )

    def test_climb_sign(self):
        v = vvs_velocity(np.array([0.0, 0.0, 2.5]), np.array([0.1, 0.8, 900.0]))
        np.testing.assert_allclose(v, [0.0, 0.0, -2.5])

    def test_matches_radii_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(15):
            lat = rng.uniform(-1.2, 1.2)
            h = rng.uniform(0.0, 4000.0)
            rate = rng.normal(0.0, 1e-5, 3)
            prior = np.array([rng.uniform(-np.pi, np.pi), lat, h])
            m_r = meridian_radius_fd(lat)
            n_r = transverse_radius_fd(lat)
            expect = np.array(
                [(m_r + h) * rate[1], (n_r + h) * np.cos(lat) * rate[0], -rate[2]]
            )
            np.testing.assert_allclose(vvs_velocity(rate, prior), expect, rtol=1e-8)


class TestPosition:
    def test_zero_rate_keeps_prior_horizontal(self):
        prior = np.array([0.45, -0.3, 2500.0])
        T = vvs_position(np.zeros(3), prior, baro_alt=2481.0)
        np.testing.assert_array_equal(T[:2], prior[:2])
        assert T[2] == 2481.0

    def test_lon_rate_arithmetic(self):
        prior = np.array([0.45, -0.3, 2500.0])
        T = vvs_position(np.array([1e-4, 0.0, 0.0]), prior, baro_alt=2500.0)
        np.testing.assert_allclose(T[0] - prior[0], 1e-5, rtol=1e-9)


class TestCovariancePolicy:
    def _run_constant(self, conv, n, v_ned, t0=0.0, prior=None):
        """Drive the converter with poses that realize a constant NED velocity."""
        if prior is None:
            prior = np.array([0.2, 0.7, 1000.0])
        m_r, n_r = earth.radii(prior[1])
        obs = []
        T = prior.copy()
        baro = prior[2]
        for i in range(n):
            rate = np.array(
                [
                    v_ned[1] / ((n_r + prior[2]) * np.cos(prior[1])),
                    v_ned[0] / (m_r + prior[2]),
                    -v_ned[2],
                ]
            )
            T = T + rate * DT_IMG
            out = conv.step(_pose(t0 + (i + 1) * DT_IMG, T), prior, baro)
            if out is not None:
                obs.append(out)
        return obs

    def test_position_sigma_tenth_of_gnss(self):
        conv = VvsConverter(gnss_pos_sigma=1.5, gnss_alt_sigma=3.0)
        np.testing.assert_allclose(conv.pos_sigma, [0.15, 0.15, 0.3])
        obs = self._run_constant(conv, 3, np.array([25.0, 3.0, 0.0]))
        np.testing.assert_allclose(obs[-1].pos_sigma, [0.15, 0.15, 0.3])

    def test_constant_stream_hits_floor(self):
        conv = VvsConverter(vel_sigma_floor=0.01)
        obs = self._run_constant(conv, 30, np.array([25.0, 3.0, -1.0]))
        np.testing.assert_allclose(obs[-1].vel_sigma, 0.01, atol=1e-9)

    def test_single_outlier_nineteen_twentieths(self):
        conv = VvsConverter(vel_sigma_floor=0.01)
        prior = np.array([0.2, 0.7, 1000.0])
        self._run_constant(conv, 25, np.array([25.0, 0.0, 0.0]), prior=prior)
        # One more frame whose north velocity jumps by +1 m/s.
        m_r, _ = earth.radii(prior[1])
        last = conv._prev_pose
        T = last.T + np.array([0.0, 26.0 / (m_r + prior[2]) * DT_IMG, 0.0])
        out = conv.step(_pose(last.t + DT_IMG, T), prior, prior[2])
        np.testing.assert_allclose(out.vel_sigma[0], 19.0 / 20.0, rtol=1e-6)
        np.testing.assert_allclose(out.vel_sigma[1:], 0.01, atol=1e-9)

    def test_window_matches_brute_force(self):
        conv = VvsConverter(vel_sigma_floor=1e-6)
        prior = np.array([0.2, 0.7, 1000.0])
        m_r, n_r = earth.radii(prior[1])
        rng = np.random.default_rng(5)
        T = prior.copy()
        seen = []
        for i in range(60):
            v = rng.normal(0.0, 5.0, 3)
            rate = np.array(
                [
                    v[1] / ((n_r + prior[2]) * np.cos(prior[1])),
                    v[0] / (m_r + prior[2]),
                    -v[2],
                ]
            )
            T = T + rate * DT_IMG
            out = conv.step(_pose((i + 1) * DT_IMG, T), prior, prior[2])
            if out is None:
                continue
            seen.append(out.v_obs)
            window = np.array(seen[-20:])
            expect = np.maximum(np.abs(out.v_obs - window.mean(axis=0)), 1e-6)
            np.testing.assert_allclose(out.vel_sigma, expect, atol=1e-12)

    def test_bootstrap_emits_nothing(self):
        conv = VvsConverter()
        first = conv.step(_pose(0.1, [0.2, 0.7, 1000.0]), [0.2, 0.7, 1000.0], 1000.0)
        assert first is None
        second = conv.step(_pose(0.2, [0.2, 0.7, 1000.0]), [0.2, 0.7, 1000.0], 1000.0)
        assert second is not None

    def test_noise_amplification(self):
        """White position error of sigma_p per frame maps to velocity noise of
        variance 2 sigma_p^2 / dt^2 through the finite difference."""
        conv = VvsConverter(vel_sigma_floor=1e-9)
        prior = np.array([0.0, 0.7, 500.0])
        m_r, _ = earth.radii(prior[1])
        rng = np.random.default_rng(17)
        sig_m = 0.1
        vals = []
        for i in range(4000):
            T = prior + np.array([0.0, rng.normal(0.0, sig_m) / (m_r + prior[2]), 0.0])
            out = conv.step(_pose((i + 1) * DT_IMG, T), prior, prior[2])
            if out is not None:
                vals.append(out.v_obs[0])
        expect = 2.0 * sig_m**2 / DT_IMG**2
        np.testing.assert_allclose(np.var(vals), expect, rtol=0.1)


class TestPressureCalibration:
    def test_constant_offset_recovered_exactly(self):
        conv = VvsConverter()
        h, dp = 1500.0, 80.0
        raw = float(earth.isa_altitude(earth.isa_pressure(h) + dp))
        for _ in range(200):
            conv.calibrate_pressure(raw, h, dt=0.01)
        np.testing.assert_allclose(conv.dp_hat, dp, rtol=1e-9)
        np.testing.assert_allclose(conv.decode_baro(raw), h, atol=1e-9)

    def test_noisy_reference_averages_out(self):
        conv = VvsConverter(cal_tau=20.0)
        rng = np.random.default_rng(3)
        h, dp = 1500.0, -55.0
        raw = float(earth.isa_altitude(earth.isa_pressure(h) + dp))
        for _ in range(10000):
            conv.calibrate_pressure(raw, h + rng.normal(0.0, 1.0), dt=0.01)
        assert abs(conv.decode_baro(raw) - h) < 0.15

    def test_offset_frozen_during_stepping(self):
        conv = VvsConverter()
        conv.calibrate_pressure(1000.0, 995.0, dt=0.01)
        before = conv.dp_hat
        conv.step(_pose(0.1, [0.0, 0.7, 1000.0]), [0.0, 0.7, 1000.0], 1000.0)
        conv.step(_pose(0.2, [0.0, 0.7, 1000.0]), [0.0, 0.7, 1000.0], 1000.0)
        assert conv.dp_hat == before


@pytest.fixture(scope="module")
def maneuver_traj():
    cfg = make_config(turns=(Turn(30.0, 0.6),), climb_t=60.0, alt1=1560.0)
    return generate_truth(cfg)


class TestSurrogateVo:
    def test_zero_error_increments_match_truth(self, maneuver_traj):
        tr = maneuver_traj
        vo = SurrogateVo(ZERO_ERROR, seed=1)
        step = int(round(DT_IMG * 500.0))
        idx = np.arange(0, tr.n, step)[:200]
        for i in idx:
            p = vo.pose(tr.t[i], tr.q[i], tr.T[i], tr.q[i], tr.T[i])
            np.testing.assert_allclose(p.T, tr.T[i], rtol=0.0, atol=1e-12)
            assert abs(so3.quat_product(so3.quat_conjugate(p.q), tr.q[i])[0]) > 1.0 - 1e-12

    def test_first_frame_initializes_from_estimate(self, maneuver_traj):
        tr = maneuver_traj
        vo = SurrogateVo(VoConfig(), seed=4)
        est_T = tr.T[0] + np.array([1e-5, -2e-5, 3.0])
        p = vo.pose(tr.t[0], tr.q[0], tr.T[0], tr.q[0], est_T)
        np.testing.assert_array_equal(p.T[:2], est_T[:2])

    def test_pitch_bank_clamped_to_inertial(self, maneuver_traj):
        tr = maneuver_traj
        clamp = np.deg2rad(0.5)
        vo = SurrogateVo(VoConfig(att_pull=1.0, att_noise=0.01, att_clamp=clamp), seed=7)
        rng = np.random.default_rng(8)
        for i in range(0, 5000, 50):
            # Inertial estimate deliberately far from truth in pitch and bank.
            q_est = so3.plus(tr.q[i], rng.normal(0.0, 0.05, 3))
            p = vo.pose(tr.t[i], tr.q[i], tr.T[i], q_est, tr.T[i])
            _, th_v, ph_v = so3.quat_to_euler(p.q)
            _, th_e, ph_e = so3.quat_to_euler(q_est)
            assert abs(th_v - th_e) <= clamp + 1e-12
            assert abs(ph_v - ph_e) <= clamp + 1e-12

    def test_drift_scales_with_distance(self):
        """Ensemble mean of the final horizontal error approximates the drift
        fraction times the distance flown."""
        tr = generate_truth(make_config())
        step = int(round(DT_IMG * 500.0))
        idx = np.arange(0, tr.n, step)
        d = 0.01
        cfg = VoConfig(drift=d, pos_noise=0.0, alt_pull=1.0, alt_noise=0.0,
                       att_pull=1.0, att_noise=0.0)
        m_r, n_r = earth.radii(tr.T[0, 1])
        finals = []
        for seed in range(60):
            vo = SurrogateVo(cfg, seed=seed)
            for i in idx:
                p = vo.pose(tr.t[i], tr.q[i], tr.T[i], tr.q[i], tr.T[i])
            e_n = (p.T[1] - tr.T[idx[-1], 1]) * (m_r + tr.T[0, 2])
            e_e = (p.T[0] - tr.T[idx[-1], 0]) * (n_r + tr.T[0, 2]) * np.cos(tr.T[0, 1])
            finals.append(np.hypot(e_n, e_e))
        finals = np.asarray(finals)
        # Straight-and-level truth: distance = speed * time.
        dist = 28.0 * tr.t[idx[-1]]
        se = finals.std(ddof=1) / np.sqrt(finals.size)
        assert abs(finals.mean() - d * dist) < 3.0 * se


class TestEndToEndConversion:
    def test_zero_error_reproduces_truth(self, maneuver_traj):
        """Zero-error poses, truth priors and an offset-free barometer run
        through the conversion chain must return the true position, and a
        velocity within finite-difference tolerance of the true velocity."""
        tr = maneuver_traj
        vo = SurrogateVo(ZERO_ERROR, seed=2)
        conv = VvsConverter()
        step = int(round(DT_IMG * 500.0))
        half = step // 2
        for i in np.arange(0, tr.n, step):
            pose = vo.pose(tr.t[i], tr.q[i], tr.T[i], tr.q[i], tr.T[i])
            raw = float(earth.isa_altitude(earth.isa_pressure(tr.T[i, 2])))
            out = conv.step(pose, tr.T[i], raw)
            if out is None:
                continue
            np.testing.assert_allclose(out.T_obs[:2], tr.T[i, :2], rtol=0.0, atol=1e-12)
            np.testing.assert_allclose(out.T_obs[2], tr.T[i, 2], atol=1e-8)
            v_mid = tr.v[i - half]
            np.testing.assert_allclose(out.v_obs, v_mid, atol=5e-3)
