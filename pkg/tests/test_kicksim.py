"""Deterministic 2D kick environment: geometry, contact, rewards, termination."""

import dataclasses
import math

import numpy as np
import pytest

from kickrl.kicksim import (
    OUTCOME_BALL_OUT,
    OUTCOME_BALL_TOUCHED,
    OUTCOME_ROBOT_OUT,
    OUTCOME_TIMEOUT,
    KickSimConfig,
    KickWorld,
    Observation,
    first_contact_time,
    integrate_pose,
    make_world,
    state_space,
    wrap_deg,
)


def fresh_world(model="proposed", **overrides) -> KickWorld:
    w = make_world(model, **overrides)
    w.reset(np.random.default_rng(0))
    return w


def place(w, x, y, theta, ball_x=3000.0, ball_y=0.0):
    w.robot_x, w.robot_y, w.robot_theta = x, y, theta
    w.ball_x, w.ball_y = ball_x, ball_y
    return w


# ------------------------------------------------------------ angle helper

def test_wrap_deg_is_half_open_at_180():
    assert wrap_deg(180.0) == -180.0
    assert wrap_deg(-180.0) == -180.0
    assert wrap_deg(190.0) == -170.0
    assert wrap_deg(-190.0) == 170.0
    assert wrap_deg(540.0) == -180.0
    assert wrap_deg(0.0) == 0.0
    assert wrap_deg(179.5) == 179.5


# ---------------------------------------------------------------- config

def test_config_periods_and_derived_quantities():
    cfg = KickSimConfig()
    assert cfg.control_period() == 0.25
    assert dataclasses.replace(cfg, state_model="legacy").control_period() == 0.1
    assert cfg.contact_radius() == 200.0
    assert math.isclose(cfg.max_goal_angle(), math.degrees(math.atan2(750.0, 1500.0)), rel_tol=1e-15)
    assert math.isclose(cfg.max_goal_angle(), 26.565, rel_tol=1e-4)


def test_config_rejects_unknown_state_model():
    with pytest.raises(ValueError):
        KickSimConfig(state_model="hover")
    with pytest.raises(ValueError):
        make_world("hover")


def test_make_world_applies_overrides():
    w = make_world("legacy", timeout_s=1.0)
    assert w.cfg.state_model == "legacy"
    assert w.cfg.timeout_s == 1.0
    with pytest.raises(dataclasses.FrozenInstanceError):
        w.cfg.timeout_s = 5.0


def test_state_space_shapes():
    sp = state_space("proposed")
    assert tuple(g.n_centers for g in sp.dims) == (15, 11, 13, 2)
    assert sp.total_features == 4290
    leg = state_space("legacy")
    assert tuple(g.n_centers for g in leg.dims) == (15, 11, 13)
    assert leg.total_features == 2145
    (d0, d1, d2) = leg.dims
    assert (d0.lo, d0.hi) == (0.0, 800.0)
    assert (d1.lo, d1.hi) == (-70.0, 70.0)
    assert (d2.lo, d2.hi) == (-90.0, 90.0)


# ----------------------------------------------------------------- reset

def test_reset_geometry_and_initial_observation():
    w = make_world("proposed")
    obs = w.reset(np.random.default_rng(42))
    assert (w.ball_x, w.ball_y) == (3000.0, 0.0)
    assert math.isclose(math.hypot(w.robot_x - w.ball_x, w.robot_y - w.ball_y), 1000.0, rel_tol=1e-12)
    assert obs.rho == 800.0  # true distance 1000 capped at the box edge
    assert abs(obs.gamma) < 1e-9  # facing the ball
    assert abs(obs.phi) <= 90.0
    assert obs.phase in (0, 1)
    assert w.time_s == 0.0 and w.phase_index == 0


def test_reset_consumes_exactly_two_draws():
    w = make_world("proposed")
    rng = np.random.default_rng(7)
    mirror = np.random.default_rng(7)
    w.reset(rng)
    mirror.uniform(-90.0, 90.0)
    mirror.integers(0, 2)
    assert rng.random() == mirror.random()


def test_start_bearing_is_uniform_and_strictly_inside_the_cone():
    from oracles import ks_critical, ks_statistic

    w = make_world("proposed")
    rng = np.random.default_rng(99)
    phis = []
    for _ in range(4000):
        obs = w.reset(rng)
        assert abs(obs.phi) <= 90.0
        phis.append(obs.phi)
    assert max(map(abs, phis)) < 90.0  # open interval in practice
    d = ks_statistic(phis, lambda x: (x + 90.0) / 180.0)
    assert d < ks_critical(4000, alpha=0.01)


def test_initial_phase_flag_takes_both_values():
    w = make_world("proposed")
    rng = np.random.default_rng(3)
    seen = {w.reset(rng).phase for _ in range(50)}
    assert seen == {0, 1}


# ------------------------------------------------------------ observation

def test_observation_array_length_per_model():
    obs = Observation(100.0, 5.0, -3.0, 1)
    assert list(obs.as_array()) == [100.0, 5.0, -3.0, 1.0]
    legacy = Observation(100.0, 5.0, -3.0, None)
    assert list(legacy.as_array()) == [100.0, 5.0, -3.0]


def test_collinear_setup_observes_zero_angles():
    w = place(fresh_world(), 2400.0, 0.0, 0.0)
    obs = w.observe()
    assert obs.rho == 600.0
    assert obs.gamma == 0.0
    assert obs.phi == 0.0


def test_bearing_clamp_preserves_sign():
    # ball 90 degrees to the robot's left; gamma saturates at +70
    w = place(fresh_world(), 3000.0, -500.0, 0.0)
    obs = w.observe()
    assert obs.rho == 500.0
    assert obs.gamma == 70.0
    assert obs.phi == 90.0
    # mirrored on the right
    w = place(fresh_world(), 3000.0, 500.0, 0.0)
    obs = w.observe()
    assert obs.gamma == -70.0
    assert obs.phi == -90.0


def test_target_side_position_clamps_phi_sign_preserved():
    # robot between ball and goal: ball angle wraps to -180, clamped to -90
    w = place(fresh_world(), 4000.0, 0.0, math.pi)
    obs = w.observe()
    assert obs.phi == -90.0
    assert obs.rho == 800.0


def test_distance_caps_at_the_box_edge():
    w = place(fresh_world(), 1000.0, 0.0, 0.0)
    assert w.observe().rho == 800.0


# ------------------------------------------------------------- integration

def test_straight_line_step_moves_exactly_30mm():
    w = place(fresh_world(), 0.0, 0.0, 0.0, ball_x=4000.0)
    w.step((120.0, 0.0, 0.0))
    assert (w.robot_x, w.robot_y, w.robot_theta) == (30.0, 0.0, 0.0)


def test_zero_command_is_a_pose_fixed_point_that_toggles_phase():
    w = fresh_world()
    pose = (w.robot_x, w.robot_y, w.robot_theta)
    phase0 = w.phase_type
    obs, reward, done, info = w.step((0.0, 0.0, 0.0))
    assert (w.robot_x, w.robot_y, w.robot_theta) == pose
    assert w.phase_type == phase0 ^ 1
    assert obs.phase == phase0 ^ 1
    assert not done
    want = -(obs.rho / 800.0 + abs(obs.phi) / 90.0 + abs(obs.gamma) / 70.0)
    assert reward == want


def test_legacy_phase_flag_is_absent_and_does_not_toggle():
    w = fresh_world("legacy")
    t0 = w.phase_type
    obs, _, _, _ = w.step((0.0, 0.0, 0.0))
    assert obs.phase is None
    assert w.phase_type == t0


def test_arc_integration_matches_numeric_quadrature():
    """Closed-form constant-twist pose vs 1e5-step Euler, sub-micrometer."""
    vx, vy, omega, t = 100.0, 50.0, math.radians(30.0), 0.25
    gx, gy, gth = integrate_pose(1.0, 2.0, 0.3, vx, vy, omega, t)
    n = 100_000
    dt = t / n
    x, y, th = 1.0, 2.0, 0.3
    for _ in range(n):
        x += (vx * math.cos(th) - vy * math.sin(th)) * dt
        y += (vx * math.sin(th) + vy * math.cos(th)) * dt
        th += omega * dt
    assert math.isclose(gx, x, abs_tol=1e-3)
    assert math.isclose(gy, y, abs_tol=1e-3)
    assert math.isclose(gth, th, abs_tol=1e-9)


def test_command_clamping_respects_the_bounds():
    w = place(fresh_world(), 0.0, 0.0, 0.0, ball_x=4000.0)
    w.step((1e6, 0.0, 0.0))  # clamped to 120 mm/s
    assert w.robot_x == 30.0
    w2 = place(fresh_world(), 0.0, 0.0, 0.0, ball_x=4000.0)
    w2.step((-1e6, 0.0, 0.0))  # vx floor is 0: no reverse gear
    assert w2.robot_x == 0.0


# ----------------------------------------------------------------- contact

def test_head_on_kick_travels_1536mm_and_scores():
    w = place(fresh_world(), 2750.0, 0.0, 0.0)
    obs, reward, done, info = w.step((120.0, 0.0, 0.0))
    assert not done
    assert reward == -(220.0 / 800.0)  # rho shrank, angles stayed zero
    obs, reward, done, info = w.step((120.0, 0.0, 0.0))
    assert done
    assert info["outcome"] == OUTCOME_BALL_TOUCHED
    kick = info["kick"]
    assert kick.launch_speed == 960.0
    assert kick.travel == 1536.0
    assert kick.psi_error == 0.0
    assert kick.alpha_error == 0.0
    assert kick.distance_error == 0.0
    assert kick.angle_error == 0.0
    assert kick.success is True
    assert reward == 50.0


def test_glancing_contact_terminates_with_zero_launch():
    w = place(fresh_world(), 2810.0, 0.0, 0.0)
    obs, reward, done, info = w.step((0.0, 70.0, 0.0))
    assert done
    kick = info["kick"]
    assert kick.launch_speed == 0.0
    assert kick.travel == 0.0
    assert kick.psi_error == 1500.0
    assert kick.distance_error == 1.0
    assert kick.success is False
    assert (kick.rest_x, kick.rest_y) == (3000.0, 0.0)
    assert math.isclose(reward, 50.0 * math.exp(-5.0), rel_tol=1e-12)


def test_zero_gain_kick_never_moves_the_ball():
    w = place(fresh_world(kick_gain=0.0), 2750.0, 0.0, 0.0)
    done = False
    while not done:
        _, _, done, info = w.step((120.0, 0.0, 0.0))
    kick = info["kick"]
    assert info["outcome"] == OUTCOME_BALL_TOUCHED
    assert kick.launch_speed == 0.0
    assert kick.distance_error == 1.0
    assert kick.success is False


def test_backward_kick_direction_scores_zero_reward():
    """Ball pushed away from the target line: infinite miss, reward 0."""
    w = place(fresh_world(), 3100.0, 0.0, math.pi)
    obs, reward, done, info = w.step((120.0, 0.0, 0.0))
    assert done
    kick = info["kick"]
    assert kick.psi_error == math.inf
    assert kick.success is False
    assert kick.distance_error == 1.0
    assert reward == 0.0


def test_wide_kick_misses_the_goal_mouth():
    # driving diagonally: ball launched at 45 degrees crosses the line wide
    w = place(fresh_world(), 2860.0, -140.0, math.pi / 4.0)
    obs, reward, done, info = w.step((120.0, 0.0, 0.0))
    assert done
    kick = info["kick"]
    assert kick.success is False
    assert kick.alpha_error > 26.0
    assert kick.angle_error > 0.9


def test_contact_wins_over_the_timeout_check():
    w = place(fresh_world(timeout_s=0.05), 2790.0, 0.0, 0.0)
    obs, reward, done, info = w.step((120.0, 0.0, 0.0))
    assert done
    assert info["outcome"] == OUTCOME_BALL_TOUCHED
    assert info["time_s"] < 0.25


def test_first_contact_time_straight_and_miss_cases():
    # closing at 100 mm/s from 300 mm against a 200 mm radius: touch at t=1
    t = first_contact_time(0.0, 0.0, 0.0, 100.0, 0.0, 0.0, 2.0, 300.0, 0.0, 200.0)
    assert t is not None and math.isclose(t, 1.0, rel_tol=1e-9)
    # passing 300 mm to the side never gets within reach
    t = first_contact_time(0.0, 0.0, 0.0, 100.0, 0.0, 0.0, 2.0, 0.0, 300.0, 200.0)
    assert t is None
    # out of reach within the horizon
    t = first_contact_time(0.0, 0.0, 0.0, 100.0, 0.0, 0.0, 0.5, 300.0, 0.0, 200.0)
    assert t is None


def test_first_contact_time_on_an_arc_matches_fine_stepping():
    args = (0.0, 0.0, 0.0, 110.0, 20.0, math.radians(25.0))
    ball = (60.0, 230.0)
    radius = 200.0
    horizon = 4.0
    t = first_contact_time(*args, horizon, *ball, radius)
    assert t is not None
    x, y, th = args[0], args[1], args[2]
    vx, vy, om = args[3], args[4], args[5]
    dt = 1e-5
    steps = 0
    while math.hypot(ball[0] - x, ball[1] - y) > radius:
        x += (vx * math.cos(th) - vy * math.sin(th)) * dt
        y += (vx * math.sin(th) + vy * math.cos(th)) * dt
        th += om * dt
        steps += 1
        assert steps < horizon / dt
    assert math.isclose(t, steps * dt, abs_tol=1e-3)


# ------------------------------------------------------------- termination

@pytest.mark.parametrize("model,want_steps", [("proposed", 800), ("legacy", 2000)])
def test_timeout_hits_exactly_200_seconds(model, want_steps):
    w = fresh_world(model)
    steps = 0
    done = False
    while not done:
        _, _, done, info = w.step((0.0, 0.0, 0.0))
        steps += 1
    assert steps == want_steps
    assert info["outcome"] == OUTCOME_TIMEOUT
    assert w.time_s == 200.0


def test_walking_off_the_side_line_ends_the_episode():
    w = place(fresh_world(), 2000.0, 2990.0, 0.0)
    done = False
    steps = 0
    while not done:
        _, _, done, info = w.step((0.0, 70.0, 0.0))
        steps += 1
    assert info["outcome"] == OUTCOME_ROBOT_OUT
    assert steps == 1
    assert w.robot_y > 3000.0


def test_robot_out_is_checked_before_timeout():
    w = place(fresh_world(timeout_s=0.25), 4499.0, 0.0, 0.0, ball_x=3000.0)
    _, _, done, info = w.step((120.0, 0.0, 0.0))
    assert done
    assert info["outcome"] == OUTCOME_ROBOT_OUT


def test_stray_ball_position_is_flagged():
    w = fresh_world()
    w.ball_x = 4600.0  # out of bounds by construction
    _, _, done, info = w.step((0.0, 0.0, 0.0))
    assert done
    assert info["outcome"] == OUTCOME_BALL_OUT


def test_stepping_a_finished_episode_raises():
    w = place(fresh_world(), 2790.0, 0.0, 0.0)
    _, _, done, _ = w.step((120.0, 0.0, 0.0))
    assert done
    with pytest.raises(RuntimeError):
        w.step((0.0, 0.0, 0.0))


# ------------------------------------------------------------- legacy frame

def test_legacy_foot_tie_breaks_to_the_left():
    w = place(fresh_world("legacy"), 0.0, 0.0, 0.0, ball_x=100.0, ball_y=0.0)
    obs = w.observe()
    # observing from the left foot at (0, +50): ball sits 26.57 deg to the right
    assert obs.rho == math.hypot(100.0, 50.0)
    assert math.isclose(obs.gamma, math.degrees(math.atan2(-50.0, 100.0)), rel_tol=1e-12)
    assert obs.gamma < 0.0


def test_legacy_origin_follows_the_nearer_foot():
    w = place(fresh_world("legacy"), 0.0, 0.0, 0.0, ball_x=100.0, ball_y=-80.0)
    obs = w.observe()
    # right foot at (0, -50) is closer; bearing measured from there
    assert math.isclose(obs.gamma, math.degrees(math.atan2(-30.0, 100.0)), rel_tol=1e-12)


def test_proposed_frame_uses_the_body_center():
    w = place(fresh_world("proposed"), 0.0, 0.0, 0.0, ball_x=100.0, ball_y=0.0)
    obs = w.observe()
    assert obs.rho == 100.0
    assert obs.gamma == 0.0


# ---------------------------------------------------------------- rewards

def test_worst_case_shaping_reward_is_minus_three():
    w = place(fresh_world(), 4000.0, 0.0, math.radians(260.0))
    _, reward, done, _ = w.step((0.0, 0.0, 0.0))
    assert not done
    assert reward == -3.0


def test_aligned_far_position_rewards_minus_one():
    w = place(fresh_world(), 2000.0, 0.0, 0.0)
    _, reward, _, _ = w.step((0.0, 0.0, 0.0))
    assert reward == -1.0


def test_shaping_reward_improves_as_the_robot_closes_in():
    w = place(fresh_world(), 2000.0, 0.0, 0.0)
    rewards = []
    for _ in range(20):
        _, r, done, _ = w.step((120.0, 0.0, 0.0))
        if done:
            break
        rewards.append(r)
    assert rewards == sorted(rewards)
    assert all(-3.0 <= r <= 0.0 for r in rewards)


# ------------------------------------------------------------ determinism

def test_same_seed_gives_identical_trajectories():
    cmds = [(60.0, 10.0, 5.0), (120.0, -30.0, -10.0), (90.0, 0.0, 15.0), (30.0, 70.0, 0.0)]
    logs = []
    for _ in range(2):
        w = make_world("proposed")
        w.reset(np.random.default_rng(1234))
        log = []
        for c in cmds * 5:
            obs, r, done, info = w.step(c)
            log.append((tuple(obs.as_array()), r, done, info["outcome"]))
            if done:
                break
        logs.append(log)
    assert logs[0] == logs[1]
