"""Deterministic 2D kinematic environment for learning an in-walk kick.

Conventions: world frame in millimeters with +x toward the opponent goal
line and angles counter-clockwise; headings in radians internally, all
observed angles in degrees.  Commands are body-frame walk velocities
(forward mm/s, leftward mm/s, turn deg/s) held constant for one control
interval.  Pose integration over an interval is the exact constant-twist
arc, and robot-ball contact inside an interval is solved in closed form
(line-circle or arc-circle intersection), not sampled.

Observation (proposed model, phase-synchronized, body-center frame):
    rho    robot-ball distance, clamped to [0, 800] mm
    gamma  bearing of the ball in the robot frame, clamped to [-70, 70] deg
    phi    angle at the ball between the ball-goal ray and the robot-ball
           ray, clamped to [-90, 90] deg
    delta  alternating gait-phase flag (0/1)
The legacy model reads rho/gamma/phi from the support foot instead of the
body center, has no phase flag, and runs on a fixed 100 ms control cycle
instead of the 250 ms gait phase.

A touched ball is launched along the center-to-center line with speed
proportional to the robot's approach speed, rolls out under constant
deceleration, and the episode ends.  Episodes also end when the robot
leaves the field, the ball leaves the field, or 200 s pass; ball contact
takes precedence over all other endings, robot-out over ball-out over
timeout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, replace

import numpy as np

from .approx import StateSpace
from .basis import DimensionGrid

OUTCOME_RUNNING = "running"
OUTCOME_BALL_TOUCHED = "ball_touched"
OUTCOME_ROBOT_OUT = "robot_out"
OUTCOME_BALL_OUT = "ball_out"
OUTCOME_TIMEOUT = "timeout"


def wrap_deg(a: float) -> float:
    """Wrap an angle in degrees to [-180, 180)."""
    return (a + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class KickSimConfig:
    field_x_half: float = 4500.0
    field_y_half: float = 3000.0
    goal_half_width: float = 750.0
    ball_start_dist: float = 1500.0  # ball to goal center at reset
    robot_start_dist: float = 1000.0  # robot to ball at reset
    max_start_bearing: float = 90.0  # |phi| at reset, degrees
    phase_duration: float = 0.25  # s, proposed phase-synchronized control
    legacy_period: float = 0.1  # s, legacy fixed control cycle
    body_radius: float = 150.0
    ball_radius: float = 50.0
    foot_offset: float = 50.0  # lateral foot distance from center, legacy frame
    kick_gain: float = 8.0  # launch speed per approach speed
    roll_decel: float = 300.0  # mm/s^2 rollout deceleration
    timeout_s: float = 200.0
    reward_scale: float = 50.0  # terminal reward at a perfect kick
    psi_scale: float = 300.0  # mm, distance-shortfall decay
    alpha_scale: float = 14.0  # deg, launch-misdirection decay
    rho_max: float = 800.0
    gamma_max: float = 70.0
    phi_max: float = 90.0
    cmd_bounds: tuple = ((0.0, 120.0), (-70.0, 70.0), (-30.0, 30.0))
    state_model: str = "proposed"  # or "legacy"

    def __post_init__(self):
        if self.state_model not in ("proposed", "legacy"):
            raise ValueError(f"unknown state model {self.state_model!r}")

    def control_period(self) -> float:
        return self.phase_duration if self.state_model == "proposed" else self.legacy_period

    def contact_radius(self) -> float:
        return self.body_radius + self.ball_radius

    def max_goal_angle(self) -> float:
        """Degrees of launch misdirection that still spans the goal mouth."""
        return math.degrees(math.atan2(self.goal_half_width, self.ball_start_dist))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "KickSimConfig":
        d = dict(d)
        if "cmd_bounds" in d:
            d["cmd_bounds"] = tuple(tuple(float(v) for v in b) for b in d["cmd_bounds"])
        return cls(**d)


@dataclass(frozen=True)
class Observation:
    rho: float
    gamma: float
    phi: float
    phase: int | None  # None in legacy mode

    def as_array(self) -> np.ndarray:
        if self.phase is None:
            return np.array([self.rho, self.gamma, self.phi], dtype=np.float64)
        return np.array([self.rho, self.gamma, self.phi, float(self.phase)], dtype=np.float64)


@dataclass(frozen=True)
class KickOutcome:
    """Closed-form rollout of a touched ball."""

    psi_error: float  # mm left to the goal line along the shot, inf if aimed away
    alpha_error: float  # deg between launch direction and ball-goal ray
    distance_error: float  # psi_error / 1500, clamped to [0, 1]
    angle_error: float  # alpha_error / max goal angle, unbounded above
    success: bool  # ball crosses the goal line inside the mouth
    launch_speed: float  # mm/s
    travel: float  # rollout distance, mm
    rest_x: float
    rest_y: float


def integrate_pose(
    x: float, y: float, theta: float, vx: float, vy: float, omega: float, dt: float
) -> tuple[float, float, float]:
    """Advance a pose along the exact constant-twist arc for dt seconds."""
    if abs(omega) < 1e-9:
        dxb = vx * dt
        dyb = vy * dt
    else:
        s = math.sin(omega * dt)
        c = math.cos(omega * dt)
        dxb = (vx * s + vy * (c - 1.0)) / omega
        dyb = (vx * (1.0 - c) + vy * s) / omega
    ct = math.cos(theta)
    st = math.sin(theta)
    return (x + dxb * ct - dyb * st, y + dxb * st + dyb * ct, theta + omega * dt)


def first_contact_time(
    x: float,
    y: float,
    theta: float,
    vx: float,
    vy: float,
    omega: float,
    horizon: float,
    bx: float,
    by: float,
    radius: float,
) -> float | None:
    """Earliest t in [0, horizon] where the swept center hits the ball circle.

    Straight motion reduces to a line-circle quadratic; turning motion to
    the intersection of two circles (the swept arc around the turn center
    and the contact circle around the ball).  Returns None when the sweep
    never reaches the circle within the horizon.
    """
    relx = x - bx
    rely = y - by
    if relx * relx + rely * rely <= radius * radius:
        return 0.0
    if abs(omega) < 1e-9:
        ct = math.cos(theta)
        st = math.sin(theta)
        wx = vx * ct - vy * st
        wy = vx * st + vy * ct
        a = wx * wx + wy * wy
        if a < 1e-18:
            return None
        b = 2.0 * (relx * wx + rely * wy)
        c = relx * relx + rely * rely - radius * radius
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return None
        t = (-b - math.sqrt(disc)) / (2.0 * a)
        return t if 0.0 <= t <= horizon else None
    speed = math.hypot(vx, vy)
    if speed / abs(omega) < 1e-12:  # spinning in place
        return None
    ct = math.cos(theta)
    st = math.sin(theta)
    ox = -vy / omega
    oy = vx / omega
    cx = x + ox * ct - oy * st
    cy = y + ox * st + oy * ct
    r_c = speed / abs(omega)
    dbx = bx - cx
    dby = by - cy
    d_b = math.hypot(dbx, dby)
    if d_b < 1e-12:
        return None  # ball at the turn center, distance is constant (> radius)
    cos_gap = (d_b * d_b + r_c * r_c - radius * radius) / (2.0 * d_b * r_c)
    if cos_gap > 1.0:
        return None
    cos_gap = max(cos_gap, -1.0)
    gap = math.acos(cos_gap)
    alpha0 = math.atan2(y - cy, x - cx)
    beta = math.atan2(dby, dbx)
    two_pi = 2.0 * math.pi
    best = None
    for target in (beta - gap, beta + gap):
        if omega > 0.0:
            t = ((target - alpha0) % two_pi) / omega
        else:
            t = ((alpha0 - target) % two_pi) / (-omega)
        if t <= horizon and (best is None or t < best):
            best = t
    return best


class KickWorld:
    """Single-robot kick episode; all randomness comes through reset(rng)."""

    def __init__(self, cfg: KickSimConfig | None = None):
        self.cfg = cfg or KickSimConfig()
        self.robot_x = 0.0
        self.robot_y = 0.0
        self.robot_theta = 0.0
        self.ball_x = 0.0
        self.ball_y = 0.0
        self.phase_type = 0
        self.phase_index = 0
        self.time_s = 0.0
        self.outcome = OUTCOME_RUNNING

    @property
    def goal_x(self) -> float:
        return self.cfg.field_x_half

    def reset(self, rng: np.random.Generator) -> Observation:
        """Place the ball 1.5 m from the goal and the robot 1 m behind it.

        Draws exactly two values per reset in every mode: the start bearing
        (uniform over +-max_start_bearing) and the initial phase flag.
        """
        cfg = self.cfg
        phi0 = rng.uniform(-cfg.max_start_bearing, cfg.max_start_bearing)
        phase = int(rng.integers(0, 2))
        self.ball_x = self.goal_x - cfg.ball_start_dist
        self.ball_y = 0.0
        ang = math.radians(phi0)
        self.robot_x = self.ball_x - cfg.robot_start_dist * math.cos(ang)
        self.robot_y = self.ball_y - cfg.robot_start_dist * math.sin(ang)
        self.robot_theta = ang  # facing the ball
        self.phase_type = phase
        self.phase_index = 0
        self.time_s = 0.0
        self.outcome = OUTCOME_RUNNING
        return self.observe()

    def _obs_origin(self) -> tuple[float, float]:
        """Body center, or the foot nearest the ball in legacy mode (tie: left)."""
        if self.cfg.state_model == "proposed":
            return self.robot_x, self.robot_y
        st = math.sin(self.robot_theta)
        ct = math.cos(self.robot_theta)
        off = self.cfg.foot_offset
        lx, ly = self.robot_x - off * st, self.robot_y + off * ct
        rx, ry = self.robot_x + off * st, self.robot_y - off * ct
        dl = math.hypot(self.ball_x - lx, self.ball_y - ly)
        dr = math.hypot(self.ball_x - rx, self.ball_y - ry)
        return (lx, ly) if dl <= dr else (rx, ry)

    def observe(self) -> Observation:
        cfg = self.cfg
        ox, oy = self._obs_origin()
        dx = self.ball_x - ox
        dy = self.ball_y - oy
        rho = min(math.hypot(dx, dy), cfg.rho_max)
        to_ball = math.degrees(math.atan2(dy, dx))
        gamma = wrap_deg(to_ball - math.degrees(self.robot_theta))
        gamma = min(max(gamma, -cfg.gamma_max), cfg.gamma_max)
        to_goal = math.degrees(math.atan2(-self.ball_y, self.goal_x - self.ball_x))
        phi = wrap_deg(to_ball - to_goal)
        phi = min(max(phi, -cfg.phi_max), cfg.phi_max)
        phase = self.phase_type if cfg.state_model == "proposed" else None
        return Observation(rho, gamma, phi, phase)

    def _resolve_kick(self, vx: float, vy: float, omega: float) -> tuple[KickOutcome, float]:
        """Launch the ball from the current contact geometry; returns (outcome, reward)."""
        cfg = self.cfg
        dx = self.ball_x - self.robot_x
        dy = self.ball_y - self.robot_y
        n = math.hypot(dx, dy)
        dirx, diry = (dx / n, dy / n) if n > 0.0 else (1.0, 0.0)
        ct = math.cos(self.robot_theta)
        st = math.sin(self.robot_theta)
        wvx = vx * ct - vy * st
        wvy = vx * st + vy * ct
        approach = wvx * dirx + wvy * diry
        speed = cfg.kick_gain * max(0.0, approach)
        travel = speed * speed / (2.0 * cfg.roll_decel)
        to_goal = math.atan2(-self.ball_y, self.goal_x - self.ball_x)
        alpha = abs(wrap_deg(math.degrees(math.atan2(diry, dirx) - to_goal)))
        if dirx > 0.0:
            run_to_line = (self.goal_x - self.ball_x) / dirx
            psi = max(0.0, run_to_line - travel)
            y_cross = self.ball_y + run_to_line * diry
            success = travel >= run_to_line and abs(y_cross) <= cfg.goal_half_width
        else:
            psi = math.inf
            success = False
        out = KickOutcome(
            psi_error=psi,
            alpha_error=alpha,
            distance_error=min(max(psi / cfg.ball_start_dist, 0.0), 1.0),
            angle_error=alpha / cfg.max_goal_angle(),
            success=success,
            launch_speed=speed,
            travel=travel,
            rest_x=self.ball_x + travel * dirx,
            rest_y=self.ball_y + travel * diry,
        )
        reward = cfg.reward_scale * math.exp(-psi / cfg.psi_scale) * math.exp(-alpha / cfg.alpha_scale)
        return out, reward

    def step(self, command) -> tuple[Observation, float, bool, dict]:
        """Hold one command for a control interval; returns (obs, reward, done, info)."""
        if self.outcome != OUTCOME_RUNNING:
            raise RuntimeError("episode is over, call reset() first")
        cfg = self.cfg
        vx, vy, vth = (
            min(max(float(c), lo), hi) for c, (lo, hi) in zip(command, cfg.cmd_bounds)
        )
        omega = math.radians(vth)
        horizon = cfg.control_period()
        t_c = first_contact_time(
            self.robot_x, self.robot_y, self.robot_theta,
            vx, vy, omega, horizon,
            self.ball_x, self.ball_y, cfg.contact_radius(),
        )
        if t_c is not None:
            self.robot_x, self.robot_y, self.robot_theta = integrate_pose(
                self.robot_x, self.robot_y, self.robot_theta, vx, vy, omega, t_c
            )
            self.time_s += t_c
            kick, reward = self._resolve_kick(vx, vy, omega)
            self.outcome = OUTCOME_BALL_TOUCHED
            obs = self.observe()
            info = {"outcome": self.outcome, "kick": kick, "time_s": self.time_s}
            return obs, reward, True, info

        self.robot_x, self.robot_y, self.robot_theta = integrate_pose(
            self.robot_x, self.robot_y, self.robot_theta, vx, vy, omega, horizon
        )
        self.phase_index += 1
        # product, not accumulation: repeated += horizon drifts for periods
        # that are inexact in binary and can add a step past the timeout
        self.time_s = self.phase_index * horizon
        if cfg.state_model == "proposed":
            self.phase_type ^= 1
        obs = self.observe()
        if abs(self.robot_x) > cfg.field_x_half or abs(self.robot_y) > cfg.field_y_half:
            self.outcome = OUTCOME_ROBOT_OUT
        elif abs(self.ball_x) > cfg.field_x_half or abs(self.ball_y) > cfg.field_y_half:
            self.outcome = OUTCOME_BALL_OUT
        elif self.time_s >= cfg.timeout_s:
            self.outcome = OUTCOME_TIMEOUT
        done = self.outcome != OUTCOME_RUNNING
        reward = -(obs.rho / cfg.rho_max + abs(obs.phi) / cfg.phi_max + abs(obs.gamma) / cfg.gamma_max)
        info = {"outcome": self.outcome, "kick": None, "time_s": self.time_s}
        return obs, reward, done, info


def state_space(model: str = "proposed", cfg: KickSimConfig | None = None) -> StateSpace:
    """Center grids over the observation box: 15 x 11 x 13 (+ binary phase)."""
    cfg = cfg or KickSimConfig()
    dims = [
        DimensionGrid.uniform(0.0, cfg.rho_max, 15),
        DimensionGrid.uniform(-cfg.gamma_max, cfg.gamma_max, 11),
        DimensionGrid.uniform(-cfg.phi_max, cfg.phi_max, 13),
    ]
    if model == "proposed":
        dims.append(DimensionGrid.binary())
    elif model != "legacy":
        raise ValueError(f"unknown state model {model!r}")
    return StateSpace(tuple(dims))


def make_world(model: str = "proposed", **overrides) -> KickWorld:
    cfg = replace(KickSimConfig(state_model=model), **overrides) if overrides else KickSimConfig(state_model=model)
    return KickWorld(cfg)
