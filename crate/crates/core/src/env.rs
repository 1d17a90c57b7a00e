//! Waypoint-reaching MDP on top of [`crate::sim`].
//!
//! Errors are `current − desired`; the desired attitude, velocity and body
//! rates are all zero, so only the position error depends on the task.

use core::f64::consts::FRAC_PI_3;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::error::{Error, Result};
use crate::sim::{
    self, hover_thrust, motor_lag_filter, roll_pitch, scale_action, Mat3, QuadParams, QuadState,
    RotorCommand, Vec3,
};

pub const OBS_DIM: usize = 18;
pub const ACTION_DIM: usize = 4;

pub type Action = [f64; ACTION_DIM];

/// `(e_p, e_v, R row-major, e_ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn position_error(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn velocity_error(&self) -> Vec3 {
        Vec3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn rotation(&self) -> Mat3 {
        Mat3::from_row_slice(&self.0[6..15])
    }

    pub fn rate_error(&self) -> Vec3 {
        Vec3::new(self.0[15], self.0[16], self.0[17])
    }

    /// Inverse of [`observe`].
    pub fn to_state(&self, task: &TaskConfig) -> QuadState {
        QuadState {
            position: self.position_error() + task.goal(),
            velocity: self.velocity_error(),
            rotation: self.rotation(),
            body_rates: self.rate_error(),
        }
    }
}

/// Weights of the per-step reward.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RewardCoeffs {
    /// Alive bonus.
    pub beta: f64,
    pub alpha_a: f64,
    pub alpha_p: f64,
    pub alpha_v: f64,
    pub alpha_omega: f64,
    pub alpha_xi: f64,
    pub alpha_rho: f64,
}

impl Default for RewardCoeffs {
    fn default() -> Self {
        Self {
            beta: 2.0,
            alpha_a: 0.025,
            alpha_p: 1.0,
            alpha_v: 0.05,
            alpha_omega: 0.001,
            alpha_xi: 0.02,
            alpha_rho: 0.02,
        }
    }
}

impl RewardCoeffs {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("reward.beta", self.beta),
            ("reward.alpha_a", self.alpha_a),
            ("reward.alpha_p", self.alpha_p),
            ("reward.alpha_v", self.alpha_v),
            ("reward.alpha_omega", self.alpha_omega),
            ("reward.alpha_xi", self.alpha_xi),
            ("reward.alpha_rho", self.alpha_rho),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TaskConfig {
    pub goal_position: [f64; 3],
    /// Half-width of the initial-position cube around the goal.
    pub init_cube_half: f64,
    /// Half-width of the cube outside of which an episode terminates.
    pub bound_cube_half: f64,
    /// Episode length limit `T`.
    pub max_steps: u32,
    /// Roll, pitch and yaw are drawn from `[-b, b]`.
    pub init_angle_bound: f64,
    pub init_speed_max: f64,
    pub init_rate_max: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            goal_position: [0.0, 0.0, 5.0],
            init_cube_half: 1.0,
            bound_cube_half: 1.0,
            max_steps: 1500,
            init_angle_bound: FRAC_PI_3,
            init_speed_max: 1.0,
            init_rate_max: 1.0,
        }
    }
}

impl TaskConfig {
    pub fn goal(&self) -> Vec3 {
        Vec3::from(self.goal_position)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.goal_position.iter().all(|v| v.is_finite()) {
            return Err(Error::config("task.goal_position", "must be finite"));
        }
        let nonneg = [
            ("task.init_cube_half", self.init_cube_half),
            ("task.init_angle_bound", self.init_angle_bound),
            ("task.init_speed_max", self.init_speed_max),
            ("task.init_rate_max", self.init_rate_max),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        if !(self.bound_cube_half.is_finite() && self.bound_cube_half > 0.0) {
            return Err(Error::config("task.bound_cube_half", "must be > 0"));
        }
        if self.max_steps < 1 {
            return Err(Error::config("task.max_steps", "must be >= 1"));
        }
        Ok(())
    }
}

/// Test-time perturbation of a single episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    /// `m_test / m_train`.
    pub mass_ratio: f64,
    /// Per-step probability of adding `Uniform(-1, 1)` to every action component.
    pub delta: f64,
}

impl PerturbConfig {
    pub const NOMINAL: PerturbConfig = PerturbConfig {
        mass_ratio: 1.0,
        delta: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_ratio.is_finite() && self.mass_ratio > 0.0) {
            return Err(Error::config("perturb.mass_ratio", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::config("perturb.delta", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self::NOMINAL
    }
}

/// Everything that defines the environment apart from randomness.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvConfig {
    pub quad: QuadParams,
    pub task: TaskConfig,
    pub reward: RewardCoeffs,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        self.task.validate()?;
        self.reward.validate()
    }
}

/// Quadcopter state plus the bookkeeping an episode needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeState {
    pub quad: QuadState,
    /// Thrusts the rotors currently produce (motor-lag memory).
    pub rotors: RotorCommand,
    pub step: u32,
}

impl EpisodeState {
    pub fn new(quad: QuadState, params: &QuadParams) -> Self {
        Self {
            quad,
            rotors: RotorCommand::uniform(hover_thrust(params)),
            step: 0,
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    half_width * (2.0 * rng.random::<f64>() - 1.0)
}

/// Samples an initial state around the goal.
pub fn reset<R: Rng + ?Sized>(task: &TaskConfig, rng: &mut R) -> QuadState {
    let goal = task.goal();
    let position = Vec3::new(
        goal.x + uniform(rng, task.init_cube_half),
        goal.y + uniform(rng, task.init_cube_half),
        goal.z + uniform(rng, task.init_cube_half),
    );
    let roll = uniform(rng, task.init_angle_bound);
    let pitch = uniform(rng, task.init_angle_bound);
    let yaw = uniform(rng, task.init_angle_bound);

    let speed = task.init_speed_max * rng.random::<f64>();
    let dir: [f64; 3] = UnitSphere.sample(rng);
    let rate = task.init_rate_max * rng.random::<f64>();
    let axis: [f64; 3] = UnitSphere.sample(rng);

    QuadState {
        position,
        velocity: Vec3::from(dir) * speed,
        rotation: sim::rotation_from_euler(roll, pitch, yaw),
        body_rates: Vec3::from(axis) * rate,
    }
}

pub fn observe(state: &QuadState, task: &TaskConfig) -> Observation {
    let mut o = [0.0; OBS_DIM];
    let ep = state.position - task.goal();
    o[0..3].copy_from_slice(ep.as_slice());
    o[3..6].copy_from_slice(state.velocity.as_slice());
    for row in 0..3 {
        for col in 0..3 {
            o[6 + 3 * row + col] = state.rotation[(row, col)];
        }
    }
    o[15..18].copy_from_slice(state.body_rates.as_slice());
    Observation(o)
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Per-step reward; never exceeds `beta`. Yaw is not penalised.
pub fn reward(obs: &Observation, action: &Action, coeffs: &RewardCoeffs) -> f64 {
    let (roll, pitch) = roll_pitch(&obs.rotation());
    coeffs.beta
        - coeffs.alpha_a * norm(action)
        - coeffs.alpha_p * norm(&obs.0[0..3])
        - coeffs.alpha_v * norm(&obs.0[3..6])
        - coeffs.alpha_omega * norm(&obs.0[15..18])
        - coeffs.alpha_xi * libm::fabs(roll)
        - coeffs.alpha_rho * libm::fabs(pitch)
}

pub fn terminated(state: &QuadState, step_index: u32, task: &TaskConfig) -> bool {
    if step_index >= task.max_steps {
        return true;
    }
    let offset = state.position - task.goal();
    // A NaN coordinate counts as out of bounds.
    offset
        .iter()
        .any(|d| libm::fabs(*d) > task.bound_cube_half || d.is_nan())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: EpisodeState,
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    /// The action that reached the rotors, after perturbation.
    pub executed: Action,
    /// Action components that were outside `[-1, 1]` on entry.
    pub clamped_inputs: u32,
}

/// Applies `action` for one control period.
///
/// With probability `perturb.delta` every component receives an independent
/// `Uniform(-1, 1)` offset before clamping. No random numbers are drawn when
/// `delta == 0`. The reward is computed on the agent's own action.
pub fn env_step<R: Rng + ?Sized>(
    state: &EpisodeState,
    action: &Action,
    perturb: &PerturbConfig,
    env: &EnvConfig,
    rng: &mut R,
) -> StepOutcome {
    let mut executed = *action;
    if perturb.delta > 0.0 && rng.random::<f64>() < perturb.delta {
        for a in executed.iter_mut() {
            *a = (*a + uniform(rng, 1.0)).clamp(-1.0, 1.0);
        }
    }

    let scaled = scale_action(&executed, &env.quad);
    let rotors = motor_lag_filter(&scaled.command, &state.rotors, &env.quad);
    let dynamics = env.quad.with_mass_ratio(perturb.mass_ratio);
    let quad = sim::step(&state.quad, &rotors, &dynamics);
    let next = EpisodeState {
        quad,
        rotors,
        step: state.step + 1,
    };
    let obs = observe(&quad, &env.task);
    StepOutcome {
        next,
        obs,
        reward: reward(&obs, action, &env.reward),
        done: terminated(&quad, next.step, &env.task),
        executed,
        clamped_inputs: scaled.clamped_inputs,
    }
}
