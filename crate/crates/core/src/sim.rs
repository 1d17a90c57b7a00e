//! Rigid-body quadcopter dynamics.
//!
//! X-configuration airframe, thrust along body `+z`, world `z` up. The
//! translational equation lives in the world frame, the rotational one in the
//! body frame:
//!
//! ```text
//! m·a   = (0, 0, -m·g) + R·(0, 0, ΣF)
//! I·ω̇   = τ - ω × I·ω
//! τ     = ( l(F1+F2-F3-F4), l(-F1+F2+F3-F4), c_τ(-F1+F2-F3+F4) )
//! ```
//!
//! Integration is RK4 on position, velocity and body rates. The rotation is
//! carried on SO(3) as `R·exp(u)` with `u` integrated in the Lie algebra
//! (Munthe-Kaas RK4), so `RᵀR = I` holds to rounding at every step.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    /// World frame, metres.
    pub position: Vec3,
    /// World frame, m/s.
    pub velocity: Vec3,
    /// Body to world.
    pub rotation: Mat3,
    /// (p, q, r) in the body frame, rad/s.
    pub body_rates: Vec3,
}

impl QuadState {
    /// Level and at rest at `position`.
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            rotation: Mat3::identity(),
            body_rates: Vec3::zeros(),
        }
    }

    /// Largest elementwise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Mat3::identity()).amax()
    }
}

/// Physical constants of the vehicle and the world.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct QuadParams {
    pub mass: f64,
    /// Half of the frame length; the moment arm in the roll/pitch torques.
    pub arm_half_length: f64,
    /// Diagonal inertia `(Ixx, Iyy, Izz)`. `None` derives it from mass and
    /// arm, see [`flat_cross_inertia`].
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub inertia_diag: Option<[f64; 3]>,
    /// Whether an explicit inertia is scaled along with a mass perturbation.
    /// Derived inertia always follows the mass.
    pub inertia_scales_with_mass: bool,
    pub gravity: f64,
    pub thrust_min: f64,
    pub thrust_max: f64,
    /// Rotor drag torque per unit thrust, `k_m / k_f`, in metres.
    pub torque_ratio: f64,
    pub motor_lag_tau: f64,
    pub dt: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 1.5,
            arm_half_length: 0.13,
            inertia_diag: None,
            inertia_scales_with_mass: true,
            gravity: 9.81,
            thrust_min: 0.0,
            thrust_max: 15.0,
            torque_ratio: 0.016,
            motor_lag_tau: 0.001,
            dt: 0.01,
        }
    }
}

/// Inertia of four point rotors of mass `m/4` on the diagonals of an X frame
/// at distance `l` from the centre: `Ixx = Iyy = m·l²/2`, `Izz = m·l²`. The
/// hull is treated as a point mass at the centre and adds nothing.
pub fn flat_cross_inertia(mass: f64, arm: f64) -> [f64; 3] {
    let roll_pitch = 0.5 * mass * arm * arm;
    [roll_pitch, roll_pitch, mass * arm * arm]
}

impl QuadParams {
    pub fn inertia(&self) -> Vec3 {
        let [x, y, z] = self
            .inertia_diag
            .unwrap_or_else(|| flat_cross_inertia(self.mass, self.arm_half_length));
        Vec3::new(x, y, z)
    }

    /// The same vehicle with its mass multiplied by `ratio`.
    pub fn with_mass_ratio(&self, ratio: f64) -> Self {
        let mut out = self.clone();
        out.mass = self.mass * ratio;
        match (self.inertia_diag, self.inertia_scales_with_mass) {
            (Some(i), true) => out.inertia_diag = Some([i[0] * ratio, i[1] * ratio, i[2] * ratio]),
            (Some(_), false) => {}
            (None, true) => {}
            (None, false) => {
                out.inertia_diag = Some(flat_cross_inertia(self.mass, self.arm_half_length))
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.mass) {
            return Err(Error::config("sim.mass", "must be > 0"));
        }
        if !positive(self.arm_half_length) {
            return Err(Error::config("sim.arm_half_length", "must be > 0"));
        }
        if let Some(i) = self.inertia_diag {
            if !i.iter().all(|&v| positive(v)) {
                return Err(Error::config(
                    "sim.inertia_diag",
                    "all components must be > 0",
                ));
            }
        }
        if !self.gravity.is_finite() {
            return Err(Error::config("sim.gravity", "must be finite"));
        }
        if !(self.thrust_min.is_finite() && self.thrust_min >= 0.0) {
            return Err(Error::config("sim.thrust_min", "must be >= 0"));
        }
        if !(self.thrust_max.is_finite() && self.thrust_max > self.thrust_min) {
            return Err(Error::config(
                "sim.thrust_max",
                "must exceed sim.thrust_min",
            ));
        }
        if !self.torque_ratio.is_finite() {
            return Err(Error::config("sim.torque_ratio", "must be finite"));
        }
        if !(self.motor_lag_tau.is_finite() && self.motor_lag_tau >= 0.0) {
            return Err(Error::config("sim.motor_lag_tau", "must be >= 0"));
        }
        if !positive(self.dt) {
            return Err(Error::config("sim.dt", "must be > 0"));
        }
        Ok(())
    }
}

/// Per-rotor thrusts `F1..F4` in newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorCommand {
    pub thrusts: [f64; 4],
}

impl RotorCommand {
    pub fn uniform(thrust: f64) -> Self {
        Self {
            thrusts: [thrust; 4],
        }
    }

    pub fn total(&self) -> f64 {
        self.thrusts.iter().sum()
    }

    /// Body-frame torque produced by the rotors.
    pub fn body_torque(&self, params: &QuadParams) -> Vec3 {
        let [f1, f2, f3, f4] = self.thrusts;
        let l = params.arm_half_length;
        Vec3::new(
            l * (f1 + f2 - f3 - f4),
            l * (-f1 + f2 + f3 - f4),
            params.torque_ratio * (-f1 + f2 - f3 + f4),
        )
    }
}

/// Body-to-world rotation from roll `ξ`, pitch `ρ`, yaw `ψ` (Z-Y-X order).
pub fn rotation_from_euler(roll: f64, pitch: f64, yaw: f64) -> Mat3 {
    let (sx, cx) = libm::sincos(roll);
    let (sr, cr) = libm::sincos(pitch);
    let (sy, cy) = libm::sincos(yaw);
    Mat3::new(
        cy * cr,
        sx * sr * cy - sy * cx,
        sx * sy + sr * cx * cy,
        sy * cr,
        sx * sy * sr + cx * cy,
        -sx * cy + sy * sr * cx,
        -sr,
        sx * cr,
        cx * cr,
    )
}

/// Roll and pitch recovered from a body-to-world rotation.
pub fn roll_pitch(rotation: &Mat3) -> (f64, f64) {
    let pitch = -libm::asin(rotation[(2, 0)].clamp(-1.0, 1.0));
    let roll = libm::atan2(rotation[(2, 1)], rotation[(2, 2)]);
    (roll, pitch)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub position: Vec3,
    pub velocity: Vec3,
    pub rotation: Mat3,
    pub body_rates: Vec3,
}

pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn linear_acceleration(rotation: &Mat3, cmd: &RotorCommand, params: &QuadParams) -> Vec3 {
    let thrust = rotation * Vec3::new(0.0, 0.0, cmd.total());
    Vec3::new(0.0, 0.0, -params.gravity) + thrust / params.mass
}

fn angular_acceleration(rates: &Vec3, torque: &Vec3, inertia: &Vec3) -> Vec3 {
    let momentum = inertia.component_mul(rates);
    (torque - rates.cross(&momentum)).component_div(inertia)
}

pub fn derivatives(state: &QuadState, cmd: &RotorCommand, params: &QuadParams) -> StateDerivative {
    let torque = cmd.body_torque(params);
    StateDerivative {
        position: state.velocity,
        velocity: linear_acceleration(&state.rotation, cmd, params),
        rotation: state.rotation * skew(&state.body_rates),
        body_rates: angular_acceleration(&state.body_rates, &torque, &params.inertia()),
    }
}

/// `exp(û)` by Rodrigues' formula.
pub fn so3_exp(u: &Vec3) -> Mat3 {
    let theta_sq = u.norm_squared();
    let (a, b) = if theta_sq < 1e-12 {
        (
            1.0 - theta_sq / 6.0 + theta_sq * theta_sq / 120.0,
            0.5 - theta_sq / 24.0 + theta_sq * theta_sq / 720.0,
        )
    } else {
        let theta = libm::sqrt(theta_sq);
        (
            libm::sin(theta) / theta,
            (1.0 - libm::cos(theta)) / theta_sq,
        )
    };
    let k = skew(u);
    Mat3::identity() + k * a + k * k * b
}

/// Rate of the algebra coordinate `u` for `R = R₀·exp(û)` under `Ṙ = R·ω̂`,
/// truncated after the double commutator (enough for fourth order).
fn dexp_inv(u: &Vec3, rates: &Vec3) -> Vec3 {
    let c = u.cross(rates);
    rates + c * 0.5 + u.cross(&c) / 12.0
}

/// One Newton-Schulz step towards the nearest rotation.
pub fn reorthonormalize(r: &Mat3) -> Mat3 {
    let correction = Mat3::identity() * 3.0 - r.transpose() * r;
    r * correction * 0.5
}

/// Advances `state` by `params.dt` under constant rotor thrusts.
pub fn step(state: &QuadState, cmd: &RotorCommand, params: &QuadParams) -> QuadState {
    let h = params.dt;
    let inertia = params.inertia();
    let torque = cmd.body_torque(params);
    let r0 = state.rotation;

    let accel = |r: &Mat3| linear_acceleration(r, cmd, params);
    let alpha = |w: &Vec3| angular_acceleration(w, &torque, &inertia);

    let v1 = state.velocity;
    let w1 = state.body_rates;
    let a1 = accel(&r0);
    let al1 = alpha(&w1);
    let k1 = w1;

    let u2 = k1 * (0.5 * h);
    let v2 = state.velocity + a1 * (0.5 * h);
    let w2 = state.body_rates + al1 * (0.5 * h);
    let a2 = accel(&(r0 * so3_exp(&u2)));
    let al2 = alpha(&w2);
    let k2 = dexp_inv(&u2, &w2);

    let u3 = k2 * (0.5 * h);
    let v3 = state.velocity + a2 * (0.5 * h);
    let w3 = state.body_rates + al2 * (0.5 * h);
    let a3 = accel(&(r0 * so3_exp(&u3)));
    let al3 = alpha(&w3);
    let k3 = dexp_inv(&u3, &w3);

    let u4 = k3 * h;
    let v4 = state.velocity + a3 * h;
    let w4 = state.body_rates + al3 * h;
    let a4 = accel(&(r0 * so3_exp(&u4)));
    let al4 = alpha(&w4);
    let k4 = dexp_inv(&u4, &w4);

    let sixth = h / 6.0;
    let u = (k1 + (k2 + k3) * 2.0 + k4) * sixth;
    QuadState {
        position: state.position + (v1 + (v2 + v3) * 2.0 + v4) * sixth,
        velocity: state.velocity + (a1 + (a2 + a3) * 2.0 + a4) * sixth,
        rotation: reorthonormalize(&(r0 * so3_exp(&u))),
        body_rates: state.body_rates + (al1 + (al2 + al3) * 2.0 + al4) * sixth,
    }
}

/// First-order rotor lag: `F ← F + min(dt/τ, 1)·(F_cmd − F)`.
pub fn motor_lag_filter(
    commanded: &RotorCommand,
    actual: &RotorCommand,
    params: &QuadParams,
) -> RotorCommand {
    if params.motor_lag_tau <= params.dt {
        return *commanded;
    }
    let k = params.dt / params.motor_lag_tau;
    let mut out = *actual;
    for (o, c) in out.thrusts.iter_mut().zip(commanded.thrusts) {
        *o += k * (c - *o);
    }
    out
}

/// Per-rotor thrust that balances the weight of a level vehicle.
pub fn hover_thrust(params: &QuadParams) -> f64 {
    params.mass * params.gravity / 4.0
}

/// Result of mapping a normalized action to rotor thrusts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledAction {
    pub command: RotorCommand,
    /// Number of input components that lay outside `[-1, 1]`.
    pub clamped_inputs: u32,
}

/// `Fᵢ = F_h + aᵢ·(F_max − F_min)/2`, clamped into the rotor range.
pub fn scale_action(action: &[f64; 4], params: &QuadParams) -> ScaledAction {
    let hover = hover_thrust(params);
    let half_range = 0.5 * (params.thrust_max - params.thrust_min);
    let mut clamped_inputs = 0;
    let mut thrusts = [0.0; 4];
    for (f, &a) in thrusts.iter_mut().zip(action) {
        let a = if (-1.0..=1.0).contains(&a) {
            a
        } else {
            clamped_inputs += 1;
            if a.is_nan() {
                0.0
            } else {
                a.clamp(-1.0, 1.0)
            }
        };
        *f = (hover + a * half_range).clamp(params.thrust_min, params.thrust_max);
    }
    ScaledAction {
        command: RotorCommand { thrusts },
        clamped_inputs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_PI_2;
    use proptest::prelude::*;

    fn level_rest() -> QuadState {
        QuadState::at_rest(Vec3::new(0.0, 0.0, 5.0))
    }

    fn axis_rotation(axis: usize, angle: f64) -> Mat3 {
        let (s, c) = (angle.sin(), angle.cos());
        match axis {
            0 => Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            1 => Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            _ => Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        }
    }

    #[test]
    fn euler_zero_is_identity() {
        assert_eq!(rotation_from_euler(0.0, 0.0, 0.0), Mat3::identity());
    }

    #[test]
    fn euler_pure_yaw() {
        let r = rotation_from_euler(0.0, 0.0, FRAC_PI_2);
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r - expected).amax() < 1e-15);
    }

    #[test]
    fn euler_matches_axis_composition() {
        let (roll, pitch, yaw) = (0.3, -0.2, 0.7);
        let r = rotation_from_euler(roll, pitch, yaw);
        let composed = axis_rotation(2, yaw) * axis_rotation(1, pitch) * axis_rotation(0, roll);
        assert!((r - composed).amax() < 1e-15);
        assert!((r.transpose() * r - Mat3::identity()).amax() < 1e-12);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        let (xi, rho) = roll_pitch(&r);
        assert_relative_eq!(xi, roll, epsilon = 1e-14);
        assert_relative_eq!(rho, pitch, epsilon = 1e-14);
    }

    #[test]
    fn free_fall_derivative() {
        let p = QuadParams::default();
        let d = derivatives(&level_rest(), &RotorCommand::uniform(0.0), &p);
        assert_eq!(d.velocity, Vec3::new(0.0, 0.0, -p.gravity));
        assert_eq!(d.body_rates, Vec3::zeros());
    }

    #[test]
    fn hover_derivative_vanishes() {
        let p = QuadParams::default();
        let d = derivatives(&level_rest(), &RotorCommand::uniform(hover_thrust(&p)), &p);
        assert!(d.velocity.amax() < 1e-14);
        assert_eq!(d.body_rates, Vec3::zeros());
        assert_eq!(d.rotation, Mat3::zeros());
        assert_eq!(d.position, Vec3::zeros());
    }

    #[test]
    fn roll_torque_from_front_pair() {
        let p = QuadParams::default();
        let cmd = RotorCommand {
            thrusts: [1.0, 1.0, 0.0, 0.0],
        };
        let l = p.arm_half_length;
        assert_eq!(cmd.body_torque(&p), Vec3::new(2.0 * l, 0.0, 0.0));
        let d = derivatives(&level_rest(), &cmd, &p);
        let ixx = p.inertia().x;
        assert_relative_eq!(d.body_rates.x, 2.0 * l / ixx, max_relative = 1e-15);
        assert_eq!(d.body_rates.y, 0.0);
        assert_eq!(d.body_rates.z, 0.0);
    }

    #[test]
    fn free_fall_is_exact() {
        let p = QuadParams::default();
        let mut s = level_rest();
        for _ in 0..100 {
            s = step(&s, &RotorCommand::uniform(0.0), &p);
        }
        assert!((s.position.z - 5.0 - (-0.5 * p.gravity)).abs() < 1e-9);
        assert_eq!(s.rotation, Mat3::identity());
    }

    #[test]
    fn hover_holds_position() {
        let p = QuadParams::default();
        let cmd = RotorCommand::uniform(hover_thrust(&p));
        let start = level_rest();
        let mut s = start;
        for _ in 0..1500 {
            s = step(&s, &cmd, &p);
        }
        assert!((s.position - start.position).norm() < 1e-6);
    }

    fn kinetic_energy(rates: &Vec3, inertia: &Vec3) -> f64 {
        0.5 * rates.dot(&inertia.component_mul(rates))
    }

    #[test]
    fn torque_free_spin_conserves_energy() {
        let p = QuadParams {
            dt: 0.001,
            ..QuadParams::default()
        };
        let inertia = p.inertia();
        let mut s = level_rest();
        s.body_rates = Vec3::new(1.0, 2.0, 3.0);
        let e0 = kinetic_energy(&s.body_rates, &inertia);
        for _ in 0..1000 {
            s = step(&s, &RotorCommand::uniform(0.0), &p);
        }
        let e1 = kinetic_energy(&s.body_rates, &inertia);
        assert!(((e1 - e0) / e0).abs() < 1e-6);

        let fine = QuadParams { dt: 0.0001, ..p };
        let mut r = level_rest();
        r.body_rates = Vec3::new(1.0, 2.0, 3.0);
        for _ in 0..10_000 {
            r = step(&r, &RotorCommand::uniform(0.0), &fine);
        }
        assert!((r.body_rates - s.body_rates).amax() < 1e-9);
        assert!((r.rotation - s.rotation).amax() < 1e-9);
    }

    #[test]
    fn motor_lag_cases() {
        let p = QuadParams::default();
        let cmd = RotorCommand::uniform(7.0);
        let actual = RotorCommand::uniform(2.0);
        assert_eq!(motor_lag_filter(&cmd, &actual, &p), cmd);
        assert_eq!(motor_lag_filter(&actual, &actual, &p), actual);

        let slow = QuadParams {
            motor_lag_tau: 0.02,
            ..p
        };
        let out = motor_lag_filter(
            &RotorCommand::uniform(10.0),
            &RotorCommand::uniform(0.0),
            &slow,
        );
        assert_eq!(out, RotorCommand::uniform(5.0));
        assert_eq!(motor_lag_filter(&actual, &actual, &slow), actual);
    }

    #[test]
    fn hover_thrust_values() {
        let p = QuadParams::default();
        assert_relative_eq!(hover_thrust(&p), 3.67875, max_relative = 1e-15);
        assert_relative_eq!(
            hover_thrust(&p) * 4.0 / p.gravity,
            p.mass,
            max_relative = 1e-15
        );
        let unit = QuadParams {
            mass: 4.0 / 9.81,
            ..QuadParams::default()
        };
        assert_relative_eq!(hover_thrust(&unit), 1.0, max_relative = 1e-15);
        let heavy = QuadParams {
            mass: 3.0,
            ..QuadParams::default()
        };
        assert_relative_eq!(hover_thrust(&heavy), 7.3575, max_relative = 1e-15);
    }

    #[test]
    fn scale_action_cases() {
        let p = QuadParams::default();
        let neutral = scale_action(&[0.0; 4], &p);
        assert_eq!(neutral.command, RotorCommand::uniform(hover_thrust(&p)));
        assert_eq!(neutral.clamped_inputs, 0);
        let full = scale_action(&[1.0; 4], &p);
        for f in full.command.thrusts {
            assert_relative_eq!(f, 11.17875, max_relative = 1e-15);
        }
        // 3.67875 - 7.5 < 0, so the rotor range clamps it.
        let low = scale_action(&[-1.0; 4], &p);
        assert_eq!(low.command, RotorCommand::uniform(0.0));
        let wild = scale_action(&[2.0, -3.0, 0.0, f64::NAN], &p);
        assert_eq!(wild.clamped_inputs, 3);
        assert_eq!(wild.command.thrusts[0], full.command.thrusts[0]);
        assert_eq!(wild.command.thrusts[3], hover_thrust(&p));
    }

    #[test]
    fn mass_ratio_scales_inertia() {
        let p = QuadParams::default();
        let heavy = p.with_mass_ratio(2.0);
        assert_eq!(heavy.mass, 3.0);
        assert_relative_eq!(heavy.inertia().x, 2.0 * p.inertia().x, max_relative = 1e-15);
        let frozen = QuadParams {
            inertia_scales_with_mass: false,
            ..p.clone()
        }
        .with_mass_ratio(2.0);
        assert_eq!(frozen.inertia(), p.inertia());
        let explicit = QuadParams {
            inertia_diag: Some([0.01, 0.02, 0.03]),
            ..p
        };
        assert_eq!(
            explicit.with_mass_ratio(0.5).inertia(),
            Vec3::new(0.005, 0.01, 0.015)
        );
    }

    #[test]
    fn validate_rejects_bad_fields() {
        assert!(QuadParams::default().validate().is_ok());
        let bad = QuadParams {
            thrust_max: 0.0,
            ..QuadParams::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::Config {
                field: "sim.thrust_max",
                ..
            })
        ));
        let bad = QuadParams {
            mass: -1.0,
            ..QuadParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn halving_dt_converges() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let coarse = QuadParams::default();
        let fine = QuadParams {
            dt: coarse.dt / 2.0,
            ..coarse.clone()
        };
        let cmd = RotorCommand::uniform(hover_thrust(&coarse) * 1.1);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let mut u = || rng.random_range(-1.0..1.0);
            let s0 = QuadState {
                position: Vec3::new(u(), u(), 5.0 + u()),
                velocity: Vec3::new(u(), u(), u()),
                rotation: rotation_from_euler(u(), u(), 3.0 * u()),
                body_rates: Vec3::new(u(), u(), u()),
            };
            let (mut a, mut b) = (s0, s0);
            for _ in 0..100 {
                a = step(&a, &cmd, &coarse);
            }
            for _ in 0..200 {
                b = step(&b, &cmd, &fine);
            }
            let scale = 1.0 + b.position.norm() + b.velocity.norm() + b.body_rates.norm();
            let diff = (a.position - b.position).amax()
                + (a.velocity - b.velocity).amax()
                + (a.rotation - b.rotation).amax()
                + (a.body_rates - b.body_rates).amax();
            worst = worst.max(diff / scale);
        }
        assert!(worst < 1e-6, "worst relative change {worst}");
    }

    fn random_state() -> impl Strategy<Value = QuadState> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            prop::array::uniform3(-1.0f64..1.0),
            prop::array::uniform3(-1.0f64..1.0),
            prop::array::uniform3(-3.0f64..3.0),
        )
            .prop_map(|(p, v, e, w)| QuadState {
                position: Vec3::from(p),
                velocity: Vec3::from(v),
                rotation: rotation_from_euler(e[0], e[1], e[2]),
                body_rates: Vec3::from(w),
            })
    }

    proptest! {
        #[test]
        fn step_is_deterministic_and_stays_on_so3(
            s in random_state(),
            f in prop::array::uniform4(0.0f64..15.0),
        ) {
            let p = QuadParams::default();
            let cmd = RotorCommand { thrusts: f };
            let a = step(&s, &cmd, &p);
            let b = step(&s, &cmd, &p);
            prop_assert_eq!(a, b);
            prop_assert!(a.orthonormality_error() < 1e-9);
            prop_assert!((a.rotation.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn scaled_thrust_stays_in_range(a in prop::array::uniform4(-5.0f64..5.0)) {
            let p = QuadParams::default();
            let out = scale_action(&a, &p);
            for f in out.command.thrusts {
                prop_assert!(f >= p.thrust_min && f <= p.thrust_max);
            }
        }
    }
}
