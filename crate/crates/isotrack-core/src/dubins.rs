//! Constant-speed unicycle kinematics and field-frame observables.

use core::f64::consts::PI;

use crate::field::ScalarField;
use crate::{Error, Result, Vec2};

/// Planar pose of the vehicle. `theta` is the course angle in radians,
/// kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// What the vehicle "sees" of the field at its current pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    /// Concentration at the vehicle.
    pub s: f64,
    /// Signed angle from the negative gradient to the heading, CCW positive.
    pub phi: f64,
    /// Distance to the source; only meaningful for radial fields.
    pub d: Option<f64>,
    /// Field gradient at the vehicle.
    pub n: Vec2,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// One classical RK4 step with `omega` held over the step.
pub fn step(state: &RobotState, omega: f64, v: f64, dt: f64) -> Result<RobotState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NonpositiveStep(dt));
    }
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::PreconditionViolated("speed must be positive"));
    }
    let rate = |theta: f64| (v * theta.cos(), v * theta.sin());
    let theta = state.theta;
    // theta' = omega is state-independent, so the stage headings are exact.
    let k1 = rate(theta);
    let k2 = rate(theta + 0.5 * dt * omega);
    let k3 = k2;
    let k4 = rate(theta + dt * omega);
    Ok(RobotState {
        x: state.x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y: state.y + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        theta: normalize_angle(theta + dt * omega),
    })
}

/// Closed-form pose after holding `omega` for time `t`.
pub fn arc_oracle(state: &RobotState, omega: f64, v: f64, t: f64) -> RobotState {
    let theta = state.theta + omega * t;
    let (x, y) = if omega == 0.0 {
        (state.x + v * t * state.theta.cos(), state.y + v * t * state.theta.sin())
    } else {
        let radius = v / omega;
        (
            state.x + radius * (theta.sin() - state.theta.sin()),
            state.y - radius * (theta.cos() - state.theta.cos()),
        )
    };
    RobotState {
        x,
        y,
        theta: normalize_angle(theta),
    }
}

/// Concentration, crossing angle and gradient at the vehicle.
pub fn observe(field: &ScalarField, state: &RobotState) -> Result<Observables> {
    let p = state.position();
    let s = field.value(&p)?;
    let n = field.gradient(&p)?;
    if n.norm() == 0.0 {
        return Err(Error::SingularPoint { x: p.x, y: p.y });
    }
    let descent = -n;
    let h = state.heading();
    let cross = descent.x * h.y - descent.y * h.x;
    let phi = normalize_angle(cross.atan2(descent.dot(&h)));
    let d = match field {
        ScalarField::Circular(f) => Some((p - f.source).norm()),
        ScalarField::LinearRadial(f) => Some((p - f.source).norm()),
        _ => None,
    };
    Ok(Observables { s, phi, d, n })
}

/// Exact concentration rate `v * n . h` seen by a vehicle moving at speed `v`.
pub fn analytic_sdot(field: &ScalarField, state: &RobotState, v: f64) -> Result<f64> {
    let n = field.gradient(&state.position())?;
    Ok(v * n.dot(&state.heading()))
}
