//! Closed-loop simulation: field, vehicle and controller.
//!
//! The controller samples the field every `controller_dt` and its turn rate
//! is held while the vehicle is integrated at `sim_dt`. A run that leaves the
//! field domain (or hits a singular point) stops and keeps what it recorded.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::controller::{ControlOutput, ControllerParams, ControllerState, DerivativeMode};
use crate::dubins::{self, RobotState};
use crate::field::ScalarField;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub field: ScalarField,
    /// Desired concentration level `s_d`.
    pub level: f64,
    pub initial: RobotState,
    /// Constant forward speed, m/s.
    pub speed: f64,
    pub params: ControllerParams,
    pub sim_dt: f64,
    /// Controller sampling period; an integer multiple of `sim_dt`.
    pub controller_dt: f64,
    pub duration: f64,
    /// Standard deviation of additive Gaussian noise on each concentration sample.
    pub noise_std: f64,
    pub seed: u64,
    /// Integrator value at `t = 0`.
    pub initial_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub s: f64,
    pub epsilon: f64,
    pub e: f64,
    pub omega: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub completed: bool,
    /// Why the run stopped early, if it did.
    pub failure: Option<Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub steady_state_error_max: f64,
    pub steady_state_error_mean: f64,
    /// First time after which `|s - s_d|` stays within the band.
    pub convergence_time: Option<f64>,
    pub completed: bool,
    pub failure_reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    /// Fraction of the final samples used for the steady-state errors.
    pub tail_fraction: f64,
    /// Absolute band half-width; `None` means `0.05 * |s_d|`.
    pub band: Option<f64>,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            tail_fraction: 0.1,
            band: None,
        }
    }
}

impl Scenario {
    /// Scenario with default timing (`sim_dt = controller_dt = 0.01`), no
    /// noise and seed 0.
    pub fn new(field: ScalarField, level: f64, initial: RobotState, speed: f64, params: ControllerParams, duration: f64) -> Self {
        Self {
            field,
            level,
            initial,
            speed,
            params,
            sim_dt: 0.01,
            controller_dt: 0.01,
            duration,
            noise_std: 0.0,
            seed: 0,
            initial_sigma: 0.0,
        }
    }

    /// Controller ticks per plant step, or an error if the ratio is not a
    /// positive integer.
    pub fn ticks_per_sample(&self) -> Result<usize> {
        let ratio = self.controller_dt / self.sim_dt;
        let m = ratio.round();
        if !(m >= 1.0) || (ratio - m).abs() > 1e-9 * m {
            return Err(invalid("controller_dt must be a positive integer multiple of sim_dt"));
        }
        Ok(m as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sim_dt > 0.0) || !self.sim_dt.is_finite() {
            return Err(invalid("sim_dt must be positive"));
        }
        self.ticks_per_sample()?;
        if !(self.duration >= 10.0 * self.controller_dt) || !self.duration.is_finite() {
            return Err(invalid("duration must be at least 10 controller periods"));
        }
        if !(self.speed > 0.0) || !self.speed.is_finite() {
            return Err(invalid("v must be positive"));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(invalid("noise_std must be non-negative"));
        }
        let start = [self.initial.x, self.initial.y, self.initial.theta, self.level, self.initial_sigma];
        if !start.iter().all(|x| x.is_finite()) {
            return Err(invalid("initial state and level must be finite"));
        }
        self.params
            .validate()
            .map_err(|e| Error::InvalidScenario(e.to_string()))
    }
}

fn invalid(msg: &str) -> Error {
    Error::InvalidScenario(msg.to_string())
}

/// Runs the closed loop. Only scenario validation errors are returned;
/// domain exits end the run with `completed = false`.
pub fn run(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let ticks = scenario.ticks_per_sample()?;
    let steps = (scenario.duration / scenario.sim_dt).round() as usize;
    let noise = if scenario.noise_std > 0.0 {
        Some(Normal::new(0.0, scenario.noise_std).map_err(|_| invalid("noise_std must be finite"))?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut state = scenario.initial;
    let mut ctrl = ControllerState::with_sigma(scenario.initial_sigma);
    let mut out = ControlOutput {
        omega: 0.0,
        epsilon: 0.0,
        epsilon_dot: 0.0,
        e: 0.0,
        sigma: scenario.initial_sigma,
    };
    let mut samples = Vec::with_capacity(steps + 1);

    let abort = |samples, err| {
        Ok(Trajectory {
            samples,
            completed: false,
            failure: Some(err),
        })
    };

    for k in 0..=steps {
        let t = k as f64 * scenario.sim_dt;
        let s = match scenario.field.value(&state.position()) {
            Ok(s) => s,
            Err(err) => return abort(samples, err),
        };
        if k % ticks == 0 {
            let measured = s + noise.map_or(0.0, |n| n.sample(&mut rng));
            let oracle = match scenario.params.derivative {
                DerivativeMode::Oracle => match dubins::analytic_sdot(&scenario.field, &state, scenario.speed) {
                    Ok(rate) => Some(rate),
                    Err(err) => return abort(samples, err),
                },
                DerivativeMode::DirtyDerivative { .. } => None,
            };
            out = ctrl.update(&scenario.params, measured, scenario.level, scenario.controller_dt, oracle)?;
        }
        samples.push(TrajectorySample {
            t,
            x: state.x,
            y: state.y,
            theta: state.theta,
            s,
            epsilon: s - scenario.level,
            e: out.e,
            omega: out.omega,
            sigma: out.sigma,
        });
        if k < steps {
            state = dubins::step(&state, out.omega, scenario.speed, scenario.sim_dt)?;
        }
    }
    Ok(Trajectory {
        samples,
        completed: true,
        failure: None,
    })
}

/// Steady-state and convergence metrics relative to `level`.
pub fn metrics(trajectory: &Trajectory, level: f64, opts: &MetricsOptions) -> Result<Metrics> {
    let samples = &trajectory.samples;
    if samples.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if !(opts.tail_fraction > 0.0 && opts.tail_fraction <= 1.0) {
        return Err(Error::PreconditionViolated("tail_fraction must lie in (0, 1]"));
    }
    let band = opts.band.unwrap_or(0.05 * level.abs());
    let n = samples.len();
    let count = ((n as f64 * opts.tail_fraction).ceil() as usize).clamp(1, n);
    let tail = &samples[n - count..];
    let errors = tail.iter().map(|s| (s.s - level).abs());
    let (max, sum) = errors.fold((0.0_f64, 0.0), |(m, acc), e| (m.max(e), acc + e));
    let convergence_time = match samples.iter().rposition(|s| (s.s - level).abs() > band) {
        None => Some(samples[0].t),
        Some(i) if i + 1 == n => None,
        Some(i) => Some(samples[i + 1].t),
    };
    Ok(Metrics {
        steady_state_error_max: max,
        steady_state_error_mean: sum / count as f64,
        convergence_time,
        completed: trajectory.completed,
        failure_reason: trajectory.failure.as_ref().map(|e| e.to_string()),
    })
}

/// Scenario parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Kp,
    Ki,
    C1,
    C2,
    Speed,
    NoiseStd,
    InitialTheta,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 7] = [
        Self::Kp,
        Self::Ki,
        Self::C1,
        Self::C2,
        Self::Speed,
        Self::NoiseStd,
        Self::InitialTheta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kp => "kp",
            Self::Ki => "ki",
            Self::C1 => "c1",
            Self::C2 => "c2",
            Self::Speed => "v",
            Self::NoiseStd => "noise_std",
            Self::InitialTheta => "initial.theta",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Scenario {
        let mut s = base.clone();
        match self {
            Self::Kp => s.params.kp = value,
            Self::Ki => s.params.ki = value,
            Self::C1 => s.params.c1 = value,
            Self::C2 => s.params.c2 = value,
            Self::Speed => s.speed = value,
            Self::NoiseStd => s.noise_std = value,
            Self::InitialTheta => s.initial = RobotState::new(s.initial.x, s.initial.y, value),
        }
        s
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub value: f64,
    pub result: Result<Metrics>,
}

/// Runs one independent scenario per value, in input order. Invalid
/// scenarios are reported per entry.
pub fn sweep(base: &Scenario, axis: SweepAxis, values: &[f64], opts: &MetricsOptions) -> Vec<SweepEntry> {
    values
        .iter()
        .map(|&value| SweepEntry {
            value,
            result: run_entry(base, axis, value, opts),
        })
        .collect()
}

/// One sweep entry; exposed so callers can schedule entries themselves.
pub fn run_entry(base: &Scenario, axis: SweepAxis, value: f64, opts: &MetricsOptions) -> Result<Metrics> {
    let scenario = axis.apply(base, value);
    let trajectory = run(&scenario)?;
    metrics(&trajectory, scenario.level, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{circular_isoline_radius, Grid, Region};
    use crate::Vec2;
    use alloc::vec;
    use core::f64::consts::FRAC_PI_2;

    fn base(duration: f64) -> Scenario {
        let field = ScalarField::circular(20.0, 0.1, Vec2::zeros()).unwrap();
        let params = ControllerParams::new(10.0, 1.0, 0.2, 1.0, DerivativeMode::dirty_for(0.01)).unwrap();
        Scenario::new(field, 10.0, RobotState::new(0.0, 20.0, -FRAC_PI_2), 0.5, params, duration)
    }

    fn constant_trajectory(values: &[f64]) -> Trajectory {
        Trajectory {
            samples: values
                .iter()
                .enumerate()
                .map(|(i, &s)| TrajectorySample {
                    t: i as f64 * 0.1,
                    x: 0.0,
                    y: 0.0,
                    theta: 0.0,
                    s,
                    epsilon: s - 10.0,
                    e: 0.0,
                    omega: 0.0,
                    sigma: 0.0,
                })
                .collect(),
            completed: true,
            failure: None,
        }
    }

    #[test]
    fn sample_spacing_and_count() {
        let mut sc = base(1.0);
        sc.controller_dt = 0.05;
        let tr = run(&sc).unwrap();
        assert!(tr.completed);
        assert_eq!(tr.samples.len(), 101);
        for (k, w) in tr.samples.windows(2).enumerate() {
            assert!(w[1].t > w[0].t);
            assert!((w[1].t - w[0].t - 0.01).abs() < 1e-12, "{k}");
        }
        // omega is held between controller ticks
        for chunk in tr.samples.chunks(5) {
            assert!(chunk.iter().all(|s| s.omega == chunk[0].omega));
        }
    }

    #[test]
    fn invalid_scenarios() {
        let mut sc = base(10.0);
        sc.controller_dt = 0.015;
        assert!(matches!(run(&sc), Err(Error::InvalidScenario(_))));
        let mut sc = base(0.05);
        sc.duration = 0.05;
        assert!(matches!(run(&sc), Err(Error::InvalidScenario(_))));
        let mut sc = base(10.0);
        sc.params.kp = 0.0;
        assert!(matches!(run(&sc), Err(Error::InvalidScenario(_))));
        let mut sc = base(10.0);
        sc.speed = -1.0;
        assert!(matches!(run(&sc), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn equilibrium_persists() {
        let r_d = circular_isoline_radius(20.0, 0.1, 10.0).unwrap();
        let mut sc = base(200.0);
        sc.initial = RobotState::new(r_d, 0.0, -FRAC_PI_2);
        sc.initial_sigma = -sc.speed / (sc.params.ki * r_d);
        let tr = run(&sc).unwrap();
        let worst = tr.samples.iter().fold(0.0_f64, |m, s| m.max(s.epsilon.abs()));
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn domain_exit_aborts_cleanly() {
        let circle = ScalarField::circular(20.0, 0.1, Vec2::zeros()).unwrap();
        let grid = Grid::sample(&circle, &Region::Rect { x_min: -5.0, x_max: 5.0, y_min: -5.0, y_max: 5.0 }, 0.5).unwrap();
        let mut sc = base(100.0);
        sc.field = ScalarField::Gridded(grid);
        sc.initial = RobotState::new(1.0, 0.0, 0.0);
        // Almost no steering: the vehicle drives straight off the grid.
        sc.params.kp = 1e-3;
        sc.params.ki = 0.0;
        let tr = run(&sc).unwrap();
        assert!(!tr.completed);
        assert!(matches!(tr.failure, Some(Error::OutOfDomain { .. })));
        assert!(!tr.samples.is_empty());
        let m = metrics(&tr, sc.level, &MetricsOptions::default()).unwrap();
        assert!(!m.completed && m.failure_reason.is_some());

        sc.initial = RobotState::new(9.0, 0.0, 0.0);
        let tr = run(&sc).unwrap();
        assert!(!tr.completed && tr.samples.is_empty());
    }

    #[test]
    fn oracle_mode_aborts_at_source() {
        let mut sc = base(10.0);
        sc.params.derivative = DerivativeMode::Oracle;
        sc.initial = RobotState::new(0.0, 0.0, 0.0);
        let tr = run(&sc).unwrap();
        assert!(!tr.completed);
        assert!(matches!(tr.failure, Some(Error::SingularPoint { .. })));
    }

    #[test]
    fn noise_is_seeded() {
        let mut sc = base(20.0);
        sc.noise_std = 0.05;
        let a = run(&sc).unwrap();
        let b = run(&sc).unwrap();
        assert_eq!(a, b);
        sc.seed = 7;
        let c = run(&sc).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn metrics_of_constant_trajectory() {
        let m = metrics(&constant_trajectory(&[10.0; 50]), 10.0, &MetricsOptions::default()).unwrap();
        assert_eq!(m.steady_state_error_max, 0.0);
        assert_eq!(m.steady_state_error_mean, 0.0);
        assert_eq!(m.convergence_time, Some(0.0));
    }

    #[test]
    fn metrics_exit_at_last_sample() {
        let mut v = vec![10.0; 20];
        *v.last_mut().unwrap() = 11.0;
        let m = metrics(&constant_trajectory(&v), 10.0, &MetricsOptions::default()).unwrap();
        assert_eq!(m.convergence_time, None);
        v[19] = 10.0;
        v[4] = 12.0;
        let m = metrics(&constant_trajectory(&v), 10.0, &MetricsOptions::default()).unwrap();
        assert_eq!(m.convergence_time, Some(0.5));
    }

    #[test]
    fn metrics_of_exponential_decay() {
        // s = s_d + exp(-t), t in [0, 10] at dt = 0.001; tail is t in [9, 10].
        let dt = 0.001;
        let samples: Vec<f64> = (0..=10_000).map(|k| 10.0 + (-(k as f64) * dt).exp()).collect();
        let tr = Trajectory {
            samples: samples
                .iter()
                .enumerate()
                .map(|(k, &s)| TrajectorySample {
                    t: k as f64 * dt,
                    x: 0.0,
                    y: 0.0,
                    theta: 0.0,
                    s,
                    epsilon: s - 10.0,
                    e: 0.0,
                    omega: 0.0,
                    sigma: 0.0,
                })
                .collect(),
            completed: true,
            failure: None,
        };
        let m = metrics(&tr, 10.0, &MetricsOptions::default()).unwrap();
        let analytic_mean = (-9.0_f64).exp() - (-10.0_f64).exp();
        assert!((m.steady_state_error_mean - analytic_mean).abs() < 1e-3 * analytic_mean);
        assert!(m.steady_state_error_mean <= m.steady_state_error_max);
        // band 0.5: exp(-t) <= 0.5 from t = ln 2.
        let ct = m.convergence_time.unwrap();
        assert!((ct - core::f64::consts::LN_2).abs() <= dt);
    }

    #[test]
    fn metrics_errors() {
        let empty = Trajectory { samples: vec![], completed: true, failure: None };
        assert_eq!(metrics(&empty, 10.0, &MetricsOptions::default()), Err(Error::EmptyTrajectory));
    }

    #[test]
    fn sweep_keeps_order_and_reports_invalid_entries() {
        let sc = base(5.0);
        let out = sweep(&sc, SweepAxis::Kp, &[5.0, -1.0, 10.0], &MetricsOptions::default());
        assert_eq!(out.iter().map(|e| e.value).collect::<Vec<_>>(), [5.0, -1.0, 10.0]);
        assert!(out[0].result.is_ok());
        assert!(matches!(out[1].result, Err(Error::InvalidScenario(_))));
        assert!(out[2].result.is_ok());
        let again = sweep(&sc, SweepAxis::Kp, &[10.0], &MetricsOptions::default());
        assert_eq!(again[0].result, out[2].result);
    }

    #[test]
    fn axis_names_round_trip() {
        for axis in SweepAxis::ALL {
            assert_eq!(axis.name().parse::<SweepAxis>().unwrap(), axis);
        }
        assert!("tau".parse::<SweepAxis>().is_err());
    }
}
