//! PI-like concentration feedback.
//!
//! The turn rate is `omega = kp * e + ki * sigma` with `sigma' = e` and the
//! sliding-surface error `e = eps' + c1 * tanh(eps / c2)`, where
//! `eps = s - s_d`. Only point-wise concentration samples are used; `eps'`
//! either comes from a filtered finite difference or, for experiments that
//! isolate the estimator, from an exact oracle.


use crate::{Error, Result};

/// Source of the tracking-error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    /// Caller supplies the exact rate on every update.
    Oracle,
    /// First-order low-pass filtered backward difference with time constant `tau_f`.
    DirtyDerivative { tau_f: f64 },
}

impl DerivativeMode {
    /// Dirty derivative with `tau_f = 5 * dt`.
    pub fn dirty_for(dt: f64) -> Self {
        Self::DirtyDerivative { tau_f: 5.0 * dt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    pub kp: f64,
    pub ki: f64,
    pub c1: f64,
    pub c2: f64,
    pub derivative: DerivativeMode,
    /// Optional symmetric clamp on `sigma` (anti-windup).
    pub sigma_limit: Option<f64>,
    /// Optional symmetric clamp on the commanded turn rate.
    pub omega_limit: Option<f64>,
}

impl ControllerParams {
    pub fn new(kp: f64, ki: f64, c1: f64, c2: f64, derivative: DerivativeMode) -> Result<Self> {
        let p = Self {
            kp,
            ki,
            c1,
            c2,
            derivative,
            sigma_limit: None,
            omega_limit: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kp, self.ki, self.c1, self.c2].iter().all(|g| g.is_finite());
        if !finite {
            return Err(Error::InvalidParams("gains must be finite"));
        }
        if !(self.kp > 0.0) {
            return Err(Error::InvalidParams("kp must be positive"));
        }
        if !(self.ki >= 0.0) {
            return Err(Error::InvalidParams("ki must be non-negative"));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::InvalidParams("c1 and c2 must be positive"));
        }
        if let DerivativeMode::DirtyDerivative { tau_f } = self.derivative {
            if !(tau_f > 0.0) || !tau_f.is_finite() {
                return Err(Error::InvalidParams("tau_f must be positive"));
            }
        }
        if matches!(self.sigma_limit, Some(l) if !(l > 0.0)) {
            return Err(Error::InvalidParams("sigma_limit must be positive"));
        }
        if matches!(self.omega_limit, Some(l) if !(l > 0.0)) {
            return Err(Error::InvalidParams("omega_limit must be positive"));
        }
        Ok(())
    }
}

/// Integrator and derivative-filter memory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub sigma: f64,
    pub prev_epsilon: f64,
    pub deriv_estimate: f64,
    pub initialized: bool,
}

/// Signals produced by one controller update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub omega: f64,
    pub epsilon: f64,
    pub epsilon_dot: f64,
    pub e: f64,
    pub sigma: f64,
}

/// Sliding-surface error `eps' + c1 * tanh(eps / c2)`.
pub fn error_term(epsilon: f64, epsilon_dot: f64, c1: f64, c2: f64) -> f64 {
    epsilon_dot + c1 * (epsilon / c2).tanh()
}

/// Filtered backward difference:
/// `a * prev + (1 - a) * (eps - prev_eps) / dt` with `a = tau_f / (tau_f + dt)`.
pub fn dirty_derivative(prev_estimate: f64, prev_epsilon: f64, epsilon: f64, dt: f64, tau_f: f64) -> f64 {
    let a = tau_f / (tau_f + dt);
    a * prev_estimate + (1.0 - a) * (epsilon - prev_epsilon) / dt
}

impl ControllerState {
    /// Zeroed state; the next update re-primes the derivative filter.
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            ..Self::default()
        }
    }

    /// Advances the controller by one sample of period `dt`.
    ///
    /// `oracle_sdot` must be supplied in [`DerivativeMode::Oracle`] and is
    /// ignored otherwise. In dirty-derivative mode the first call after a
    /// reset only primes the filter and uses `eps' = 0`.
    pub fn update(
        &mut self,
        params: &ControllerParams,
        s_meas: f64,
        s_d: f64,
        dt: f64,
        oracle_sdot: Option<f64>,
    ) -> Result<ControlOutput> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonpositiveStep(dt));
        }
        let epsilon = s_meas - s_d;
        let epsilon_dot = match params.derivative {
            DerivativeMode::Oracle => oracle_sdot.ok_or(Error::MissingOracle)?,
            DerivativeMode::DirtyDerivative { tau_f } => {
                if self.initialized {
                    dirty_derivative(self.deriv_estimate, self.prev_epsilon, epsilon, dt, tau_f)
                } else {
                    0.0
                }
            }
        };
        self.prev_epsilon = epsilon;
        self.deriv_estimate = epsilon_dot;
        self.initialized = true;

        let e = error_term(epsilon, epsilon_dot, params.c1, params.c2);
        self.sigma += e * dt;
        if let Some(limit) = params.sigma_limit {
            self.sigma = self.sigma.clamp(-limit, limit);
        }
        let mut omega = params.kp * e + params.ki * self.sigma;
        if let Some(limit) = params.omega_limit {
            omega = omega.clamp(-limit, limit);
        }
        Ok(ControlOutput {
            omega,
            epsilon,
            epsilon_dot,
            e,
            sigma: self.sigma,
        })
    }
}
