//! Key-value text reports with 9 significant digits.

use std::fmt::Write;

use isotrack_core::field::FieldBounds;
use isotrack_core::simulator::Metrics;
use isotrack_core::stability::{CircularLoopParams, GainVerdict, LyapunovCertificate, Prop2Bound};
use isotrack_core::Mat3;

use crate::output::sig9;

/// Accumulates `key = value` lines.
#[derive(Debug, Default, Clone)]
pub struct KeyValues(String);

impl KeyValues {
    pub fn text(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.0, "{key} = {value}");
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, sig9(value))
    }

    pub fn nums(&mut self, key: &str, values: impl IntoIterator<Item = f64>) -> &mut Self {
        let joined: Vec<String> = values.into_iter().map(sig9).collect();
        self.text(key, joined.join(" "))
    }

    /// Row-major.
    pub fn matrix(&mut self, key: &str, m: &Mat3) -> &mut Self {
        self.nums(key, (0..3).flat_map(|i| (0..3).map(move |j| m[(i, j)])))
    }

    pub fn finish(&self) -> &str {
        &self.0
    }
}

pub fn metrics_report(m: &Metrics) -> String {
    let mut kv = KeyValues::default();
    kv.num("steady_state_error_max", m.steady_state_error_max)
        .num("steady_state_error_mean", m.steady_state_error_mean);
    match m.convergence_time {
        Some(t) => kv.num("convergence_time", t),
        None => kv.text("convergence_time", "none"),
    };
    kv.text("completed", m.completed);
    if let Some(reason) = &m.failure_reason {
        kv.text("failure_reason", reason);
    }
    kv.finish().to_string()
}

/// Outcome of the proportional-only analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum Prop2Outcome {
    Bound { bounds: FieldBounds, analysis: Prop2Bound },
    Failed { bounds: Option<FieldBounds>, reason: String },
    NotComputable(&'static str),
}

/// Certificate results for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub loop_params: Option<CircularLoopParams>,
    pub gains: Option<GainVerdict>,
    pub certificate: Option<LyapunovCertificate>,
    pub integral_note: Option<&'static str>,
    pub prop2: Prop2Outcome,
    /// Whether the proportional-only bound gates the verdict.
    pub prop2_gating: bool,
    pub passed: bool,
}

impl StabilityReport {
    pub fn render(&self) -> String {
        let mut kv = KeyValues::default();
        if let Some(p) = &self.loop_params {
            kv.num("loop.alpha", p.alpha)
                .num("loop.alpha_lower", p.alpha_lower)
                .num("loop.r_d", p.r_d)
                .num("loop.v", p.v);
        }
        if let Some(g) = &self.gains {
            kv.text("gain.integral_condition", verdict(g.integral_condition))
                .text("gain.margin_condition", verdict(g.margin_condition))
                .text("gain.kp_above_two", verdict(g.kp_above_two));
        }
        if let Some(c) = &self.certificate {
            kv.matrix("jacobian.a", &c.a)
                .nums("jacobian.eig_re", c.eig_a.iter().map(|z| z.re))
                .nums("jacobian.eig_im", c.eig_a.iter().map(|z| z.im))
                .text("jacobian.hurwitz", verdict(c.hurwitz))
                .nums("lyapunov.mu", c.mu)
                .matrix("lyapunov.p", &c.p)
                .matrix("lyapunov.q", &c.q)
                .nums("lyapunov.eig_p", c.eig_p)
                .nums("lyapunov.eig_q", c.eig_q)
                .num("lyapunov.lambda_min_p", c.eig_p[0])
                .num("lyapunov.lambda_min_q", c.eig_q[0])
                .num("lyapunov.decay_rate", c.decay_rate)
                .num("lyapunov.residual", c.residual)
                .text("lyapunov.certified", verdict(c.certified()));
        }
        if let Some(note) = self.integral_note {
            kv.text("integral.status", note);
        }
        match &self.prop2 {
            Prop2Outcome::Bound { bounds, analysis } => {
                bounds_lines(&mut kv, bounds);
                kv.num("bound.epsilon_angle", analysis.epsilon_angle)
                    .num("bound.kp_threshold", analysis.kp_threshold)
                    .num("bound.rho", analysis.rho)
                    .num("bound.error_bound", analysis.error_bound)
                    .text("bound.status", "pass");
            }
            Prop2Outcome::Failed { bounds, reason } => {
                if let Some(b) = bounds {
                    bounds_lines(&mut kv, b);
                }
                kv.text("bound.status", format!("fail: {reason}"));
            }
            Prop2Outcome::NotComputable(why) => {
                kv.text("bound.status", format!("not computable: {why}"));
            }
        }
        kv.text("bound.gating", self.prop2_gating)
            .text("result", verdict(self.passed));
        kv.finish().to_string()
    }
}

fn bounds_lines(kv: &mut KeyValues, b: &FieldBounds) {
    kv.num("bound.gamma1", b.gamma1)
        .num("bound.gamma2", b.gamma2)
        .num("bound.gamma3", b.gamma3);
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}
