//! Stability certificates for the closed loop.
//!
//! For radial fields the loop is linearized around the clockwise orbit
//! `[d, phi, sigma] = [r_d, -pi/2, -v / (ki r_d)]` and certified with an
//! explicit quadratic Lyapunov function `V = z' P z`, `V' = -z' Q z`. For
//! general fields with `ki = 0` the steady-state error is bounded through the
//! scalar system `z' = -k tanh z + b`.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};

use crate::field::FieldBounds;
use crate::{Error, Mat3, Result};

/// Absolute tolerance on eigenvalues when classifying definiteness.
pub const EIGEN_TOL: f64 = 1e-10;
/// Maximum asymmetry accepted by [`is_positive_definite`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Parameters of the linearized circular-field loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularLoopParams {
    pub kp: f64,
    pub ki: f64,
    pub c1: f64,
    pub c2: f64,
    /// Field slope `|dF/dd|` at the isoline.
    pub alpha: f64,
    /// Known lower bound on `alpha`, used by the gain conditions.
    pub alpha_lower: f64,
    pub v: f64,
    /// Isoline radius.
    pub r_d: f64,
}

impl CircularLoopParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(kp: f64, ki: f64, c1: f64, c2: f64, alpha: f64, alpha_lower: f64, v: f64, r_d: f64) -> Result<Self> {
        let all = [kp, ki, c1, c2, alpha, alpha_lower, v, r_d];
        if !all.iter().all(|x| x.is_finite()) {
            return Err(Error::PreconditionViolated("loop parameters must be finite"));
        }
        if !(kp > 0.0 && c1 > 0.0 && c2 > 0.0 && v > 0.0 && r_d > 0.0) {
            return Err(Error::PreconditionViolated("kp, c1, c2, v and r_d must be positive"));
        }
        if !(ki >= 0.0) {
            return Err(Error::PreconditionViolated("ki must be non-negative"));
        }
        if !(alpha_lower > 0.0 && alpha >= alpha_lower) {
            return Err(Error::PreconditionViolated("need alpha >= alpha_lower > 0"));
        }
        Ok(Self {
            kp,
            ki,
            c1,
            c2,
            alpha,
            alpha_lower,
            v,
            r_d,
        })
    }
}

/// Outcome of the gain conditions, evaluated at `alpha_lower`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GainVerdict {
    /// `kp (kp - 2) v alpha_lower > ki`.
    pub integral_condition: bool,
    /// `v alpha_lower > c1 > 0`.
    pub margin_condition: bool,
    /// `kp > 2`, implied by the integral condition whenever `ki > 0`.
    pub kp_above_two: bool,
}

impl GainVerdict {
    pub fn passed(&self) -> bool {
        self.integral_condition && self.margin_condition
    }
}

pub fn check_gain_conditions(p: &CircularLoopParams) -> GainVerdict {
    let va = p.v * p.alpha_lower;
    GainVerdict {
        integral_condition: p.kp * (p.kp - 2.0) * va > p.ki,
        margin_condition: va > p.c1 && p.c1 > 0.0,
        kp_above_two: p.kp > 2.0,
    }
}

/// Jacobian of the `(d, phi, sigma)` closed loop at the orbit equilibrium.
pub fn jacobian(p: &CircularLoopParams) -> Mat3 {
    let (v, a) = (p.v, p.alpha);
    Mat3::new(
        0.0,
        v,
        0.0,
        -p.kp * p.c1 * a / p.c2 - v / (p.r_d * p.r_d),
        -p.kp * v * a,
        p.ki,
        -p.c1 * a / p.c2,
        -v * a,
        0.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    Positive,
    /// Smallest eigenvalue within [`EIGEN_TOL`] of zero.
    Marginal,
    NonPositive,
}

impl Definiteness {
    fn classify(min_eigenvalue: f64) -> Self {
        if min_eigenvalue > EIGEN_TOL {
            Self::Positive
        } else if min_eigenvalue >= -EIGEN_TOL {
            Self::Marginal
        } else {
            Self::NonPositive
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub mu: [f64; 4],
    pub a: Mat3,
    pub p: Mat3,
    pub q: Mat3,
    pub eig_a: [Complex<f64>; 3],
    /// Ascending.
    pub eig_p: [f64; 3],
    /// Ascending.
    pub eig_q: [f64; 3],
    /// `lambda_min(Q) / lambda_max(P)`.
    pub decay_rate: f64,
    /// Frobenius norm of `A'P + PA + Q`.
    pub residual: f64,
    pub p_definiteness: Definiteness,
    pub q_definiteness: Definiteness,
    pub hurwitz: bool,
}

impl LyapunovCertificate {
    /// True when A is Hurwitz and both P and Q are positive definite.
    pub fn certified(&self) -> bool {
        self.hurwitz
            && self.p_definiteness == Definiteness::Positive
            && self.q_definiteness == Definiteness::Positive
    }
}

/// Builds `mu1..mu4`, `P`, `Q` and their spectra. Requires `ki > 0`: with
/// `ki = 0` the `sigma` direction is uncontrolled and `Q` is singular.
pub fn lyapunov_certificate(p: &CircularLoopParams) -> Result<LyapunovCertificate> {
    if !(p.ki > 0.0) {
        return Err(Error::PreconditionViolated("certificate requires ki > 0"));
    }
    let CircularLoopParams {
        kp,
        ki,
        c1,
        c2,
        alpha,
        v,
        r_d,
        ..
    } = *p;
    let mu1 = kp * c1 * alpha / c2 + v / (r_d * r_d);
    let mu2 = kp * alpha * (kp * alpha * v * mu1 - ki * c1 * alpha / (2.0 * c2));
    let mu3 = mu1 * v / 2.0 + ki * alpha * v / 2.0;
    let mu4 = kp * ki * c2 * v * mu1 / c1 - ki * ki / 2.0;
    let kav = kp * alpha * v;

    let lyap = Mat3::new(
        2.0 * mu2 + mu1 * mu1,
        kav * mu1,
        -ki * mu1,
        kav * mu1,
        2.0 * mu3 + kav * kav,
        -kp * ki * alpha * v,
        -ki * mu1,
        -kp * ki * alpha * v,
        2.0 * mu4 + ki * ki,
    ) * 0.5;

    // The ki (kp alpha v)^2 term enters Q23 with a negative sign; that is the
    // value for which A'P + PA = -Q holds identically.
    let q23 = -ki * kav * kav - ki * ki * alpha * v / 2.0 + kp * ki * c2 * (alpha * v).powi(2) * mu1 / (c1 * alpha);
    let dissipation = Mat3::new(
        kav * mu1 * mu1 - ki * c1 * alpha * mu1 / c2,
        0.0,
        0.0,
        0.0,
        kav.powi(3),
        q23,
        0.0,
        q23,
        kp * ki * ki * alpha * v,
    );

    let a = jacobian(p);
    let residual = (a.transpose() * lyap + lyap * a + dissipation).norm();
    let eig_a = eigenvalues3(&a);
    let eig_p = sorted_symmetric_eigenvalues(&lyap);
    let eig_q = sorted_symmetric_eigenvalues(&dissipation);
    Ok(LyapunovCertificate {
        mu: [mu1, mu2, mu3, mu4],
        a,
        p: lyap,
        q: dissipation,
        eig_a,
        eig_p,
        eig_q,
        decay_rate: eig_q[0] / eig_p[2],
        residual,
        p_definiteness: Definiteness::classify(eig_p[0]),
        q_definiteness: Definiteness::classify(eig_q[0]),
        hurwitz: eig_a.iter().all(|l| l.re < -EIGEN_TOL),
    })
}

fn eigenvalues3(m: &Mat3) -> [Complex<f64>; 3] {
    let e = m.complex_eigenvalues();
    [e[0], e[1], e[2]]
}

fn sorted_symmetric_eigenvalues(m: &Mat3) -> [f64; 3] {
    let e = m.symmetric_eigenvalues();
    let mut out = [e[0], e[1], e[2]];
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Smallest eigenvalue test with tolerance [`EIGEN_TOL`].
pub fn is_positive_definite(m: &DMatrix<f64>) -> Result<bool> {
    if !m.is_square() {
        return Err(Error::PreconditionViolated("matrix must be square"));
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (m + m.transpose()) * 0.5;
    let lo = sym
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(lo > EIGEN_TOL)
}

/// All eigenvalues have real part below `-EIGEN_TOL`.
pub fn is_hurwitz(m: &DMatrix<f64>) -> Result<bool> {
    if !m.is_square() {
        return Err(Error::PreconditionViolated("matrix must be square"));
    }
    Ok(m.complex_eigenvalues().iter().all(|l| l.re < -EIGEN_TOL))
}

/// Analysis of the `ki = 0` regime on a general field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop2Bound {
    /// Half-margin `eps` of the admissible crossing-angle cone.
    pub epsilon_angle: f64,
    pub kp_threshold: f64,
    /// Ultimate bound on `|e|`.
    pub rho: f64,
    /// Ultimate bound on `|s - s_d|`.
    pub error_bound: f64,
}

/// Minimum proportional gain for which the crossing angle stays in
/// `[-pi + eps, -eps]` and the error bound applies.
pub fn prop2_threshold(
    gamma1: f64,
    gamma2: f64,
    gamma3: f64,
    c1: f64,
    c2: f64,
    v: f64,
    epsilon_angle: f64,
) -> Result<f64> {
    if !(epsilon_angle > 0.0 && epsilon_angle < core::f64::consts::FRAC_PI_2) {
        return Err(Error::PreconditionViolated("epsilon_angle must lie in (0, pi/2)"));
    }
    if !(gamma1 > 0.0 && gamma2 >= gamma1 && gamma3 >= 0.0) {
        return Err(Error::PreconditionViolated("need 0 < gamma1 <= gamma2 and gamma3 >= 0"));
    }
    if !(c1 > 0.0 && c2 > 0.0 && v > 0.0) {
        return Err(Error::PreconditionViolated("c1, c2 and v must be positive"));
    }
    let (sin, cos) = epsilon_angle.sin_cos();
    let margin = v * gamma1 * cos;
    if margin <= c1 {
        return Err(Error::InfeasibleMargin { margin, c1 });
    }
    let cone = gamma3 * v / (gamma1 * sin * (margin - c1));
    let bound = (c2 * gamma3 * v + c1 * gamma2) / (c1 * gamma1 * sin);
    Ok(cone.max(bound))
}

/// `c2 * atanh((c2 gamma3 v + c1 gamma2) / (kp c1 gamma1 sin eps))`.
#[allow(clippy::too_many_arguments)]
pub fn prop2_error_bound(
    kp: f64,
    c1: f64,
    c2: f64,
    gamma1: f64,
    gamma2: f64,
    gamma3: f64,
    v: f64,
    epsilon_angle: f64,
) -> Result<f64> {
    if !(kp > 0.0 && c1 > 0.0 && c2 > 0.0 && gamma1 > 0.0) {
        return Err(Error::PreconditionViolated("kp, c1, c2 and gamma1 must be positive"));
    }
    let arg = (c2 * gamma3 * v + c1 * gamma2) / (kp * c1 * gamma1 * epsilon_angle.sin());
    if !(arg < 1.0) || arg < 0.0 {
        return Err(Error::BoundUndefined(arg));
    }
    Ok(c2 * arg.atanh())
}

/// Threshold, `rho` and error bound together; errors if `kp` is not above the
/// threshold.
pub fn prop2_analysis(
    bounds: &FieldBounds,
    kp: f64,
    c1: f64,
    c2: f64,
    v: f64,
    epsilon_angle: f64,
) -> Result<Prop2Bound> {
    let FieldBounds {
        gamma1,
        gamma2,
        gamma3,
        ..
    } = *bounds;
    let kp_threshold = prop2_threshold(gamma1, gamma2, gamma3, c1, c2, v, epsilon_angle)?;
    if !(kp > kp_threshold) {
        return Err(Error::PreconditionViolated("kp must exceed the threshold"));
    }
    let rho = (gamma3 * v + c1 * gamma2 / c2) / (kp * gamma1 * epsilon_angle.sin());
    let error_bound = prop2_error_bound(kp, c1, c2, gamma1, gamma2, gamma3, v, epsilon_angle)?;
    Ok(Prop2Bound {
        epsilon_angle,
        kp_threshold,
        rho,
        error_bound,
    })
}

/// Ultimate bound `atanh(b / k)` of `z' = -k tanh z + b`.
pub fn lemma1_bound(k: f64, b: f64) -> Result<f64> {
    if !(k > 0.0 && b >= 0.0) || !k.is_finite() || !b.is_finite() || b > k {
        return Err(Error::PreconditionViolated("need k > b >= 0"));
    }
    if b == k {
        return Err(Error::BoundUndefined(1.0));
    }
    Ok((b / k).atanh())
}

/// RK4 trajectory of `z' = -k tanh z + b` sampled every `dt`, `z0` first.
pub fn simulate_lemma1(k: f64, b: f64, z0: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    lemma1_bound(k, b)?;
    if !(dt > 0.0) {
        return Err(Error::NonpositiveStep(dt));
    }
    if dt > 0.01 / k * (1.0 + 1e-12) {
        return Err(Error::PreconditionViolated("need dt <= 0.01 / k"));
    }
    if !(t_end >= 0.0) || !z0.is_finite() {
        return Err(Error::PreconditionViolated("need finite z0 and t_end >= 0"));
    }
    let f = |z: f64| -k * z.tanh() + b;
    let steps = (t_end / dt).round() as usize;
    let mut z = z0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z);
    for _ in 0..steps {
        let k1 = f(z);
        let k2 = f(z + 0.5 * dt * k1);
        let k3 = f(z + 0.5 * dt * k2);
        let k4 = f(z + dt * k3);
        z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(z);
    }
    Ok(out)
}

/// Largest `|z|` over the final `fraction` of a trajectory.
pub fn tail_max_abs(samples: &[f64], fraction: f64) -> f64 {
    let n = samples.len();
    let count = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
    samples[n.saturating_sub(count)..]
        .iter()
        .fold(0.0, |m, z| m.max(z.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::{FRAC_PI_3, LN_2};

    fn table2(alpha: f64) -> CircularLoopParams {
        CircularLoopParams::new(10.0, 1.0, 0.2, 1.0, alpha, alpha, 0.5, 10.0 * LN_2).unwrap()
    }

    #[test]
    fn gain_conditions() {
        let v = check_gain_conditions(&table2(0.5));
        assert!(v.integral_condition && v.margin_condition && v.passed());

        let mut p = table2(0.5);
        p.c1 = 0.3;
        let v = check_gain_conditions(&p);
        assert!(v.integral_condition && !v.margin_condition && !v.passed());

        let p = CircularLoopParams::new(1.0, 0.0, 0.2, 1.0, 0.5, 0.5, 0.5, 5.0).unwrap();
        let v = check_gain_conditions(&p);
        assert!(!v.integral_condition && !v.kp_above_two);
    }

    #[test]
    fn jacobian_structure() {
        let p = table2(0.5);
        let a = jacobian(&p);
        assert_eq!(a.row(0).iter().copied().collect::<Vec<_>>(), [0.0, 0.5, 0.0]);
        let eig = eigenvalues3(&a);
        assert!(eig.iter().all(|l| l.re < 0.0));

        let mut p0 = p;
        p0.ki = 0.0;
        let a0 = jacobian(&p0);
        assert_eq!(a0.column(2).iter().copied().collect::<Vec<_>>(), [0.0, 0.0, 0.0]);
        assert_eq!(a0.determinant(), 0.0);
    }

    #[test]
    fn table2_certificate() {
        let cert = lyapunov_certificate(&table2(0.5)).unwrap();
        assert!(cert.certified());
        assert_eq!(cert.p, cert.p.transpose());
        assert_eq!(cert.q, cert.q.transpose());
        assert_eq!(cert.q[(0, 1)], 0.0);
        assert_eq!(cert.q[(0, 2)], 0.0);
        assert!(cert.residual <= 1e-8 * cert.q.norm());
        assert!(cert.decay_rate > 0.0);
    }

    #[test]
    fn certificate_rejects_zero_integral_gain() {
        let mut p = table2(0.5);
        p.ki = 0.0;
        assert!(matches!(lyapunov_certificate(&p), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn definiteness_helpers() {
        assert!(is_positive_definite(&DMatrix::identity(3, 3)).unwrap());
        assert!(!is_positive_definite(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap());
        assert!(matches!(
            is_positive_definite(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])),
            Err(Error::NotSymmetric(_))
        ));
        assert!(is_hurwitz(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0])).unwrap());
        assert!(!is_hurwitz(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap());
        assert_eq!(Definiteness::classify(5e-11), Definiteness::Marginal);
        assert_eq!(Definiteness::classify(-5e-11), Definiteness::Marginal);
        assert_eq!(Definiteness::classify(-1e-3), Definiteness::NonPositive);
    }

    #[test]
    fn threshold_example() {
        let t = prop2_threshold(1.0, 2.0, 0.1, 0.1, 1.0, 0.5, FRAC_PI_3).unwrap();
        assert_relative_eq!(t, 0.25 / (0.1 * FRAC_PI_3.sin()), epsilon = 1e-12);
        assert_relative_eq!(t, 2.8868, epsilon = 1e-4);
        let s = FRAC_PI_3.sin();
        let cone = 0.05 / (s * (0.25 - 0.1));
        assert_relative_eq!(cone, 0.3849, epsilon = 1e-4);
    }

    #[test]
    fn threshold_infeasible_margin() {
        assert!(matches!(
            prop2_threshold(1.0, 2.0, 0.1, 0.5, 1.0, 0.5, 0.2),
            Err(Error::InfeasibleMargin { .. })
        ));
        assert!(matches!(
            prop2_threshold(1.0, 2.0, 0.1, 0.3, 1.0, 0.5, FRAC_PI_3),
            Err(Error::InfeasibleMargin { .. })
        ));
    }

    #[test]
    fn threshold_limit_without_curvature() {
        let t = prop2_threshold(1.0, 2.0, 0.0, 0.1, 1.0, 0.5, FRAC_PI_3).unwrap();
        assert_relative_eq!(t, 2.0 / FRAC_PI_3.sin(), epsilon = 1e-12);
    }

    #[test]
    fn error_bound_examples() {
        let b = prop2_error_bound(10.0, 0.1, 1.0, 1.0, 2.0, 0.1, 0.5, FRAC_PI_3).unwrap();
        assert_relative_eq!(b, 0.297_12, epsilon = 1e-5);
        let b2 = prop2_error_bound(20.0, 0.1, 1.0, 1.0, 2.0, 0.1, 0.5, FRAC_PI_3).unwrap();
        assert_relative_eq!(b2, 0.145_35, epsilon = 1e-5);
        assert!(b2 < b / 2.0);
        assert!(prop2_error_bound(1e12, 0.1, 1.0, 1.0, 2.0, 0.1, 0.5, FRAC_PI_3).unwrap() < 1e-10);
        assert!(matches!(
            prop2_error_bound(1.0, 0.1, 1.0, 1.0, 2.0, 0.1, 0.5, FRAC_PI_3),
            Err(Error::BoundUndefined(_))
        ));
        // c2 scales the bound when the argument is held fixed.
        let scaled = prop2_error_bound(10.0, 0.2, 2.0, 1.0, 2.0, 0.1, 0.5, FRAC_PI_3).unwrap();
        assert_relative_eq!(scaled, 2.0 * b, epsilon = 1e-12);
    }

    #[test]
    fn error_bound_monotonicity() {
        let f = |kp: f64, g2: f64, g3: f64| prop2_error_bound(kp, 0.1, 1.0, 1.0, g2, g3, 0.5, FRAC_PI_3).unwrap();
        let mut prev = f(4.0, 2.0, 0.1);
        for k in 1..50 {
            let cur = f(4.0 + k as f64, 2.0, 0.1);
            assert!(cur < prev);
            prev = cur;
        }
        let mut prev = f(10.0, 2.0, 0.0);
        for k in 1..50 {
            let cur = f(10.0, 2.0, 0.01 * k as f64);
            assert!(cur > prev);
            prev = cur;
        }
        let mut prev = f(10.0, 1.0, 0.1);
        for k in 1..50 {
            let cur = f(10.0, 1.0 + 0.05 * k as f64, 0.1);
            assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn analysis_bundle() {
        let bounds = FieldBounds {
            gamma1: 1.0,
            gamma2: 2.0,
            gamma3: 0.1,
            region: crate::field::Region::Rect { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 },
        };
        let a = prop2_analysis(&bounds, 10.0, 0.1, 1.0, 0.5, FRAC_PI_3).unwrap();
        assert_relative_eq!(a.error_bound, 0.297_12, epsilon = 1e-5);
        assert_relative_eq!(a.rho, 0.25 / (10.0 * FRAC_PI_3.sin()), epsilon = 1e-12);
        assert!(prop2_analysis(&bounds, 2.0, 0.1, 1.0, 0.5, FRAC_PI_3).is_err());
    }

    #[test]
    fn lemma_bound_examples() {
        assert_relative_eq!(lemma1_bound(1.0, 0.5).unwrap(), 0.549_31, epsilon = 1e-5);
        assert_eq!(lemma1_bound(3.0, 0.0).unwrap(), 0.0);
        assert_eq!(lemma1_bound(1.0, 1.0), Err(Error::BoundUndefined(1.0)));
        assert!(matches!(lemma1_bound(1.0, 2.0), Err(Error::PreconditionViolated(_))));
        assert!(matches!(lemma1_bound(0.0, 0.0), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn lemma_simulation() {
        let star = 0.5_f64.atanh();
        let z = simulate_lemma1(1.0, 0.5, 2.0, 30.0, 0.01).unwrap();
        let last = *z.last().unwrap();
        assert!(last >= star && last - star < 1e-3, "{last}");

        let eq = simulate_lemma1(1.0, 0.5, star, 10.0, 0.01).unwrap();
        assert!(eq.iter().all(|z| (z - star).abs() < 1e-14));

        let up = simulate_lemma1(1.0, 0.5, -2.0, 30.0, 0.01).unwrap();
        assert!(up.windows(2).all(|w| w[1] > w[0]));
        assert!(up.iter().all(|z| *z < star));

        assert!(simulate_lemma1(1.0, 0.5, 0.0, 1.0, 0.02).is_err());
        assert!(simulate_lemma1(0.5, 1.0, 0.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn tail_helper() {
        assert_eq!(tail_max_abs(&[5.0, -1.0, 0.5, -0.25], 0.5), 0.5);
        assert_eq!(tail_max_abs(&[5.0, -1.0], 0.0), 1.0);
    }
}
