//! Scalar concentration fields `F(p)`.
//!
//! Four families are supported: the exponential circular field, the
//! linear-in-distance radial field (whose slope and isoline radius are the
//! ground truth for the circular-loop certificates), unnormalized Gaussian
//! mixtures, and bilinearly interpolated grids. All queries are pure.

use alloc::vec::Vec;
use core::f64::consts::PI;


use crate::{Error, Mat2, Result, Vec2};

/// Exponential field `peak * exp(-decay * |p - source|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularField {
    pub peak: f64,
    pub decay: f64,
    pub source: Vec2,
}

/// Field that is affine in the distance to `source`:
/// `level - slope * (|p - source| - radius)`.
///
/// `level` is attained on the circle of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRadialField {
    pub level: f64,
    pub slope: f64,
    pub radius: f64,
    pub source: Vec2,
}

/// One unnormalized Gaussian bump `amplitude * exp(-(p-c)' S^-1 (p-c) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub amplitude: f64,
    pub center: Vec2,
    covariance: Mat2,
    precision: Mat2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

/// Row-major lattice of samples; node `(i, j)` sits at `(x0 + i*dx, y0 + j*dy)`
/// and is stored at `values[j * nx + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Circular(CircularField),
    LinearRadial(LinearRadialField),
    GaussianMixture(GaussianMixture),
    Gridded(Grid),
}

/// Operating region used for bound estimation and lattice sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Rect {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    Annulus {
        center: Vec2,
        r_inner: f64,
        r_outer: f64,
    },
}

/// Lattice estimates of the gradient-norm and Hessian-norm bounds of a field
/// over a region. They are only as tight as the sampling resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldBounds {
    /// Minimum gradient norm.
    pub gamma1: f64,
    /// Maximum gradient norm.
    pub gamma2: f64,
    /// Maximum spectral norm of the Hessian.
    pub gamma3: f64,
    pub region: Region,
}

impl GaussianComponent {
    pub fn new(amplitude: f64, center: Vec2, covariance: Mat2) -> Result<Self> {
        if !amplitude.is_finite() || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidField("gaussian parameters must be finite"));
        }
        let asym = (covariance[(0, 1)] - covariance[(1, 0)]).abs();
        if asym > 1e-12 * covariance.abs().max().max(1.0) {
            return Err(Error::InvalidField("covariance must be symmetric"));
        }
        let covariance = (covariance + covariance.transpose()) * 0.5;
        let (lo, _) = symmetric_eigenvalues(&covariance);
        if !(lo > 0.0) {
            return Err(Error::InvalidField("covariance must be positive definite"));
        }
        let precision = covariance
            .try_inverse()
            .ok_or(Error::InvalidField("covariance must be invertible"))?;
        Ok(Self {
            amplitude,
            center,
            covariance,
            precision,
        })
    }

    /// Isotropic component with covariance `std_dev^2 * I`.
    pub fn isotropic(amplitude: f64, center: Vec2, std_dev: f64) -> Result<Self> {
        Self::new(amplitude, center, Mat2::identity() * (std_dev * std_dev))
    }

    pub fn covariance(&self) -> &Mat2 {
        &self.covariance
    }

    fn value(&self, p: &Vec2) -> f64 {
        let d = p - self.center;
        self.amplitude * (-0.5 * d.dot(&(self.precision * d))).exp()
    }

    fn gradient(&self, p: &Vec2) -> Vec2 {
        let d = p - self.center;
        -(self.precision * d) * self.value(p)
    }

    fn hessian(&self, p: &Vec2) -> Mat2 {
        let w = self.precision * (p - self.center);
        (w * w.transpose() - self.precision) * self.value(p)
    }
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidField("mixture needs at least one component"));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }
}

impl Grid {
    pub fn new(
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        dx: f64,
        dy: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidField("grid needs at least 2x2 nodes"));
        }
        if !(dx > 0.0 && dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
            return Err(Error::InvalidField("grid spacing must be positive"));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::InvalidField("grid origin must be finite"));
        }
        if values.len() != nx * ny {
            return Err(Error::InvalidField("value count must equal nx*ny"));
        }
        Ok(Self {
            nx,
            ny,
            x0,
            y0,
            dx,
            dy,
            values,
        })
    }

    /// Samples `field` on a lattice of spacing `resolution` anchored at the
    /// lower-left corner of a rectangular `region`.
    pub fn sample(field: &ScalarField, region: &Region, resolution: f64) -> Result<Self> {
        let Region::Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        } = *region
        else {
            return Err(Error::PreconditionViolated("grid sampling needs a rectangle"));
        };
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::PreconditionViolated("resolution must be positive"));
        }
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::EmptyRegion);
        }
        let nx = ((x_max - x_min) / resolution + 1e-9).floor() as usize + 1;
        let ny = ((y_max - y_min) / resolution + 1e-9).floor() as usize + 1;
        if nx < 2 || ny < 2 {
            return Err(Error::EmptyRegion);
        }
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let p = Vec2::new(
                    x_min + i as f64 * resolution,
                    y_min + j as f64 * resolution,
                );
                values.push(field.value(&p)?);
            }
        }
        Self::new(nx, ny, x_min, y_min, resolution, resolution, values)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.dx, self.dy)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + (self.nx - 1) as f64 * self.dx
    }

    pub fn y_max(&self) -> f64 {
        self.y0 + (self.ny - 1) as f64 * self.dy
    }

    /// The grid rectangle as a [`Region`].
    pub fn extent(&self) -> Region {
        Region::Rect {
            x_min: self.x0,
            x_max: self.x_max(),
            y_min: self.y0,
            y_max: self.y_max(),
        }
    }

    fn contains(&self, p: &Vec2, margin_x: f64, margin_y: f64) -> bool {
        p.x >= self.x0 + margin_x
            && p.x <= self.x_max() - margin_x
            && p.y >= self.y0 + margin_y
            && p.y <= self.y_max() - margin_y
    }

    fn interpolate(&self, p: &Vec2) -> Result<f64> {
        if !self.contains(p, 0.0, 0.0) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y });
        }
        let fx = (p.x - self.x0) / self.dx;
        let fy = (p.y - self.y0) / self.dy;
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let lower = self.node(i, j) * (1.0 - tx) + self.node(i + 1, j) * tx;
        let upper = self.node(i, j + 1) * (1.0 - tx) + self.node(i + 1, j + 1) * tx;
        Ok(lower * (1.0 - ty) + upper * ty)
    }

    fn check_interior(&self, p: &Vec2) -> Result<()> {
        if self.contains(p, self.dx, self.dy) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { x: p.x, y: p.y })
        }
    }

    fn fd_step(&self) -> f64 {
        0.5 * self.dx.min(self.dy)
    }

    fn gradient(&self, p: &Vec2) -> Result<Vec2> {
        self.check_interior(p)?;
        let h = self.fd_step();
        let f = |dx: f64, dy: f64| self.interpolate(&Vec2::new(p.x + dx, p.y + dy));
        Ok(Vec2::new(
            (f(h, 0.0)? - f(-h, 0.0)?) / (2.0 * h),
            (f(0.0, h)? - f(0.0, -h)?) / (2.0 * h),
        ))
    }

    fn hessian(&self, p: &Vec2) -> Result<Mat2> {
        self.check_interior(p)?;
        let h = self.fd_step();
        let f = |dx: f64, dy: f64| self.interpolate(&Vec2::new(p.x + dx, p.y + dy));
        let centre = f(0.0, 0.0)?;
        let fxx = (f(h, 0.0)? - 2.0 * centre + f(-h, 0.0)?) / (h * h);
        let fyy = (f(0.0, h)? - 2.0 * centre + f(0.0, -h)?) / (h * h);
        let fxy = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h);
        Ok(Mat2::new(fxx, fxy, fxy, fyy))
    }
}

/// Unit direction and distance from `source` to `p`; errors at the source.
fn radial(p: &Vec2, source: &Vec2) -> Result<(Vec2, f64)> {
    let d = p - source;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::SingularPoint { x: p.x, y: p.y });
    }
    Ok((d / r, r))
}

impl ScalarField {
    pub fn circular(peak: f64, decay: f64, source: Vec2) -> Result<Self> {
        if !(peak > 0.0 && decay > 0.0) || !peak.is_finite() || !decay.is_finite() {
            return Err(Error::InvalidField("circular field needs peak > 0 and decay > 0"));
        }
        Ok(Self::Circular(CircularField {
            peak,
            decay,
            source,
        }))
    }

    pub fn linear_radial(level: f64, slope: f64, radius: f64, source: Vec2) -> Result<Self> {
        if !(slope > 0.0 && radius > 0.0) || !level.is_finite() || !slope.is_finite() {
            return Err(Error::InvalidField("linear radial field needs slope > 0 and radius > 0"));
        }
        Ok(Self::LinearRadial(LinearRadialField {
            level,
            slope,
            radius,
            source,
        }))
    }

    pub fn gaussian_mixture(components: Vec<GaussianComponent>) -> Result<Self> {
        GaussianMixture::new(components).map(Self::GaussianMixture)
    }

    pub fn value(&self, p: &Vec2) -> Result<f64> {
        match self {
            Self::Circular(f) => Ok(f.peak * (-f.decay * (p - f.source).norm()).exp()),
            Self::LinearRadial(f) => Ok(f.level - f.slope * ((p - f.source).norm() - f.radius)),
            Self::GaussianMixture(m) => Ok(m.components.iter().map(|c| c.value(p)).sum()),
            Self::Gridded(g) => g.interpolate(p),
        }
    }

    pub fn gradient(&self, p: &Vec2) -> Result<Vec2> {
        match self {
            Self::Circular(f) => {
                let (u, r) = radial(p, &f.source)?;
                let value = f.peak * (-f.decay * r).exp();
                Ok(-u * (f.decay * value))
            }
            Self::LinearRadial(f) => {
                let (u, _) = radial(p, &f.source)?;
                Ok(-u * f.slope)
            }
            Self::GaussianMixture(m) => Ok(m
                .components
                .iter()
                .fold(Vec2::zeros(), |acc, c| acc + c.gradient(p))),
            Self::Gridded(g) => g.gradient(p),
        }
    }

    pub fn hessian(&self, p: &Vec2) -> Result<Mat2> {
        match self {
            Self::Circular(f) => {
                let (u, r) = radial(p, &f.source)?;
                let value = f.peak * (-f.decay * r).exp();
                let uu = u * u.transpose();
                let tangential = Mat2::identity() - uu;
                Ok((uu * f.decay - tangential / r) * (f.decay * value))
            }
            Self::LinearRadial(f) => {
                let (u, r) = radial(p, &f.source)?;
                let tangential = Mat2::identity() - u * u.transpose();
                Ok(tangential * (-f.slope / r))
            }
            Self::GaussianMixture(m) => Ok(m
                .components
                .iter()
                .fold(Mat2::zeros(), |acc, c| acc + c.hessian(p))),
            Self::Gridded(g) => g.hessian(p),
        }
    }

    /// Returns the field with `offset` added everywhere.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        match self {
            Self::LinearRadial(f) => Self::linear_radial(f.level + offset, f.slope, f.radius, f.source),
            Self::Gridded(g) => {
                let values = g.values.iter().map(|v| v + offset).collect();
                Grid::new(g.nx, g.ny, g.x0, g.y0, g.dx, g.dy, values).map(Self::Gridded)
            }
            _ => Err(Error::PreconditionViolated(
                "only linear radial and gridded fields can be shifted",
            )),
        }
    }
}

/// Eigenvalues `(lo, hi)` of a symmetric 2×2 matrix.
pub(crate) fn symmetric_eigenvalues(m: &Mat2) -> (f64, f64) {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let radius = half_diff.hypot(off);
    (mean - radius, mean + radius)
}

/// Spectral norm of a symmetric 2×2 matrix.
pub fn spectral_norm(m: &Mat2) -> f64 {
    let (lo, hi) = symmetric_eigenvalues(m);
    lo.abs().max(hi.abs())
}

impl Region {
    /// Sample points with spacing at most about `resolution`, boundaries
    /// included.
    pub fn lattice(&self, resolution: f64) -> Result<Vec<Vec2>> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::PreconditionViolated("resolution must be positive"));
        }
        let mut points = Vec::new();
        match *self {
            Region::Rect {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                if !(x_max > x_min && y_max > y_min) {
                    return Err(Error::EmptyRegion);
                }
                let nx = ((x_max - x_min) / resolution).ceil().max(1.0) as usize;
                let ny = ((y_max - y_min) / resolution).ceil().max(1.0) as usize;
                for j in 0..=ny {
                    let y = y_min + (y_max - y_min) * j as f64 / ny as f64;
                    for i in 0..=nx {
                        let x = x_min + (x_max - x_min) * i as f64 / nx as f64;
                        points.push(Vec2::new(x, y));
                    }
                }
            }
            Region::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                if !(r_inner >= 0.0 && r_outer > r_inner) {
                    return Err(Error::EmptyRegion);
                }
                let nr = ((r_outer - r_inner) / resolution).ceil().max(1.0) as usize;
                for k in 0..=nr {
                    let r = r_inner + (r_outer - r_inner) * k as f64 / nr as f64;
                    if r == 0.0 {
                        points.push(center);
                        continue;
                    }
                    let na = ((2.0 * PI * r) / resolution).ceil().max(8.0) as usize;
                    for a in 0..na {
                        let angle = 2.0 * PI * a as f64 / na as f64;
                        points.push(center + Vec2::new(r * angle.cos(), r * angle.sin()));
                    }
                }
            }
        }
        Ok(points)
    }
}

/// Lattice estimate of `(gamma1, gamma2, gamma3)` over `region`.
pub fn smoothness_bounds(field: &ScalarField, region: &Region, resolution: f64) -> Result<FieldBounds> {
    let points = region.lattice(resolution)?;
    let mut gamma1 = f64::INFINITY;
    let mut gamma2 = 0.0_f64;
    let mut gamma3 = 0.0_f64;
    for p in &points {
        let g = field.gradient(p)?.norm();
        gamma1 = gamma1.min(g);
        gamma2 = gamma2.max(g);
        gamma3 = gamma3.max(spectral_norm(&field.hessian(p)?));
    }
    if !(gamma1 > 0.0) {
        let p = points
            .iter()
            .find(|p| field.gradient(p).map(|g| g.norm() == 0.0).unwrap_or(false))
            .copied()
            .unwrap_or_else(Vec2::zeros);
        return Err(Error::SingularPoint { x: p.x, y: p.y });
    }
    Ok(FieldBounds {
        gamma1,
        gamma2,
        gamma3,
        region: *region,
    })
}

/// Radius of the isoline `peak * exp(-decay * r) = level`.
pub fn circular_isoline_radius(peak: f64, decay: f64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < peak) {
        return Err(Error::InfeasibleLevel { level, peak });
    }
    if !(decay > 0.0) {
        return Err(Error::InvalidField("decay must be positive"));
    }
    Ok((peak / level).ln() / decay)
}
