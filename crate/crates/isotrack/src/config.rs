//! Flat `key = value` scenario configs with `#` comments and dotted keys.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use isotrack_core::controller::{ControllerParams, DerivativeMode};
use isotrack_core::dubins::RobotState;
use isotrack_core::field::{circular_isoline_radius, GaussianComponent, ScalarField};
use isotrack_core::simulator::{MetricsOptions, Scenario};
use isotrack_core::{Mat2, Vec2};

use crate::grid::load_grid;
use crate::{Error, Result};

pub const KEYS: &[&str] = &[
    "field.kind",
    "field.i0",
    "field.sigma",
    "field.alpha",
    "field.rd",
    "field.sd",
    "field.center_x",
    "field.center_y",
    "field.grid_path",
    "field.components",
    "sd",
    "v",
    "kp",
    "ki",
    "c1",
    "c2",
    "derivative_mode",
    "tau_f",
    "sigma_limit",
    "omega_limit",
    "init_x",
    "init_y",
    "init_theta",
    "sim_dt",
    "controller_dt",
    "duration",
    "noise_std",
    "seed",
    "tail_fraction",
    "band",
];

const FIELD_KEYS: &[(&str, &[&str])] = &[
    ("circular", &["field.i0", "field.sigma", "field.center_x", "field.center_y"]),
    (
        "linear_radial",
        &["field.alpha", "field.rd", "field.sd", "field.center_x", "field.center_y"],
    ),
    ("gaussian_mixture", &["field.components"]),
    ("grid", &["field.grid_path"]),
];

/// Parsed but uninterpreted config: each known key with its value and line.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::UnknownKey {
                    key: key.to_string(),
                    line,
                });
            }
            if entries.insert(key.to_string(), (value.trim().to_string(), line)).is_some() {
                return Err(Error::DuplicateKey {
                    key: key.to_string(),
                    line,
                });
            }
        }
        Ok(Self {
            entries,
            base_dir: PathBuf::new(),
        })
    }

    /// Reads a config file; relative `field.grid_path` values resolve against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.1)
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> Error {
        Error::InvalidValue {
            key: key.to_string(),
            line: self.line(key),
            message: message.into(),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        let Some((v, _)) = self.str(key) else {
            return Ok(None);
        };
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Some(x)),
            _ => Err(self.invalid(key, format!("expected a finite number, found `{v}`"))),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.f64(key)? {
            Some(x) if x <= 0.0 => Err(self.invalid(key, "must be positive")),
            other => Ok(other),
        }
    }
}

/// Field description as written in a config.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Circular { peak: f64, decay: f64, center: Vec2 },
    LinearRadial { alpha: f64, radius: f64, level: f64, center: Vec2 },
    GaussianMixture(Vec<ComponentSpec>),
    Grid(PathBuf),
}

/// `amplitude center_x center_y cov_xx cov_xy cov_yy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentSpec {
    pub amplitude: f64,
    pub center: Vec2,
    pub covariance: Mat2,
}

impl FieldSpec {
    pub fn from_config(cfg: &RawConfig) -> Result<Self> {
        let (kind, _) = cfg.str("field.kind").ok_or_else(|| Error::MissingKey("field.kind".into()))?;
        let allowed = FIELD_KEYS
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, keys)| *keys)
            .ok_or_else(|| {
                cfg.invalid(
                    "field.kind",
                    format!("expected circular, linear_radial, gaussian_mixture or grid, found `{kind}`"),
                )
            })?;
        for key in KEYS.iter().filter(|k| k.starts_with("field.") && **k != "field.kind") {
            if cfg.contains(key) && !allowed.contains(key) {
                return Err(cfg.invalid(key, format!("not used by field.kind = {kind}")));
            }
        }
        let center = Vec2::new(
            cfg.f64("field.center_x")?.unwrap_or(0.0),
            cfg.f64("field.center_y")?.unwrap_or(0.0),
        );
        let need_positive = |key: &str| -> Result<f64> {
            cfg.positive(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
        };
        Ok(match kind {
            "circular" => Self::Circular {
                peak: need_positive("field.i0")?,
                decay: need_positive("field.sigma")?,
                center,
            },
            "linear_radial" => Self::LinearRadial {
                alpha: need_positive("field.alpha")?,
                radius: need_positive("field.rd")?,
                level: cfg.require_f64("field.sd")?,
                center,
            },
            "gaussian_mixture" => {
                let (text, _) = cfg
                    .str("field.components")
                    .ok_or_else(|| Error::MissingKey("field.components".into()))?;
                Self::GaussianMixture(parse_components(text).map_err(|m| cfg.invalid("field.components", m))?)
            }
            _ => {
                let (path, _) = cfg
                    .str("field.grid_path")
                    .ok_or_else(|| Error::MissingKey("field.grid_path".into()))?;
                if path.is_empty() {
                    return Err(cfg.invalid("field.grid_path", "empty path"));
                }
                Self::Grid(cfg.base_dir.join(path))
            }
        })
    }

    pub fn build(&self) -> Result<ScalarField> {
        Ok(match self {
            Self::Circular { peak, decay, center } => ScalarField::circular(*peak, *decay, *center)?,
            Self::LinearRadial {
                alpha,
                radius,
                level,
                center,
            } => ScalarField::linear_radial(*level, *alpha, *radius, *center)?,
            Self::GaussianMixture(parts) => ScalarField::gaussian_mixture(
                parts
                    .iter()
                    .map(|c| GaussianComponent::new(c.amplitude, c.center, c.covariance))
                    .collect::<isotrack_core::Result<_>>()?,
            )?,
            Self::Grid(path) => ScalarField::Gridded(load_grid(path)?),
        })
    }

    /// Center, slope at the isoline and isoline radius for radial fields.
    pub fn radial_geometry(&self, level: f64) -> Option<Result<(Vec2, f64, f64)>> {
        match *self {
            Self::Circular { peak, decay, center } => Some(
                circular_isoline_radius(peak, decay, level)
                    .map(|r| (center, decay * level, r))
                    .map_err(Error::from),
            ),
            Self::LinearRadial {
                alpha,
                radius,
                level: field_level,
                center,
            } => {
                let r = radius + (field_level - level) / alpha;
                Some(if r > 0.0 {
                    Ok((center, alpha, r))
                } else {
                    Err(Error::Core(isotrack_core::Error::InfeasibleLevel {
                        level,
                        peak: field_level + alpha * radius,
                    }))
                })
            }
            _ => None,
        }
    }
}

/// Parses `;`-separated components of six numbers each.
fn parse_components(text: &str) -> std::result::Result<Vec<ComponentSpec>, String> {
    let mut out = Vec::new();
    for (i, part) in text.split(';').map(str::trim).filter(|p| !p.is_empty()).enumerate() {
        let nums: Vec<f64> = part
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| format!("component {}: `{t}` is not a number", i + 1)))
            .collect::<std::result::Result<_, _>>()?;
        let [amplitude, cx, cy, sxx, sxy, syy] = nums[..] else {
            return Err(format!(
                "component {} needs `amplitude cx cy cov_xx cov_xy cov_yy`, found {} numbers",
                i + 1,
                nums.len()
            ));
        };
        out.push(ComponentSpec {
            amplitude,
            center: Vec2::new(cx, cy),
            covariance: Mat2::new(sxx, sxy, sxy, syy),
        });
    }
    if out.is_empty() {
        return Err("no components given".into());
    }
    Ok(out)
}

/// A complete scenario config.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub field_spec: FieldSpec,
    pub scenario: Scenario,
    pub metrics: MetricsOptions,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_raw(&RawConfig::load(path)?)
    }

    pub fn from_raw(cfg: &RawConfig) -> Result<Self> {
        let field_spec = FieldSpec::from_config(cfg)?;
        let level = cfg.require_f64("sd")?;
        let speed = cfg.positive("v")?.ok_or_else(|| Error::MissingKey("v".into()))?;
        let kp = cfg.require_f64("kp")?;
        let ki = cfg.require_f64("ki")?;
        let c1 = cfg.require_f64("c1")?;
        let c2 = cfg.require_f64("c2")?;
        let initial = RobotState::new(
            cfg.require_f64("init_x")?,
            cfg.require_f64("init_y")?,
            cfg.require_f64("init_theta")?,
        );
        let duration = cfg.positive("duration")?.ok_or_else(|| Error::MissingKey("duration".into()))?;
        let sim_dt = cfg.positive("sim_dt")?.unwrap_or(0.01);
        let controller_dt = cfg.positive("controller_dt")?.unwrap_or(sim_dt);

        let mode = cfg.str("derivative_mode").map_or("dirty", |(m, _)| m);
        let derivative = match mode {
            "oracle" => {
                if cfg.contains("tau_f") {
                    return Err(cfg.invalid("tau_f", "only used with derivative_mode = dirty"));
                }
                DerivativeMode::Oracle
            }
            "dirty" => match cfg.positive("tau_f")? {
                Some(tau_f) => DerivativeMode::DirtyDerivative { tau_f },
                None => DerivativeMode::dirty_for(controller_dt),
            },
            other => {
                return Err(cfg.invalid("derivative_mode", format!("expected oracle or dirty, found `{other}`")));
            }
        };

        let mut params = ControllerParams::new(kp, ki, c1, c2, derivative)?;
        params.sigma_limit = cfg.positive("sigma_limit")?;
        params.omega_limit = cfg.positive("omega_limit")?;
        params.validate()?;

        let seed = match cfg.str("seed") {
            None => 0,
            Some((s, _)) => s
                .parse::<u64>()
                .map_err(|_| cfg.invalid("seed", format!("expected a non-negative integer, found `{s}`")))?,
        };
        let noise_std = cfg.f64("noise_std")?.unwrap_or(0.0);
        if noise_std < 0.0 {
            return Err(cfg.invalid("noise_std", "must be non-negative"));
        }

        let mut metrics = MetricsOptions::default();
        if let Some(f) = cfg.f64("tail_fraction")? {
            if !(f > 0.0 && f <= 1.0) {
                return Err(cfg.invalid("tail_fraction", "must lie in (0, 1]"));
            }
            metrics.tail_fraction = f;
        }
        metrics.band = cfg.positive("band")?;

        let field = field_spec.build()?;
        let mut scenario = Scenario::new(field, level, initial, speed, params, duration);
        scenario.sim_dt = sim_dt;
        scenario.controller_dt = controller_dt;
        scenario.noise_std = noise_std;
        scenario.seed = seed;
        scenario.validate()?;
        Ok(Self {
            field_spec,
            scenario,
            metrics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# circular reproduction
field.kind = circular
field.i0 = 20
field.sigma = 0.1
sd = 10
v = 0.5
kp = 10
ki = 1   # integral gain
c1 = 0.2
c2 = 1
init_x = 0
init_y = 20
init_theta = -1.5707963267948966
duration = 400
";

    fn load(text: &str) -> Result<ScenarioConfig> {
        ScenarioConfig::from_raw(&RawConfig::parse(text)?)
    }

    #[test]
    fn parses_base_config_with_defaults() {
        let c = load(BASE).unwrap();
        let s = &c.scenario;
        assert_eq!((s.level, s.speed, s.duration), (10.0, 0.5, 400.0));
        assert_eq!((s.sim_dt, s.controller_dt, s.seed, s.noise_std), (0.01, 0.01, 0, 0.0));
        assert_eq!(s.params.derivative, DerivativeMode::DirtyDerivative { tau_f: 0.05 });
        assert_eq!(s.params.sigma_limit, None);
        assert_eq!(c.metrics, MetricsOptions::default());
        assert!(matches!(c.field_spec, FieldSpec::Circular { peak, .. } if peak == 20.0));
    }

    #[test]
    fn missing_key_is_named() {
        let text = BASE.replace("v = 0.5\n", "");
        let err = load(&text).unwrap_err();
        assert!(matches!(&err, Error::MissingKey(k) if k == "v"));
        assert!(err.to_string().contains("`v`"));
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let err = load(&format!("{BASE}kd = 3\n")).unwrap_err();
        assert!(matches!(&err, Error::UnknownKey { key, line: 15 } if key == "kd"), "{err}");
        let err = load(&format!("{BASE}kp = 3\n")).unwrap_err();
        assert!(matches!(&err, Error::DuplicateKey { key, .. } if key == "kp"), "{err}");
        let err = load(&format!("{BASE}field.rd = 3\n")).unwrap_err();
        assert!(err.to_string().contains("field.rd"), "{err}");
        assert!(matches!(load("just text\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn invalid_values_name_key_and_line() {
        let err = load(&BASE.replace("kp = 10", "kp = ten")).unwrap_err();
        assert!(matches!(&err, Error::InvalidValue { key, line: 7, .. } if key == "kp"), "{err}");
        let err = load(&format!("{BASE}seed = -4\n")).unwrap_err();
        assert!(err.to_string().contains("seed"));
        let err = load(&format!("{BASE}derivative_mode = exact\n")).unwrap_err();
        assert!(err.to_string().contains("derivative_mode"));
        let err = load(&format!("{BASE}derivative_mode = oracle\ntau_f = 0.1\n")).unwrap_err();
        assert!(err.to_string().contains("tau_f"));
        assert!(load(&BASE.replace("c1 = 0.2", "c1 = -0.2")).is_err());
        assert!(load(&format!("{BASE}tail_fraction = 1.5\n")).is_err());
    }

    #[test]
    fn optional_keys_apply() {
        let text = format!(
            "{BASE}derivative_mode = dirty\ntau_f = 0.2\nsigma_limit = 1\nomega_limit = 2\nsim_dt = 0.005\n\
             controller_dt = 0.01\nnoise_std = 0.1\nseed = 7\ntail_fraction = 0.2\nband = 0.3\n"
        );
        let c = load(&text).unwrap();
        let s = &c.scenario;
        assert_eq!(s.params.derivative, DerivativeMode::DirtyDerivative { tau_f: 0.2 });
        assert_eq!((s.params.sigma_limit, s.params.omega_limit), (Some(1.0), Some(2.0)));
        assert_eq!((s.sim_dt, s.controller_dt, s.noise_std, s.seed), (0.005, 0.01, 0.1, 7));
        assert_eq!(c.metrics.tail_fraction, 0.2);
        assert_eq!(c.metrics.band, Some(0.3));
        let c = load(&format!("{BASE}derivative_mode = oracle\n")).unwrap();
        assert_eq!(c.scenario.params.derivative, DerivativeMode::Oracle);
    }

    #[test]
    fn mixture_and_linear_fields() {
        let text = BASE.replace(
            "field.kind = circular\nfield.i0 = 20\nfield.sigma = 0.1\n",
            "field.kind = gaussian_mixture\nfield.components = 20 -3 0 100 0 100; 12, 4, 0, 64, 0, 64\n",
        );
        let c = load(&text).unwrap();
        let FieldSpec::GaussianMixture(parts) = &c.field_spec else {
            panic!("expected mixture");
        };
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[1].center, Vec2::new(4.0, 0.0));
        assert!(c.field_spec.radial_geometry(10.0).is_none());

        let bad = text.replace("12, 4, 0, 64, 0, 64", "12 4 0 64 0");
        assert!(load(&bad).unwrap_err().to_string().contains("field.components"));
        let indefinite = text.replace("12, 4, 0, 64, 0, 64", "12 4 0 1 5 1");
        assert!(load(&indefinite).is_err());

        let lin = BASE.replace(
            "field.kind = circular\nfield.i0 = 20\nfield.sigma = 0.1\n",
            "field.kind = linear_radial\nfield.alpha = 0.5\nfield.rd = 6\nfield.sd = 11\n",
        );
        let c = load(&lin).unwrap();
        let (_, alpha, r) = c.field_spec.radial_geometry(10.0).unwrap().unwrap();
        assert_eq!((alpha, r), (0.5, 8.0));
    }

    #[test]
    fn circular_geometry_matches_isoline() {
        let c = load(BASE).unwrap();
        let (center, alpha, r) = c.field_spec.radial_geometry(10.0).unwrap().unwrap();
        assert_eq!(center, Vec2::zeros());
        assert!((alpha - 1.0).abs() < 1e-15);
        assert!((r - 10.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn grid_path_resolves_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.grid"), "GRID 2 2 0 0 1 1\n0 1\n1 2\n").unwrap();
        let text = BASE
            .replace("field.kind = circular\nfield.i0 = 20\nfield.sigma = 0.1\n", "field.kind = grid\nfield.grid_path = g.grid\n");
        let path = dir.path().join("s.cfg");
        std::fs::write(&path, text).unwrap();
        let c = ScenarioConfig::load(&path).unwrap();
        assert_eq!(c.field_spec, FieldSpec::Grid(dir.path().join("g.grid")));
    }
}
