//! Subcommand bodies. Each returns the process exit status: 0 on success,
//! 1 on invalid input or IO failure, 2 when a run aborts or a check fails.

use std::f64::consts::FRAC_PI_3;
use std::io::Write;
use std::path::Path;

use isotrack_core::field::{smoothness_bounds, Grid, Region};
use isotrack_core::simulator::{metrics, run, SweepAxis};
use isotrack_core::stability::{
    check_gain_conditions, lemma1_bound, lyapunov_certificate, prop2_analysis, simulate_lemma1, tail_max_abs,
    CircularLoopParams,
};

use crate::config::{FieldSpec, RawConfig, ScenarioConfig};
use crate::grid::save_grid;
use crate::output::{sig9, sweep_csv, trajectory_csv, write_atomic, SweepRow};
use crate::report::{metrics_report, KeyValues, Prop2Outcome, StabilityReport};
use crate::sweep::{dedup_values, parallel_sweep, parse_values};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

/// Cone half-angle used for the proportional-only bound.
pub const BOUND_EPSILON_ANGLE: f64 = FRAC_PI_3;
/// Operating annulus for radial fields, relative to the isoline radius.
pub const ANNULUS_SPAN: (f64, f64) = (0.9, 1.1);
/// Tolerance of the ultimate-bound check.
pub const LEMMA_TOLERANCE: f64 = 1e-3;

fn fail(err: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(err, "error: {e}");
    EXIT_INPUT
}

pub fn simulate(config: &Path, out_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match ScenarioConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(err, &e),
    };
    let result = run(&cfg.scenario)
        .map_err(Error::from)
        .and_then(|traj| {
            write_atomic(out_path, &trajectory_csv(&traj.samples)?)?;
            Ok(traj)
        });
    let traj = match result {
        Ok(t) => t,
        Err(e) => return fail(err, &e),
    };
    let m = match metrics(&traj, cfg.scenario.level, &cfg.metrics) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "run aborted before the first sample: {}", traj.failure.map_or(e.to_string(), |f| f.to_string()));
            return EXIT_FAILED;
        }
    };
    let _ = out.write_all(metrics_report(&m).as_bytes());
    if m.completed {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

pub fn sweep(
    config: &Path,
    axis: &str,
    values: &str,
    out_path: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let prepared = (|| -> Result<_> {
        let cfg = ScenarioConfig::load(config)?;
        let axis: SweepAxis = axis.parse()?;
        Ok((cfg, axis, parse_values(values)?))
    })();
    let (cfg, axis, values) = match prepared {
        Ok(p) => p,
        Err(e) => return fail(err, &e),
    };
    let (values, dropped) = dedup_values(&values);
    for d in dropped {
        let _ = writeln!(err, "warning: duplicate value {} ignored", sig9(d));
    }
    let entries = parallel_sweep(&cfg.scenario, axis, &values, &cfg.metrics);
    let rows: Vec<SweepRow> = entries
        .iter()
        .map(|entry| match &entry.result {
            Ok(m) => SweepRow::from_metrics(entry.value, m),
            Err(e) => {
                let _ = writeln!(err, "warning: {axis} = {} rejected: {e}", sig9(entry.value));
                SweepRow::rejected(entry.value)
            }
        })
        .collect();
    if let Err(e) = sweep_csv(&rows).and_then(|bytes| write_atomic(out_path, &bytes)) {
        return fail(err, &e);
    }
    let incomplete = rows.iter().filter(|r| !r.completed).count();
    let _ = writeln!(out, "entries = {}\nincomplete = {incomplete}", rows.len());
    if incomplete == 0 {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

/// Certificates applicable to the scenario in `cfg`.
pub fn analyze_stability(cfg: &ScenarioConfig) -> Result<StabilityReport> {
    let s = &cfg.scenario;
    let p = &s.params;
    let geometry = cfg.field_spec.radial_geometry(s.level).transpose()?;

    let mut report = StabilityReport {
        loop_params: None,
        gains: None,
        certificate: None,
        integral_note: None,
        prop2: Prop2Outcome::NotComputable("no operating region is known for this field kind"),
        prop2_gating: p.ki == 0.0,
        passed: true,
    };

    if let Some((center, alpha, r_d)) = geometry {
        let region = Region::Annulus {
            center,
            r_inner: ANNULUS_SPAN.0 * r_d,
            r_outer: ANNULUS_SPAN.1 * r_d,
        };
        report.prop2 = match smoothness_bounds(&s.field, &region, 0.01 * r_d) {
            Err(e) => Prop2Outcome::Failed {
                bounds: None,
                reason: e.to_string(),
            },
            Ok(bounds) => match prop2_analysis(&bounds, p.kp, p.c1, p.c2, s.speed, BOUND_EPSILON_ANGLE) {
                Ok(analysis) => Prop2Outcome::Bound { bounds, analysis },
                Err(e) => Prop2Outcome::Failed {
                    bounds: Some(bounds),
                    reason: e.to_string(),
                },
            },
        };
        if p.ki > 0.0 {
            let lp = CircularLoopParams::new(p.kp, p.ki, p.c1, p.c2, alpha, alpha, s.speed, r_d)?;
            let gains = check_gain_conditions(&lp);
            let cert = lyapunov_certificate(&lp)?;
            report.passed = gains.passed() && cert.certified();
            report.loop_params = Some(lp);
            report.gains = Some(gains);
            report.certificate = Some(cert);
        }
    } else if p.ki > 0.0 {
        report.integral_note = Some("not applicable: the local certificate needs a radial field");
    }
    if report.prop2_gating {
        report.passed = !matches!(report.prop2, Prop2Outcome::Failed { .. });
    }
    Ok(report)
}

pub fn stability(config: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let report = match ScenarioConfig::load(config).and_then(|c| analyze_stability(&c)) {
        Ok(r) => r,
        Err(e) => return fail(err, &e),
    };
    let _ = out.write_all(report.render().as_bytes());
    if report.passed {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

pub fn lemma(k: f64, b: f64, z0: f64, t: f64, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let checked = (|| -> Result<(f64, f64)> {
        let bound = lemma1_bound(k, b)?;
        let dt = 0.01 / k.max(1.0);
        let z = simulate_lemma1(k, b, z0, t, dt)?;
        Ok((bound, tail_max_abs(&z, 0.1)))
    })();
    let (bound, tail) = match checked {
        Ok(r) => r,
        Err(e) => return fail(err, &e),
    };
    let passed = tail <= bound + LEMMA_TOLERANCE;
    let mut kv = KeyValues::default();
    kv.num("bound", bound)
        .num("tail_max_abs", tail)
        .num("tolerance", LEMMA_TOLERANCE)
        .text("result", if passed { "pass" } else { "fail" });
    let _ = out.write_all(kv.finish().as_bytes());
    if passed {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

/// Parses `x_min,x_max,y_min,y_max`.
pub fn parse_region(text: &str) -> Result<Region> {
    let bad = |message: String| Error::InvalidValue {
        key: "--region".into(),
        line: 0,
        message,
    };
    let nums = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad(format!("`{}` is not a number", t.trim()))))
        .collect::<Result<Vec<_>>>()?;
    let [x_min, x_max, y_min, y_max] = nums[..] else {
        return Err(bad("expected x_min,x_max,y_min,y_max".into()));
    };
    Ok(Region::Rect {
        x_min,
        x_max,
        y_min,
        y_max,
    })
}

pub fn gen_field(
    config: &Path,
    region: &str,
    resolution: f64,
    out_path: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let result = (|| -> Result<Grid> {
        let field = FieldSpec::from_config(&RawConfig::load(config)?)?.build()?;
        let grid = Grid::sample(&field, &parse_region(region)?, resolution)?;
        save_grid(&grid, out_path)?;
        Ok(grid)
    })();
    match result {
        Ok(grid) => {
            let _ = writeln!(out, "nx = {}\nny = {}", grid.nx(), grid.ny());
            EXIT_OK
        }
        Err(e) => fail(err, &e),
    }
}
