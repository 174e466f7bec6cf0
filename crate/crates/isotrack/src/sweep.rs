//! Parallel parameter sweeps with results merged in input order.

use std::num::NonZeroUsize;
use std::thread;

use isotrack_core::simulator::{run_entry, MetricsOptions, Scenario, SweepAxis, SweepEntry};

use crate::{Error, Result};

/// Parses a comma-separated value list.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(Error::InvalidValue {
                key: "--values".into(),
                line: 0,
                message: format!("`{t}` is not a finite number"),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::InvalidValue {
            key: "--values".into(),
            line: 0,
            message: "value list is empty".into(),
        });
    }
    Ok(values)
}

/// Keeps the first occurrence of each value; returns the kept values and the
/// dropped duplicates.
pub fn dedup_values(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut kept: Vec<f64> = Vec::with_capacity(values.len());
    let mut dropped = Vec::new();
    for &v in values {
        if kept.contains(&v) {
            dropped.push(v);
        } else {
            kept.push(v);
        }
    }
    (kept, dropped)
}

/// Runs one scenario per value on worker threads. The output order matches
/// `values` regardless of scheduling.
pub fn parallel_sweep(base: &Scenario, axis: SweepAxis, values: &[f64], opts: &MetricsOptions) -> Vec<SweepEntry> {
    let workers = thread::available_parallelism()
        .map_or(1, NonZeroUsize::get)
        .min(values.len())
        .max(1);
    let mut slots: Vec<Option<SweepEntry>> = vec![None; values.len()];
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (w..values.len())
                        .step_by(workers)
                        .map(|i| {
                            let value = values[i];
                            (
                                i,
                                SweepEntry {
                                    value,
                                    result: run_entry(base, axis, value, opts),
                                },
                            )
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, entry) in h.join().expect("sweep worker panicked") {
                slots[i] = Some(entry);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every index filled")).collect()
}
