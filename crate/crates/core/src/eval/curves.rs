use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::trainer::Mode;

pub const CURVES_HEADER: &str = "mode,seed,env_steps,success";
pub const METRICS_HEADER: &str =
    "mode,seed,cycle,env_steps,success_rate_eval,lower_critic_loss,lower_actor_loss,\
higher_critic_loss,higher_actor_loss,staleness,lower_buffer,higher_buffer,hindsight_trajectories";
pub const STALENESS_HEADER: &str =
    "mode,seed,cycle,env_steps,samples,vanilla,relabeled,diagnostic_steps";

/// One evaluation of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub mode: Mode,
    pub seed: u64,
    pub env_steps: u64,
    pub success: f64,
}

/// Cross-seed summary at one evaluation point; `std_success` is the
/// population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub env_steps: u64,
    pub mean_success: f64,
    pub std_success: f64,
    /// `(seed, success)` sorted by seed.
    pub per_seed: Vec<(u64, f64)>,
}

impl CurvePoint {
    pub fn from_seeds(env_steps: u64, mut per_seed: Vec<(u64, f64)>) -> Self {
        per_seed.sort_by_key(|p| p.0);
        let n = per_seed.len() as f64;
        let mean = per_seed.iter().map(|p| p.1).sum::<f64>() / n;
        let var = per_seed.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n;
        CurvePoint {
            env_steps,
            mean_success: mean,
            std_success: var.sqrt(),
            per_seed,
        }
    }
}

/// Groups rows of a single mode by `env_steps`.
pub fn aggregate(rows: &[CurveRow]) -> Vec<CurvePoint> {
    let mut by_step: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
    for r in rows {
        by_step
            .entry(r.env_steps)
            .or_default()
            .push((r.seed, r.success));
    }
    by_step
        .into_iter()
        .map(|(steps, seeds)| CurvePoint::from_seeds(steps, seeds))
        .collect()
}

/// Mean of the last `window` values (all of them when fewer).
pub fn terminal_success(successes: &[f64], window: usize) -> f64 {
    let tail = &successes[successes.len().saturating_sub(window.max(1))..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

pub fn write_curves(w: impl Write, rows: &[CurveRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CURVES_HEADER.split(','))
        .map_err(|e| Error::Internal(format!("curves.csv: {e}")))?;
    for r in rows {
        csv.write_record([
            r.mode.as_str().to_string(),
            r.seed.to_string(),
            r.env_steps.to_string(),
            r.success.to_string(),
        ])
        .map_err(|e| Error::Internal(format!("curves.csv: {e}")))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_curves(r: impl Read) -> Result<Vec<CurveRow>> {
    let bad = |e: csv::Error| Error::input(format!("curves.csv: {e}"));
    let mut csv = csv::Reader::from_reader(r);
    let header: Vec<String> = csv
        .headers()
        .map_err(bad)?
        .iter()
        .map(String::from)
        .collect();
    if header.join(",") != CURVES_HEADER {
        return Err(Error::input(format!(
            "curves.csv header `{}` is not `{CURVES_HEADER}`",
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in csv.records() {
        let rec = rec.map_err(bad)?;
        let field = |i: usize| {
            rec.get(i)
                .ok_or_else(|| Error::input("curves.csv row too short"))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?.parse().map_err(|_| {
                Error::input(format!(
                    "bad number in curves.csv: `{}`",
                    field(i).unwrap_or("")
                ))
            })
        };
        let int = |i: usize| -> Result<u64> {
            field(i)?.parse().map_err(|_| {
                Error::input(format!(
                    "bad integer in curves.csv: `{}`",
                    field(i).unwrap_or("")
                ))
            })
        };
        let row = CurveRow {
            mode: field(0)?.parse()?,
            seed: int(1)?,
            env_steps: int(2)?,
            success: num(3)?,
        };
        if !(0.0..=1.0).contains(&row.success) {
            return Err(Error::input(format!(
                "success {} outside [0, 1]",
                row.success
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_stable() {
        let mut buf = Vec::new();
        write_curves(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "mode,seed,env_steps,success\n"
        );
    }

    #[test]
    fn terminal_window() {
        assert_eq!(terminal_success(&[0.0, 0.0, 1.0, 0.5], 2), 0.75);
        assert_eq!(terminal_success(&[0.4], 5), 0.4);
        assert_eq!(terminal_success(&[], 5), 0.0);
    }

    proptest! {
        #[test]
        fn rows_round_trip_and_aggregate(
            vals in proptest::collection::vec(0u32..=20, 1..40),
            seeds in 1usize..6,
        ) {
            let rows: Vec<CurveRow> = vals
                .iter()
                .enumerate()
                .map(|(i, v)| CurveRow {
                    mode: Mode::Lgr2,
                    seed: (i % seeds) as u64,
                    env_steps: (i / seeds) as u64 * 2000,
                    success: *v as f64 / 20.0,
                })
                .collect();
            let mut buf = Vec::new();
            write_curves(&mut buf, &rows).unwrap();
            let back = read_curves(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &rows);
            for p in aggregate(&back) {
                let xs: Vec<f64> = rows.iter().filter(|r| r.env_steps == p.env_steps).map(|r| r.success).collect();
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let std = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
                prop_assert!((p.mean_success - mean).abs() <= 1e-12);
                prop_assert!((p.std_success - std).abs() <= 1e-12);
                prop_assert_eq!(p.per_seed.len(), xs.len());
            }
        }
    }
}
