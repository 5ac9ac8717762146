use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ExperimentRecord;
use crate::error::Result;
use crate::problem::EpsilonRule;
use crate::sysid::InputKind;

/// Aggregate of one (input, SNR, ε-rule, `n_η`, N) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub input: InputKind,
    pub snr_db: f64,
    pub eps_rule: EpsilonRule,
    pub n_eta: usize,
    pub n_samples: usize,
    pub realizations: usize,
    pub n_ok: usize,
    pub error_median: f64,
    pub error_min: f64,
    pub error_max: f64,
    pub bound_median: f64,
    /// Fraction of realizations whose error is within the bound; failed
    /// realizations count as not covered.
    pub coverage: f64,
    /// Log-log slope in N of the squared median bound, shared by the group's rows.
    pub slope_bound_sq: f64,
    /// Log-log slope in N of the squared median error.
    pub slope_error_sq: f64,
}

/// Median of the finite values; NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Least-squares slope of `ln y` against `ln x` over points with positive finite
/// coordinates; NaN with fewer than two distinct `x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return f64::NAN;
    }
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}

// Position of each value in order of first appearance.
struct Ranks<T> {
    seen: Vec<T>,
}

impl<T: PartialEq> Ranks<T> {
    fn new() -> Self {
        Self { seen: Vec::new() }
    }

    fn rank(&mut self, v: T) -> usize {
        match self.seen.iter().position(|x| *x == v) {
            Some(i) => i,
            None => {
                self.seen.push(v);
                self.seen.len() - 1
            }
        }
    }
}

/// Summary rows ordered by input, SNR, ε-rule, `n_η` and N, each axis in the
/// order it first appears in `records`.
pub fn aggregate(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut inputs = Ranks::new();
    let mut snrs = Ranks::new();
    let mut rules = Ranks::new();
    let mut etas = Ranks::new();
    let mut lengths = Ranks::new();
    let mut groups: BTreeMap<[usize; 5], Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        let key = [
            inputs.rank(r.input),
            snrs.rank(r.snr_db.to_bits()),
            rules.rank(r.eps_rule.to_string()),
            etas.rank(r.n_eta),
            lengths.rank(r.n_samples),
        ];
        groups.entry(key).or_default().push(r);
    }

    let mut rows: Vec<([usize; 5], SummaryRow)> = groups
        .into_iter()
        .map(|(key, group)| {
            let ok: Vec<&&ExperimentRecord> = group.iter().filter(|r| r.is_ok()).collect();
            let errors: Vec<f64> = ok.iter().map(|r| r.error_l2).collect();
            let bounds: Vec<f64> = ok.iter().map(|r| r.bound_l2).collect();
            let first = group[0];
            let row = SummaryRow {
                input: first.input,
                snr_db: first.snr_db,
                eps_rule: first.eps_rule,
                n_eta: first.n_eta,
                n_samples: first.n_samples,
                realizations: group.len(),
                n_ok: ok.len(),
                error_median: median(&errors),
                error_min: errors.iter().copied().fold(f64::NAN, f64::min),
                error_max: errors.iter().copied().fold(f64::NAN, f64::max),
                bound_median: median(&bounds),
                coverage: group.iter().filter(|r| r.covered).count() as f64 / group.len() as f64,
                slope_bound_sq: f64::NAN,
                slope_error_sq: f64::NAN,
            };
            (key, row)
        })
        .collect();

    // Slopes across N within each (input, SNR, rule, n_η) series.
    let mut series: BTreeMap<[usize; 4], Vec<usize>> = BTreeMap::new();
    for (i, (key, _)) in rows.iter().enumerate() {
        series.entry([key[0], key[1], key[2], key[3]]).or_default().push(i);
    }
    for members in series.values() {
        let pts = |f: fn(&SummaryRow) -> f64| -> Vec<(f64, f64)> {
            members
                .iter()
                .map(|&i| (rows[i].1.n_samples as f64, f(&rows[i].1).powi(2)))
                .collect()
        };
        let bound_slope = log_log_slope(&pts(|r| r.bound_median));
        let error_slope = log_log_slope(&pts(|r| r.error_median));
        for &i in members {
            rows[i].1.slope_bound_sq = bound_slope;
            rows[i].1.slope_error_sq = error_slope;
        }
    }
    rows.into_iter().map(|(_, r)| r).collect()
}

pub fn write_records_csv<W: Write>(writer: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(writer: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
