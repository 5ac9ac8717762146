//! Monte Carlo study of SPARSEVA estimation errors against the sparse bound.
//!
//! For every grid cell and realization the data are synthesized, SPARSEVA is
//! solved, and the bound is evaluated for each `n_η`. Data seeds depend on the
//! input kind, SNR and realization only, so every ε-rule sees the same data and a
//! shorter record is a prefix of a longer one.

mod config;
mod summary;
mod svg;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{Cell, ExperimentConfig};
pub use summary::{aggregate, log_log_slope, median, write_records_csv, write_summary_csv, SummaryRow};
pub use svg::{write_figures, FIGURE_DIR};

use crate::bounds::{sparse_bound, weak_sparsity_tail, SparseBoundInputs};
use crate::curvature::{CurvatureCache, CurvatureEstimate};
use crate::error::{Error, Result};
use crate::problem::{EpsilonRule, SparsevaConfig};
use crate::solver::solve_sparseva;
use crate::stats::derive_seed;
use crate::sysid::{fir_truth, random_stable_system, s_max, sigma_for, synthesize_fir, InputKind, SignalSpec};

const TAG_SYSTEM: u64 = 1;
const TAG_DATA: u64 = 2;
const TAG_CURVATURE: u64 = 3;

fn input_index(kind: InputKind) -> u64 {
    match kind {
        InputKind::White => 0,
        InputKind::Ar1Filtered => 1,
    }
}

/// Seed of the random system shared by all realizations of one input kind.
pub fn system_seed(root: u64, kind: InputKind) -> u64 {
    derive_seed(root, &[TAG_SYSTEM, input_index(kind)])
}

/// Seed of the input and noise sequences of one realization.
pub fn data_seed(root: u64, kind: InputKind, snr_db: f64, realization: usize) -> u64 {
    derive_seed(root, &[TAG_DATA, input_index(kind), snr_db.to_bits(), realization as u64])
}

/// Seed of the curvature ensemble for one regressor covariance.
pub fn curvature_seed(root: u64, kind: InputKind) -> u64 {
    derive_seed(root, &[TAG_CURVATURE, input_index(kind)])
}

/// One (cell, realization, `n_η`) outcome. Bound inputs are stored alongside the
/// bound so every row can be re-evaluated on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub input: InputKind,
    pub snr_db: f64,
    pub n_samples: usize,
    pub eps_rule: EpsilonRule,
    pub eps: f64,
    pub n: usize,
    pub n_eta: usize,
    pub alpha: f64,
    pub beta: f64,
    pub realization: usize,
    pub seed: u64,
    /// `ok`, or the kind of failure that stopped this realization.
    pub status: String,
    /// `‖θ̂ − θ*‖₂`.
    pub error_l2: f64,
    /// `√max(a1, a2)`.
    pub bound_l2: f64,
    pub a1: f64,
    pub a2: f64,
    pub prob: f64,
    pub lambda_eps: f64,
    pub kappa_alpha: f64,
    pub tail_l1: f64,
    pub sigma_e2: f64,
    pub s_max: f64,
    pub covered: bool,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// Bound inputs as stored in the record.
    pub fn bound_inputs(&self) -> SparseBoundInputs {
        SparseBoundInputs {
            n: self.n as u64,
            n_eta: self.n_eta as u64,
            n_samples: self.n_samples as u64,
            sigma_e2: self.sigma_e2,
            s_max: self.s_max,
            kappa_alpha: self.kappa_alpha,
            eps: self.eps,
            beta: self.beta,
            alpha: self.alpha,
            theta_tail_l1: self.tail_l1,
        }
    }
}

/// Short label for the failure column.
pub fn failure_kind(err: &Error) -> &'static str {
    match err {
        Error::Convergence { .. } => "convergence",
        Error::Rank(_) | Error::NotPositiveDefinite(_) => "rank",
        Error::UndefinedMultiplier(_) => "multiplier",
        Error::Domain(_) | Error::Dimension(_) => "domain",
        Error::InvalidConfig(_) => "config",
        Error::Parse { .. } | Error::Io(_) => "io",
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    /// Curvature estimates used, keyed by (input kind, N).
    pub curvature: BTreeMap<(InputKind, usize), CurvatureEstimate>,
}

/// Runs the study with a fresh in-memory curvature cache.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_with_cache(config, &mut CurvatureCache::new())
}

/// Runs the study, reusing and extending `cache`.
///
/// Realizations run in parallel; records come back in canonical order (cell,
/// realization, `n_η`) whatever the scheduling.
pub fn run_with_cache(config: &ExperimentConfig, cache: &mut CurvatureCache) -> Result<ExperimentOutput> {
    config.validate()?;
    let n = config.n;

    let mut curvature = BTreeMap::new();
    for &kind in &config.input_kinds {
        let sigma = sigma_for(kind, n);
        for &m in &config.n_samples {
            let est = cache.get_or_estimate(&sigma, m, config.alpha, config.curvature_trials, curvature_seed(config.root_seed, kind))?;
            curvature.insert((kind, m), est);
        }
    }

    // Work unit: one data set, shared by all ε-rules.
    let mut units = Vec::new();
    for &kind in &config.input_kinds {
        for &snr_db in &config.snr_db {
            for &n_samples in &config.n_samples {
                for realization in 0..config.realizations {
                    units.push((kind, snr_db, n_samples, realization));
                }
            }
        }
    }

    let truths: BTreeMap<InputKind, _> = config
        .input_kinds
        .iter()
        .map(|&kind| (kind, fir_truth(&random_stable_system(system_seed(config.root_seed, kind)), n)))
        .collect();

    let per_unit: Vec<Vec<ExperimentRecord>> = units
        .par_iter()
        .map(|&(kind, snr_db, n_samples, realization)| {
            let seed = data_seed(config.root_seed, kind, snr_db, realization);
            let spec = SignalSpec {
                input_kind: kind,
                n_rows: n_samples,
                snr_db,
                seed,
            };
            let ctx = UnitContext {
                config,
                spec,
                realization,
                kappa: &curvature[&(kind, n_samples)],
                sigma: sigma_for(kind, n),
            };
            ctx.records(&truths[&kind])
        })
        .collect();

    // Units are ordered input, SNR, N, realization; records must be ordered
    // input, SNR, N, rule, realization, n_η.
    let mut records: Vec<ExperimentRecord> = per_unit.into_iter().flatten().collect();
    let rule_rank = |r: &EpsilonRule| config.eps_rules.iter().position(|x| x == r).unwrap_or(usize::MAX);
    let kind_rank = |k: &InputKind| config.input_kinds.iter().position(|x| x == k).unwrap_or(usize::MAX);
    let snr_rank = |s: f64| config.snr_db.iter().position(|x| x.to_bits() == s.to_bits()).unwrap_or(usize::MAX);
    let n_rank = |m: usize| config.n_samples.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    let eta_rank = |e: usize| config.n_eta.iter().position(|&x| x == e).unwrap_or(usize::MAX);
    records.sort_by_key(|r| {
        (
            kind_rank(&r.input),
            snr_rank(r.snr_db),
            n_rank(r.n_samples),
            rule_rank(&r.eps_rule),
            r.realization,
            eta_rank(r.n_eta),
        )
    });
    Ok(ExperimentOutput { records, curvature })
}

struct UnitContext<'a> {
    config: &'a ExperimentConfig,
    spec: SignalSpec,
    realization: usize,
    kappa: &'a CurvatureEstimate,
    sigma: DMatrix<f64>,
}

impl UnitContext<'_> {
    fn records(&self, theta_star: &nalgebra::DVector<f64>) -> Vec<ExperimentRecord> {
        let data = synthesize_fir(theta_star, &self.spec);
        let mut out = Vec::new();
        for &rule in &self.config.eps_rules {
            let outcome = match &data {
                Ok(d) => solve_sparseva(&d.problem, &SparsevaConfig::with_rule(rule))
                    .map(|s| (d, s))
                    .map_err(|e| failure_kind(&e)),
                Err(e) => Err(failure_kind(e)),
            };
            for &n_eta in &self.config.n_eta {
                let mut rec = self.blank(rule, n_eta);
                match &outcome {
                    Ok((d, sol)) => {
                        rec.eps = sol.eps;
                        rec.sigma_e2 = d.truth.sigma_e2;
                        rec.lambda_eps = sol.lambda_eps;
                        rec.error_l2 = (&sol.theta_hat - theta_star).norm();
                        match self.evaluate_bound(&mut rec, theta_star) {
                            Ok(()) => rec.status = "ok".into(),
                            Err(e) => rec.status = failure_kind(&e).into(),
                        }
                    }
                    Err(kind) => rec.status = (*kind).into(),
                }
                out.push(rec);
            }
        }
        out
    }

    fn evaluate_bound(&self, rec: &mut ExperimentRecord, theta_star: &nalgebra::DVector<f64>) -> Result<()> {
        rec.tail_l1 = weak_sparsity_tail(theta_star, rec.n_eta)?;
        let bound = sparse_bound(&rec.bound_inputs())?;
        rec.a1 = bound.a1;
        rec.a2 = bound.a2;
        rec.prob = bound.prob;
        rec.bound_l2 = bound.bound.sqrt();
        rec.covered = rec.error_l2 <= rec.bound_l2;
        Ok(())
    }

    fn blank(&self, eps_rule: EpsilonRule, n_eta: usize) -> ExperimentRecord {
        ExperimentRecord {
            input: self.spec.input_kind,
            snr_db: self.spec.snr_db,
            n_samples: self.spec.n_rows,
            eps_rule,
            eps: f64::NAN,
            n: self.config.n,
            n_eta,
            alpha: self.config.alpha,
            beta: self.config.beta,
            realization: self.realization,
            seed: self.spec.seed,
            status: String::new(),
            error_l2: f64::NAN,
            bound_l2: f64::NAN,
            a1: f64::NAN,
            a2: f64::NAN,
            prob: f64::NAN,
            lambda_eps: f64::NAN,
            kappa_alpha: self.kappa.kappa_alpha,
            tail_l1: f64::NAN,
            sigma_e2: f64::NAN,
            s_max: s_max(&self.sigma),
            covered: false,
        }
    }
}
