use std::fmt;

use serde::{Deserialize, Serialize};

use crate::curvature::{DEFAULT_TRIALS, MIN_TRIALS};
use crate::error::{Error, Result};
use crate::problem::EpsilonRule;
use crate::sysid::InputKind;

/// Parameters of a Monte Carlo study. Every field has a default, so a config file
/// only needs the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input_kinds: Vec<InputKind>,
    pub snr_db: Vec<f64>,
    pub n_samples: Vec<usize>,
    pub eps_rules: Vec<EpsilonRule>,
    /// FIR order.
    pub n: usize,
    pub n_eta: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub realizations: usize,
    pub curvature_trials: usize,
    pub root_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input_kinds: InputKind::ALL.to_vec(),
            snr_db: vec![30.0, 20.0, 10.0],
            n_samples: vec![450, 1000, 5000],
            eps_rules: vec![EpsilonRule::Pec],
            n: 35,
            n_eta: vec![10, 15, 25],
            alpha: 0.02,
            beta: 0.001,
            realizations: 50,
            curvature_trials: DEFAULT_TRIALS,
            root_seed: 2013,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = [
            ("input_kinds", self.input_kinds.is_empty()),
            ("snr_db", self.snr_db.is_empty()),
            ("n_samples", self.n_samples.is_empty()),
            ("eps_rules", self.eps_rules.is_empty()),
            ("n_eta", self.n_eta.is_empty()),
        ];
        if let Some((key, _)) = nonempty.iter().find(|(_, empty)| *empty) {
            return Err(Error::config(format!("{key} must not be empty")));
        }
        if self.n == 0 {
            return Err(Error::config("n must be positive"));
        }
        if let Some(bad) = self.n_eta.iter().find(|&&k| k == 0 || k > self.n) {
            return Err(Error::config(format!("n_eta = {bad} outside [1, n = {}]", self.n)));
        }
        if let Some(bad) = self.n_samples.iter().find(|&&m| m <= self.n) {
            return Err(Error::config(format!("N = {bad} must exceed n = {}", self.n)));
        }
        if let Some(bad) = self.snr_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return Err(Error::config(format!("invalid SNR {bad}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config(format!("beta = {} outside (0, 1)", self.beta)));
        }
        if self.realizations == 0 {
            return Err(Error::config("realizations must be positive"));
        }
        if self.curvature_trials < MIN_TRIALS {
            return Err(Error::config(format!(
                "curvature_trials = {} below the minimum {MIN_TRIALS}",
                self.curvature_trials
            )));
        }
        for rule in &self.eps_rules {
            for &m in &self.n_samples {
                crate::problem::resolve_epsilon(*rule, self.n, m)?;
            }
        }
        Ok(())
    }

    /// The grid in canonical order: input, SNR, N, ε-rule.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &input_kind in &self.input_kinds {
            for &snr_db in &self.snr_db {
                for &n_samples in &self.n_samples {
                    for &eps_rule in &self.eps_rules {
                        cells.push(Cell {
                            input_kind,
                            snr_db,
                            n_samples,
                            eps_rule,
                        });
                    }
                }
            }
        }
        cells
    }
}

/// One point of the experiment grid; realizations and `n_η` vary within it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub input_kind: InputKind,
    pub snr_db: f64,
    pub n_samples: usize,
    pub eps_rule: EpsilonRule,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "input={} snr_db={} N={} eps_rule={}",
            self.input_kind, self.snr_db, self.n_samples, self.eps_rule
        )
    }
}
