use serde::{Deserialize, Serialize};

use crate::assembly::Budgets;
use crate::error::{Error, Result};
use crate::numcore::AdamConfig;
use crate::objectives::Reduction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Objectives {
    pub mmlm: bool,
    pub ip: bool,
    pub tep: bool,
    pub mcl: bool,
}

impl Default for Objectives {
    fn default() -> Self {
        Objectives { mmlm: true, ip: true, tep: true, mcl: true }
    }
}

impl Objectives {
    pub fn active(&self) -> Vec<&'static str> {
        [("mmlm", self.mmlm), ("ip", self.ip), ("tep", self.tep), ("mcl", self.mcl)]
            .into_iter()
            .filter(|(_, on)| *on)
            .map(|(n, _)| n)
            .collect()
    }

    /// Turns off an objective by name.
    pub fn disable(&mut self, name: &str) -> Result<()> {
        match name {
            "mmlm" => self.mmlm = false,
            "ip" => self.ip = false,
            "tep" => self.tep = false,
            "mcl" => self.mcl = false,
            other => {
                return Err(Error::config(
                    "train.objectives",
                    format!("unknown objective `{other}` (expected mmlm, ip, tep, mcl)"),
                ))
            }
        }
        Ok(())
    }
}

/// Positive-pair scheme for examples that have a comment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeMix {
    /// Comment-vs-code on even epochs, swapped triples on odd epochs.
    #[default]
    Alternate,
    NlVsPlast,
    TripleVsSwapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Weight of the `‖Θ‖²` penalty.
    pub l2_lambda: f64,
    pub seed: u64,
    pub objectives: Objectives,
    pub reduction: Reduction,
    pub scheme_mix: SchemeMix,
    pub tep_negatives_per_positive: usize,
    pub tep_full_pairs: bool,
    /// Global gradient-norm clip; 0 disables.
    pub max_grad_norm: f64,
    /// Linear warmup length in steps; 0 disables.
    pub warmup_steps: u64,
    /// Checkpoint every this many steps; 0 writes only the final one.
    pub checkpoint_every: u64,
    pub budgets: Budgets,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            batch_size: 8,
            steps: 200,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            l2_lambda: 1e-6,
            seed: 42,
            objectives: Objectives::default(),
            reduction: Reduction::Mean,
            scheme_mix: SchemeMix::Alternate,
            tep_negatives_per_positive: 1,
            tep_full_pairs: false,
            max_grad_norm: 1.0,
            warmup_steps: 0,
            checkpoint_every: 0,
            budgets: Budgets::default(),
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    /// Learning rate for the update made at `step` (0-based).
    pub fn learning_rate_at(&self, step: u64) -> f64 {
        if self.warmup_steps == 0 {
            self.learning_rate
        } else {
            self.learning_rate * ((step + 1) as f64 / self.warmup_steps as f64).min(1.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be positive"));
        }
        if self.objectives.mcl && self.batch_size < 2 {
            return Err(Error::config("train.batch_size", "must be at least 2 when mcl is enabled"));
        }
        if self.objectives.active().is_empty() {
            return Err(Error::config("train.objectives", "at least one objective must be enabled"));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(Error::config("train.l2_lambda", "must be non-negative"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("train.beta1", "must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("train.beta2", "must be in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("train.epsilon", "must be positive"));
        }
        if !(self.max_grad_norm >= 0.0) {
            return Err(Error::config("train.max_grad_norm", "must be non-negative"));
        }
        if self.tep_negatives_per_positive == 0 && !self.tep_full_pairs {
            return Err(Error::config("train.tep_negatives_per_positive", "must be positive"));
        }
        self.budgets.validate()
    }
}
