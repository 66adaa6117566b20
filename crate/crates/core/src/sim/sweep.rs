use serde::Serialize;

use super::{train, Outcome, SyntheticTask, TrainConfig, Weighting};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::weighting::StaticWeightTable;

/// One configuration compared in a sweep; everything not listed comes from the base config.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub loss: LossKind,
    pub weighting: Weighting,
    pub weights: Option<StaticWeightTable>,
}

impl Variant {
    pub fn new(name: impl Into<String>, loss: LossKind, weighting: Weighting) -> Self {
        Variant {
            name: name.into(),
            loss,
            weighting,
            weights: None,
        }
    }

    fn apply(&self, base: &TrainConfig, lr: f64) -> TrainConfig {
        TrainConfig {
            base_lr: lr,
            loss: self.loss,
            weighting: self.weighting,
            weights: self.weights.clone().unwrap_or_else(|| base.weights.clone()),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub variant: String,
    pub lr: f64,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub iterations: usize,
    pub final_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    /// Variant-major, learning rates ascending.
    pub rows: Vec<SweepRow>,
    /// Largest grid rate that completed, per variant, in variant order.
    pub lr_max: Vec<(String, Option<f64>)>,
}

impl SweepTable {
    pub fn lr_max_of(&self, variant: &str) -> Option<f64> {
        self.lr_max
            .iter()
            .find(|(n, _)| n == variant)
            .and_then(|&(_, lr)| lr)
    }
}

/// Trains every variant at every grid rate.
pub fn divergence_sweep(
    task: &SyntheticTask,
    base: &TrainConfig,
    lr_grid: &[f64],
    variants: &[Variant],
) -> Result<SweepTable> {
    if lr_grid.is_empty() {
        return Err(Error::invalid("lr_grid", "must not be empty"));
    }
    if lr_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("lr_grid", "must be strictly increasing"));
    }
    if variants.is_empty() {
        return Err(Error::invalid(
            "variants",
            "at least one variant is required",
        ));
    }
    for (i, v) in variants.iter().enumerate() {
        if variants[..i].iter().any(|o| o.name == v.name) {
            return Err(Error::invalid(
                "variants",
                format!("duplicate variant `{}`", v.name),
            ));
        }
    }

    let mut rows = Vec::with_capacity(variants.len() * lr_grid.len());
    let mut lr_max = Vec::with_capacity(variants.len());
    for v in variants {
        let mut best = None;
        for &lr in lr_grid {
            let result = train(task, &v.apply(base, lr))?;
            if result.outcome.is_completed() {
                best = Some(lr);
            }
            rows.push(SweepRow {
                variant: v.name.clone(),
                lr,
                outcome: result.outcome,
                iterations: result.records.len(),
                final_total: result.final_total().unwrap_or(f64::NAN),
            });
        }
        lr_max.push((v.name.clone(), best));
    }
    Ok(SweepTable { rows, lr_max })
}
