//! TOML run configurations.
//!
//! Every section and field is optional in the file; missing values take the
//! defaults printed by `dense-points print-config`. A config is resolved into
//! a fully materialised copy before running, and that copy is what goes into
//! the run manifest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::sim::{TaskParams, TrainConfig, Variant, Weighting};
use crate::weighting::{BwsConfig, StaticWeightTable, WeightEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    DensePoint,
    SmoothL1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub kind: LossName,
    /// Ignored for Smooth-L1.
    pub omega: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection {
            kind: LossName::DensePoint,
            omega: 0.25,
        }
    }
}

impl LossSection {
    pub fn build(&self) -> Result<LossKind> {
        match self.kind {
            LossName::DensePoint => LossKind::dense_point(self.omega),
            LossName::SmoothL1 => Ok(LossKind::SmoothL1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMode {
    Static,
    Bws,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightingSection {
    pub mode: WeightingMode,
    pub k: f64,
    /// BWS only.
    pub detach_weights: bool,
    /// BWS only.
    pub apply_static_first: bool,
}

impl Default for WeightingSection {
    fn default() -> Self {
        let bws = BwsConfig::default();
        WeightingSection {
            mode: WeightingMode::Static,
            k: bws.k,
            detach_weights: bws.detach_weights,
            apply_static_first: bws.apply_static_first,
        }
    }
}

impl WeightingSection {
    pub fn build(&self) -> Result<Weighting> {
        match self.mode {
            WeightingMode::Static => {
                if !(self.k.is_finite() && self.k > 0.0) {
                    return Err(Error::invalid("weighting.k", "must be finite and positive"));
                }
                Ok(Weighting::Static { k: self.k })
            }
            WeightingMode::Bws => {
                BwsConfig::new(self.k, self.detach_weights, self.apply_static_first)
                    .map(Weighting::Bws)
                    .map_err(|_| Error::invalid("weighting.k", "must be finite and positive"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub base_lr: f64,
    pub warmup_iters: usize,
    pub warmup_factor: f64,
    pub total_iters: usize,
    /// Defaults to 100/130 and 120/130 of `total_iters`.
    pub decay_points: Option<Vec<usize>>,
    pub decay_factor: f64,
    pub seed: u64,
    pub divergence_threshold: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        ScheduleSection {
            base_lr: d.base_lr,
            warmup_iters: d.warmup_iters,
            warmup_factor: d.warmup_factor,
            total_iters: d.total_iters,
            decay_points: None,
            decay_factor: d.decay_factor,
            seed: d.seed,
            divergence_threshold: d.divergence_threshold,
        }
    }
}

impl ScheduleSection {
    fn resolve(&mut self) {
        if self.decay_points.is_none() {
            self.decay_points = Some(vec![
                self.total_iters * 100 / 130,
                self.total_iters * 120 / 130,
            ]);
        }
    }

    fn build(
        &self,
        loss: LossKind,
        weighting: Weighting,
        weights: StaticWeightTable,
    ) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            base_lr: self.base_lr,
            warmup_iters: self.warmup_iters,
            warmup_factor: self.warmup_factor,
            total_iters: self.total_iters,
            decay_points: self.decay_points.clone().unwrap_or_default(),
            decay_factor: self.decay_factor,
            loss,
            weighting,
            weights,
            seed: self.seed,
            divergence_threshold: self.divergence_threshold,
        };
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } if !name.contains('.') => {
                Error::InvalidParameter {
                    name: format!("train.{name}"),
                    reason,
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }
}

fn default_weights() -> Vec<WeightEntry> {
    StaticWeightTable::default().entries
}

fn task_error(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::InvalidParameter {
            name: format!("task.{name}"),
            reason,
        },
        other => other,
    }
}

/// `dense-points train` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainFile {
    pub task: TaskParams,
    pub train: ScheduleSection,
    pub loss: LossSection,
    pub weighting: WeightingSection,
    /// Static loss weights; the DensePose R-CNN table when omitted.
    pub weights: Vec<WeightEntry>,
}

impl Default for TrainFile {
    fn default() -> Self {
        let mut train = ScheduleSection {
            base_lr: 1000.0,
            ..ScheduleSection::default()
        };
        train.resolve();
        TrainFile {
            task: TaskParams::default(),
            train,
            loss: LossSection::default(),
            weighting: WeightingSection::default(),
            weights: default_weights(),
        }
    }
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().replace('\n', " ")))
}

impl TrainFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut file: TrainFile = parse_toml(text)?;
        file.train.resolve();
        file.build()?;
        Ok(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn build(&self) -> Result<(TaskParams, TrainConfig)> {
        self.task.validate().map_err(task_error)?;
        let weights = StaticWeightTable {
            entries: self.weights.clone(),
        };
        let loss = self.loss.build().map_err(|e| match e {
            Error::InvalidParameter { reason, .. } => Error::invalid("loss.omega", reason),
            other => other,
        })?;
        let cfg = self.train.build(loss, self.weighting.build()?, weights)?;
        Ok((self.task.clone(), cfg))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSection {
    pub name: String,
    #[serde(default)]
    pub loss: LossSection,
    #[serde(default)]
    pub weighting: WeightingSection,
}

impl VariantSection {
    pub fn build(&self) -> Result<Variant> {
        let field = |e: Error| match e {
            Error::InvalidParameter { name, reason } => Error::InvalidParameter {
                name: format!("variant `{}`: {name}", self.name),
                reason,
            },
            other => other,
        };
        Ok(Variant::new(
            self.name.clone(),
            self.loss.build().map_err(field)?,
            self.weighting.build().map_err(field)?,
        ))
    }
}

/// `dense-points sweep` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepFile {
    pub task: TaskParams,
    /// Schedule shared by every cell; `base_lr` is replaced by each grid rate.
    pub train: ScheduleSection,
    pub lr_grid: Vec<f64>,
    pub weights: Vec<WeightEntry>,
    pub variant: Vec<VariantSection>,
}

impl Default for SweepFile {
    /// The canonical comparison: seed-42 task with 196 points and 5% outliers,
    /// eight doubling rates, three losses under static weights plus DP under BWS.
    fn default() -> Self {
        let mut train = ScheduleSection::default();
        train.resolve();
        let variant = |name: &str, kind, omega, mode| VariantSection {
            name: name.to_string(),
            loss: LossSection { kind, omega },
            weighting: WeightingSection {
                mode,
                ..WeightingSection::default()
            },
        };
        SweepFile {
            task: TaskParams::default(),
            train,
            lr_grid: (0..8).map(|i| 2e9 * f64::from(1u32 << i)).collect(),
            weights: default_weights(),
            variant: vec![
                variant("smooth_l1", LossName::SmoothL1, 0.25, WeightingMode::Static),
                variant("dp_0.5", LossName::DensePoint, 0.5, WeightingMode::Static),
                variant("dp_0.25", LossName::DensePoint, 0.25, WeightingMode::Static),
                variant(
                    "dp_0.25_bws",
                    LossName::DensePoint,
                    0.25,
                    WeightingMode::Bws,
                ),
            ],
        }
    }
}

impl SweepFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut file: SweepFile = parse_toml(text)?;
        file.train.resolve();
        file.build()?;
        Ok(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn build(&self) -> Result<(TaskParams, TrainConfig, Vec<f64>, Vec<Variant>)> {
        self.task.validate().map_err(task_error)?;
        if self.lr_grid.is_empty() {
            return Err(Error::invalid("lr_grid", "must not be empty"));
        }
        if self
            .lr_grid
            .iter()
            .any(|lr| !(lr.is_finite() && *lr >= 0.0))
        {
            return Err(Error::invalid(
                "lr_grid",
                "rates must be finite and non-negative",
            ));
        }
        if self.lr_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("lr_grid", "must be strictly increasing"));
        }
        if self.variant.is_empty() {
            return Err(Error::invalid(
                "variant",
                "at least one [[variant]] is required",
            ));
        }
        let weights = StaticWeightTable {
            entries: self.weights.clone(),
        };
        let base = self
            .train
            .build(LossKind::SmoothL1, Weighting::Static { k: 1.0 }, weights)?;
        let variants = self
            .variant
            .iter()
            .map(VariantSection::build)
            .collect::<Result<Vec<_>>>()?;
        Ok((self.task.clone(), base, self.lr_grid.clone(), variants))
    }
}
