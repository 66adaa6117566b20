use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{lr_at, SyntheticTask};
use crate::error::{Error, Result};
use crate::loss::{batch_loss, LossKind, Reduction, Residual};
use crate::weighting::{
    bws_backprop_scale, combine_bws, combine_static, BwsConfig, StaticWeightTable, WeightedTotal,
};

pub const CLS_TERM: &str = "rcnn_cls";
pub const U_TERM: &str = "u";
pub const V_TERM: &str = "v";
/// Loss terms of the simulated model, in record order.
pub const TERM_NAMES: [&str; 3] = [CLS_TERM, U_TERM, V_TERM];

/// How the three simulated loss terms are combined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weighting {
    Static { k: f64 },
    Bws(BwsConfig),
}

impl Weighting {
    pub fn label(&self) -> String {
        match self {
            Weighting::Static { k } => format!("static(k={k})"),
            Weighting::Bws(c) => format!(
                "bws(k={},{},{})",
                c.k,
                if c.detach_weights {
                    "detached"
                } else {
                    "attached"
                },
                if c.apply_static_first {
                    "static_first"
                } else {
                    "raw"
                }
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub warmup_iters: usize,
    pub warmup_factor: f64,
    pub total_iters: usize,
    /// Iterations at which the rate is multiplied by `decay_factor`.
    pub decay_points: Vec<usize>,
    pub decay_factor: f64,
    pub loss: LossKind,
    pub weighting: Weighting,
    /// Static weights and groups of the terms in [`TERM_NAMES`].
    pub weights: StaticWeightTable,
    /// Seeds the initial parameters.
    pub seed: u64,
    /// A run diverges once its total exceeds this multiple of the initial total.
    pub divergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let total_iters = 2000;
        TrainConfig {
            base_lr: 1.0,
            warmup_iters: 500,
            warmup_factor: 0.1,
            total_iters,
            decay_points: vec![total_iters * 100 / 130, total_iters * 120 / 130],
            decay_factor: 0.1,
            loss: LossKind::dense_point(0.25).expect("valid omega"),
            weighting: Weighting::Static { k: 1.0 },
            weights: StaticWeightTable::default(),
            seed: 0,
            divergence_threshold: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr.is_finite() && self.base_lr >= 0.0) {
            return Err(Error::invalid("base_lr", "must be finite and non-negative"));
        }
        if self.total_iters == 0 {
            return Err(Error::invalid("total_iters", "must be at least 1"));
        }
        if self.warmup_iters >= self.total_iters {
            return Err(Error::invalid(
                "warmup_iters",
                "must be smaller than total_iters",
            ));
        }
        if !(self.warmup_factor > 0.0 && self.warmup_factor <= 1.0) {
            return Err(Error::invalid("warmup_factor", "must lie in (0, 1]"));
        }
        if self.decay_points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "decay_points",
                "must be strictly increasing",
            ));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::invalid("decay_factor", "must lie in (0, 1]"));
        }
        if !(self.divergence_threshold > 1.0) {
            return Err(Error::invalid(
                "divergence_threshold",
                "must be greater than 1",
            ));
        }
        match self.weighting {
            Weighting::Static { k } if !(k.is_finite() && k > 0.0) => {
                return Err(Error::invalid("k", "must be finite and positive"));
            }
            Weighting::Bws(c) => c.validate()?,
            _ => {}
        }
        self.weights.validate()?;
        for name in TERM_NAMES {
            if self.weights.get(name).is_none() {
                return Err(Error::invalid(
                    "weights",
                    format!("the weight table has no entry for `{name}`"),
                ));
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, iter: usize) -> f64 {
        lr_at(iter, self)
    }
}

/// Parameters of the linear model. Both heads read the same features plus
/// a constant bias input (the last row).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    /// `(feature_dim + 1) × 2·n_points`, row-major.
    pub reg: Vec<f64>,
    /// `feature_dim + 1` logistic weights.
    pub cls: Vec<f64>,
}

impl Model {
    /// Small seeded N(0, 0.01²) regression weights; the classifier starts at zero.
    pub fn init(task: &SyntheticTask, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = task.feature_dim() + 1;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let reg = draw(rows * task.n_outputs());
        let cls = vec![0.0; rows];
        Model { reg, cls }
    }

    pub fn len(&self) -> usize {
        self.reg.len() + self.cls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat view: regression weights followed by classifier weights.
    pub fn get(&self, i: usize) -> f64 {
        if i < self.reg.len() {
            self.reg[i]
        } else {
            self.cls[i - self.reg.len()]
        }
    }

    pub fn set(&mut self, i: usize, value: f64) {
        if i < self.reg.len() {
            self.reg[i] = value;
        } else {
            let j = i - self.reg.len();
            self.cls[j] = value;
        }
    }

    fn axpy(&mut self, alpha: f64, dir: &Model) {
        for (p, g) in self.reg.iter_mut().zip(&dir.reg) {
            *p += alpha * g;
        }
        for (p, g) in self.cls.iter_mut().zip(&dir.cls) {
            *p += alpha * g;
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Loss values and per-term parameter gradients at one parameter vector.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    /// Values of [`TERM_NAMES`], in order.
    pub values: [f64; 3],
    pub combined: WeightedTotal,
    /// `∂ total / ∂ term` for each entry of [`TERM_NAMES`].
    pub multipliers: [f64; 3],
    pub gradient: Model,
}

/// The training objective of a task under one configuration.
pub struct Objective<'a> {
    task: &'a SyntheticTask,
    loss: LossKind,
    weighting: Weighting,
    weights: &'a StaticWeightTable,
}

impl<'a> Objective<'a> {
    pub fn new(task: &'a SyntheticTask, cfg: &'a TrainConfig) -> Self {
        Objective {
            task,
            loss: cfg.loss,
            weighting: cfg.weighting,
            weights: &cfg.weights,
        }
    }

    fn predictions(&self, model: &Model) -> (Vec<f64>, Vec<f64>) {
        let (n, d, cols) = (
            self.task.n_samples(),
            self.task.feature_dim(),
            self.task.n_outputs(),
        );
        let x = &self.task.features;
        let mut reg = vec![0.0; n * cols];
        let mut logits = vec![0.0; n];
        for i in 0..n {
            let out = &mut reg[i * cols..(i + 1) * cols];
            out.copy_from_slice(&model.reg[d * cols..(d + 1) * cols]);
            for k in 0..d {
                let xik = x[i * d + k];
                let row = &model.reg[k * cols..(k + 1) * cols];
                for (o, w) in out.iter_mut().zip(row) {
                    *o += xik * w;
                }
            }
            logits[i] = model.cls[d] + (0..d).map(|k| x[i * d + k] * model.cls[k]).sum::<f64>();
        }
        (reg, logits)
    }

    /// Evaluates the objective; `None` when the model output is no longer finite.
    pub fn evaluate(&self, model: &Model) -> Result<Option<ObjectiveEval>> {
        let (n, d, cols) = (
            self.task.n_samples(),
            self.task.feature_dim(),
            self.task.n_outputs(),
        );
        let (reg, logits) = self.predictions(model);
        if reg.iter().chain(&logits).any(|p| !p.is_finite()) {
            return Ok(None);
        }

        // u and v residuals, each n × n_points, sample-major
        let mut u_res = Vec::with_capacity(n * cols / 2);
        let mut v_res = Vec::with_capacity(n * cols / 2);
        for (c, (p, t)) in reg.iter().zip(&self.task.targets).enumerate() {
            let r = Residual::new(p - t)?;
            if c % 2 == 0 {
                u_res.push(r);
            } else {
                v_res.push(r);
            }
        }
        let u = batch_loss(&u_res, self.loss, Reduction::Mean)?;
        let v = batch_loss(&v_res, self.loss, Reduction::Mean)?;

        let mut cls_value = 0.0;
        let mut cls_grad = vec![0.0; n];
        for i in 0..n {
            let (z, y) = (logits[i], self.task.labels[i]);
            cls_value += softplus(z) - y * z;
            cls_grad[i] = (sigmoid(z) - y) / n as f64;
        }
        cls_value /= n as f64;

        let values = [cls_value, u.value, v.value];
        let terms = self.weights.terms(&[
            (CLS_TERM, values[0]),
            (U_TERM, values[1]),
            (V_TERM, values[2]),
        ])?;
        let (combined, scale) = match self.weighting {
            Weighting::Static { k } => {
                let c = combine_static(&terms, k)?;
                let s = c.per_term_weights.clone();
                (c, s)
            }
            Weighting::Bws(cfg) => (
                combine_bws(&terms, &cfg)?,
                bws_backprop_scale(&terms, &cfg)?,
            ),
        };
        let multipliers = [scale[0].1, scale[1].1, scale[2].1];

        // Back-propagate through the linear heads.
        let mut gradient = Model {
            reg: vec![0.0; model.reg.len()],
            cls: vec![0.0; model.cls.len()],
        };
        let m = cols / 2;
        let mut out_grad = vec![0.0; cols];
        for (i, &cg) in cls_grad.iter().enumerate() {
            for j in 0..m {
                out_grad[2 * j] = multipliers[1] * u.grads[i * m + j];
                out_grad[2 * j + 1] = multipliers[2] * v.grads[i * m + j];
            }
            for k in 0..=d {
                let xik = if k < d {
                    self.task.features[i * d + k]
                } else {
                    1.0
                };
                let row = &mut gradient.reg[k * cols..(k + 1) * cols];
                for (g, og) in row.iter_mut().zip(&out_grad) {
                    *g += xik * og;
                }
                gradient.cls[k] += xik * multipliers[0] * cg;
            }
        }

        Ok(Some(ObjectiveEval {
            values,
            combined,
            multipliers,
            gradient,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Diverged { iter: usize },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub lr: f64,
    /// Values of [`TERM_NAMES`].
    pub losses: [f64; 3],
    /// Effective weight of each term in the total.
    pub weights: [f64; 3],
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub records: Vec<IterRecord>,
    pub outcome: Outcome,
    pub model: Model,
}

impl TrainResult {
    pub fn initial_total(&self) -> Option<f64> {
        self.records.first().map(|r| r.total)
    }

    pub fn final_total(&self) -> Option<f64> {
        self.records.last().map(|r| r.total)
    }

    pub fn final_losses(&self) -> Option<[f64; 3]> {
        self.records.last().map(|r| r.losses)
    }
}

/// Full-batch gradient descent on `task`.
///
/// Stops with [`Outcome::Diverged`] at the first iteration whose model output
/// or total is non-finite, or whose total exceeds `divergence_threshold`
/// times the initial total.
pub fn train(task: &SyntheticTask, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let objective = Objective::new(task, cfg);
    let mut model = Model::init(task, cfg.seed);
    let mut records = Vec::with_capacity(cfg.total_iters);
    let mut initial = None;

    for iter in 0..cfg.total_iters {
        let Some(eval) = objective.evaluate(&model)? else {
            return Ok(TrainResult {
                records,
                outcome: Outcome::Diverged { iter },
                model,
            });
        };
        let total = eval.combined.total;
        let lr = cfg.lr_at(iter);
        let w = &eval.combined.per_term_weights;
        records.push(IterRecord {
            iter,
            lr,
            losses: eval.values,
            weights: [w[0].1, w[1].1, w[2].1],
            total,
        });

        let reference = *initial.get_or_insert(total);
        if !total.is_finite() || total > cfg.divergence_threshold * reference {
            return Ok(TrainResult {
                records,
                outcome: Outcome::Diverged { iter },
                model,
            });
        }
        model.axpy(-lr, &eval.gradient);
    }

    Ok(TrainResult {
        records,
        outcome: Outcome::Completed,
        model,
    })
}
