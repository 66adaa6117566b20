//! Multi-task loss composition.
//!
//! Losses are split into a detection group and a dense-pose group. The two
//! composition rules are:
//!
//! - **static**: `Σ_det w_i·L_i + k·Σ_uv w_i·L_i` with hand-tuned weights `w_i`;
//! - **balanced (BWS)**: inside each group every loss is weighted by
//!   `exp(−L_i) / Σ_j exp(−L_j)`, so the group's larger losses count for
//!   less, and the groups are combined as `det + k·uv`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskGroup {
    Detection,
    DensePose,
}

impl TaskGroup {
    pub const ALL: [TaskGroup; 2] = [TaskGroup::Detection, TaskGroup::DensePose];

    pub fn name(self) -> &'static str {
        match self {
            TaskGroup::Detection => "detection",
            TaskGroup::DensePose => "dense_pose",
        }
    }
}

impl std::str::FromStr for TaskGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detection" | "det" => Ok(TaskGroup::Detection),
            "dense_pose" | "densepose" | "uv" => Ok(TaskGroup::DensePose),
            other => Err(Error::invalid(
                "group",
                format!("unknown task group `{other}`"),
            )),
        }
    }
}

/// One named loss value together with its group and static weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub name: String,
    pub value: f64,
    pub group: TaskGroup,
    pub static_weight: f64,
}

impl LossTerm {
    pub fn new(
        name: impl Into<String>,
        value: f64,
        group: TaskGroup,
        static_weight: f64,
    ) -> Result<Self> {
        let name = name.into();
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::invalid(
                format!("{name}.value"),
                format!("loss must be finite and non-negative, got {value}"),
            ));
        }
        if !(static_weight.is_finite() && static_weight >= 0.0) {
            return Err(Error::invalid(
                format!("{name}.static_weight"),
                format!("must be finite and non-negative, got {static_weight}"),
            ));
        }
        Ok(LossTerm {
            name,
            value,
            group,
            static_weight,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BwsConfig {
    pub k: f64,
    /// Treat the softmin weights as constants when backpropagating.
    pub detach_weights: bool,
    /// Multiply each raw loss by its static weight before computing softmin weights.
    pub apply_static_first: bool,
}

impl Default for BwsConfig {
    fn default() -> Self {
        BwsConfig {
            k: 1.0,
            detach_weights: true,
            apply_static_first: true,
        }
    }
}

impl BwsConfig {
    pub fn new(k: f64, detach_weights: bool, apply_static_first: bool) -> Result<Self> {
        let cfg = BwsConfig {
            k,
            detach_weights,
            apply_static_first,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        validate_k(self.k)
    }
}

fn validate_k(k: f64) -> Result<()> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid(
            "k",
            format!("must be finite and positive, got {k}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTotal {
    pub total: f64,
    /// Effective multiplier of each raw term value, in input order. The
    /// group factor `k` is folded in, so `Σ weight_i·value_i == total`.
    pub per_term_weights: Vec<(String, f64)>,
    pub group_subtotals: BTreeMap<TaskGroup, f64>,
    /// Groups that had no terms and therefore contributed zero.
    pub empty_groups: Vec<TaskGroup>,
}

impl WeightedTotal {
    pub fn weight(&self, name: &str) -> Option<f64> {
        self.per_term_weights
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, w)| w)
    }

    pub fn subtotal(&self, group: TaskGroup) -> f64 {
        self.group_subtotals.get(&group).copied().unwrap_or(0.0)
    }
}

/// Softmin weights `exp(−L_i) / Σ_j exp(−L_j)`.
pub fn bws_weights(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("loss values for balanced weights"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("loss values for balanced weights"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = values.iter().map(|&v| (min - v).exp()).collect();
    let norm: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / norm).collect())
}

fn group_factor(group: TaskGroup, k: f64) -> f64 {
    match group {
        TaskGroup::Detection => 1.0,
        TaskGroup::DensePose => k,
    }
}

fn check_terms(terms: &[LossTerm]) -> Result<()> {
    if terms.is_empty() {
        return Err(Error::EmptyInput("loss terms"));
    }
    for (i, t) in terms.iter().enumerate() {
        if terms[..i].iter().any(|o| o.name == t.name) {
            return Err(Error::invalid(
                "name",
                format!("duplicate loss term `{}`", t.name),
            ));
        }
    }
    Ok(())
}

/// Static composition `Σ_det w_i·L_i + k·Σ_uv w_i·L_i`.
pub fn combine_static(terms: &[LossTerm], k: f64) -> Result<WeightedTotal> {
    check_terms(terms)?;
    validate_k(k)?;

    let mut subtotals = BTreeMap::new();
    let mut per_term = Vec::with_capacity(terms.len());
    for t in terms {
        *subtotals.entry(t.group).or_insert(0.0) += t.static_weight * t.value;
        per_term.push((t.name.clone(), t.static_weight * group_factor(t.group, k)));
    }
    let empty_groups = TaskGroup::ALL
        .into_iter()
        .filter(|g| !subtotals.contains_key(g))
        .collect();
    for g in TaskGroup::ALL {
        subtotals.entry(g).or_insert(0.0);
    }
    let total = subtotals[&TaskGroup::Detection] + k * subtotals[&TaskGroup::DensePose];
    Ok(WeightedTotal {
        total,
        per_term_weights: per_term,
        group_subtotals: subtotals,
        empty_groups,
    })
}

/// Per-group balanced weighting; the returned vectors are aligned with `terms`.
struct GroupWeights {
    /// The (optionally statically pre-scaled) value each softmin sees.
    inputs: Vec<f64>,
    /// Softmin weight of each term within its own group.
    weights: Vec<f64>,
    /// `Σ inputs_i·weights_i` of the group each term belongs to.
    group_sum: Vec<f64>,
    subtotals: BTreeMap<TaskGroup, f64>,
    empty_groups: Vec<TaskGroup>,
}

fn group_weights(terms: &[LossTerm], cfg: &BwsConfig) -> Result<GroupWeights> {
    check_terms(terms)?;
    cfg.validate()?;

    let inputs: Vec<f64> = terms
        .iter()
        .map(|t| {
            if cfg.apply_static_first {
                t.static_weight * t.value
            } else {
                t.value
            }
        })
        .collect();
    let mut weights = vec![0.0; terms.len()];
    let mut group_sum = vec![0.0; terms.len()];
    let mut subtotals = BTreeMap::new();
    let mut empty_groups = Vec::new();

    for g in TaskGroup::ALL {
        let idx: Vec<usize> = (0..terms.len()).filter(|&i| terms[i].group == g).collect();
        if idx.is_empty() {
            empty_groups.push(g);
            subtotals.insert(g, 0.0);
            continue;
        }
        let vals: Vec<f64> = idx.iter().map(|&i| inputs[i]).collect();
        let w = bws_weights(&vals)?;
        let sum: f64 = vals.iter().zip(&w).map(|(v, w)| v * w).sum();
        for (j, &i) in idx.iter().enumerate() {
            weights[i] = w[j];
            group_sum[i] = sum;
        }
        subtotals.insert(g, sum);
    }
    Ok(GroupWeights {
        inputs,
        weights,
        group_sum,
        subtotals,
        empty_groups,
    })
}

/// Balanced composition: softmin weights computed within each group, then
/// `detection + k·dense_pose`. A group with no terms contributes zero and is
/// listed in [`WeightedTotal::empty_groups`].
pub fn combine_bws(terms: &[LossTerm], cfg: &BwsConfig) -> Result<WeightedTotal> {
    let gw = group_weights(terms, cfg)?;
    let per_term = terms
        .iter()
        .zip(&gw.weights)
        .map(|(t, &w)| {
            let pre = if cfg.apply_static_first {
                t.static_weight
            } else {
                1.0
            };
            (t.name.clone(), pre * w * group_factor(t.group, cfg.k))
        })
        .collect();
    let total = gw.subtotals[&TaskGroup::Detection] + cfg.k * gw.subtotals[&TaskGroup::DensePose];
    Ok(WeightedTotal {
        total,
        per_term_weights: per_term,
        group_subtotals: gw.subtotals,
        empty_groups: gw.empty_groups,
    })
}

/// `∂ total / ∂ L_i` for the balanced composition, per term name.
///
/// Detached: the softmin weight times the static pre-scale and group factor.
/// Otherwise the weights are differentiated too; for a group with inputs
/// `a_j` and weights `w_j`, `∂(Σ a_j w_j)/∂a_i = w_i·(1 − a_i + Σ a_j w_j)`.
pub fn bws_backprop_scale(terms: &[LossTerm], cfg: &BwsConfig) -> Result<Vec<(String, f64)>> {
    let gw = group_weights(terms, cfg)?;
    Ok(terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let pre = if cfg.apply_static_first {
                t.static_weight
            } else {
                1.0
            };
            let w = gw.weights[i];
            let d_input = if cfg.detach_weights {
                w
            } else {
                w * (1.0 - gw.inputs[i] + gw.group_sum[i])
            };
            (t.name.clone(), pre * d_input * group_factor(t.group, cfg.k))
        })
        .collect())
}

/// One row of a static weight table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub name: String,
    pub group: TaskGroup,
    pub weight: f64,
}

/// Named static loss weights, in a stable order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StaticWeightTable {
    pub entries: Vec<WeightEntry>,
}

impl Default for StaticWeightTable {
    /// DensePose R-CNN's hand-tuned initial weights: all detection terms at
    /// 1.0; mask 2.0, part index 0.3, U and V 0.1.
    fn default() -> Self {
        let det = TaskGroup::Detection;
        let uv = TaskGroup::DensePose;
        let rows = [
            ("rpn_cls", det, 1.0),
            ("rpn_reg", det, 1.0),
            ("rcnn_cls", det, 1.0),
            ("rcnn_reg", det, 1.0),
            ("ann", uv, 2.0),
            ("i", uv, 0.3),
            ("u", uv, 0.1),
            ("v", uv, 0.1),
        ];
        StaticWeightTable {
            entries: rows
                .into_iter()
                .map(|(name, group, weight)| WeightEntry {
                    name: name.to_string(),
                    group,
                    weight,
                })
                .collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightTableFile {
    term: Vec<WeightEntry>,
}

impl StaticWeightTable {
    pub fn get(&self, name: &str) -> Option<&WeightEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Returns a copy with the weight of `name` replaced.
    pub fn with_weight(mut self, name: &str, weight: f64) -> Result<Self> {
        match self.entries.iter_mut().find(|e| e.name == name) {
            Some(e) => e.weight = weight,
            None => return Err(Error::invalid(name, "no such term in the weight table")),
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::invalid(
                    format!("{}.weight", e.name),
                    format!("must be finite and non-negative, got {}", e.weight),
                ));
            }
            if self.entries[..i].iter().any(|o| o.name == e.name) {
                return Err(Error::invalid(
                    "name",
                    format!("duplicate term `{}`", e.name),
                ));
            }
        }
        Ok(())
    }

    /// Parses a table written as repeated `[[term]]` sections:
    ///
    /// ```toml
    /// [[term]]
    /// name = "u"
    /// group = "dense_pose"
    /// weight = 0.1
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: WeightTableFile =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let table = StaticWeightTable { entries: file.term };
        table.validate()?;
        Ok(table)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "[[term]]\nname = {:?}\ngroup = {:?}\nweight = {:?}\n\n",
                e.name,
                e.group.name(),
                e.weight
            ));
        }
        out
    }

    /// Builds loss terms from `(name, value)` pairs using this table's groups and weights.
    pub fn terms(&self, values: &[(&str, f64)]) -> Result<Vec<LossTerm>> {
        values
            .iter()
            .map(|&(name, value)| {
                let e = self
                    .get(name)
                    .ok_or_else(|| Error::invalid(name, "no such term in the weight table"))?;
                LossTerm::new(name, value, e.group, e.weight)
            })
            .collect()
    }
}
