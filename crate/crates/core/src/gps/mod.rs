//! Geodesic point similarity (GPS) and the metrics built on it.
//!
//! For one person instance with annotated surface points `P`,
//!
//! ```text
//! GPS   = 1/|P| · Σ_p exp(−g(p, p̂)² / (2κ²))
//! GPS^m = sqrt(GPS · IoU(M, M̂))
//! ```
//!
//! where `g` is a distance between the annotated and predicted surface point
//! and `M`, `M̂` are the ground-truth and predicted foreground masks.
//! True geodesic distances need the body mesh; here `g` is pluggable through
//! [`SurfaceDistance`] and defaults to a per-part UV distance.

mod ap;
pub mod io;
mod mask;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ap::{
    ap_over_thresholds, average_precision, default_thresholds, ApReport, ImageSimilarities,
    ThresholdAp,
};
pub use mask::{mask_iou, Mask, MaskIou, RleMask};

pub const NUM_PARTS: u8 = 24;
pub const MAX_POINTS: usize = 196;
/// Normalisation constant used by the original DensePose evaluation tooling.
pub const DEFAULT_KAPPA: f64 = 0.255;

/// An annotated or predicted point on the body surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    part: u8,
    u: f64,
    v: f64,
}

impl SurfacePoint {
    pub fn new(part: u8, u: f64, v: f64) -> Result<Self> {
        if !(1..=NUM_PARTS).contains(&part) {
            return Err(Error::invalid(
                "part",
                format!("must be in 1..=24, got {part}"),
            ));
        }
        for (name, c) in [("u", u), ("v", v)] {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::invalid(name, format!("must be in (0, 1], got {c}")));
            }
        }
        Ok(SurfacePoint { part, u, v })
    }

    pub fn part(&self) -> u8 {
        self.part
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }
}

/// One person instance, either annotated or predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub image_id: String,
    /// Confidence; `None` for ground truth.
    pub score: Option<f64>,
    pub mask: Mask,
    /// Predictions list their points in the ground truth's point order.
    pub points: Vec<SurfacePoint>,
}

impl InstanceRecord {
    pub fn new(
        image_id: impl Into<String>,
        score: Option<f64>,
        mask: Mask,
        points: Vec<SurfacePoint>,
    ) -> Result<Self> {
        if let Some(s) = score {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid(
                    "score",
                    format!("must be in [0, 1], got {s}"),
                ));
            }
        }
        if points.len() > MAX_POINTS {
            return Err(Error::invalid(
                "points",
                format!(
                    "at most {MAX_POINTS} points per instance, got {}",
                    points.len()
                ),
            ));
        }
        Ok(InstanceRecord {
            image_id: image_id.into(),
            score,
            mask,
            points,
        })
    }
}

/// Distance between an annotated and a predicted surface point.
pub trait SurfaceDistance: Send + Sync {
    fn distance(&self, a: &SurfacePoint, b: &SurfacePoint) -> f64;
}

/// Euclidean distance in `(u, v)` within a part, a fixed `d_max` across parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvDistance {
    pub d_max: f64,
}

impl UvDistance {
    pub fn new(d_max: f64) -> Result<Self> {
        if !(d_max > 0.0) {
            return Err(Error::invalid("d_max", "must be positive"));
        }
        Ok(UvDistance { d_max })
    }
}

impl SurfaceDistance for UvDistance {
    fn distance(&self, a: &SurfacePoint, b: &SurfacePoint) -> f64 {
        point_distance_uv(a, b, self.d_max)
    }
}

pub fn point_distance_uv(a: &SurfacePoint, b: &SurfacePoint, d_max: f64) -> f64 {
    if a.part != b.part {
        return d_max;
    }
    (a.u - b.u).hypot(a.v - b.v)
}

/// Which per-instance similarity drives AP matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Gps,
    Gpsm,
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gps" => Ok(Similarity::Gps),
            "gpsm" => Ok(Similarity::Gpsm),
            other => Err(Error::invalid(
                "similarity",
                format!("expected gps or gpsm, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone)]
pub struct GpsConfig {
    kappa: f64,
    distance: Arc<dyn SurfaceDistance>,
    thresholds: Vec<f64>,
}

impl fmt::Debug for GpsConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GpsConfig")
            .field("kappa", &self.kappa)
            .field("thresholds", &self.thresholds)
            .finish_non_exhaustive()
    }
}

impl Default for GpsConfig {
    fn default() -> Self {
        GpsConfig::with_kappa(DEFAULT_KAPPA).expect("default kappa is valid")
    }
}

impl GpsConfig {
    pub fn new(
        kappa: f64,
        distance: Arc<dyn SurfaceDistance>,
        thresholds: Vec<f64>,
    ) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::invalid(
                "kappa",
                format!("must be positive, got {kappa}"),
            ));
        }
        if thresholds.is_empty() {
            return Err(Error::invalid(
                "thresholds",
                "at least one threshold is required",
            ));
        }
        if thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::invalid(
                "thresholds",
                "each threshold must lie in (0, 1)",
            ));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("thresholds", "must be strictly increasing"));
        }
        Ok(GpsConfig {
            kappa,
            distance,
            thresholds,
        })
    }

    /// UV distance with `d_max = 10κ` and thresholds 0.50, 0.55, …, 0.95.
    pub fn with_kappa(kappa: f64) -> Result<Self> {
        let d_max = 10.0 * kappa;
        GpsConfig::new(
            kappa,
            Arc::new(UvDistance::new(d_max)?),
            default_thresholds(),
        )
    }

    pub fn with_thresholds(self, thresholds: Vec<f64>) -> Result<Self> {
        GpsConfig::new(self.kappa, self.distance, thresholds)
    }

    pub fn with_distance(self, distance: Arc<dyn SurfaceDistance>) -> Result<Self> {
        GpsConfig::new(self.kappa, distance, self.thresholds)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn distance(&self) -> &dyn SurfaceDistance {
        self.distance.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsScore {
    pub value: f64,
    /// Ground-truth points with no corresponding predicted point.
    pub missing_points: usize,
}

/// GPS of `pred` against `gt`, pairing points by index.
pub fn gps_instance(
    gt: &InstanceRecord,
    pred: &InstanceRecord,
    cfg: &GpsConfig,
) -> Result<GpsScore> {
    if gt.points.is_empty() {
        return Err(Error::EmptyInput("ground-truth points"));
    }
    let denom = 2.0 * cfg.kappa * cfg.kappa;
    let mut sum = 0.0;
    for (p, q) in gt.points.iter().zip(&pred.points) {
        let g = cfg.distance.distance(p, q);
        sum += (-(g * g) / denom).exp();
    }
    let missing = gt.points.len().saturating_sub(pred.points.len());
    Ok(GpsScore {
        value: sum / gt.points.len() as f64,
        missing_points: missing,
    })
}

pub fn gps_masked(gps: f64, iou: f64) -> Result<f64> {
    for (name, x) in [("gps", gps), ("iou", iou)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(name, format!("must be in [0, 1], got {x}")));
        }
    }
    Ok((gps * iou).sqrt())
}

/// GPS, mask IoU and GPS^m of one prediction against one ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSimilarity {
    pub gps: f64,
    pub iou: f64,
    pub gpsm: f64,
    pub missing_points: usize,
    pub empty_union: bool,
}

impl InstanceSimilarity {
    pub fn get(&self, which: Similarity) -> f64 {
        match which {
            Similarity::Gps => self.gps,
            Similarity::Gpsm => self.gpsm,
        }
    }
}

pub fn instance_similarity(
    gt: &InstanceRecord,
    pred: &InstanceRecord,
    cfg: &GpsConfig,
) -> Result<InstanceSimilarity> {
    let gps = gps_instance(gt, pred, cfg)?;
    let iou = mask_iou(&gt.mask, &pred.mask)?;
    Ok(InstanceSimilarity {
        gps: gps.value,
        iou: iou.iou,
        gpsm: gps_masked(gps.value, iou.iou)?,
        missing_points: gps.missing_points,
        empty_union: iou.empty_union,
    })
}
