//! COCO-style average precision over similarity thresholds.

use serde::{Deserialize, Serialize};

use super::{instance_similarity, GpsConfig, InstanceRecord, Similarity};
use crate::error::{Error, Result};

/// Thresholds 0.50, 0.55, …, 0.95.
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

const RECALL_POINTS: usize = 101;

/// Similarities between every prediction and every ground truth of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSimilarities {
    /// Prediction confidences.
    pub scores: Vec<f64>,
    /// Global input position of each prediction; breaks score ties.
    pub order: Vec<usize>,
    /// `sims[p][g]`: similarity of prediction `p` to ground truth `g`.
    pub sims: Vec<Vec<f64>>,
    pub n_gt: usize,
}

impl ImageSimilarities {
    fn validate(&self) -> Result<()> {
        let n = self.scores.len();
        if self.order.len() != n || self.sims.len() != n {
            return Err(Error::DimensionMismatch(
                "scores, order and sims must have one entry per prediction".into(),
            ));
        }
        if self.sims.iter().any(|row| row.len() != self.n_gt) {
            return Err(Error::DimensionMismatch(
                "each similarity row needs one entry per ground truth".into(),
            ));
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("prediction scores"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAp {
    pub t: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    #[serde(rename = "AP")]
    pub ap: f64,
    pub per_threshold: Vec<ThresholdAp>,
    pub n_images: usize,
    pub n_instances: usize,
}

fn by_rank<'a>(
    scores: &'a [f64],
    order: &'a [usize],
) -> impl Fn(&usize, &usize) -> std::cmp::Ordering + 'a {
    move |&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(order[a].cmp(&order[b]))
    }
}

/// Greedy matching of one image at one threshold. Returns, for each
/// prediction, whether it was matched to a ground truth.
fn match_image(img: &ImageSimilarities, threshold: f64) -> Vec<bool> {
    let mut ranked: Vec<usize> = (0..img.scores.len()).collect();
    ranked.sort_by(by_rank(&img.scores, &img.order));

    let mut gt_taken = vec![false; img.n_gt];
    let mut tp = vec![false; img.scores.len()];
    for p in ranked {
        let mut best: Option<(usize, f64)> = None;
        for (g, &s) in img.sims[p].iter().enumerate() {
            if gt_taken[g] || !(s >= threshold) {
                continue;
            }
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((g, s));
            }
        }
        if let Some((g, _)) = best {
            gt_taken[g] = true;
            tp[p] = true;
        }
    }
    tp
}

/// 101-point interpolated precision from a ranked list of hit flags.
fn interpolated_ap(hits: &[bool], n_gt: usize) -> f64 {
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (i, &hit) in hits.iter().enumerate() {
        tp += hit as usize;
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut sum = 0.0;
    for k in 0..RECALL_POINTS {
        let r = k as f64 / (RECALL_POINTS - 1) as f64;
        let idx = recall.partition_point(|&x| x < r);
        if idx < precision.len() {
            sum += precision[idx];
        }
    }
    sum / RECALL_POINTS as f64
}

/// AP averaged over `thresholds`, from precomputed similarities.
pub fn average_precision(images: &[ImageSimilarities], thresholds: &[f64]) -> Result<ApReport> {
    for img in images {
        img.validate()?;
    }
    let n_gt: usize = images.iter().map(|i| i.n_gt).sum();
    if n_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    if thresholds.is_empty() {
        return Err(Error::invalid(
            "thresholds",
            "at least one threshold is required",
        ));
    }

    let scores: Vec<f64> = images
        .iter()
        .flat_map(|i| i.scores.iter().copied())
        .collect();
    let order: Vec<usize> = images
        .iter()
        .flat_map(|i| i.order.iter().copied())
        .collect();
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(by_rank(&scores, &order));

    let mut per_threshold = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let flags: Vec<bool> = images.iter().flat_map(|img| match_image(img, t)).collect();
        let hits: Vec<bool> = ranked.iter().map(|&i| flags[i]).collect();
        per_threshold.push(ThresholdAp {
            t,
            ap: interpolated_ap(&hits, n_gt),
        });
    }
    let ap = per_threshold.iter().map(|x| x.ap).sum::<f64>() / per_threshold.len() as f64;
    Ok(ApReport {
        ap,
        per_threshold,
        n_images: images.len(),
        n_instances: n_gt,
    })
}

/// Groups instances by image and computes the similarity matrix of every image.
///
/// Images are ordered by first appearance in `gts`; predictions for images
/// with no ground truth follow, each counting only as false positives.
pub fn image_similarities(
    gts: &[InstanceRecord],
    preds: &[InstanceRecord],
    cfg: &GpsConfig,
    similarity: Similarity,
) -> Result<(Vec<String>, Vec<ImageSimilarities>)> {
    let mut ids: Vec<String> = Vec::new();
    for r in gts.iter().chain(preds) {
        if !ids.contains(&r.image_id) {
            ids.push(r.image_id.clone());
        }
    }
    let mut images = Vec::with_capacity(ids.len());
    for id in &ids {
        let img_gts: Vec<&InstanceRecord> = gts.iter().filter(|g| &g.image_id == id).collect();
        let mut img = ImageSimilarities {
            scores: Vec::new(),
            order: Vec::new(),
            sims: Vec::new(),
            n_gt: img_gts.len(),
        };
        for (pos, p) in preds.iter().enumerate().filter(|(_, p)| &p.image_id == id) {
            let score = p
                .score
                .ok_or_else(|| Error::invalid("score", format!("prediction {pos} has no score")))?;
            let row = img_gts
                .iter()
                .map(|g| instance_similarity(g, p, cfg).map(|s| s.get(similarity)))
                .collect::<Result<Vec<f64>>>()?;
            img.scores.push(score);
            img.order.push(pos);
            img.sims.push(row);
        }
        images.push(img);
    }
    Ok((ids, images))
}

/// COCO-style AP of `preds` against `gts` over the configured thresholds.
pub fn ap_over_thresholds(
    gts: &[InstanceRecord],
    preds: &[InstanceRecord],
    cfg: &GpsConfig,
    similarity: Similarity,
) -> Result<ApReport> {
    if gts.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    let (ids, images) = image_similarities(gts, preds, cfg, similarity)?;
    let mut report = average_precision(&images, cfg.thresholds())?;
    report.n_images = ids
        .iter()
        .filter(|id| gts.iter().any(|g| &g.image_id == *id))
        .count();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(sim: f64) -> Vec<ImageSimilarities> {
        vec![ImageSimilarities {
            scores: vec![0.9],
            order: vec![0],
            sims: vec![vec![sim]],
            n_gt: 1,
        }]
    }

    #[test]
    fn thresholds_are_the_coco_grid() {
        let t = default_thresholds();
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], 0.5);
        assert_eq!(t[2], 0.6);
        assert_eq!(t[9], 0.95);
    }

    #[test]
    fn perfect_single_match() {
        let r = average_precision(&single(1.0), &default_thresholds()).unwrap();
        assert_eq!(r.ap, 1.0);
    }

    #[test]
    fn single_match_at_point_six() {
        let r = average_precision(&single(0.6), &default_thresholds()).unwrap();
        assert!((r.ap - 0.3).abs() < 1e-15);
        let matched: Vec<f64> = r
            .per_threshold
            .iter()
            .filter(|x| x.ap == 1.0)
            .map(|x| x.t)
            .collect();
        assert_eq!(matched, vec![0.5, 0.55, 0.6]);
    }

    #[test]
    fn no_predictions_gives_zero() {
        let img = ImageSimilarities {
            scores: vec![],
            order: vec![],
            sims: vec![],
            n_gt: 2,
        };
        assert_eq!(
            average_precision(&[img], &default_thresholds()).unwrap().ap,
            0.0
        );
    }

    #[test]
    fn no_ground_truth_is_an_error() {
        let img = ImageSimilarities {
            scores: vec![0.5],
            order: vec![0],
            sims: vec![vec![]],
            n_gt: 0,
        };
        assert!(matches!(
            average_precision(&[img], &default_thresholds()),
            Err(Error::NoGroundTruth)
        ));
    }

    #[test]
    fn greedy_takes_best_available_gt() {
        // The higher-scored prediction prefers g0, leaving p1 only g1 at 0.1.
        let img = ImageSimilarities {
            scores: vec![0.9, 0.8],
            order: vec![0, 1],
            sims: vec![vec![0.9, 0.8], vec![0.85, 0.1]],
            n_gt: 2,
        };
        let tp = match_image(&img, 0.5);
        assert_eq!(tp, vec![true, false]);
        let r = average_precision(&[img], &[0.5]).unwrap();
        // ranked hits [1, 0]: precision 1 up to recall 0.5, nothing beyond
        assert!((r.ap - 51.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn similarity_ties_go_to_first_gt() {
        let img = ImageSimilarities {
            scores: vec![0.9],
            order: vec![0],
            sims: vec![vec![0.7, 0.7]],
            n_gt: 2,
        };
        assert_eq!(match_image(&img, 0.5), vec![true]);
    }

    #[test]
    fn mismatched_rows_rejected() {
        let img = ImageSimilarities {
            scores: vec![0.9],
            order: vec![0],
            sims: vec![vec![0.7]],
            n_gt: 2,
        };
        assert!(average_precision(&[img], &[0.5]).is_err());
    }
}
