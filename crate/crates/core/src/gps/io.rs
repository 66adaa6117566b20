//! JSON-lines instance files and evaluation outputs.
//!
//! One instance per line:
//!
//! ```json
//! {"image_id": "img1", "mask": {"w": 4, "h": 3, "rle": [5, 2, 5]}, "points": [[1, 0.25, 0.5]]}
//! ```
//!
//! Predictions carry an extra `"score"` in `[0, 1]` and list their points in
//! the same order as the ground truth of the instance they describe.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    instance_similarity, GpsConfig, InstanceRecord, Mask, RleMask, Similarity, SurfacePoint,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ImageId {
    Int(u64),
    Str(String),
}

impl ImageId {
    fn into_string(self) -> String {
        match self {
            ImageId::Int(i) => i.to_string(),
            ImageId::Str(s) => s,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceLine {
    image_id: ImageId,
    #[serde(default)]
    score: Option<f64>,
    mask: RleMask,
    points: Vec<(u8, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    GroundTruth,
    Prediction,
}

fn parse_line(text: &str, kind: RecordKind) -> Result<InstanceRecord> {
    let line: InstanceLine =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let score = match (kind, line.score) {
        (RecordKind::Prediction, None) => {
            return Err(Error::invalid("score", "predictions need a score"))
        }
        (RecordKind::Prediction, s) => s,
        (RecordKind::GroundTruth, _) => None,
    };
    let points = line
        .points
        .into_iter()
        .map(|(part, u, v)| SurfacePoint::new(part, u, v))
        .collect::<Result<Vec<_>>>()?;
    if kind == RecordKind::GroundTruth && points.is_empty() {
        return Err(Error::invalid(
            "points",
            "ground-truth instances need at least one point",
        ));
    }
    let mask = Mask::from_rle(&line.mask)?;
    InstanceRecord::new(line.image_id.into_string(), score, mask, points)
}

/// Parses JSON-lines text; `origin` names the source in error messages.
pub fn parse_instances(text: &str, kind: RecordKind, origin: &str) -> Result<Vec<InstanceRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_line(line, kind).map_err(|e| Error::Schema {
            path: origin.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_instances(path: &Path, kind: RecordKind) -> Result<Vec<InstanceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instances(&text, kind, &path.display().to_string())
}

pub fn instance_to_json_line(rec: &InstanceRecord) -> String {
    let points: Vec<(u8, f64, f64)> = rec
        .points
        .iter()
        .map(|p| (p.part(), p.u(), p.v()))
        .collect();
    let mut value = serde_json::json!({
        "image_id": rec.image_id,
        "mask": rec.mask.to_rle(),
        "points": points,
    });
    if let Some(s) = rec.score {
        value["score"] = serde_json::json!(s);
    }
    value.to_string()
}

/// Per ground-truth instance: its best prediction in the same image under
/// the chosen similarity, or zeros when the image has no prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerInstanceRow {
    pub image_id: String,
    pub gps: f64,
    pub iou: f64,
    pub gpsm: f64,
}

pub fn per_instance_rows(
    gts: &[InstanceRecord],
    preds: &[InstanceRecord],
    cfg: &GpsConfig,
    similarity: Similarity,
) -> Result<Vec<PerInstanceRow>> {
    let mut rows = Vec::with_capacity(gts.len());
    for gt in gts {
        let mut best: Option<super::InstanceSimilarity> = None;
        for p in preds.iter().filter(|p| p.image_id == gt.image_id) {
            let s = instance_similarity(gt, p, cfg)?;
            if best.is_none_or(|b| s.get(similarity) > b.get(similarity)) {
                best = Some(s);
            }
        }
        let (gps, iou, gpsm) = best.map_or((0.0, 0.0, 0.0), |b| (b.gps, b.iou, b.gpsm));
        rows.push(PerInstanceRow {
            image_id: gt.image_id.clone(),
            gps,
            iou,
            gpsm,
        });
    }
    Ok(rows)
}

pub fn per_instance_csv(rows: &[PerInstanceRow]) -> String {
    let mut out = String::from("image_id,gps,iou,gpsm\n");
    for r in rows {
        let _ = writeln!(out, "{},{:?},{:?},{:?}", r.image_id, r.gps, r.iou, r.gpsm);
    }
    out
}
