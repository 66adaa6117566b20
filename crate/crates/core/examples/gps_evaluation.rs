//! GPS, masked GPS and AP for hand-built instances, then for the bundled
//! three-image fixture.
//!
//! ```sh
//! cargo run --example gps_evaluation
//! ```

use std::path::Path;

use dense_points::gps::io::{read_instances, RecordKind};
use dense_points::gps::{
    ap_over_thresholds, instance_similarity, GpsConfig, InstanceRecord, Mask, Similarity,
    SurfacePoint,
};

fn main() -> dense_points::Result<()> {
    let cfg = GpsConfig::default();

    let annotated = vec![
        SurfacePoint::new(2, 0.40, 0.55)?,
        SurfacePoint::new(2, 0.45, 0.60)?,
        SurfacePoint::new(14, 0.70, 0.20)?,
    ];
    let predicted = vec![
        SurfacePoint::new(2, 0.42, 0.58)?,
        SurfacePoint::new(2, 0.60, 0.70)?,
        SurfacePoint::new(13, 0.70, 0.20)?, // wrong part
    ];
    let gt_mask = Mask::from_cells(4, 4, &[(1, 1), (2, 1), (1, 2), (2, 2)])?;
    let pred_mask = Mask::from_cells(4, 4, &[(1, 1), (2, 1), (1, 2), (2, 2), (3, 2)])?;
    let gt = InstanceRecord::new("street", None, gt_mask, annotated)?;
    let pred = InstanceRecord::new("street", Some(0.9), pred_mask, predicted)?;

    let s = instance_similarity(&gt, &pred, &cfg)?;
    println!(
        "kappa {}: GPS {:.4}, IoU {:.4}, GPSm {:.4}",
        cfg.kappa(),
        s.gps,
        s.iou,
        s.gpsm
    );
    for which in [Similarity::Gps, Similarity::Gpsm] {
        let report = ap_over_thresholds(
            std::slice::from_ref(&gt),
            std::slice::from_ref(&pred),
            &cfg,
            which,
        )?;
        println!("{which:?} AP on one instance: {:.3}", report.ap);
    }

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let gts = read_instances(
        &dir.join("gps_three_images_gt.jsonl"),
        RecordKind::GroundTruth,
    )?;
    let preds = read_instances(
        &dir.join("gps_three_images_pred.jsonl"),
        RecordKind::Prediction,
    )?;
    let report = ap_over_thresholds(&gts, &preds, &cfg, Similarity::Gpsm)?;
    println!(
        "\nfixture: {} instances in {} images",
        report.n_instances, report.n_images
    );
    for t in &report.per_threshold {
        println!("  AP@{:.2} = {:.4}", t.t, t.ap);
    }
    println!("  AP     = {:.4}", report.ap);
    Ok(())
}
