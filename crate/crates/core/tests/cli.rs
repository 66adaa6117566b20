mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{config, fixture};
use dense_points::harness::{RunManifest, TrainSummary};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dense-points"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn losscurve_dense_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dp.csv");
    let res = run(&[
        "losscurve",
        "--kind",
        "dense-point",
        "--omega",
        "0.5",
        "--x-min",
        "-3",
        "--x-max",
        "3",
        "--step",
        "1",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("x,loss,grad,printed_grad\n"));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[3][..2], [0.0, 0.0]);
    assert_eq!(rows[4][0], 1.0);
    assert!((rows[4][1] - 0.5 * 2f64.ln()).abs() < 1e-15);

    let manifest = RunManifest::read(&dir.path().join("dp.csv.manifest.json")).unwrap();
    assert_eq!(manifest.subcommand, "losscurve");
    assert_eq!(manifest.config["loss"]["omega"], 0.5);
}

#[test]
fn losscurve_smooth_l1_printed_column_is_magnitude() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sl1.csv");
    let res = run(&[
        "losscurve",
        "--kind",
        "smooth-l1",
        "--x-min",
        "-4.5",
        "--x-max",
        "4.5",
        "--step",
        "0.05",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for row in csv_rows(&out) {
        assert_eq!(row[2].abs(), row[3]);
    }
}

#[test]
fn losscurve_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let res = run(&["losscurve", "--step", "0", "--out", p(&out)]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("step"));
    assert_eq!(stderr(&res).trim().lines().count(), 1);

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let bad = blocker.join("sub/x.csv");
    let res = run(&["losscurve", "--out", p(&bad)]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains(p(&blocker)));

    let res = run(&["losscurve", "--omega", "0.75", "--out", p(&out)]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("omega"));
}

#[test]
fn gradcheck_exit_codes() {
    let res = run(&["gradcheck", "--kind", "dense-point", "--omega", "0.25"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("PASS"));

    let res = run(&[
        "gradcheck",
        "--kind",
        "printed-dense-point",
        "--omega",
        "0.25",
    ]);
    assert_eq!(code(&res), 3);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.starts_with("FAIL") && stdout.contains("worst relative error"));

    assert_eq!(code(&run(&["gradcheck", "--n-samples", "0"])), 1);
    assert_eq!(code(&run(&["gradcheck", "--tolerance", "0"])), 1);
    assert_eq!(code(&run(&["gradcheck", "--kind", "nope"])), 1);
}

#[test]
fn gradcheck_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let res = run(&[
        "gradcheck",
        "--kind",
        "smooth-l1",
        "--n-samples",
        "500",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&res), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["n_samples"], 500);
    assert!(dir.path().join("report.json.manifest.json").exists());
}

#[test]
fn train_zero_rate_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("flat.toml");
    fs::write(&cfg, "[task]\nn_samples = 6\nn_points = 10\n[train]\nbase_lr = 0.0\ntotal_iters = 40\nwarmup_iters = 4\n").unwrap();
    let res = run(&[
        "train",
        "--config",
        p(&cfg),
        "--out-dir",
        p(&dir.path().join("run")),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(dir.path().join("run/curve.csv")).unwrap();
    let totals: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(totals.len(), 40);
    assert!(totals.iter().all(|t| *t == totals[0]));

    let manifest = RunManifest::read(&dir.path().join("run/manifest.json")).unwrap();
    assert_eq!(
        manifest.config["train"]["decay_points"],
        serde_json::json!([30, 36])
    );
    assert_eq!(manifest.config["loss"]["omega"], 0.25);
    assert_eq!(manifest.seed, Some(0));
}

#[test]
fn train_rejects_bad_fields() {
    let dir = tempfile::tempdir().unwrap();
    for (body, field) in [
        ("[loss]\nomega = 2.0\n", "loss.omega"),
        ("[train]\nbase_lr = -1.0\n", "train.base_lr"),
        ("[task]\nbogus = 1\n", "bogus"),
        ("[train]\ntotal_iters = \"many\"\n", "total_iters"),
    ] {
        let cfg = dir.path().join("bad.toml");
        fs::write(&cfg, body).unwrap();
        let res = run(&[
            "train",
            "--config",
            p(&cfg),
            "--out-dir",
            p(&dir.path().join("o")),
        ]);
        assert_eq!(code(&res), 1, "{body}");
        assert!(stderr(&res).contains(field), "{field}: {}", stderr(&res));
        assert_eq!(stderr(&res).trim().lines().count(), 1, "{}", stderr(&res));
    }
    let res = run(&[
        "train",
        "--config",
        "/nonexistent/cfg.toml",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn bundled_crash_config_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "train",
        "--config",
        p(&config("crash_smoothl1.toml")),
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let summary: TrainSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert!(matches!(
        summary.outcome,
        dense_points::sim::Outcome::Diverged { .. }
    ));
    assert_eq!(summary.loss, "smooth_l1");
}

#[test]
fn sweep_tiny_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(
        &cfg,
        r#"lr_grid = [0.001]

[task]
n_samples = 6
n_points = 10

[train]
total_iters = 50
warmup_iters = 5

[[variant]]
name = "sl1"
loss = { kind = "smooth_l1" }

[[variant]]
name = "dp_bws"
loss = { kind = "dense_point", omega = 0.5 }
weighting = { mode = "bws", detach_weights = false }
"#,
    )
    .unwrap();
    let res = run(&["sweep", "--config", p(&cfg), "--out-dir", p(dir.path())]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.contains(",completed,")));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["lr_max"][1]["variant"], "dp_bws");
    assert_eq!(summary["lr_max"][1]["lr_max"], 0.001);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn sweep_rejects_duplicate_variants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(
        &cfg,
        "lr_grid = [1.0]\n[[variant]]\nname = \"a\"\n[[variant]]\nname = \"a\"\n",
    )
    .unwrap();
    let res = run(&["sweep", "--config", p(&cfg), "--out-dir", p(dir.path())]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("duplicate"));
}

fn eval(gt: &Path, pred: &Path, dir: &Path, extra: &[&str]) -> (Output, Option<serde_json::Value>) {
    let out = dir.join("report.json");
    let mut args = vec![
        "eval-gps",
        "--gt",
        p(gt),
        "--pred",
        p(pred),
        "--out",
        p(&out),
    ];
    args.extend_from_slice(extra);
    let res = run(&args);
    let report = fs::read_to_string(&out)
        .ok()
        .map(|t| serde_json::from_str(&t).unwrap());
    (res, report)
}

#[test]
fn eval_gps_fixture_and_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    let per = dir.path().join("per.csv");
    let (res, report) = eval(
        &fixture("gps_three_images_gt.jsonl"),
        &fixture("gps_three_images_pred.jsonl"),
        dir.path(),
        &["--similarity", "gpsm", "--per-instance", p(&per)],
    );
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let report = report.unwrap();
    let oracle: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture("gps_three_images_oracle.json")).unwrap())
            .unwrap();
    assert!(
        (report["AP"].as_f64().unwrap() - oracle["gpsm"]["AP"].as_f64().unwrap()).abs() < 1e-12
    );
    assert_eq!(report["per_threshold"].as_array().unwrap().len(), 10);
    let per = fs::read_to_string(per).unwrap();
    assert_eq!(per.lines().next(), Some("image_id,gps,iou,gpsm"));
    assert_eq!(per.lines().count(), 7);
}

#[test]
fn eval_gps_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let gt = fixture("gps_three_images_gt.jsonl");

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let (res, report) = eval(&gt, &empty, dir.path(), &[]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(report.unwrap()["AP"], 0.0);

    // ground truth resubmitted as predictions
    let perfect = dir.path().join("perfect.jsonl");
    let lines: Vec<String> = fs::read_to_string(&gt)
        .unwrap()
        .lines()
        .map(|l| format!("{}, \"score\": 0.5}}", l.trim_end().trim_end_matches('}')))
        .collect();
    fs::write(&perfect, lines.join("\n")).unwrap();
    for sim in ["gps", "gpsm"] {
        let (res, report) = eval(&gt, &perfect, dir.path(), &["--similarity", sim]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        assert_eq!(report.unwrap()["AP"], 1.0);
    }

    // an extra prediction on an image without ground truth is a false positive
    let extra = dir.path().join("extra.jsonl");
    let stray = r#"{"image_id": "ghost", "score": 0.99, "mask": {"w": 1, "h": 1, "rle": [0, 1]}, "points": [[1, 0.5, 0.5]]}"#;
    fs::write(&extra, format!("{stray}\n{}", lines.join("\n"))).unwrap();
    let (res, report) = eval(&gt, &extra, dir.path(), &["--thresholds", "0.5"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let ap = report.unwrap()["AP"].as_f64().unwrap();
    assert!(ap < 1.0 && ap > 0.5, "{ap}");

    let broken = dir.path().join("broken.jsonl");
    fs::write(
        &broken,
        format!("{}\n\n{{\"image_id\": 1, \"mask\": 3}}\n", lines[0]),
    )
    .unwrap();
    let (res, _) = eval(&gt, &broken, dir.path(), &[]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains(":3:"), "{}", stderr(&res));

    let (res, _) = eval(&gt, &perfect, dir.path(), &["--kappa", "0"]);
    assert_eq!(code(&res), 1);
}

#[test]
fn print_config_round_trips() {
    for which in ["train", "sweep"] {
        let res = run(&["print-config", which]);
        assert_eq!(code(&res), 0);
        let text = String::from_utf8(res.stdout).unwrap();
        assert!(text.contains("decay_points = [1538, 1846]"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, &text).unwrap();
        match which {
            "train" => dense_points::harness::TrainFile::from_toml_str(&text).map(|_| ()),
            _ => dense_points::harness::SweepFile::from_toml_str(&text).map(|_| ()),
        }
        .unwrap();
    }
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}
