//! One simulated training run with each loss on the seed-42 task.
//!
//! ```sh
//! cargo run --release --example train_simulator
//! ```

use dense_points::loss::LossKind;
use dense_points::sim::{train, SyntheticTask, TaskParams, TrainConfig, TERM_NAMES};

fn main() -> dense_points::Result<()> {
    let params = TaskParams::default();
    let task = SyntheticTask::generate(&params)?;
    println!(
        "{} samples x {} points, {} displaced outlier points",
        params.n_samples,
        params.n_points,
        task.displaced.len()
    );

    for loss in [LossKind::SmoothL1, LossKind::dense_point(0.25)?] {
        let cfg = TrainConfig {
            base_lr: 1000.0,
            loss,
            ..TrainConfig::default()
        };
        let out = train(&task, &cfg)?;
        println!("\n{loss}: {:?}", out.outcome);
        println!(
            "{:>6} {:>10} {:>12} {:>12} {:>12}",
            "iter", "lr", TERM_NAMES[0], TERM_NAMES[1], "total"
        );
        for r in out.records.iter().step_by(250).chain(out.records.last()) {
            println!(
                "{:>6} {:>10.2} {:>12.3e} {:>12.5} {:>12.5}",
                r.iter, r.lr, r.losses[0], r.losses[1], r.total
            );
        }
    }
    Ok(())
}
