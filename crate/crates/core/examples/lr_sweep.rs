//! Largest stable learning rate per loss and weighting mode, on the bundled
//! sweep configuration. Takes around fifteen seconds in release mode.
//!
//! ```sh
//! cargo run --release --example lr_sweep
//! ```

use dense_points::harness::SweepFile;
use dense_points::sim::{divergence_sweep, Outcome, SyntheticTask};

fn main() -> dense_points::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/sweep.toml");
    let text = std::fs::read_to_string(path).expect("bundled sweep config");
    let (params, base, grid, variants) = SweepFile::from_toml_str(&text)?.build()?;
    let task = SyntheticTask::generate(&params)?;
    let table = divergence_sweep(&task, &base, &grid, &variants)?;

    print!("{:<14}", "lr");
    for v in &variants {
        print!("{:>14}", v.name);
    }
    println!();
    for (i, lr) in grid.iter().enumerate() {
        print!("{lr:<14.2e}");
        for j in 0..variants.len() {
            let cell = match table.rows[j * grid.len() + i].outcome {
                Outcome::Completed => "ok".to_string(),
                Outcome::Diverged { iter } => format!("crash@{iter}"),
            };
            print!("{cell:>14}");
        }
        println!();
    }
    println!();
    for (name, lr) in &table.lr_max {
        println!(
            "LRmax {name:<12} {}",
            lr.map_or("none".into(), |x| format!("{x:.2e}"))
        );
    }
    Ok(())
}
