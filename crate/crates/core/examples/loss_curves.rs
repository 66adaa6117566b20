//! Dense point loss against Smooth-L1 over a range of residuals.
//!
//! ```sh
//! cargo run --example loss_curves
//! ```

use dense_points::harness::loss_curve;
use dense_points::loss::LossKind;

fn main() -> dense_points::Result<()> {
    let kinds = [
        LossKind::SmoothL1,
        LossKind::dense_point(0.5)?,
        LossKind::dense_point(0.25)?,
    ];
    let curves = kinds
        .iter()
        .map(|&k| loss_curve(k, -4.0, 4.0, 0.5))
        .collect::<dense_points::Result<Vec<_>>>()?;

    print!("{:>6}", "x");
    for k in &kinds {
        print!("  {:>22}", format!("{k} loss / grad"));
    }
    println!();
    for i in 0..curves[0].len() {
        print!("{:>6.2}", curves[0][i].x);
        for c in &curves {
            print!("  {:>11.4} {:>10.4}", c[i].loss, c[i].grad);
        }
        println!();
    }

    // The typeset dense point derivative is half the true one inside the band
    // and jumps at |x| = 1.
    let dp = &curves[1];
    let below = dp.iter().find(|r| r.x == 0.5).unwrap();
    println!(
        "\nat x = 0.5: exact gradient {:.4}, typeset form {:.4}",
        below.grad, below.printed_grad
    );
    Ok(())
}
