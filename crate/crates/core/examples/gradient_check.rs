//! Finite-difference check of the analytic gradients, and of the typeset
//! dense point derivative, which does not pass.
//!
//! ```sh
//! cargo run --example gradient_check
//! ```

use dense_points::gradcheck::{check_gradient, GradcheckOptions, GradientUnderTest};
use dense_points::loss::{LossKind, LossParams};

fn main() -> dense_points::Result<()> {
    let opts = GradcheckOptions::default();
    let cases = [
        GradientUnderTest::Analytic(LossKind::SmoothL1),
        GradientUnderTest::Analytic(LossKind::dense_point(0.5)?),
        GradientUnderTest::Analytic(LossKind::dense_point(0.25)?),
        GradientUnderTest::PrintedDensePoint(LossParams::new(0.25)?),
    ];
    println!(
        "{} samples in [{}, {}], step {:e}, tolerance {:e}\n",
        opts.n_samples, opts.range.0, opts.range.1, opts.step, opts.tolerance
    );
    for case in cases {
        let r = check_gradient(case, &opts)?;
        println!(
            "{:<18} {}  worst relative {:.2e} (x = {:+.4}), worst absolute {:.2e} (x = {:+.4})",
            r.gradient,
            if r.passed { "pass" } else { "FAIL" },
            r.worst_relative_error,
            r.worst_relative_x,
            r.worst_absolute_error,
            r.worst_absolute_x,
        );
    }
    Ok(())
}
