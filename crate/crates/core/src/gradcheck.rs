//! Finite-difference verification of the scalar loss gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::{self, LossKind, LossParams, Residual};

/// Central difference of `f` at `x`, dividing by the representable step
/// `(x + h) − (x − h)` rather than `2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let (xp, xm) = (x + h, x - h);
    (f(xp) - f(xm)) / (xp - xm)
}

/// `|a − b| / max(|a|, |b|)`, zero when both are zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// The gradient expression being checked against differences of the loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientUnderTest {
    /// Exact analytic derivative of the given loss.
    Analytic(LossKind),
    /// The typeset dense point gradient with the sign of the residual
    /// restored, checked against the dense point loss. What remains is the
    /// missing factor of two inside the band and the jump at `|x| = 1`.
    PrintedDensePoint(LossParams),
}

impl GradientUnderTest {
    fn loss(&self, x: Residual) -> f64 {
        match self {
            GradientUnderTest::Analytic(kind) => kind.loss(x),
            GradientUnderTest::PrintedDensePoint(p) => loss::dp_loss(x, *p),
        }
    }

    fn grad(&self, x: Residual) -> f64 {
        match self {
            GradientUnderTest::Analytic(kind) => kind.grad(x),
            GradientUnderTest::PrintedDensePoint(p) => {
                x.value().signum() * loss::printed_dense_point_grad(x, *p)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            GradientUnderTest::Analytic(kind) => kind.label(),
            GradientUnderTest::PrintedDensePoint(p) => format!("printed_dp({})", p.omega()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub step: f64,
    pub range: (f64, f64),
    /// Samples closer than this to a kink at `|x| = 1` are redrawn.
    pub kink_exclusion: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            n_samples: 10_000,
            seed: 0,
            tolerance: 1e-6,
            step: 1e-6,
            range: (-10.0, 10.0),
            kink_exclusion: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub gradient: String,
    pub n_samples: usize,
    pub tolerance: f64,
    pub worst_relative_error: f64,
    pub worst_relative_x: f64,
    pub worst_absolute_error: f64,
    pub worst_absolute_x: f64,
    pub failures: usize,
    pub passed: bool,
}

impl GradcheckOptions {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", "must be positive"));
        }
        if !(self.step > 0.0) {
            return Err(Error::invalid("step", "must be positive"));
        }
        let (lo, hi) = self.range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("range", "must be a finite interval lo < hi"));
        }
        if !(self.kink_exclusion >= self.step) {
            return Err(Error::invalid(
                "kink_exclusion",
                "must be at least the difference step",
            ));
        }
        Ok(())
    }
}

/// Draws `n_samples` residuals uniformly from `range`, redrawing any that
/// fall inside the kink band, and compares the gradient under test with a
/// central difference of the loss.
pub fn check_gradient(
    under_test: GradientUnderTest,
    opts: &GradcheckOptions,
) -> Result<GradcheckReport> {
    opts.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (lo, hi) = opts.range;

    let mut report = GradcheckReport {
        gradient: under_test.label(),
        n_samples: opts.n_samples,
        tolerance: opts.tolerance,
        worst_relative_error: 0.0,
        worst_relative_x: f64::NAN,
        worst_absolute_error: 0.0,
        worst_absolute_x: f64::NAN,
        failures: 0,
        passed: true,
    };

    let mut drawn = 0;
    while drawn < opts.n_samples {
        let x: f64 = rng.random_range(lo..hi);
        if (x.abs() - 1.0).abs() < opts.kink_exclusion {
            continue;
        }
        drawn += 1;

        let analytic = under_test.grad(Residual::new(x)?);
        let numeric = central_difference(
            |t| under_test.loss(Residual::new(t).expect("finite sample")),
            x,
            opts.step,
        );
        let rel = relative_error(analytic, numeric);
        let abs = (analytic - numeric).abs();
        if rel > report.worst_relative_error || report.worst_relative_x.is_nan() {
            report.worst_relative_error = rel;
            report.worst_relative_x = x;
        }
        if abs > report.worst_absolute_error || report.worst_absolute_x.is_nan() {
            report.worst_absolute_error = abs;
            report.worst_absolute_x = x;
        }
        if !(rel < opts.tolerance) {
            report.failures += 1;
        }
    }
    report.passed = report.failures == 0;
    Ok(report)
}
