use super::TrainConfig;

/// Learning rate at iteration `iter`: a linear ramp from
/// `warmup_factor·base_lr` to `base_lr` over the warmup iterations, times
/// `decay_factor` for every decay point already reached.
pub fn lr_at(iter: usize, cfg: &TrainConfig) -> f64 {
    let warmup = if iter < cfg.warmup_iters {
        let alpha = iter as f64 / cfg.warmup_iters as f64;
        cfg.warmup_factor * (1.0 - alpha) + alpha
    } else {
        1.0
    };
    let passed = cfg.decay_points.iter().filter(|&&p| iter >= p).count();
    cfg.base_lr * warmup * cfg.decay_factor.powi(passed as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrainConfig {
        TrainConfig {
            base_lr: 0.002,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_examples() {
        let c = cfg();
        assert!((lr_at(0, &c) - 0.0002).abs() < 1e-18);
        assert_eq!(lr_at(c.warmup_iters, &c), 0.002);
        assert!((lr_at(c.decay_points[0], &c) - 0.0002).abs() < 1e-18);
        assert!((lr_at(c.decay_points[0] + 10, &c) - 0.0002).abs() < 1e-18);
        assert!((lr_at(c.decay_points[1], &c) - 0.00002).abs() < 1e-18);
    }

    #[test]
    fn default_schedule_keeps_the_long_run_proportions() {
        let c = TrainConfig::default();
        assert_eq!(c.total_iters, 2000);
        assert_eq!(c.warmup_iters, 500);
        assert_eq!(c.warmup_factor, 0.1);
        assert_eq!(c.decay_points, vec![1538, 1846]);
        assert_eq!(c.decay_factor, 0.1);
    }

    #[test]
    fn warmup_is_monotone_then_non_increasing() {
        let c = cfg();
        let lrs: Vec<f64> = (0..c.total_iters).map(|i| lr_at(i, &c)).collect();
        for w in lrs[..=c.warmup_iters].windows(2) {
            assert!(w[1] >= w[0]);
        }
        for w in lrs[c.warmup_iters..].windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
