//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

/// `(f(x+h) − f(x−h)) / 2h`.
pub fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Dense point loss straight from its definition.
pub fn dp_ref(x: f64, omega: f64) -> f64 {
    if x.abs() < 1.0 {
        omega * (x * x).ln_1p()
    } else {
        omega * (x.abs() + 2f64.ln() - 1.0)
    }
}

pub fn smooth_l1_ref(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

/// Softmin computed without any stabilising shift; only for moderate inputs.
pub fn softmin_ref(values: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = values.iter().map(|v| (-v).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// One image for the brute-force evaluator.
#[derive(Debug, Clone)]
pub struct OracleImage {
    /// `(score, global input position)` per prediction.
    pub preds: Vec<(f64, usize)>,
    /// `sims[p][g]`.
    pub sims: Vec<Vec<f64>>,
    pub n_gt: usize,
}

/// Enumerates every partial one-to-one assignment of predictions to ground
/// truth (similarity at least `t`) and keeps the one that is lexicographically
/// best for predictions taken in rank order: matched beats unmatched, then
/// higher similarity, then lower ground-truth index.
fn exhaustive_match(img: &OracleImage, t: f64) -> Vec<bool> {
    let mut rank: Vec<usize> = (0..img.preds.len()).collect();
    rank.sort_by(|&a, &b| {
        img.preds[b]
            .0
            .partial_cmp(&img.preds[a].0)
            .unwrap()
            .then(img.preds[a].1.cmp(&img.preds[b].1))
    });

    type Key = Vec<(u8, f64, i64)>;
    let mut best: Option<(Key, Vec<Option<usize>>)> = None;
    let mut choice = vec![None; img.preds.len()];
    fn recurse(
        img: &OracleImage,
        t: f64,
        rank: &[usize],
        depth: usize,
        used: &mut Vec<bool>,
        choice: &mut Vec<Option<usize>>,
        best: &mut Option<(Key, Vec<Option<usize>>)>,
    ) {
        if depth == rank.len() {
            let key: Key = rank
                .iter()
                .map(|&p| match choice[p] {
                    Some(g) => (1, img.sims[p][g], -(g as i64)),
                    None => (0, 0.0, 0),
                })
                .collect();
            let better = match best {
                None => true,
                Some((k, _)) => key.partial_cmp(k) == Some(std::cmp::Ordering::Greater),
            };
            if better {
                *best = Some((key, choice.clone()));
            }
            return;
        }
        let p = rank[depth];
        choice[p] = None;
        recurse(img, t, rank, depth + 1, used, choice, best);
        for g in 0..img.n_gt {
            if !used[g] && img.sims[p][g] >= t {
                used[g] = true;
                choice[p] = Some(g);
                recurse(img, t, rank, depth + 1, used, choice, best);
                choice[p] = None;
                used[g] = false;
            }
        }
    }
    let mut used = vec![false; img.n_gt];
    recurse(img, t, &rank, 0, &mut used, &mut choice, &mut best);
    best.map(|(_, c)| c.iter().map(Option::is_some).collect())
        .unwrap_or_default()
}

/// AP averaged over `thresholds`, with interpolated precision at recall `r`
/// taken as the maximum precision over all ranks whose recall is at least `r`.
pub fn brute_force_ap(images: &[OracleImage], thresholds: &[f64]) -> f64 {
    let n_gt: usize = images.iter().map(|i| i.n_gt).sum();
    let mut all: Vec<(f64, usize, usize, usize)> = Vec::new();
    for (ii, img) in images.iter().enumerate() {
        for (p, &(score, pos)) in img.preds.iter().enumerate() {
            all.push((score, pos, ii, p));
        }
    }
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut sum_ap = 0.0;
    for &t in thresholds {
        let hits: Vec<Vec<bool>> = images.iter().map(|img| exhaustive_match(img, t)).collect();
        let mut pr = Vec::new();
        let mut tp = 0;
        for (k, &(_, _, ii, p)) in all.iter().enumerate() {
            tp += hits[ii][p] as usize;
            pr.push((tp as f64 / (k + 1) as f64, tp as f64 / n_gt as f64));
        }
        let mut s = 0.0;
        for j in 0..=100 {
            let r = j as f64 / 100.0;
            s += pr
                .iter()
                .filter(|&&(_, rec)| rec >= r)
                .map(|&(p, _)| p)
                .fold(0.0, f64::max);
        }
        sum_ap += s / 101.0;
    }
    sum_ap / thresholds.len() as f64
}
