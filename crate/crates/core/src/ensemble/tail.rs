//! Empirical deviation tails `Pr[|f − f̄| ≥ ε]` and a fit of the
//! exponential concentration model `c₁ exp(−c₂′ ε² χ / N²)`.

use rand::Rng;
use std::time::Instant;

use super::stats::{fit_line, quantile};
use super::{observable_samples, CampaignConfig, Control, EnsembleError, GridPoint};
use crate::haar::RngStream;

const BOOTSTRAP_TAG: u64 = 0x424f_4f54;
/// Bins with fewer tail events are left out of the fit.
pub const MIN_TAIL_EVENTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TailRow {
    pub point: GridPoint,
    pub samples: usize,
    pub f_mean: f64,
    /// Tail event counts, one per entry of the epsilon grid.
    pub counts: Vec<usize>,
    pub wall_seconds: f64,
}

impl TailRow {
    pub fn fraction(&self, k: usize) -> f64 {
        self.counts[k] as f64 / self.samples as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationFit {
    pub c1: f64,
    pub c2_prime: f64,
    pub rms_residual: f64,
    pub points_used: usize,
    /// 5th percentile of the bootstrap distribution of `c2_prime`.
    pub c2_lower: f64,
    pub bootstrap: usize,
}

impl ConcentrationFit {
    pub fn concentrating(&self) -> bool {
        self.c2_prime > 0.0 && self.c2_lower > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailResult {
    pub epsilons: Vec<f64>,
    pub rows: Vec<TailRow>,
    pub fit: Option<ConcentrationFit>,
}

fn tail_counts(fs: &[f64], epsilons: &[f64]) -> (f64, Vec<usize>) {
    let mean = fs.iter().sum::<f64>() / fs.len() as f64;
    let counts = epsilons.iter().map(|&e| fs.iter().filter(|&&f| (f - mean).abs() >= e).count()).collect();
    (mean, counts)
}

/// Least-squares fit of `ln(fraction)` against `ε²χ/N²` over all bins with
/// at least [`MIN_TAIL_EVENTS`] events; returns `(c1, c2′, rms, used)`.
fn fit_tail(
    points: &[GridPoint],
    counts: &[Vec<usize>],
    samples: usize,
    epsilons: &[f64],
) -> Option<(f64, f64, f64, usize)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (pt, cs) in points.iter().zip(counts) {
        for (&e, &cnt) in epsilons.iter().zip(cs) {
            if cnt >= MIN_TAIL_EVENTS {
                x.push(e * e * pt.chi as f64 / (pt.n_sites * pt.n_sites) as f64);
                y.push((cnt as f64 / samples as f64).ln());
            }
        }
    }
    let f = fit_line(&x, &y)?;
    Some((f.intercept.exp(), -f.slope, f.rms_residual, x.len()))
}

/// Tail table for every grid point plus the pooled fit with a bootstrap
/// lower confidence bound. Cancellation between grid points returns the
/// rows so far with no fit.
pub fn concentration_tail(cfg: &CampaignConfig, control: &Control) -> Result<TailResult, EnsembleError> {
    let points = cfg.validate()?;
    if cfg.epsilon_grid.is_empty() {
        return Err(EnsembleError::Config {
            key: "epsilon_grid".into(),
            value: "[]".into(),
            reason: "tail estimation needs at least one epsilon".into(),
        });
    }
    if cfg.samples < 100 {
        return Err(EnsembleError::Config {
            key: "samples".into(),
            value: cfg.samples.to_string(),
            reason: "tail estimation needs at least 100 samples".into(),
        });
    }
    let eps = &cfg.epsilon_grid;
    let mut rows = Vec::new();
    let mut all_fs = Vec::new();
    for &point in &points {
        if control.is_cancelled() {
            return Ok(TailResult { epsilons: eps.clone(), rows, fit: None });
        }
        let start = Instant::now();
        let fs = observable_samples(cfg, point)?;
        let (f_mean, counts) = tail_counts(&fs, eps);
        rows.push(TailRow { point, samples: cfg.samples, f_mean, counts, wall_seconds: start.elapsed().as_secs_f64() });
        all_fs.push(fs);
    }
    if rows.iter().all(|r| r.counts.iter().skip(1).all(|&c| c == 0)) {
        return Err(EnsembleError::InsufficientTail);
    }
    let counts: Vec<Vec<usize>> = rows.iter().map(|r| r.counts.clone()).collect();
    let (c1, c2_prime, rms_residual, points_used) =
        fit_tail(&points, &counts, cfg.samples, eps).ok_or(EnsembleError::InsufficientTail)?;

    let mut rng = RngStream::new(cfg.master_seed, 0).derive(BOOTSTRAP_TAG).rng();
    let n = cfg.samples;
    let mut boot = Vec::with_capacity(cfg.bootstrap);
    let mut resample = vec![0.0; n];
    for _ in 0..cfg.bootstrap {
        let counts: Vec<Vec<usize>> = all_fs
            .iter()
            .map(|fs| {
                for slot in resample.iter_mut() {
                    *slot = fs[rng.random_range(0..n)];
                }
                tail_counts(&resample, eps).1
            })
            .collect();
        // a resample without a usable fit counts against concentration
        boot.push(fit_tail(&points, &counts, n, eps).map_or(f64::NEG_INFINITY, |f| f.1));
    }
    let c2_lower = if boot.is_empty() { f64::NEG_INFINITY } else { quantile(&boot, 0.05) };
    Ok(TailResult {
        epsilons: eps.clone(),
        rows,
        fit: Some(ConcentrationFit { c1, c2_prime, rms_residual, points_used, c2_lower, bootstrap: cfg.bootstrap }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{ChiRuleKind, ObservableKind};

    fn cfg() -> CampaignConfig {
        CampaignConfig {
            chi_rule: ChiRuleKind::Fixed,
            chi: vec![3],
            n_grid: vec![4, 5],
            samples: 200,
            epsilon_grid: vec![0.0, 0.05, 0.1, 0.2, 0.4],
            bootstrap: 20,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epsilon_counts_everything_and_tails_nest() {
        let res = concentration_tail(&cfg(), &Control::new()).unwrap();
        for r in &res.rows {
            assert_eq!(r.fraction(0), 1.0);
            assert!(r.counts.windows(2).all(|w| w[0] >= w[1]));
        }
        assert!(res.fit.is_some());
    }

    #[test]
    fn degenerate_observable_has_no_tail() {
        let c = CampaignConfig { observable: ObservableKind::Identity, ..cfg() };
        assert!(matches!(concentration_tail(&c, &Control::new()), Err(EnsembleError::InsufficientTail)));
    }

    #[test]
    fn preconditions() {
        let c = CampaignConfig { epsilon_grid: vec![], ..cfg() };
        assert!(matches!(concentration_tail(&c, &Control::new()), Err(EnsembleError::Config { .. })));
        let c = CampaignConfig { samples: 50, ..cfg() };
        assert!(matches!(concentration_tail(&c, &Control::new()), Err(EnsembleError::Config { .. })));
    }
}
