//! Threshold sweeps over the posterior simulator: success curves across a
//! grid of evidence counts, transition widths, and the width-scaling fit.

use anchorlab_core::sim::{
    calibrated_config, scaling_exponent, success_curve, transition_grid, transition_width,
    ScalingFit,
};
use anchorlab_core::util::mix_seed;

use crate::HarnessError;

/// Settings of one threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    /// Evidence counts to sweep, ascending.
    pub n_grid: Vec<u32>,
    /// Trials per grid point.
    pub trials: u32,
    /// Candidate patterns.
    pub m: usize,
    /// Posterior temperature.
    pub tau: f64,
    /// Resolution tolerance.
    pub delta: f64,
    /// Baseline noise scale.
    pub sigma0: f64,
    /// Success probability of a resolved trial.
    pub p_optimal: f64,
    /// Master seed.
    pub seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            n_grid: vec![25, 100, 400, 1600],
            trials: 2000,
            m: 8,
            tau: 1.0,
            delta: 0.5,
            sigma0: 1.0,
            p_optimal: 0.95,
            seed: 0,
        }
    }
}

/// One measured grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Evidence count.
    pub n: u32,
    /// Anchoring strength of the correct pattern.
    pub s_star: f64,
    /// Trials behind the rate.
    pub trials: u32,
    /// Fraction of successful trials.
    pub success_rate: f64,
    /// Transition width of this `n`'s whole curve.
    pub width: f64,
}

/// Full sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// Per-point rows, grouped by `n` in grid order.
    pub rows: Vec<SweepRow>,
    /// (n, width) pairs in grid order.
    pub widths: Vec<(u32, f64)>,
    /// Log-log width-vs-n fit; absent (flagged) when the grid has fewer
    /// than three points.
    pub scaling: Option<ScalingFit>,
}

/// Sweeps the calibrated transition across the configured evidence counts.
pub fn run_threshold_sweep(settings: &SweepSettings) -> Result<SweepReport, HarnessError> {
    if settings.n_grid.is_empty() {
        return Err(HarnessError::config("n_grid must not be empty"));
    }
    if settings.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::config("n_grid must be strictly ascending"));
    }
    if settings.trials < 100 {
        return Err(HarnessError::config(
            "trials must be at least 100 per grid point",
        ));
    }
    let mut rows = Vec::new();
    let mut widths = Vec::new();
    for &n in &settings.n_grid {
        let template = calibrated_config(
            settings.m,
            settings.tau,
            settings.delta,
            n,
            settings.sigma0,
            settings.p_optimal,
            mix_seed(&[settings.seed, n as u64]),
        )?;
        let grid = transition_grid(
            settings.m,
            settings.tau,
            settings.delta,
            settings.sigma0,
            n,
        )?;
        let curve = success_curve(&template, &grid, settings.trials)?;
        let width = transition_width(&curve, 0.1, 0.9)?;
        for point in &curve.points {
            rows.push(SweepRow {
                n,
                s_star: point.s_star,
                trials: point.trials,
                success_rate: point.success_rate,
                width,
            });
        }
        widths.push((n, width));
    }
    let scaling = if widths.len() >= 3 {
        let ns: Vec<u32> = widths.iter().map(|&(n, _)| n).collect();
        let ws: Vec<f64> = widths.iter().map(|&(_, w)| w).collect();
        Some(scaling_exponent(&ns, &ws)?)
    } else {
        None
    };
    Ok(SweepReport {
        rows,
        widths,
        scaling,
    })
}
