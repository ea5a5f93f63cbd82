//! Psychometric fits of accuracy against shot count.
//!
//! Accuracy curves rise as a logistic in `ln k`:
//! `acc(k) = floor + (asymptote - floor) * sigmoid(g * ln k - a)`,
//! fitted by weighted least squares (coarse grid, then Nelder-Mead).
//! From the fit come the transition landmarks `k50` and `k90`, the phase
//! width `k90 - k10`, percentile bootstrap intervals over per-item scores,
//! Cohen's d, and cross-base interference matrices.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::anchor::success_probability;
use crate::util::mix_seed;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Curves flatter than this range are degenerate.
const FLAT_RANGE: f64 = 1e-12;

/// Nelder-Mead stops when the simplex diameter falls below this.
const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Nelder-Mead iteration budget before reporting non-convergence.
const MAX_ITERATIONS: u32 = 10_000;

/// Errors from curve fitting and the derived statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    /// A point had accuracy outside `[0, 1]`, zero items, or unsorted `k`.
    InvalidPoint,
    /// Fitting needs at least four points at `k >= 1`.
    TooFewPoints {
        /// Usable points found.
        have: usize,
    },
    /// The curve is flat or non-increasing in `ln k`; the rising logistic
    /// does not apply.
    DegenerateCurve,
    /// The optimizer exhausted its iteration budget.
    NonConvergence,
    /// The floor must lie in `[0, 1)`.
    InvalidFloor,
    /// Bootstrap needs at least 200 resamples.
    TooFewResamples {
        /// Requested resample count.
        have: u32,
    },
    /// More than 20% of bootstrap resamples failed to fit.
    TooManyResampleFailures {
        /// Failed resample count.
        failures: u32,
        /// Total resamples attempted.
        resamples: u32,
    },
    /// A bootstrap cell had no item values, or a value outside `[0, 1]`.
    InvalidCell,
    /// Cohen's d needs at least two samples per group.
    TooFewSamples,
    /// Cohen's d is undefined when both groups are constant.
    ZeroPooledVariance,
    /// The interference grid lacks a (trained, evaluated) pair.
    MissingCell {
        /// Trained base of the missing pair.
        trained: u32,
        /// Evaluated base of the missing pair.
        evaluated: u32,
    },
    /// The interference grid saw a (trained, evaluated) pair twice.
    DuplicateCell {
        /// Trained base of the duplicated pair.
        trained: u32,
        /// Evaluated base of the duplicated pair.
        evaluated: u32,
    },
}

impl core::fmt::Display for FitError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FitError::InvalidPoint => write!(f, "invalid curve point"),
            FitError::TooFewPoints { have } => {
                write!(f, "need at least 4 points at k >= 1, have {have}")
            }
            FitError::DegenerateCurve => write!(f, "curve is flat or non-increasing"),
            FitError::NonConvergence => write!(f, "optimizer failed to converge"),
            FitError::InvalidFloor => write!(f, "floor must lie in [0, 1)"),
            FitError::TooFewResamples { have } => {
                write!(f, "need at least 200 bootstrap resamples, requested {have}")
            }
            FitError::TooManyResampleFailures {
                failures,
                resamples,
            } => write!(f, "{failures} of {resamples} bootstrap resamples failed"),
            FitError::InvalidCell => write!(f, "bootstrap cell empty or out of range"),
            FitError::TooFewSamples => write!(f, "need at least two samples per group"),
            FitError::ZeroPooledVariance => write!(f, "pooled variance is zero"),
            FitError::MissingCell { trained, evaluated } => {
                write!(f, "missing interference cell ({trained}, {evaluated})")
            }
            FitError::DuplicateCell { trained, evaluated } => {
                write!(f, "duplicate interference cell ({trained}, {evaluated})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FitError {}

/// One measured cell: accuracy over `n_items` items at shot count `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotPoint {
    /// Shot count.
    pub k: u32,
    /// Mean accuracy in `[0, 1]`.
    pub accuracy: f64,
    /// Items behind the mean; weights the fit.
    pub n_items: u32,
}

/// An accuracy-versus-shots curve with strictly increasing `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotCurve {
    points: Vec<ShotPoint>,
}

impl ShotCurve {
    /// Validates point ordering, accuracy range, and item counts.
    pub fn new(points: Vec<ShotPoint>) -> Result<Self, FitError> {
        if points.is_empty() {
            return Err(FitError::InvalidPoint);
        }
        for p in &points {
            if !p.accuracy.is_finite() || !(0.0..=1.0).contains(&p.accuracy) || p.n_items == 0 {
                return Err(FitError::InvalidPoint);
            }
        }
        if points.windows(2).any(|w| w[0].k >= w[1].k) {
            return Err(FitError::InvalidPoint);
        }
        Ok(Self { points })
    }

    /// The measured points.
    pub fn points(&self) -> &[ShotPoint] {
        &self.points
    }
}

/// Whether the upper asymptote is pinned at one or estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoteMode {
    /// Asymptote fixed at exactly 1.
    FixedOne,
    /// Asymptote estimated inside `(floor, 1)`.
    Free,
}

/// A fitted rising logistic and its transition landmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Offset of the logistic in `ln k` units, scaled by `g`.
    pub a: f64,
    /// Slope (phase sharpness) in `ln k`.
    pub g: f64,
    /// Shot count at the midpoint of the rise; `exp(a / g)`.
    pub k50: f64,
    /// Shot count at 90% of the rise.
    pub k90: f64,
    /// Phase width `k90 - k10`.
    pub phase_width: f64,
    /// Upper accuracy asymptote.
    pub asymptote: f64,
    /// Guess-rate floor supplied by the caller.
    pub floor: f64,
    /// Weighted residual sum of squares at the optimum.
    pub rss: f64,
    /// True when `k50` falls outside the fitted `k` range.
    pub extrapolated: bool,
}

impl FitResult {
    /// Shot count at 10% of the rise.
    pub fn k10(&self) -> f64 {
        ((self.a - 9.0_f64.ln()) / self.g).exp()
    }

    /// Fitted accuracy at a (possibly fractional) shot count `k > 0`.
    pub fn predict(&self, k: f64) -> f64 {
        debug_assert!(k > 0.0, "the fitted law covers k >= 1");
        self.floor
            + (self.asymptote - self.floor) * success_probability(self.g * k.ln() - self.a)
    }
}

struct Design {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ws: Vec<f64>,
}

impl Design {
    /// Keeps only `k >= 1`: the log-capacity law says nothing about zero-shot.
    fn from_curve(curve: &ShotCurve) -> Self {
        let mut d = Design {
            xs: Vec::new(),
            ys: Vec::new(),
            ws: Vec::new(),
        };
        for p in curve.points() {
            if p.k >= 1 {
                d.xs.push((p.k as f64).ln());
                d.ys.push(p.accuracy);
                d.ws.push(p.n_items as f64);
            }
        }
        d
    }

    fn rss(&self, floor: f64, asymptote: f64, m: f64, g: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.xs.len() {
            let pred = floor + (asymptote - floor) * success_probability(g * (self.xs[i] - m));
            let r = self.ys[i] - pred;
            total += self.ws[i] * r * r;
        }
        total
    }

    /// Weighted OLS slope of accuracy on `ln k`.
    fn slope(&self) -> f64 {
        let w_total: f64 = self.ws.iter().sum();
        let x_bar: f64 = self.xs.iter().zip(&self.ws).map(|(x, w)| x * w).sum::<f64>() / w_total;
        let y_bar: f64 = self.ys.iter().zip(&self.ws).map(|(y, w)| y * w).sum::<f64>() / w_total;
        let mut cov = 0.0;
        let mut var = 0.0;
        for i in 0..self.xs.len() {
            cov += self.ws[i] * (self.xs[i] - x_bar) * (self.ys[i] - y_bar);
            var += self.ws[i] * (self.xs[i] - x_bar) * (self.xs[i] - x_bar);
        }
        cov / var
    }
}

/// Fits the rising logistic to an accuracy curve.
///
/// Points at `k = 0` are excluded from the fit. Flat or non-increasing
/// curves are rejected as degenerate rather than forced through the model.
pub fn fit_shot_curve(
    curve: &ShotCurve,
    floor: f64,
    mode: AsymptoteMode,
) -> Result<FitResult, FitError> {
    if !floor.is_finite() || !(0.0..1.0).contains(&floor) {
        return Err(FitError::InvalidFloor);
    }
    let design = Design::from_curve(curve);
    if design.xs.len() < 4 {
        return Err(FitError::TooFewPoints {
            have: design.xs.len(),
        });
    }
    let (y_min, y_max) = design
        .ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    if y_max - y_min < FLAT_RANGE || design.slope() <= 0.0 {
        return Err(FitError::DegenerateCurve);
    }

    let x_min = design.xs.first().copied().unwrap();
    let x_max = design.xs.last().copied().unwrap();

    // Coarse grid over midpoint m = ln k50, slope g, and asymptote.
    let asymptote_grid: &[f64] = match mode {
        AsymptoteMode::FixedOne => &[1.0],
        AsymptoteMode::Free => &[0.6, 0.75, 0.9, 0.97, 1.0],
    };
    let mut best = (f64::INFINITY, 0.0, 1.0, 1.0);
    for ai in asymptote_grid {
        let asymptote = floor + (1.0 - floor) * ai;
        for mi in 0..97 {
            let m = (x_min - 4.0) + (x_max + 4.0 - (x_min - 4.0)) * mi as f64 / 96.0;
            for gi in 0..61 {
                let g = (0.05_f64.ln() + (32.0_f64.ln() - 0.05_f64.ln()) * gi as f64 / 60.0).exp();
                let rss = design.rss(floor, asymptote, m, g);
                if rss < best.0 {
                    best = (rss, m, g, asymptote);
                }
            }
        }
    }

    // Refine with Nelder-Mead in unconstrained coordinates.
    let objective = |p: &[f64]| -> f64 {
        let m = p[0];
        let g = p[1].exp();
        let asymptote = match mode {
            AsymptoteMode::FixedOne => 1.0,
            AsymptoteMode::Free => floor + (1.0 - floor) * success_probability(p[2]),
        };
        design.rss(floor, asymptote, m, g)
    };
    let mut start = vec![best.1, best.2.ln()];
    if mode == AsymptoteMode::Free {
        let ratio = ((best.3 - floor) / (1.0 - floor)).clamp(1e-6, 1.0 - 1e-6);
        start.push((ratio / (1.0 - ratio)).ln());
    }
    let (optimum, rss) = nelder_mead(objective, &start)?;

    let m = optimum[0];
    let g = optimum[1].exp();
    let asymptote = match mode {
        AsymptoteMode::FixedOne => 1.0,
        AsymptoteMode::Free => floor + (1.0 - floor) * success_probability(optimum[2]),
    };
    let a = g * m;
    let k50 = m.exp();
    let k90 = ((a + 9.0_f64.ln()) / g).exp();
    let k10 = ((a - 9.0_f64.ln()) / g).exp();
    Ok(FitResult {
        a,
        g,
        k50,
        k90,
        phase_width: k90 - k10,
        asymptote,
        floor,
        rss,
        extrapolated: k50 < x_min.exp() || k50 > x_max.exp(),
    })
}

/// Deterministic Nelder-Mead over an unconstrained parameter vector.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64]) -> Result<(Vec<f64>, f64), FitError> {
    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += 0.25;
        let fv = f(&v);
        simplex.push((v, fv));
    }

    for _ in 0..MAX_ITERATIONS {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = (0..dim)
            .map(|j| {
                simplex
                    .iter()
                    .map(|(v, _)| (v[j] - simplex[0].0[j]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < SIMPLEX_TOLERANCE {
            return Ok(simplex.swap_remove(0));
        }

        let mut centroid = vec![0.0; dim];
        for (v, _) in &simplex[..dim] {
            for j in 0..dim {
                centroid[j] += v[j] / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let point_at = |t: f64| -> Vec<f64> {
            (0..dim)
                .map(|j| centroid[j] + t * (centroid[j] - worst.0[j]))
                .collect()
        };

        let reflected = point_at(1.0);
        let f_reflected = f(&reflected);
        if f_reflected < simplex[0].1 {
            let expanded = point_at(2.0);
            let f_expanded = f(&expanded);
            simplex[dim] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
            continue;
        }
        if f_reflected < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_reflected);
            continue;
        }
        let contracted = if f_reflected < worst.1 {
            point_at(0.5)
        } else {
            point_at(-0.5)
        };
        let f_contracted = f(&contracted);
        if f_contracted < worst.1.min(f_reflected) {
            simplex[dim] = (contracted, f_contracted);
            continue;
        }
        // Shrink toward the best vertex.
        for i in 1..=dim {
            let v: Vec<f64> = (0..dim)
                .map(|j| simplex[0].0[j] + 0.5 * (simplex[i].0[j] - simplex[0].0[j]))
                .collect();
            let fv = f(&v);
            simplex[i] = (v, fv);
        }
    }
    Err(FitError::NonConvergence)
}

/// Per-item scores for one shot-count cell; each value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellItems {
    /// Shot count.
    pub k: u32,
    /// One score per item.
    pub values: Vec<f64>,
}

/// Expands a graded curve into 0/1 item scores per cell.
pub fn bernoulli_cells(curve: &ShotCurve) -> Vec<CellItems> {
    curve
        .points()
        .iter()
        .map(|p| {
            let n = p.n_items as usize;
            // Round to the nearest representable success count.
            let successes = (p.accuracy * p.n_items as f64).round() as usize;
            let mut values = vec![1.0; successes.min(n)];
            values.resize(n, 0.0);
            CellItems { k: p.k, values }
        })
        .collect()
}

/// A percentile interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    /// Lower percentile bound.
    pub lo: f64,
    /// Upper percentile bound.
    pub hi: f64,
}

impl Interval {
    /// `hi - lo`.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Point fit plus percentile bootstrap intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    /// Fit of the un-resampled curve.
    pub point: FitResult,
    /// Interval for the offset `a`.
    pub a: Interval,
    /// Interval for the slope `g`.
    pub g: Interval,
    /// Interval for `k50`.
    pub k50: Interval,
    /// Interval for `k90`.
    pub k90: Interval,
    /// Interval for the phase width.
    pub phase_width: Interval,
    /// Interval for the asymptote.
    pub asymptote: Interval,
    /// Central coverage level, e.g. 0.68.
    pub level: f64,
    /// Resamples attempted.
    pub resamples: u32,
    /// Resamples whose fit failed (within the 20% allowance).
    pub failures: u32,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Percentile bootstrap over per-item scores, resampling within each cell.
///
/// Deterministic in `seed`. Errors when the full-curve fit fails, when fewer
/// than 200 resamples are requested, or when more than 20% of resamples fail
/// to fit. Noise-free cells (constant item values) produce zero-width
/// intervals by construction.
pub fn bootstrap_intervals(
    cells: &[CellItems],
    floor: f64,
    mode: AsymptoteMode,
    resamples: u32,
    level: f64,
    seed: u64,
) -> Result<BootstrapSummary, FitError> {
    if resamples < 200 {
        return Err(FitError::TooFewResamples { have: resamples });
    }
    if !level.is_finite() || !(0.0..1.0).contains(&level) || level == 0.0 {
        return Err(FitError::InvalidCell);
    }
    for cell in cells {
        if cell.values.is_empty()
            || cell
                .values
                .iter()
                .any(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return Err(FitError::InvalidCell);
        }
    }
    let mean_curve = |means: Vec<f64>| -> Result<ShotCurve, FitError> {
        ShotCurve::new(
            cells
                .iter()
                .zip(means)
                .map(|(c, accuracy)| ShotPoint {
                    k: c.k,
                    accuracy,
                    n_items: c.values.len() as u32,
                })
                .collect(),
        )
    };
    let full_means: Vec<f64> = cells
        .iter()
        .map(|c| c.values.iter().sum::<f64>() / c.values.len() as f64)
        .collect();
    let point = fit_shot_curve(&mean_curve(full_means)?, floor, mode)?;

    let mut stats: [Vec<f64>; 6] = Default::default();
    let mut failures = 0u32;
    for r in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, r as u64]));
        let means: Vec<f64> = cells
            .iter()
            .map(|c| {
                let n = c.values.len();
                (0..n).map(|_| c.values[rng.gen_range(0..n)]).sum::<f64>() / n as f64
            })
            .collect();
        match mean_curve(means).and_then(|c| fit_shot_curve(&c, floor, mode)) {
            Ok(fit) => {
                for (slot, value) in stats.iter_mut().zip([
                    fit.a,
                    fit.g,
                    fit.k50,
                    fit.k90,
                    fit.phase_width,
                    fit.asymptote,
                ]) {
                    slot.push(value);
                }
            }
            Err(_) => failures += 1,
        }
    }
    if failures as f64 > 0.2 * resamples as f64 {
        return Err(FitError::TooManyResampleFailures {
            failures,
            resamples,
        });
    }
    let q_lo = (1.0 - level) / 2.0;
    let q_hi = 1.0 - q_lo;
    let mut intervals = stats.iter_mut().map(|s| {
        s.sort_by(f64::total_cmp);
        Interval {
            lo: quantile(s, q_lo),
            hi: quantile(s, q_hi),
        }
    });
    Ok(BootstrapSummary {
        point,
        a: intervals.next().unwrap(),
        g: intervals.next().unwrap(),
        k50: intervals.next().unwrap(),
        k90: intervals.next().unwrap(),
        phase_width: intervals.next().unwrap(),
        asymptote: intervals.next().unwrap(),
        level,
        resamples,
        failures,
    })
}

/// Cohen's d with the pooled (n-1) standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, FitError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(FitError::TooFewSamples);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], m: f64| {
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (ma, mb) = (mean(a), mean(b));
    let pooled = ((a.len() - 1) as f64 * var(a, ma) + (b.len() - 1) as f64 * var(b, mb))
        / (a.len() + b.len() - 2) as f64;
    if pooled <= 0.0 {
        return Err(FitError::ZeroPooledVariance);
    }
    Ok((ma - mb) / pooled.sqrt())
}

/// One cross-base measurement: evaluate on one base before/after training
/// on another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceRun {
    /// Base that was trained on.
    pub trained_base: u32,
    /// Base that was evaluated.
    pub evaluated_base: u32,
    /// Accuracy on the evaluated base before training.
    pub accuracy_before: f64,
    /// Accuracy on the evaluated base after training.
    pub accuracy_after: f64,
}

/// Square matrix of accuracy deltas in percentage points.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMatrix {
    /// Sorted bases indexing both rows (trained) and columns (evaluated).
    pub bases: Vec<u32>,
    /// `delta[i][j]` = 100 * (after - before) on `bases[j]` when trained on
    /// `bases[i]`.
    pub delta: Vec<Vec<f64>>,
}

impl DeltaMatrix {
    /// Delta for one (trained, evaluated) pair, when present.
    pub fn get(&self, trained: u32, evaluated: u32) -> Option<f64> {
        let i = self.bases.iter().position(|&b| b == trained)?;
        let j = self.bases.iter().position(|&b| b == evaluated)?;
        Some(self.delta[i][j])
    }
}

/// Assembles a full interference matrix from per-pair runs.
///
/// The runs must cover the full cross product of the bases mentioned,
/// exactly once per (trained, evaluated) pair.
pub fn interference_matrix(runs: &[InterferenceRun]) -> Result<DeltaMatrix, FitError> {
    let mut bases: Vec<u32> = Vec::new();
    for r in runs {
        for b in [r.trained_base, r.evaluated_base] {
            if !bases.contains(&b) {
                bases.push(b);
            }
        }
        for acc in [r.accuracy_before, r.accuracy_after] {
            if !acc.is_finite() || !(0.0..=1.0).contains(&acc) {
                return Err(FitError::InvalidCell);
            }
        }
    }
    bases.sort_unstable();
    let n = bases.len();
    let mut delta = vec![vec![f64::NAN; n]; n];
    for r in runs {
        let i = bases.iter().position(|&b| b == r.trained_base).unwrap();
        let j = bases.iter().position(|&b| b == r.evaluated_base).unwrap();
        if !delta[i][j].is_nan() {
            return Err(FitError::DuplicateCell {
                trained: r.trained_base,
                evaluated: r.evaluated_base,
            });
        }
        delta[i][j] = 100.0 * (r.accuracy_after - r.accuracy_before);
    }
    for (i, row) in delta.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v.is_nan() {
                return Err(FitError::MissingCell {
                    trained: bases[i],
                    evaluated: bases[j],
                });
            }
        }
    }
    Ok(DeltaMatrix { bases, delta })
}
