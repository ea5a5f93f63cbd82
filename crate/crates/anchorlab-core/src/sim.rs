//! Posterior pattern-selection simulator.
//!
//! A task has `m` candidate patterns; the correct one sits at evidence mean
//! zero and every competitor at unit gap. Each trial draws `n` noisy evidence
//! samples and forms the exact posterior with per-pattern anchoring priors
//! `S_i / tau`. A trial counts as resolved when the correct pattern holds at
//! least `1 - delta` of the posterior mass; resolved trials answer correctly
//! with `p_optimal`, unresolved ones guess at `1/m`. Around the critical
//! anchoring strength the success rate swings from chance to
//! near-`p_optimal`; this module also measures that transition's width and
//! how it scales with `n`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::util::mix_seed;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Span of the standard normal quantile from the 10th to 90th percentile;
/// the 10-90 transition width of a probit response in its own sd units.
pub const PROBIT_SPAN_10_90: f64 = 2.563103131089201;

/// Errors from simulator configuration and the derived statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    /// A parameter sits outside its documented domain.
    InvalidDomain {
        /// Which parameter.
        what: &'static str,
    },
    /// No explicit target and the maximum strength is not unique.
    TiedStrengths,
    /// The explicit target index exceeds the pattern count.
    TargetOutOfRange,
    /// The success curve never spans the requested rise fractions.
    RangeNotSpanned,
    /// Too few points for the requested statistic.
    TooFewPoints,
    /// Widths must be strictly positive to fit a log-log slope.
    NonPositiveWidth,
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::InvalidDomain { what } => write!(f, "{what} out of domain"),
            SimError::TiedStrengths => {
                write!(f, "strengths have no unique maximum and no target was given")
            }
            SimError::TargetOutOfRange => write!(f, "target index out of range"),
            SimError::RangeNotSpanned => write!(f, "curve does not span the rise fractions"),
            SimError::TooFewPoints => write!(f, "too few points"),
            SimError::NonPositiveWidth => write!(f, "widths must be positive"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimError {}

/// Critical anchoring strength `(1 / (2 tau)) * ln((m - 1) / delta)`.
pub fn critical_threshold(m: usize, tau: f64, delta: f64) -> Result<f64, SimError> {
    if m < 2 {
        return Err(SimError::InvalidDomain { what: "m" });
    }
    if !tau.is_finite() || tau <= 0.0 {
        return Err(SimError::InvalidDomain { what: "tau" });
    }
    if !delta.is_finite() || delta <= 0.0 || delta > 1.0 {
        return Err(SimError::InvalidDomain { what: "delta" });
    }
    Ok(((m as f64 - 1.0) / delta).ln() / (2.0 * tau))
}

/// Full configuration of one simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Number of candidate patterns (>= 2).
    pub m: usize,
    /// Posterior temperature on the anchoring prior (> 0).
    pub tau: f64,
    /// Resolution tolerance, in (0, 1]: the trial is resolved once the
    /// correct pattern holds posterior mass `1 - delta`.
    pub delta: f64,
    /// Evidence draws per trial (>= 1).
    pub n: u32,
    /// Anchoring strength per pattern; length `m`.
    pub strengths: Vec<f64>,
    /// Per-draw evidence noise sd (> 0).
    pub noise_sigma: f64,
    /// Success probability of a resolved trial; in (1/m, 1].
    pub p_optimal: f64,
    /// Seed of this trial's random stream.
    pub seed: u64,
    /// Index of the correct pattern; `None` means the strength argmax,
    /// which must then be unique.
    pub target: Option<usize>,
}

impl SimConfig {
    fn validate_rates(&self) -> Result<(), SimError> {
        if self.m < 2 {
            return Err(SimError::InvalidDomain { what: "m" });
        }
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(SimError::InvalidDomain { what: "tau" });
        }
        if !self.delta.is_finite() || self.delta <= 0.0 || self.delta > 1.0 {
            return Err(SimError::InvalidDomain { what: "delta" });
        }
        if self.n == 0 {
            return Err(SimError::InvalidDomain { what: "n" });
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma <= 0.0 {
            return Err(SimError::InvalidDomain {
                what: "noise_sigma",
            });
        }
        let chance = 1.0 / self.m as f64;
        if !self.p_optimal.is_finite() || self.p_optimal <= chance || self.p_optimal > 1.0 {
            return Err(SimError::InvalidDomain { what: "p_optimal" });
        }
        Ok(())
    }

    /// Checks every field, including strengths and target.
    pub fn validate(&self) -> Result<(), SimError> {
        self.validate_rates()?;
        if self.strengths.len() != self.m || self.strengths.iter().any(|s| !s.is_finite()) {
            return Err(SimError::InvalidDomain { what: "strengths" });
        }
        match self.target {
            Some(i) if i >= self.m => Err(SimError::TargetOutOfRange),
            Some(_) => Ok(()),
            None => {
                // The argmax must be unambiguous to define the correct pattern.
                let max = self.strengths.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let ties = self.strengths.iter().filter(|&&s| s == max).count();
                if ties != 1 {
                    return Err(SimError::TiedStrengths);
                }
                Ok(())
            }
        }
    }

    /// Index of the correct pattern.
    pub fn target_index(&self) -> usize {
        match self.target {
            Some(i) => i,
            None => {
                let mut best = 0;
                for (i, &s) in self.strengths.iter().enumerate() {
                    if s > self.strengths[best] {
                        best = i;
                    }
                }
                best
            }
        }
    }

    /// Chance-level success probability `1/m`.
    pub fn p_random(&self) -> f64 {
        1.0 / self.m as f64
    }
}

/// What one trial produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Posterior over all `m` patterns; sums to one.
    pub posterior: Vec<f64>,
    /// Argmax of the posterior (lowest index on exact ties).
    pub selected: usize,
    /// Posterior mass on the correct pattern.
    pub mass_on_optimal: f64,
    /// Whether the downstream answer came out correct: `p_optimal` odds when
    /// the trial resolved, chance odds otherwise.
    pub success: bool,
}

/// Runs a single posterior-selection trial.
///
/// Evidence is `n` draws from the correct pattern's distribution (mean 0,
/// sd `noise_sigma`); competitors all sit at mean 1. Gaussian likelihoods
/// reduce to the evidence sum, and terms common to every pattern cancel in
/// the softmax normalization.
pub fn run_trial(config: &SimConfig) -> Result<TrialOutcome, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(trial_inner(config, &mut rng))
}

fn trial_inner(config: &SimConfig, rng: &mut ChaCha8Rng) -> TrialOutcome {
    let target = config.target_index();
    let sigma2 = config.noise_sigma * config.noise_sigma;
    let mut evidence_sum = 0.0;
    for _ in 0..config.n {
        let z: f64 = rng.sample(StandardNormal);
        evidence_sum += config.noise_sigma * z;
    }
    // Log-posterior up to a shared constant: the correct pattern has
    // evidence mean 0, every competitor mean 1.
    let competitor_loglik = evidence_sum / sigma2 - config.n as f64 / (2.0 * sigma2);
    let mut log_post: Vec<f64> = (0..config.m)
        .map(|i| {
            let prior = config.strengths[i] / config.tau;
            if i == target {
                prior
            } else {
                prior + competitor_loglik
            }
        })
        .collect();
    let max = log_post.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut total = 0.0;
    for w in log_post.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    let posterior: Vec<f64> = log_post.into_iter().map(|w| w / total).collect();
    let mut selected = 0;
    for (i, &p) in posterior.iter().enumerate() {
        if p > posterior[selected] {
            selected = i;
        }
    }
    let resolved = posterior[target] >= 1.0 - config.delta;
    let p_answer = if resolved {
        config.p_optimal
    } else {
        config.p_random()
    };
    let success = rng.gen::<f64>() < p_answer;
    TrialOutcome {
        mass_on_optimal: posterior[target],
        posterior,
        selected,
        success,
    }
}

/// One measured point of a success curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessPoint {
    /// Anchoring strength of the correct pattern at this point.
    pub s_star: f64,
    /// Fraction of trials that succeeded.
    pub success_rate: f64,
    /// Trials behind the rate.
    pub trials: u32,
}

/// Success rate as a function of the correct pattern's anchoring strength.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessCurve {
    /// Points in strictly increasing `s_star` order.
    pub points: Vec<SuccessPoint>,
}

/// Sweeps the correct pattern's strength over `grid`, holding competitors
/// at strength zero.
///
/// The template's `strengths` and `target` are ignored: each point installs
/// `[s_star, 0, 0, ...]` with the target pinned to index 0, so the sweep is
/// well-defined on both sides of zero. Trial seeds derive from
/// `(seed, point index, trial index)`; results are order-independent.
pub fn success_curve(
    template: &SimConfig,
    grid: &[f64],
    trials_per_point: u32,
) -> Result<SuccessCurve, SimError> {
    template.validate_rates()?;
    if trials_per_point < 100 {
        return Err(SimError::InvalidDomain {
            what: "trials_per_point",
        });
    }
    if grid.iter().any(|s| !s.is_finite()) {
        return Err(SimError::InvalidDomain { what: "grid" });
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::InvalidDomain { what: "grid" });
    }
    let mut points = Vec::with_capacity(grid.len());
    for (index, &s_star) in grid.iter().enumerate() {
        let mut strengths = vec![0.0; template.m];
        strengths[0] = s_star;
        let config = SimConfig {
            strengths,
            target: Some(0),
            ..template.clone()
        };
        config.validate()?;
        let mut successes = 0u32;
        for trial in 0..trials_per_point {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
                template.seed,
                index as u64,
                trial as u64,
            ]));
            if trial_inner(&config, &mut rng).success {
                successes += 1;
            }
        }
        points.push(SuccessPoint {
            s_star,
            success_rate: successes as f64 / trials_per_point as f64,
            trials: trials_per_point,
        });
    }
    Ok(SuccessCurve { points })
}

/// Pool-adjacent-violators: the weighted least-squares non-decreasing fit.
pub fn isotonic(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // Blocks of (weighted mean, total weight, count), merged on violation.
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() >= 2 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            blocks.pop();
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, c1 + c2));
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, _, c) in blocks {
        for _ in 0..c {
            out.push(m);
        }
    }
    out
}

/// Width of the success transition between two rise fractions.
///
/// The curve is first monotonized (weighted by trial counts), then the
/// strengths where the rate crosses `lo_frac` and `hi_frac` of its observed
/// range are located by linear interpolation; the width is their gap.
/// Curves with no rise to span are rejected.
pub fn transition_width(
    curve: &SuccessCurve,
    lo_frac: f64,
    hi_frac: f64,
) -> Result<f64, SimError> {
    if !(lo_frac.is_finite() && hi_frac.is_finite())
        || lo_frac <= 0.0
        || hi_frac >= 1.0
        || lo_frac >= hi_frac
    {
        return Err(SimError::InvalidDomain { what: "fractions" });
    }
    if curve.points.len() < 2 {
        return Err(SimError::TooFewPoints);
    }
    let rates: Vec<f64> = curve.points.iter().map(|p| p.success_rate).collect();
    let weights: Vec<f64> = curve.points.iter().map(|p| p.trials as f64).collect();
    let smooth = isotonic(&rates, &weights);
    let lo_rate = smooth[0];
    let hi_rate = smooth[smooth.len() - 1];
    if hi_rate - lo_rate <= 0.0 {
        return Err(SimError::RangeNotSpanned);
    }
    let cross = |level: f64| -> f64 {
        let mut j = 0;
        while smooth[j] < level {
            j += 1;
        }
        if j == 0 {
            return curve.points[0].s_star;
        }
        let (s0, s1) = (curve.points[j - 1].s_star, curve.points[j].s_star);
        let (r0, r1) = (smooth[j - 1], smooth[j]);
        s0 + (level - r0) * (s1 - s0) / (r1 - r0)
    };
    let lo_level = lo_rate + lo_frac * (hi_rate - lo_rate);
    let hi_level = lo_rate + hi_frac * (hi_rate - lo_rate);
    Ok(cross(hi_level) - cross(lo_level))
}

/// A fitted log-log scaling law `width ~ n^slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    /// Exponent of the power law.
    pub slope: f64,
    /// Intercept in log-log coordinates.
    pub intercept: f64,
    /// Coefficient of determination of the log-log regression.
    pub r_squared: f64,
}

/// Ordinary least squares of `ln width` on `ln n`.
pub fn scaling_exponent(ns: &[u32], widths: &[f64]) -> Result<ScalingFit, SimError> {
    if ns.len() != widths.len() {
        return Err(SimError::InvalidDomain { what: "lengths" });
    }
    if ns.len() < 3 {
        return Err(SimError::TooFewPoints);
    }
    if ns.iter().any(|&n| n == 0) {
        return Err(SimError::InvalidDomain { what: "n" });
    }
    if widths.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(SimError::NonPositiveWidth);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = widths.iter().map(|w| w.ln()).collect();
    ols(&xs, &ys)
}

/// A fitted exponential decay `value ~ exp(-rate * n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Decay rate per unit `n`; positive means shrinking.
    pub rate: f64,
    /// Intercept of `ln value` at `n = 0`.
    pub intercept: f64,
    /// Coefficient of determination of the semi-log regression.
    pub r_squared: f64,
}

/// Ordinary least squares of `ln value` on `n`; values must be positive.
pub fn exponential_decay_fit(ns: &[u32], values: &[f64]) -> Result<DecayFit, SimError> {
    if ns.len() != values.len() {
        return Err(SimError::InvalidDomain { what: "lengths" });
    }
    if ns.len() < 3 {
        return Err(SimError::TooFewPoints);
    }
    if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(SimError::NonPositiveWidth);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = ols(&xs, &ys)?;
    Ok(DecayFit {
        rate: -fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
    })
}

fn ols(xs: &[f64], ys: &[f64]) -> Result<ScalingFit, SimError> {
    let n = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / n;
    let y_bar = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - x_bar) * (y - y_bar);
        var += (x - x_bar) * (x - x_bar);
    }
    if var == 0.0 {
        return Err(SimError::InvalidDomain { what: "xs" });
    }
    let slope = cov / var;
    let intercept = y_bar - slope * x_bar;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let pred = intercept + slope * x;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - y_bar) * (y - y_bar);
    }
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
    })
}

/// A sweep template whose evidence noise scales with `n`.
///
/// Holding the per-draw noise fixed would let the accumulated evidence drown
/// the prior as `n` grows, drifting the transition center without bound.
/// Scaling the noise as `sigma0 * n` keeps the accumulated log-likelihood
/// contrast at sd `1 / (sigma0 sqrt(n))`, so the transition stays centered
/// near `tau * ln((m - 1) (1 - delta) / delta)` and its width shrinks as
/// `n^(-1/2)`.
pub fn calibrated_config(
    m: usize,
    tau: f64,
    delta: f64,
    n: u32,
    sigma0: f64,
    p_optimal: f64,
    seed: u64,
) -> Result<SimConfig, SimError> {
    if !sigma0.is_finite() || sigma0 <= 0.0 {
        return Err(SimError::InvalidDomain { what: "sigma0" });
    }
    let config = SimConfig {
        m,
        tau,
        delta,
        n,
        strengths: vec![0.0; m],
        noise_sigma: sigma0 * n as f64,
        p_optimal,
        seed,
        target: Some(0),
    };
    config.validate()?;
    Ok(config)
}

/// Expected 10-90 transition width of a calibrated sweep at evidence count `n`.
pub fn expected_width(tau: f64, sigma0: f64, n: u32) -> f64 {
    PROBIT_SPAN_10_90 * tau / (sigma0 * (n as f64).sqrt())
}

/// A strength grid bracketing the calibrated transition: 73 points centered
/// on `tau * ln((m - 1) (1 - delta) / delta)` — the strength at which the
/// noise-free posterior mass on the target is exactly `1 - delta` — spaced a
/// twelfth of the expected width apart.
pub fn transition_grid(
    m: usize,
    tau: f64,
    delta: f64,
    sigma0: f64,
    n: u32,
) -> Result<Vec<f64>, SimError> {
    if m < 2 {
        return Err(SimError::InvalidDomain { what: "m" });
    }
    if !tau.is_finite() || tau <= 0.0 {
        return Err(SimError::InvalidDomain { what: "tau" });
    }
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(SimError::InvalidDomain { what: "delta" });
    }
    if !sigma0.is_finite() || sigma0 <= 0.0 {
        return Err(SimError::InvalidDomain { what: "sigma0" });
    }
    if n == 0 {
        return Err(SimError::InvalidDomain { what: "n" });
    }
    let width = expected_width(tau, sigma0, n);
    let center = tau * ((m as f64 - 1.0) * (1.0 - delta) / delta).ln();
    let step = width / 12.0;
    Ok((0..=72).map(|i| center + (i as f64 - 36.0) * step).collect())
}
