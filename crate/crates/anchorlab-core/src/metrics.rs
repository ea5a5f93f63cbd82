//! Information measures over finite distributions, in nats.
//!
//! Shannon entropy, KL and Jensen-Shannon divergences, 1-D Wasserstein
//! distance, and mutual information, plus the composite diagnostics used to
//! track multi-round debates: per-round phase classification, convergence
//! rate, and synthesis quality.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Probability mass must sum to one within this tolerance.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Default regularizer in the anchoring-success ratio.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Errors from distribution construction and the diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// Probabilities were empty, negative, non-finite, or off-mass.
    InvalidDistribution,
    /// Two distributions of different dimension were combined.
    DimensionMismatch,
    /// Wasserstein distance needs explicit support positions on both sides.
    MissingSupport,
    /// Support positions must be strictly increasing and shared exactly.
    SupportMismatch,
    /// Joint table was empty, ragged, negative, or off-mass.
    InvalidJoint,
    /// `crit_avg` must be present on all rounds or on none.
    MissingCrit,
    /// Agreement scores live in `[0, 1]`.
    InvalidKappa,
    /// Round indices must be strictly increasing.
    UnorderedRounds,
    /// Phase thresholds must satisfy `0 <= transition < exploration <= 1`.
    InvalidThresholds,
}

impl core::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let msg = match self {
            MetricsError::InvalidDistribution => "invalid probability vector",
            MetricsError::DimensionMismatch => "distribution dimensions differ",
            MetricsError::MissingSupport => "support positions required on both sides",
            MetricsError::SupportMismatch => "support positions must match exactly",
            MetricsError::InvalidJoint => "invalid joint probability table",
            MetricsError::MissingCrit => "crit_avg must be present on all rounds or none",
            MetricsError::InvalidKappa => "kappa must lie in [0, 1]",
            MetricsError::UnorderedRounds => "round indices must be strictly increasing",
            MetricsError::InvalidThresholds => "phase thresholds out of order",
        };
        write!(f, "{msg}")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MetricsError {}

/// A finite probability distribution, optionally with support positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    probs: Vec<f64>,
    support: Option<Vec<f64>>,
}

impl Dist {
    /// Validates a probability vector (non-negative, sums to one).
    pub fn new(probs: Vec<f64>) -> Result<Self, MetricsError> {
        if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(MetricsError::InvalidDistribution);
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(MetricsError::InvalidDistribution);
        }
        Ok(Self {
            probs,
            support: None,
        })
    }

    /// Attaches strictly increasing support positions (for Wasserstein).
    pub fn with_support(probs: Vec<f64>, support: Vec<f64>) -> Result<Self, MetricsError> {
        let mut d = Self::new(probs)?;
        if support.len() != d.probs.len() || support.iter().any(|x| !x.is_finite()) {
            return Err(MetricsError::SupportMismatch);
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MetricsError::SupportMismatch);
        }
        d.support = Some(support);
        Ok(d)
    }

    /// The uniform distribution on `n` outcomes.
    pub fn uniform(n: usize) -> Result<Self, MetricsError> {
        if n == 0 {
            return Err(MetricsError::InvalidDistribution);
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Probability vector.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Support positions, when attached.
    pub fn support(&self) -> Option<&[f64]> {
        self.support.as_deref()
    }

    /// Number of outcomes.
    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    fn check_dim(&self, other: &Self) -> Result<(), MetricsError> {
        if self.dim() != other.dim() {
            return Err(MetricsError::DimensionMismatch);
        }
        Ok(())
    }

    /// Pointwise mixture `(p + q) / 2`, dropping supports.
    pub fn mixture(&self, other: &Self) -> Result<Dist, MetricsError> {
        self.check_dim(other)?;
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Dist::new(probs)
    }
}

/// A joint distribution over two finite variables, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    table: Vec<Vec<f64>>,
}

impl JointDist {
    /// Validates a rectangular, non-negative table summing to one.
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self, MetricsError> {
        let cols = table.first().map(|r| r.len()).unwrap_or(0);
        if cols == 0 {
            return Err(MetricsError::InvalidJoint);
        }
        let mut mass = 0.0;
        for row in &table {
            if row.len() != cols {
                return Err(MetricsError::InvalidJoint);
            }
            for &p in row {
                if !p.is_finite() || p < 0.0 {
                    return Err(MetricsError::InvalidJoint);
                }
                mass += p;
            }
        }
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(MetricsError::InvalidJoint);
        }
        Ok(Self { table })
    }

    /// Row-major probability table.
    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    /// `(rows, cols)` shape.
    pub fn shape(&self) -> (usize, usize) {
        (self.table.len(), self.table[0].len())
    }

    /// Row and column marginals.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let (rows, cols) = self.shape();
        let mut r = vec![0.0; rows];
        let mut c = vec![0.0; cols];
        for (i, row) in self.table.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                r[i] += p;
                c[j] += p;
            }
        }
        (r, c)
    }
}

/// Shannon entropy `-sum p ln p`, with `0 ln 0 = 0`.
pub fn entropy(p: &Dist) -> f64 {
    p.probs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum()
}

/// Kullback-Leibler divergence `KL(p || q)`; infinite when `q` lacks mass
/// somewhere `p` has it.
pub fn kl_divergence(p: &Dist, q: &Dist) -> Result<f64, MetricsError> {
    p.check_dim(q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// Jensen-Shannon divergence; symmetric, finite, and within `[0, ln 2]`.
pub fn jsd(p: &Dist, q: &Dist) -> Result<f64, MetricsError> {
    if p.probs == q.probs {
        return Ok(0.0);
    }
    let m = p.mixture(q)?;
    let v = 0.5 * kl_divergence(p, &m)? + 0.5 * kl_divergence(q, &m)?;
    Ok(v.max(0.0))
}

/// 1-D Wasserstein distance between distributions on one shared grid.
///
/// Computed as the CDF-difference integral; both sides must carry identical
/// strictly increasing support positions.
pub fn wasserstein_1d(p: &Dist, q: &Dist) -> Result<f64, MetricsError> {
    let sp = p.support().ok_or(MetricsError::MissingSupport)?;
    let sq = q.support().ok_or(MetricsError::MissingSupport)?;
    p.check_dim(q)?;
    if sp != sq {
        return Err(MetricsError::SupportMismatch);
    }
    let mut cdf_p = 0.0;
    let mut cdf_q = 0.0;
    let mut total = 0.0;
    for i in 0..p.dim() - 1 {
        cdf_p += p.probs[i];
        cdf_q += q.probs[i];
        total += (cdf_p - cdf_q).abs() * (sp[i + 1] - sp[i]);
    }
    Ok(total)
}

/// Mutual information of a joint distribution, in nats; never negative.
pub fn mutual_information(joint: &JointDist) -> f64 {
    let (r, c) = joint.marginals();
    let mut total = 0.0;
    for (i, row) in joint.table.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                total += p * (p / (r[i] * c[j])).ln();
            }
        }
    }
    total.max(0.0)
}

/// The maximal coupling of two same-dimension distributions.
///
/// Shared mass `min(p_i, q_i)` sits on the diagonal; the leftover mass
/// couples independently. Identical inputs therefore give a diagonal joint
/// (mutual information = entropy), and the construction degrades gracefully
/// toward independence as the overlap shrinks.
pub fn overlap_coupling(p: &Dist, q: &Dist) -> Result<JointDist, MetricsError> {
    p.check_dim(q)?;
    let n = p.dim();
    let overlap: Vec<f64> = (0..n).map(|i| p.probs[i].min(q.probs[i])).collect();
    let shared: f64 = overlap.iter().sum();
    let residual = 1.0 - shared;
    let mut table = vec![vec![0.0; n]; n];
    for (i, row) in table.iter_mut().enumerate() {
        row[i] = overlap[i];
    }
    if residual > 1e-12 {
        for i in 0..n {
            let rp = (p.probs[i] - overlap[i]).max(0.0);
            if rp == 0.0 {
                continue;
            }
            for j in 0..n {
                let rq = (q.probs[j] - overlap[j]).max(0.0);
                table[i][j] += rp * rq / residual;
            }
        }
    } else if shared > 0.0 {
        // Numerically identical inputs: keep the diagonal exactly normalized.
        for (i, row) in table.iter_mut().enumerate() {
            row[i] = overlap[i] / shared;
        }
    }
    JointDist::new(table)
}

/// Debate phase by agreement score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// High agreement: positions still move together, keep exploring.
    Exploration,
    /// Intermediate agreement.
    Transition,
    /// Low agreement: positions have separated and hardened.
    Convergence,
}

/// Agreement cutoffs separating the three phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseThresholds {
    /// Scores at or above this are [`Phase::Exploration`].
    pub exploration_min: f64,
    /// Scores at or above this (but below `exploration_min`) are
    /// [`Phase::Transition`]; anything lower is [`Phase::Convergence`].
    pub transition_min: f64,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        Self {
            exploration_min: 0.8,
            transition_min: 0.6,
        }
    }
}

impl PhaseThresholds {
    fn validate(&self) -> Result<(), MetricsError> {
        let ok = self.transition_min >= 0.0
            && self.transition_min < self.exploration_min
            && self.exploration_min <= 1.0;
        if !ok {
            return Err(MetricsError::InvalidThresholds);
        }
        Ok(())
    }
}

/// Classifies an agreement score into a debate phase.
pub fn classify_phase(kappa: f64, thresholds: &PhaseThresholds) -> Result<Phase, MetricsError> {
    thresholds.validate()?;
    if !kappa.is_finite() || !(0.0..=1.0).contains(&kappa) {
        return Err(MetricsError::InvalidKappa);
    }
    Ok(if kappa >= thresholds.exploration_min {
        Phase::Exploration
    } else if kappa >= thresholds.transition_min {
        Phase::Transition
    } else {
        Phase::Convergence
    })
}

/// One observed debate round: both sides' stance distributions plus scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DebateRoundRecord {
    /// Round index; must increase strictly across a history.
    pub round: u32,
    /// Proponent stance distribution.
    pub p_plus: Dist,
    /// Opponent stance distribution.
    pub p_minus: Dist,
    /// Inter-annotator agreement in `[0, 1]`.
    pub kappa: f64,
    /// Mean critique quality, when scored; all rounds or none.
    pub crit_avg: Option<f64>,
    /// Paired-sample joint of the two stances, when the caller observed one;
    /// otherwise the maximal coupling stands in.
    pub joint: Option<JointDist>,
}

/// Per-round diagnostic row computed by [`debate_diagnostics`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    /// Round index copied from the record.
    pub round: u32,
    /// Agreement score copied from the record.
    pub kappa: f64,
    /// Jensen-Shannon divergence between the stances.
    pub jsd: f64,
    /// Wasserstein distance between the stances.
    pub w1: f64,
    /// Mutual information of the stance coupling.
    pub mi: f64,
    /// Entropy of the proponent stance.
    pub h_plus: f64,
    /// Entropy of the opponent stance.
    pub h_minus: f64,
    /// Joint exploration headroom `H(p) + H(q) - 2 H(mixture)`.
    pub exploration_quality: f64,
    /// Negative Wasserstein step from the previous round; absent on round one.
    pub convergence_rate: Option<f64>,
    /// Composite `MI * crit / (JSD + epsilon)`; absent without critiques.
    pub anchoring_success: Option<f64>,
    /// Phase classification of `kappa`.
    pub phase: Phase,
}

/// Computes the full per-round diagnostic table for a debate history.
///
/// Wasserstein positions default to the integer grid `0..dim` when records
/// carry no explicit supports; explicit supports must agree across both
/// stances of a round.
pub fn debate_diagnostics(
    history: &[DebateRoundRecord],
    epsilon: f64,
    thresholds: &PhaseThresholds,
) -> Result<Vec<RoundReport>, MetricsError> {
    thresholds.validate()?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(MetricsError::InvalidThresholds);
    }
    let with_crit = history.iter().filter(|r| r.crit_avg.is_some()).count();
    if with_crit != 0 && with_crit != history.len() {
        return Err(MetricsError::MissingCrit);
    }
    for pair in history.windows(2) {
        if pair[0].round >= pair[1].round {
            return Err(MetricsError::UnorderedRounds);
        }
    }

    let mut reports = Vec::with_capacity(history.len());
    let mut previous_w1 = None;
    for record in history {
        record.p_plus.check_dim(&record.p_minus)?;
        let (p, q) = grid_aligned(&record.p_plus, &record.p_minus)?;
        let jsd_v = jsd(&p, &q)?;
        let w1_v = wasserstein_1d(&p, &q)?;
        let joint = match &record.joint {
            Some(j) => {
                if j.shape() != (p.dim(), q.dim()) {
                    return Err(MetricsError::DimensionMismatch);
                }
                j.clone()
            }
            None => overlap_coupling(&p, &q)?,
        };
        let mi_v = mutual_information(&joint);
        let h_plus = entropy(&p);
        let h_minus = entropy(&q);
        let mixture = p.mixture(&q)?;
        let exploration_quality = h_plus + h_minus - 2.0 * entropy(&mixture);
        let convergence_rate = previous_w1.map(|w: f64| -(w1_v - w));
        let anchoring_success = match record.crit_avg {
            Some(crit) => {
                if !crit.is_finite() {
                    return Err(MetricsError::InvalidDistribution);
                }
                Some(mi_v * crit / (jsd_v + epsilon))
            }
            None => None,
        };
        reports.push(RoundReport {
            round: record.round,
            kappa: record.kappa,
            jsd: jsd_v,
            w1: w1_v,
            mi: mi_v,
            h_plus,
            h_minus,
            exploration_quality,
            convergence_rate,
            anchoring_success,
            phase: classify_phase(record.kappa, thresholds)?,
        });
        previous_w1 = Some(w1_v);
    }
    Ok(reports)
}

/// Pairs two stances on one common grid, defaulting to integer positions.
fn grid_aligned(p: &Dist, q: &Dist) -> Result<(Dist, Dist), MetricsError> {
    match (p.support(), q.support()) {
        (Some(sp), Some(sq)) => {
            if sp != sq {
                return Err(MetricsError::SupportMismatch);
            }
            Ok((p.clone(), q.clone()))
        }
        (None, None) => {
            let grid: Vec<f64> = (0..p.dim()).map(|i| i as f64).collect();
            Ok((
                Dist::with_support(p.probs.clone(), grid.clone())?,
                Dist::with_support(q.probs.clone(), grid)?,
            ))
        }
        _ => Err(MetricsError::SupportMismatch),
    }
}

/// Quality scores for an arbiter's synthesis of a finished debate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisQuality {
    /// Entropy of the synthesis: how much of the space it retains.
    pub coverage: f64,
    /// One minus the JSD gap to the two sides: evenhandedness.
    pub balance: f64,
    /// Mutual information between the synthesis and the debate mixture.
    pub convergence: f64,
}

/// Scores an arbiter distribution against the two final stances.
///
/// `joint` optionally supplies an observed coupling between the synthesis and
/// the stance mixture; by default the maximal coupling is used.
pub fn synthesis_quality(
    p_arb: &Dist,
    p_plus: &Dist,
    p_minus: &Dist,
    joint: Option<&JointDist>,
) -> Result<SynthesisQuality, MetricsError> {
    p_plus.check_dim(p_minus)?;
    p_arb.check_dim(p_plus)?;
    let coverage = entropy(p_arb);
    let balance = 1.0 - (jsd(p_arb, p_plus)? - jsd(p_arb, p_minus)?).abs();
    let mixture = p_plus.mixture(p_minus)?;
    let coupling = match joint {
        Some(j) => {
            if j.shape() != (p_arb.dim(), mixture.dim()) {
                return Err(MetricsError::DimensionMismatch);
            }
            j.clone()
        }
        None => overlap_coupling(p_arb, &mixture)?,
    };
    Ok(SynthesisQuality {
        coverage,
        balance,
        convergence: mutual_information(&coupling),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(probs: &[f64]) -> Dist {
        Dist::new(probs.to_vec()).expect("valid dist")
    }

    #[test]
    fn dist_validation_rejects_bad_mass() {
        assert_eq!(Dist::new(vec![]), Err(MetricsError::InvalidDistribution));
        assert_eq!(
            Dist::new(vec![0.5, 0.6]),
            Err(MetricsError::InvalidDistribution)
        );
        assert_eq!(
            Dist::new(vec![-0.1, 1.1]),
            Err(MetricsError::InvalidDistribution)
        );
        assert!(Dist::new(vec![0.5, 0.5 + 5e-10]).is_ok(), "within tolerance");
    }

    #[test]
    fn support_must_be_strictly_increasing() {
        assert!(Dist::with_support(vec![0.5, 0.5], vec![0.0, 1.0]).is_ok());
        assert_eq!(
            Dist::with_support(vec![0.5, 0.5], vec![1.0, 1.0]),
            Err(MetricsError::SupportMismatch)
        );
        assert_eq!(
            Dist::with_support(vec![0.5, 0.5], vec![0.0]),
            Err(MetricsError::SupportMismatch)
        );
    }

    #[test]
    fn entropy_landmarks() {
        assert_eq!(entropy(&d(&[1.0, 0.0, 0.0])), 0.0);
        let u4 = Dist::uniform(4).unwrap();
        assert!((entropy(&u4) - 4.0_f64.ln()).abs() < 1e-15);
        let h = entropy(&d(&[0.25, 0.75]));
        let expected = -(0.25_f64 * 0.25_f64.ln() + 0.75 * 0.75_f64.ln());
        assert!((h - expected).abs() < 1e-15);
    }

    #[test]
    fn kl_divergence_landmarks() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.25, 0.75]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let expected = 0.5 * (0.5_f64 / 0.25).ln() + 0.5 * (0.5_f64 / 0.75).ln();
        assert!((kl_divergence(&p, &q).unwrap() - expected).abs() < 1e-15);
        // Absolute-continuity violation.
        let r = d(&[1.0, 0.0]);
        assert_eq!(kl_divergence(&p, &r).unwrap(), f64::INFINITY);
        assert_eq!(kl_divergence(&r, &p).unwrap(), (2.0_f64).ln());
    }

    #[test]
    fn jsd_landmarks_and_bounds() {
        let p = d(&[1.0, 0.0]);
        let q = d(&[0.0, 1.0]);
        assert!((jsd(&p, &q).unwrap() - 2.0_f64.ln()).abs() < 1e-15, "disjoint maxes at ln 2");
        assert_eq!(jsd(&p, &p).unwrap(), 0.0, "identical is exactly zero");
        let a = d(&[0.4, 0.6]);
        let b = d(&[0.6, 0.4]);
        let v = jsd(&a, &b).unwrap();
        assert!(v > 0.0 && v < 2.0_f64.ln());
        assert_eq!(v, jsd(&b, &a).unwrap(), "symmetric");
    }

    #[test]
    fn wasserstein_matches_hand_computations() {
        let grid = vec![0.0, 1.0, 2.0];
        let p = Dist::with_support(vec![1.0, 0.0, 0.0], grid.clone()).unwrap();
        let q = Dist::with_support(vec![0.0, 0.0, 1.0], grid.clone()).unwrap();
        assert_eq!(wasserstein_1d(&p, &q).unwrap(), 2.0, "point masses move 2");
        let r = Dist::with_support(vec![0.0, 1.0, 0.0], grid.clone()).unwrap();
        assert_eq!(wasserstein_1d(&p, &r).unwrap(), 1.0);
        let u = Dist::with_support(vec![0.5, 0.0, 0.5], grid).unwrap();
        assert_eq!(wasserstein_1d(&p, &u).unwrap(), 1.0, "half the mass moves 2");
    }

    #[test]
    fn wasserstein_respects_grid_spacing() {
        let p = Dist::with_support(vec![1.0, 0.0], vec![0.0, 10.0]).unwrap();
        let q = Dist::with_support(vec![0.0, 1.0], vec![0.0, 10.0]).unwrap();
        assert_eq!(wasserstein_1d(&p, &q).unwrap(), 10.0);
    }

    #[test]
    fn wasserstein_requires_shared_supports() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.5, 0.5]);
        assert_eq!(wasserstein_1d(&p, &q), Err(MetricsError::MissingSupport));
        let a = Dist::with_support(vec![0.5, 0.5], vec![0.0, 1.0]).unwrap();
        let b = Dist::with_support(vec![0.5, 0.5], vec![0.0, 2.0]).unwrap();
        assert_eq!(wasserstein_1d(&a, &b), Err(MetricsError::SupportMismatch));
    }

    #[test]
    fn mutual_information_landmarks() {
        let independent = JointDist::new(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        assert_eq!(mutual_information(&independent), 0.0);
        let diagonal = JointDist::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!((mutual_information(&diagonal) - 2.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_matches_entropy_identity() {
        // I(X;Y) = H(r) + H(c) - H(joint), checked on an asymmetric table.
        let joint = JointDist::new(vec![vec![0.3, 0.1, 0.05], vec![0.05, 0.25, 0.25]]).unwrap();
        let (r, c) = joint.marginals();
        let h = |v: &[f64]| -> f64 {
            v.iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| -x * x.ln())
                .sum()
        };
        let flat: Vec<f64> = joint.table().iter().flatten().copied().collect();
        let expected = h(&r) + h(&c) - h(&flat);
        assert!((mutual_information(&joint) - expected).abs() < 1e-12);
    }

    #[test]
    fn overlap_coupling_marginals_are_exact() {
        let p = d(&[0.6, 0.3, 0.1]);
        let q = d(&[0.2, 0.2, 0.6]);
        let joint = overlap_coupling(&p, &q).unwrap();
        let (r, c) = joint.marginals();
        for i in 0..3 {
            assert!((r[i] - p.probs()[i]).abs() < 1e-12);
            assert!((c[i] - q.probs()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_coupling_of_identical_dists_is_diagonal() {
        let p = d(&[0.25, 0.75]);
        let joint = overlap_coupling(&p, &p).unwrap();
        assert_eq!(joint.table()[0][1], 0.0);
        assert_eq!(joint.table()[1][0], 0.0);
        let mi = mutual_information(&joint);
        assert!((mi - entropy(&p)).abs() < 1e-12, "self-MI equals entropy");
    }

    #[test]
    fn overlap_coupling_of_disjoint_dists_is_independent() {
        let p = d(&[1.0, 0.0]);
        let q = d(&[0.0, 1.0]);
        let joint = overlap_coupling(&p, &q).unwrap();
        assert_eq!(mutual_information(&joint), 0.0);
    }

    #[test]
    fn phase_classification_landmarks() {
        let t = PhaseThresholds::default();
        assert_eq!(classify_phase(0.9, &t).unwrap(), Phase::Exploration);
        assert_eq!(classify_phase(0.8, &t).unwrap(), Phase::Exploration);
        assert_eq!(classify_phase(0.7, &t).unwrap(), Phase::Transition);
        assert_eq!(classify_phase(0.6, &t).unwrap(), Phase::Transition);
        assert_eq!(classify_phase(0.5, &t).unwrap(), Phase::Convergence);
        assert_eq!(classify_phase(1.5, &t), Err(MetricsError::InvalidKappa));
        let bad = PhaseThresholds {
            exploration_min: 0.5,
            transition_min: 0.6,
        };
        assert_eq!(classify_phase(0.7, &bad), Err(MetricsError::InvalidThresholds));
    }

    fn record(round: u32, p: &[f64], q: &[f64], kappa: f64, crit: Option<f64>) -> DebateRoundRecord {
        DebateRoundRecord {
            round,
            p_plus: d(p),
            p_minus: d(q),
            kappa,
            crit_avg: crit,
            joint: None,
        }
    }

    #[test]
    fn diagnostics_on_identical_stances_zero_out() {
        let h = [record(0, &[0.5, 0.5], &[0.5, 0.5], 0.9, None)];
        let rows = debate_diagnostics(&h, DEFAULT_EPSILON, &PhaseThresholds::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].jsd, 0.0);
        assert_eq!(rows[0].w1, 0.0);
        assert!((rows[0].mi - 2.0_f64.ln()).abs() < 1e-12);
        assert!(rows[0].exploration_quality.abs() < 1e-12);
        assert_eq!(rows[0].convergence_rate, None);
        assert_eq!(rows[0].anchoring_success, None);
        assert_eq!(rows[0].phase, Phase::Exploration);
    }

    #[test]
    fn exploration_quality_is_minus_twice_jsd() {
        let h = [record(0, &[0.7, 0.2, 0.1], &[0.1, 0.3, 0.6], 0.7, None)];
        let rows = debate_diagnostics(&h, DEFAULT_EPSILON, &PhaseThresholds::default()).unwrap();
        assert!(
            (rows[0].exploration_quality + 2.0 * rows[0].jsd).abs() < 1e-12,
            "H+ + H- - 2H(m) must equal -2 JSD"
        );
    }

    #[test]
    fn convergence_rate_tracks_wasserstein_steps() {
        let h = [
            record(0, &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], 0.9, None),
            record(1, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 0.7, None),
            record(2, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0.5, None),
        ];
        let rows = debate_diagnostics(&h, DEFAULT_EPSILON, &PhaseThresholds::default()).unwrap();
        assert_eq!(rows[0].convergence_rate, None);
        assert_eq!(rows[1].convergence_rate, Some(1.0), "W dropped 2 -> 1");
        assert_eq!(rows[2].convergence_rate, Some(1.0), "W dropped 1 -> 0");
        assert_eq!(rows[0].phase, Phase::Exploration);
        assert_eq!(rows[1].phase, Phase::Transition);
        assert_eq!(rows[2].phase, Phase::Convergence);
    }

    #[test]
    fn anchoring_success_needs_consistent_critiques() {
        let mixed = [
            record(0, &[0.5, 0.5], &[0.5, 0.5], 0.9, Some(0.8)),
            record(1, &[0.5, 0.5], &[0.5, 0.5], 0.9, None),
        ];
        assert_eq!(
            debate_diagnostics(&mixed, DEFAULT_EPSILON, &PhaseThresholds::default()),
            Err(MetricsError::MissingCrit)
        );
        let scored = [record(0, &[0.9, 0.1], &[0.8, 0.2], 0.9, Some(0.5))];
        let rows =
            debate_diagnostics(&scored, DEFAULT_EPSILON, &PhaseThresholds::default()).unwrap();
        let row = &rows[0];
        let expected = row.mi * 0.5 / (row.jsd + DEFAULT_EPSILON);
        assert!((row.anchoring_success.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_reject_unordered_rounds() {
        let h = [
            record(1, &[0.5, 0.5], &[0.5, 0.5], 0.9, None),
            record(1, &[0.5, 0.5], &[0.5, 0.5], 0.9, None),
        ];
        assert_eq!(
            debate_diagnostics(&h, DEFAULT_EPSILON, &PhaseThresholds::default()),
            Err(MetricsError::UnorderedRounds)
        );
    }

    #[test]
    fn explicit_joint_overrides_the_default_coupling() {
        let independent = JointDist::new(vec![vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap();
        let mut rec = record(0, &[0.5, 0.5], &[0.5, 0.5], 0.9, None);
        rec.joint = Some(independent);
        let rows =
            debate_diagnostics(&[rec], DEFAULT_EPSILON, &PhaseThresholds::default()).unwrap();
        assert_eq!(rows[0].mi, 0.0, "observed joint says independent");
    }

    #[test]
    fn synthesis_balance_is_one_for_symmetric_stances() {
        let plus = d(&[0.7, 0.2, 0.1]);
        let minus = d(&[0.1, 0.2, 0.7]);
        let arb = Dist::uniform(3).unwrap();
        let q = synthesis_quality(&arb, &plus, &minus, None).unwrap();
        assert!((q.balance - 1.0).abs() < 1e-12, "equidistant arbiter");
        assert!((q.coverage - 3.0_f64.ln()).abs() < 1e-12);
        assert!(q.convergence >= 0.0);
    }

    #[test]
    fn synthesis_convergence_peaks_when_arbiter_matches_mixture() {
        let plus = d(&[0.6, 0.4]);
        let minus = d(&[0.2, 0.8]);
        let mixture = plus.mixture(&minus).unwrap();
        let matched = synthesis_quality(&mixture, &plus, &minus, None).unwrap();
        let off = synthesis_quality(&d(&[0.95, 0.05]), &plus, &minus, None).unwrap();
        assert!(
            matched.convergence > off.convergence,
            "matching the mixture maximizes shared information"
        );
        assert!((matched.convergence - entropy(&mixture)).abs() < 1e-12);
    }
}
