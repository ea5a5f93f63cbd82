//! Anchoring-strength estimation over embedding clusters.
//!
//! An anchor set (worked examples for one task family) induces a pattern
//! density `rho_d`; a model response sits at some representational distance
//! `d_r` from the set's centroid. The anchoring strength
//! `S = alpha * rho_d - beta * d_r - gamma * ln(k)` combines both with a
//! capacity penalty in the anchor count `k`, and `sigmoid(S)` is the success
//! scale that the simulator and the mock backend share.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::backend::{Backend, BackendError, GenerationRequest};

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Mean pairwise distances below this are treated as a degenerate cluster.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Norms below this cannot give a meaningful cosine.
pub const NORM_FLOOR: f64 = 1e-12;

/// Errors from anchoring-geometry operations.
#[derive(Debug, Clone, PartialEq)]
pub enum AnchorError {
    /// Embedding vector with zero dimensions.
    EmptyVector,
    /// An input coordinate or parameter was NaN or infinite.
    NonFiniteInput,
    /// Vectors of different dimension were combined.
    DimensionMismatch {
        /// Dimension of the first operand.
        left: usize,
        /// Dimension of the offending operand.
        right: usize,
    },
    /// Pattern density needs at least two vectors.
    FewerThanTwoVectors,
    /// Mean pairwise distance collapsed to (numerical) zero.
    DegenerateCluster,
    /// Cosine distance against a zero-norm vector.
    ZeroNormVector,
    /// Density arguments must be strictly positive.
    NonPositiveDensity,
    /// Representational distances cannot be negative.
    NegativeDistance,
    /// A backend call inside estimation failed.
    Backend(BackendError),
}

impl core::fmt::Display for AnchorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AnchorError::EmptyVector => write!(f, "embedding vector has zero dimensions"),
            AnchorError::NonFiniteInput => write!(f, "input contains a non-finite value"),
            AnchorError::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            AnchorError::FewerThanTwoVectors => {
                write!(f, "pattern density needs at least two vectors")
            }
            AnchorError::DegenerateCluster => {
                write!(f, "cluster is degenerate (zero mean pairwise distance)")
            }
            AnchorError::ZeroNormVector => write!(f, "cosine distance with a zero-norm vector"),
            AnchorError::NonPositiveDensity => write!(f, "density must be strictly positive"),
            AnchorError::NegativeDistance => write!(f, "distance must be non-negative"),
            AnchorError::Backend(e) => write!(f, "backend failure during estimation: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AnchorError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            AnchorError::Backend(e) => Some(e),
            _ => None,
        }
    }
}

impl From<BackendError> for AnchorError {
    fn from(e: BackendError) -> Self {
        AnchorError::Backend(e)
    }
}

/// A dense embedding vector with finite coordinates and dimension >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Validates and wraps raw coordinates.
    pub fn new(values: Vec<f64>) -> Result<Self, AnchorError> {
        if values.is_empty() {
            return Err(AnchorError::EmptyVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AnchorError::NonFiniteInput);
        }
        Ok(Self { values })
    }

    /// Number of dimensions.
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Raw coordinates.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn check_dim(&self, other: &Self) -> Result<(), AnchorError> {
        if self.dim() != other.dim() {
            return Err(AnchorError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    /// Euclidean distance to another vector of the same dimension.
    pub fn euclidean_distance(&self, other: &Self) -> Result<f64, AnchorError> {
        self.check_dim(other)?;
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum.sqrt())
    }

    /// Coordinate-wise mean of a non-empty set of same-dimension vectors.
    pub fn centroid(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector, AnchorError> {
        let first = vectors.first().ok_or(AnchorError::FewerThanTwoVectors)?;
        let mut acc = alloc::vec![0.0; first.dim()];
        for v in vectors {
            first.check_dim(v)?;
            for (slot, x) in acc.iter_mut().zip(v.values()) {
                *slot += x;
            }
        }
        let inv = 1.0 / vectors.len() as f64;
        for slot in acc.iter_mut() {
            *slot *= inv;
        }
        EmbeddingVector::new(acc)
    }
}

/// Weights of the anchoring-strength score; all finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorParams {
    /// Weight on pattern density.
    pub alpha: f64,
    /// Weight on representational distance.
    pub beta: f64,
    /// Weight on the log capacity penalty.
    pub gamma: f64,
}

impl AnchorParams {
    /// Validated constructor.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, AnchorError> {
        for v in [alpha, beta, gamma] {
            if !v.is_finite() {
                return Err(AnchorError::NonFiniteInput);
            }
            if v < 0.0 {
                return Err(AnchorError::NegativeDistance);
            }
        }
        Ok(Self { alpha, beta, gamma })
    }
}

impl Default for AnchorParams {
    /// Unit weights, used whenever no calibration has been fitted.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

/// Pairwise metric used by [`pattern_density`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DistanceMetric {
    /// Euclidean (L2) distance; the default.
    #[default]
    Euclidean,
    /// Cosine distance `1 - cos`.
    Cosine,
}

/// Inverse mean pairwise Euclidean distance of an embedding set.
pub fn pattern_density(embeddings: &[EmbeddingVector]) -> Result<f64, AnchorError> {
    pattern_density_with(embeddings, DistanceMetric::Euclidean)
}

/// [`pattern_density`] under a caller-chosen pairwise metric.
pub fn pattern_density_with(
    embeddings: &[EmbeddingVector],
    metric: DistanceMetric,
) -> Result<f64, AnchorError> {
    if embeddings.len() < 2 {
        return Err(AnchorError::FewerThanTwoVectors);
    }
    let mut total = 0.0;
    let mut pairs = 0u64;
    for i in 0..embeddings.len() {
        for j in (i + 1)..embeddings.len() {
            let d = match metric {
                DistanceMetric::Euclidean => embeddings[i].euclidean_distance(&embeddings[j])?,
                DistanceMetric::Cosine => semantic_distance(&embeddings[i], &embeddings[j])?,
            };
            total += d;
            pairs += 1;
        }
    }
    let mean = total / pairs as f64;
    if !(mean > DENSITY_FLOOR) {
        return Err(AnchorError::DegenerateCluster);
    }
    Ok(1.0 / mean)
}

/// Cosine distance `1 - cos(a, b)`, clamped into `[0, 2]`.
pub fn semantic_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, AnchorError> {
    a.check_dim(b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na < NORM_FLOOR || nb < NORM_FLOOR {
        return Err(AnchorError::ZeroNormVector);
    }
    let cos = a.dot(b) / (na * nb);
    // Rounding can push |cos| a hair past 1; clamp to the valid range.
    Ok((1.0 - cos).clamp(0.0, 2.0))
}

/// Anchoring strength `alpha * rho_d - beta * d_r - gamma * ln(k)`.
///
/// The capacity penalty vanishes at `k <= 1`: a single anchor carries no
/// interference, and `k = 0` (zero-shot) skips the log term entirely.
pub fn anchoring_strength(
    params: &AnchorParams,
    rho_d: f64,
    d_r: f64,
    k: usize,
) -> Result<f64, AnchorError> {
    if !rho_d.is_finite() || !d_r.is_finite() {
        return Err(AnchorError::NonFiniteInput);
    }
    if rho_d <= 0.0 {
        return Err(AnchorError::NonPositiveDensity);
    }
    if d_r < 0.0 {
        return Err(AnchorError::NegativeDistance);
    }
    let capacity = if k == 0 {
        0.0
    } else {
        params.gamma * (k as f64).ln()
    };
    Ok(params.alpha * rho_d - params.beta * d_r - capacity)
}

/// Numerically stable logistic `1 / (1 + exp(-s))`.
pub fn success_probability(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Critical anchoring thresholds per adaptation method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSet {
    /// In-context anchoring against the base density `rho`.
    pub few_shot: f64,
    /// Weight updates raise density to `rho_prime`.
    pub fine_tune: f64,
    /// Retrieval adds external density `rho_ext` on top of `rho`.
    pub rag: f64,
}

/// Thresholds `beta * d_r / rho` for each adaptation method's density.
pub fn critical_thresholds(
    beta: f64,
    d_r: f64,
    rho: f64,
    rho_prime: f64,
    rho_ext: f64,
) -> Result<ThresholdSet, AnchorError> {
    for v in [beta, d_r, rho, rho_prime, rho_ext] {
        if !v.is_finite() {
            return Err(AnchorError::NonFiniteInput);
        }
    }
    if beta < 0.0 || d_r < 0.0 || rho_ext < 0.0 {
        return Err(AnchorError::NegativeDistance);
    }
    if rho <= 0.0 || rho_prime <= 0.0 {
        return Err(AnchorError::NonPositiveDensity);
    }
    Ok(ThresholdSet {
        few_shot: beta * d_r / rho,
        fine_tune: beta * d_r / rho_prime,
        rag: beta * d_r / (rho + rho_ext),
    })
}

/// Joins an anchor `(input, output)` pair into the text that gets embedded.
///
/// A trailing `?` placeholder in the input is replaced by the output, so a
/// prompt like `".. = ?"` becomes the completed line `".. = 67_8"`.
pub fn anchor_text(input: &str, output: &str) -> String {
    let trimmed = input.trim_end();
    match trimmed.strip_suffix('?') {
        Some(stem) => format!("{stem}{output}"),
        None => format!("{trimmed} {output}"),
    }
}

/// The zero-shot request issued while estimating anchoring strength.
pub fn zero_shot_request(query: &str) -> GenerationRequest {
    GenerationRequest::new(query)
}

/// Measured anchoring geometry for one query against one anchor set.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorEstimate {
    /// Pattern density of the embedded anchor set.
    pub rho_d: f64,
    /// Cosine distance from the zero-shot response to the anchor centroid.
    pub d_r: f64,
    /// Number of anchors.
    pub k: usize,
    /// Combined anchoring strength.
    pub strength: f64,
}

/// Estimates anchoring strength for `query` against a set of worked examples.
///
/// Pipeline: generate a zero-shot response, embed it, embed each completed
/// anchor, and combine density, centroid distance, and anchor count into `S`.
/// Fewer than two anchors cannot define a cluster and are rejected.
pub fn estimate_anchoring_strength(
    backend: &dyn Backend,
    query: &str,
    anchors: &[(String, String)],
    params: &AnchorParams,
) -> Result<AnchorEstimate, AnchorError> {
    if anchors.len() < 2 {
        return Err(AnchorError::DegenerateCluster);
    }
    let response = backend.generate(&zero_shot_request(query))?;
    let response_embedding = backend.embed(&response)?;
    let mut anchor_embeddings = Vec::with_capacity(anchors.len());
    for (input, output) in anchors {
        anchor_embeddings.push(backend.embed(&anchor_text(input, output))?);
    }
    let rho_d = pattern_density(&anchor_embeddings)?;
    let centroid = EmbeddingVector::centroid(&anchor_embeddings)?;
    let d_r = semantic_distance(&response_embedding, &centroid)?;
    let strength = anchoring_strength(params, rho_d, d_r, anchors.len())?;
    Ok(AnchorEstimate {
        rho_d,
        d_r,
        k: anchors.len(),
        strength,
    })
}
