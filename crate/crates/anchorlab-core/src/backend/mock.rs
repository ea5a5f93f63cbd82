//! A deterministic pattern-repository mock backend.
//!
//! Each configured base gets an embedding cluster on the unit sphere whose
//! pattern density matches its configured `rho`, with task queries placed at
//! cosine distance `d` from the cluster center. Generation answers multi-base
//! addition prompts correctly with probability
//! `sigmoid(alpha * rho - beta * d + gamma * ln k)` (log term dropped at
//! `k = 0`), and emits a configurable decoy otherwise. Everything is a pure
//! function of the config seed, the request seed, and the text.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::anchor::{success_probability, AnchorParams, EmbeddingVector};
use crate::arith::{base_add, parse_numeral, render_numeral};
use crate::backend::{Backend, BackendError, Capabilities, GenerationRequest};
use crate::util::{fnv1a, mix_seed};

#[cfg(not(feature = "std"))]
use num_traits::Float;

const CENTER_SALT: u64 = 0xC0;
const AXIS_SALT: u64 = 0x57;
const CLUSTER_SALT: u64 = 0xE1;
const JITTER_SALT: u64 = 0x71;
const GENERIC_SALT: u64 = 0x6E;
const ANSWER_SALT: u64 = 0xAC;

/// What the mock emits when it answers incorrectly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoyMode {
    /// Adds the operands in base ten and leaks the decimal numeral bare.
    /// (Unusable for base-ten domains, where the leak is the right answer.)
    DecimalLeak,
    /// A wrong same-length numeral in the task base, suffix and all.
    RandomDigit,
}

/// Per-base behavior of the mock repository.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockDomain {
    /// Pattern density of the base's exemplar cluster (>= 1).
    pub rho: f64,
    /// Cosine distance from task queries to the cluster center, in `[0, 2]`.
    pub d: f64,
    /// Wrong-answer style.
    pub decoy: DecoyMode,
}

/// Full mock configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MockRepositoryConfig {
    /// Configured bases and their cluster parameters.
    pub domains: BTreeMap<u32, MockDomain>,
    /// Weights of the correctness law.
    pub params: AnchorParams,
    /// Embedding dimension (>= 4; larger concentrates the geometry better).
    pub embed_dim: usize,
    /// Master seed; every draw derives from it.
    pub seed: u64,
}

struct BaseGeometry {
    center: Vec<f64>,
    axis: Vec<f64>,
    epsilon: f64,
}

/// The deterministic mock backend.
pub struct MockBackend {
    config: MockRepositoryConfig,
    geometry: BTreeMap<u32, BaseGeometry>,
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Subtracts the projection of `v` onto the unit vector `u`.
fn reject(v: &mut [f64], u: &[f64]) {
    let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
    for (x, &b) in v.iter_mut().zip(u) {
        *x -= dot * b;
    }
}

fn gaussian(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

impl MockBackend {
    /// Validates the configuration and lays out the per-base geometry.
    pub fn new(config: MockRepositoryConfig) -> Result<Self, BackendError> {
        if config.embed_dim < 4 {
            return Err(BackendError::InvalidConfig {
                detail: String::from("embed_dim must be at least 4"),
            });
        }
        if config.domains.is_empty() {
            return Err(BackendError::InvalidConfig {
                detail: String::from("no domains configured"),
            });
        }
        AnchorParams::new(config.params.alpha, config.params.beta, config.params.gamma)
            .map_err(|_| BackendError::InvalidConfig {
                detail: String::from("law weights must be finite and non-negative"),
            })?;
        let mut geometry = BTreeMap::new();
        for (&base, domain) in &config.domains {
            if !(2..=36).contains(&base) {
                return Err(BackendError::InvalidConfig {
                    detail: format!("base {base} out of range"),
                });
            }
            if !domain.rho.is_finite() || domain.rho < 1.0 {
                return Err(BackendError::InvalidConfig {
                    detail: format!("rho for base {base} must be >= 1"),
                });
            }
            if !domain.d.is_finite() || !(0.0..=2.0).contains(&domain.d) {
                return Err(BackendError::InvalidConfig {
                    detail: format!("d for base {base} must lie in [0, 2]"),
                });
            }
            if base == 10 && domain.decoy == DecoyMode::DecimalLeak {
                return Err(BackendError::InvalidConfig {
                    detail: String::from("decimal leak is indistinguishable in base 10"),
                });
            }
            let mut center = gaussian(
                mix_seed(&[config.seed, base as u64, CENTER_SALT]),
                config.embed_dim,
            );
            normalize(&mut center);
            let mut axis = gaussian(
                mix_seed(&[config.seed, base as u64, AXIS_SALT]),
                config.embed_dim,
            );
            reject(&mut axis, &center);
            normalize(&mut axis);
            // Cluster points are (center + eps * eta) / sqrt(1 + eps^2) with
            // eta a unit normal direction; random unit directions sit sqrt(2)
            // apart, so the mean pairwise (chord) distance is
            // eps * sqrt(2 / (1 + eps^2)) and inverting 1/rho gives eps.
            let epsilon = (1.0 / (2.0 * domain.rho * domain.rho - 1.0)).sqrt();
            geometry.insert(
                base,
                BaseGeometry {
                    center,
                    axis,
                    epsilon,
                },
            );
        }
        Ok(Self { config, geometry })
    }

    /// The configured repository.
    pub fn config(&self) -> &MockRepositoryConfig {
        &self.config
    }

    /// Correct-answer probability for `base` at shot count `k`.
    pub fn accuracy_law(&self, base: u32, k: usize) -> Result<f64, BackendError> {
        let domain = self
            .config
            .domains
            .get(&base)
            .ok_or(BackendError::UnknownDomain { base })?;
        let p = &self.config.params;
        let capacity = if k == 0 { 0.0 } else { p.gamma * (k as f64).ln() };
        Ok(success_probability(
            p.alpha * domain.rho - p.beta * domain.d + capacity,
        ))
    }

    fn cluster_point(&self, geo: &BaseGeometry, text: &str) -> Vec<f64> {
        let mut eta = gaussian(
            mix_seed(&[self.config.seed, fnv1a(text.as_bytes()), CLUSTER_SALT]),
            self.config.embed_dim,
        );
        reject(&mut eta, &geo.center);
        normalize(&mut eta);
        let mut v: Vec<f64> = geo
            .center
            .iter()
            .zip(&eta)
            .map(|(c, e)| c + geo.epsilon * e)
            .collect();
        normalize(&mut v);
        v
    }

    fn query_point(&self, geo: &BaseGeometry, domain: &MockDomain, text: &str) -> Vec<f64> {
        let radial = 1.0 - domain.d;
        let tangential = (1.0 - radial * radial).max(0.0).sqrt();
        let mut jitter = gaussian(
            mix_seed(&[self.config.seed, fnv1a(text.as_bytes()), JITTER_SALT]),
            self.config.embed_dim,
        );
        reject(&mut jitter, &geo.center);
        reject(&mut jitter, &geo.axis);
        normalize(&mut jitter);
        let mut v: Vec<f64> = (0..self.config.embed_dim)
            .map(|i| radial * geo.center[i] + tangential * geo.axis[i] + 0.02 * jitter[i])
            .collect();
        normalize(&mut v);
        v
    }

    fn generic_point(&self, text: &str) -> Vec<f64> {
        let mut v = gaussian(
            mix_seed(&[self.config.seed, fnv1a(text.as_bytes()), GENERIC_SALT]),
            self.config.embed_dim,
        );
        normalize(&mut v);
        v
    }

    fn decoy_numeral(&self, base: u32, lhs: &str, rhs: &str, answer: &str, rng: &mut ChaCha8Rng) -> String {
        match self.config.domains[&base].decoy {
            DecoyMode::DecimalLeak => {
                let sum = parse_numeral(lhs, base).unwrap() + parse_numeral(rhs, base).unwrap();
                render_numeral(sum, 10).expect("base 10 render cannot fail")
            }
            DecoyMode::RandomDigit => {
                let answer_value = parse_numeral(answer, base).unwrap();
                let len = answer.len() as u32;
                let b = base as u64;
                let lo = b.pow(len - 1);
                let hi = b.pow(len) - 1;
                for _ in 0..32 {
                    let candidate = rng.gen_range(lo..=hi);
                    if candidate != answer_value {
                        let numeral = render_numeral(candidate, base).unwrap();
                        return format!("{numeral}_{base}");
                    }
                }
                // Thirty-two collisions in a row: step off the answer instead.
                let candidate = if answer_value >= hi { lo } else { answer_value + 1 };
                let numeral = render_numeral(candidate, base).unwrap();
                format!("{numeral}_{base}")
            }
        }
    }
}

/// Parse `[base=B] LHS_B + RHS_B = ?` into its parts.
fn parse_query(query: &str) -> Option<(u32, String, String)> {
    let rest = query.strip_prefix("[base=")?;
    let close = rest.find(']')?;
    let base: u32 = rest[..close].parse().ok()?;
    let body = rest[close + 1..].trim();
    let (sum, tail) = body.split_once(" = ")?;
    if tail.trim() != "?" {
        return None;
    }
    let (lhs, rhs) = sum.split_once(" + ")?;
    let suffix = format!("_{base}");
    let lhs = lhs.trim().strip_suffix(&suffix)?;
    let rhs = rhs.trim().strip_suffix(&suffix)?;
    if lhs.is_empty() || rhs.is_empty() {
        return None;
    }
    Some((base, String::from(lhs), String::from(rhs)))
}

/// Classify arbitrary text for embedding purposes.
enum TextKind {
    /// A task prompt still ending in `?`.
    Query(u32),
    /// A completed exemplar, answer fragment, or bare numeral of a base.
    Completed(u32),
    /// Anything else.
    Generic,
}

fn classify(text: &str) -> TextKind {
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix("[base=") {
        if let Some(close) = rest.find(']') {
            if let Ok(base) = rest[..close].parse::<u32>() {
                return if trimmed.ends_with('?') {
                    TextKind::Query(base)
                } else {
                    TextKind::Completed(base)
                };
            }
        }
        return TextKind::Generic;
    }
    // Bare numerals: "67_8" claims base 8; undecorated digits read as decimal.
    if let Some((head, tail)) = trimmed.rsplit_once('_') {
        if let Ok(base) = tail.parse::<u32>() {
            if (2..=36).contains(&base) && !head.is_empty() && parse_numeral(head, base).is_ok() {
                return TextKind::Completed(base);
            }
        }
    }
    if !trimmed.is_empty() && trimmed.chars().all(|c| c.is_ascii_digit()) {
        return TextKind::Completed(10);
    }
    TextKind::Generic
}

impl Backend for MockBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let (base, lhs, rhs) =
            parse_query(&request.query).ok_or_else(|| BackendError::UnparseableQuery {
                query: request.query.clone(),
            })?;
        if !self.config.domains.contains_key(&base) {
            return Err(BackendError::UnknownDomain { base });
        }
        let answer = base_add(base, &lhs, &rhs).map_err(|_| BackendError::UnparseableQuery {
            query: request.query.clone(),
        })?;
        let k = request.shots.len();
        let p_correct = self.accuracy_law(base, k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[
            self.config.seed,
            request.seed.unwrap_or(0),
            fnv1a(request.query.as_bytes()),
            k as u64,
            ANSWER_SALT,
        ]));
        if rng.gen::<f64>() < p_correct {
            Ok(format!("{answer}_{base}"))
        } else {
            Ok(self.decoy_numeral(base, &lhs, &rhs, &answer, &mut rng))
        }
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        let values = match classify(text) {
            TextKind::Query(base) => match (self.geometry.get(&base), self.config.domains.get(&base)) {
                (Some(geo), Some(domain)) => self.query_point(geo, domain, text),
                _ => self.generic_point(text),
            },
            TextKind::Completed(base) => match self.geometry.get(&base) {
                Some(geo) => self.cluster_point(geo, text),
                None => self.generic_point(text),
            },
            TextKind::Generic => self.generic_point(text),
        };
        EmbeddingVector::new(values).map_err(|e| BackendError::MalformedResponse {
            detail: format!("mock produced an invalid embedding: {e}"),
        })
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            name: String::from("mock-pattern-repository"),
            supports_embeddings: true,
            max_context: 32_768,
        }
    }
}
