//! Experiment configuration: defaults, a flat key=value config file, and
//! CLI-flag overrides, with flags winning over the file and the file over
//! defaults. The effective config has a canonical serialization whose SHA-256
//! digest ties every run record back to the exact settings that produced it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anchorlab_core::anchor::AnchorParams;
use anchorlab_core::backend::mock::{DecoyMode, MockBackend, MockDomain, MockRepositoryConfig};
use sha2::{Digest, Sha256};

use crate::reference;
use crate::wire::{PromptMode, WireSettings};
use crate::HarnessError;

/// Which backend a run talks to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// The deterministic in-process pattern repository.
    Mock,
    /// An OpenAI-compatible HTTP endpoint.
    Wire,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::Mock => write!(f, "mock"),
            BackendKind::Wire => write!(f, "wire"),
        }
    }
}

/// Which bundle split a run evaluates. Exemplars always come from the
/// two-digit training split; selecting a longer-operand split measures
/// scope transfer beyond the anchored operand range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalSplit {
    /// Two-digit in-distribution items.
    #[default]
    Id2d,
    /// Three-digit out-of-scope items.
    Ood3,
    /// Four-digit out-of-scope items.
    Ood4,
}

impl fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalSplit::Id2d => write!(f, "id2d"),
            EvalSplit::Ood3 => write!(f, "ood3"),
            EvalSplit::Ood4 => write!(f, "ood4"),
        }
    }
}

/// The resolved settings of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Backend selection.
    pub backend: BackendKind,
    /// Bases under evaluation.
    pub bases: Vec<u32>,
    /// Shot counts per cell, ascending.
    pub k_grid: Vec<u32>,
    /// Items evaluated per (base, k) cell; at most the ID split size.
    pub items_per_cell: u32,
    /// Which bundle split those items come from.
    pub eval_split: EvalSplit,
    /// Anchor-set draws per base in the density probe.
    pub probe_samples: u32,
    /// Master seed; every stream derives from it.
    pub seed: u64,
    /// Output directory for report files.
    pub out_dir: PathBuf,
    /// Worker threads for per-item requests (1 = serial).
    pub parallel: usize,
    /// Requests per minute admitted to the backend; 0 = unlimited.
    pub rate_limit_rpm: u32,
    /// Law weights shared by mock calibration and strength estimation.
    pub params: AnchorParams,
    /// Mock embedding dimension.
    pub embed_dim: usize,
    /// Per-base mock domains; calibrated defaults unless overridden.
    pub mock_domains: BTreeMap<u32, MockDomain>,
    /// Wire endpoint settings.
    pub wire: WireSettings,
}

/// `items_per_cell` may not exceed the ID split size.
pub const MAX_ITEMS_PER_CELL: u32 = 250;

impl Default for ExperimentConfig {
    fn default() -> Self {
        let params = reference::calibration_params();
        let bases = vec![10, 8, 9];
        ExperimentConfig {
            backend: BackendKind::Mock,
            mock_domains: reference::calibrated_domains(&bases, &params),
            bases,
            k_grid: vec![0, 1, 2, 4, 8, 16],
            items_per_cell: MAX_ITEMS_PER_CELL,
            eval_split: EvalSplit::Id2d,
            probe_samples: 100,
            seed: 0,
            out_dir: PathBuf::from("out"),
            parallel: 1,
            rate_limit_rpm: 0,
            params,
            embed_dim: 64,
            wire: WireSettings::default(),
        }
    }
}

/// CLI-flag overrides; `None` means the flag was not given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// --backend
    pub backend: Option<String>,
    /// --bases
    pub bases: Option<String>,
    /// --k-grid
    pub k_grid: Option<String>,
    /// --items
    pub items: Option<u32>,
    /// --split
    pub split: Option<String>,
    /// --samples
    pub samples: Option<u32>,
    /// --seed
    pub seed: Option<u64>,
    /// --out
    pub out: Option<PathBuf>,
    /// --parallel
    pub parallel: Option<usize>,
    /// --rate-limit
    pub rate_limit: Option<u32>,
}

impl ExperimentConfig {
    /// Builds the effective config: defaults, then the file, then flags.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, HarnessError> {
        let mut keys: BTreeMap<String, String> = BTreeMap::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            parse_key_values(&text, &mut keys)?;
        }
        apply_overrides(overrides, &mut keys);
        Self::from_keys(&keys)
    }

    fn from_keys(keys: &BTreeMap<String, String>) -> Result<Self, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        let mut mock_overrides: BTreeMap<u32, (Option<f64>, Option<f64>, Option<DecoyMode>)> =
            BTreeMap::new();

        for (key, value) in keys {
            match key.as_str() {
                "backend" => {
                    cfg.backend = match value.as_str() {
                        "mock" => BackendKind::Mock,
                        "wire" => BackendKind::Wire,
                        other => {
                            return Err(HarnessError::config(format!(
                                "backend must be mock or wire, got {other}"
                            )))
                        }
                    }
                }
                "bases" => cfg.bases = parse_list(value, key)?,
                "k_grid" => cfg.k_grid = parse_list(value, key)?,
                "items" => cfg.items_per_cell = parse_scalar(value, key)?,
                "split" => {
                    cfg.eval_split = match value.as_str() {
                        "id2d" => EvalSplit::Id2d,
                        "ood3" => EvalSplit::Ood3,
                        "ood4" => EvalSplit::Ood4,
                        other => {
                            return Err(HarnessError::config(format!(
                                "split must be id2d, ood3, or ood4, got {other}"
                            )))
                        }
                    }
                }
                "probe_samples" => cfg.probe_samples = parse_scalar(value, key)?,
                "seed" => cfg.seed = parse_scalar(value, key)?,
                "out" => cfg.out_dir = PathBuf::from(value),
                "parallel" => cfg.parallel = parse_scalar(value, key)?,
                "rate_limit" => cfg.rate_limit_rpm = parse_scalar(value, key)?,
                "alpha" => cfg.params.alpha = parse_scalar(value, key)?,
                "beta" => cfg.params.beta = parse_scalar(value, key)?,
                "gamma" => cfg.params.gamma = parse_scalar(value, key)?,
                "embed_dim" => cfg.embed_dim = parse_scalar(value, key)?,
                "wire_url" => cfg.wire.url = value.clone(),
                "wire_model" => cfg.wire.model = value.clone(),
                "wire_embed_model" => {
                    cfg.wire.embed_model = if value.is_empty() {
                        None
                    } else {
                        Some(value.clone())
                    }
                }
                "wire_api_key_env" => {
                    cfg.wire.api_key_env = if value.is_empty() {
                        None
                    } else {
                        Some(value.clone())
                    }
                }
                "wire_prompt_mode" => {
                    cfg.wire.prompt_mode = match value.as_str() {
                        "chat" => PromptMode::ChatTurns,
                        "concat" => PromptMode::Concat,
                        other => {
                            return Err(HarnessError::config(format!(
                                "wire_prompt_mode must be chat or concat, got {other}"
                            )))
                        }
                    }
                }
                "wire_timeout_s" => cfg.wire.timeout_s = parse_scalar(value, key)?,
                "wire_retries" => cfg.wire.retries = parse_scalar(value, key)?,
                "temperature" => cfg.wire.temperature = parse_scalar(value, key)?,
                "max_tokens" => cfg.wire.max_tokens = parse_scalar(value, key)?,
                _ => {
                    if let Some(rest) = key.strip_prefix("mock_") {
                        let (field, base) = rest.split_once('_').ok_or_else(|| {
                            HarnessError::config(format!("unknown config key {key}"))
                        })?;
                        let base: u32 = base.parse().map_err(|_| {
                            HarnessError::config(format!("bad base in config key {key}"))
                        })?;
                        let entry = mock_overrides.entry(base).or_default();
                        match field {
                            "rho" => entry.0 = Some(parse_scalar(value, key)?),
                            "d" => entry.1 = Some(parse_scalar(value, key)?),
                            "decoy" => {
                                entry.2 = Some(match value.as_str() {
                                    "decimal-leak" => DecoyMode::DecimalLeak,
                                    "random-digit" => DecoyMode::RandomDigit,
                                    other => {
                                        return Err(HarnessError::config(format!(
                                            "decoy must be decimal-leak or random-digit, got {other}"
                                        )))
                                    }
                                })
                            }
                            _ => {
                                return Err(HarnessError::config(format!(
                                    "unknown config key {key}"
                                )))
                            }
                        }
                    } else {
                        return Err(HarnessError::config(format!("unknown config key {key}")));
                    }
                }
            }
        }

        // Mock domains: calibrated defaults for the configured bases, then
        // per-base overrides on top.
        cfg.mock_domains = reference::calibrated_domains(&cfg.bases, &cfg.params);
        for (base, (rho, d, decoy)) in mock_overrides {
            let domain = cfg.mock_domains.entry(base).or_insert(MockDomain {
                rho: 9.5,
                d: 1.8,
                decoy: if base == 10 {
                    DecoyMode::RandomDigit
                } else {
                    DecoyMode::DecimalLeak
                },
            });
            if let Some(rho) = rho {
                domain.rho = rho;
            }
            if let Some(d) = d {
                domain.d = d;
            }
            if let Some(decoy) = decoy {
                domain.decoy = decoy;
            }
        }

        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the cross-field invariants.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.bases.is_empty() {
            return Err(HarnessError::config("bases must not be empty"));
        }
        for &base in &self.bases {
            if !(7..=36).contains(&base) {
                return Err(HarnessError::config(format!(
                    "base {base} outside the supported range 7..=36"
                )));
            }
        }
        let mut seen = self.bases.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.bases.len() {
            return Err(HarnessError::config("bases must be distinct"));
        }
        if self.k_grid.is_empty() {
            return Err(HarnessError::config("k_grid must not be empty"));
        }
        if self.k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::config("k_grid must be strictly ascending"));
        }
        if self.items_per_cell == 0 || self.items_per_cell > MAX_ITEMS_PER_CELL {
            return Err(HarnessError::config(format!(
                "items must lie in 1..={MAX_ITEMS_PER_CELL}"
            )));
        }
        if self.probe_samples == 0 {
            return Err(HarnessError::config("probe_samples must be positive"));
        }
        if self.parallel == 0 {
            return Err(HarnessError::config("parallel must be at least 1"));
        }
        AnchorParams::new(self.params.alpha, self.params.beta, self.params.gamma)
            .map_err(|e| HarnessError::config(format!("bad anchor params: {e}")))?;
        if self.backend == BackendKind::Wire && self.wire.url.is_empty() {
            return Err(HarnessError::config("wire backend needs wire_url"));
        }
        Ok(())
    }

    /// The canonical key=value serialization the digest is computed over.
    pub fn canonical_lines(&self) -> String {
        let mut lines = Vec::new();
        lines.push(format!("alpha={}", self.params.alpha));
        lines.push(format!(
            "bases={}",
            join(self.bases.iter().map(|b| b.to_string()))
        ));
        lines.push(format!("backend={}", self.backend));
        lines.push(format!("beta={}", self.params.beta));
        lines.push(format!("embed_dim={}", self.embed_dim));
        lines.push(format!("gamma={}", self.params.gamma));
        lines.push(format!("items={}", self.items_per_cell));
        lines.push(format!(
            "k_grid={}",
            join(self.k_grid.iter().map(|k| k.to_string()))
        ));
        for (base, d) in &self.mock_domains {
            let decoy = match d.decoy {
                DecoyMode::DecimalLeak => "decimal-leak",
                DecoyMode::RandomDigit => "random-digit",
            };
            lines.push(format!("mock_d_{base}={}", d.d));
            lines.push(format!("mock_decoy_{base}={decoy}"));
            lines.push(format!("mock_rho_{base}={}", d.rho));
        }
        lines.push(format!("probe_samples={}", self.probe_samples));
        lines.push(format!("seed={}", self.seed));
        lines.push(format!("split={}", self.eval_split));
        if self.backend == BackendKind::Wire {
            lines.push(format!("max_tokens={}", self.wire.max_tokens));
            lines.push(format!("temperature={}", self.wire.temperature));
            let mode = match self.wire.prompt_mode {
                PromptMode::ChatTurns => "chat",
                PromptMode::Concat => "concat",
            };
            lines.push(format!("wire_model={}", self.wire.model));
            lines.push(format!("wire_prompt_mode={mode}"));
            lines.push(format!("wire_url={}", self.wire.url));
        }
        let mut text = String::new();
        for line in lines {
            text.push_str(&line);
            text.push('\n');
        }
        text
    }

    /// SHA-256 digest of the canonical serialization, lowercase hex.
    ///
    /// Output location, parallelism, and rate limits are deliberately
    /// excluded: they change how a run executes, never what it measures.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_lines().as_bytes());
        let bytes = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in bytes {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }

    /// Deterministic run identifier: digest prefix plus seed.
    pub fn run_id(&self) -> String {
        format!("{}-{}", &self.digest()[..12], self.seed)
    }

    /// Builds the mock backend this config describes.
    pub fn build_mock(&self) -> Result<MockBackend, HarnessError> {
        let mock = MockBackend::new(MockRepositoryConfig {
            domains: self.mock_domains.clone(),
            params: self.params,
            embed_dim: self.embed_dim,
            seed: self.seed,
        })?;
        Ok(mock)
    }
}

fn join(parts: impl Iterator<Item = String>) -> String {
    parts.collect::<Vec<_>>().join(",")
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
fn parse_key_values(
    text: &str,
    keys: &mut BTreeMap<String, String>,
) -> Result<(), HarnessError> {
    for (ix, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            HarnessError::config(format!("line {}: expected key=value, got {raw:?}", ix + 1))
        })?;
        keys.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(())
}

fn apply_overrides(overrides: &Overrides, keys: &mut BTreeMap<String, String>) {
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            keys.insert(key.to_string(), v);
        }
    };
    set("backend", overrides.backend.clone());
    set("bases", overrides.bases.clone());
    set("k_grid", overrides.k_grid.clone());
    set("items", overrides.items.map(|v| v.to_string()));
    set("split", overrides.split.clone());
    set("probe_samples", overrides.samples.map(|v| v.to_string()));
    set("seed", overrides.seed.map(|v| v.to_string()));
    set(
        "out",
        overrides.out.as_ref().map(|p| p.display().to_string()),
    );
    set("parallel", overrides.parallel.map(|v| v.to_string()));
    set("rate_limit", overrides.rate_limit.map(|v| v.to_string()));
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>, HarnessError> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| HarnessError::config(format!("bad {key} entry {part:?}")))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(value: &str, key: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::config(format!("bad value for {key}: {value:?}")))
}
