//! The density probe: repeatedly embed small anchor sets per base and
//! measure their pattern density and the query-to-centroid semantic
//! distance, reporting per-base means and spreads plus pairwise effect
//! sizes on the density samples.

use anchorlab_core::anchor::{pattern_density, semantic_distance, EmbeddingVector};
use anchorlab_core::arith::{render_exemplar, render_problem, synthesize_bundle};
use anchorlab_core::backend::Backend;
use anchorlab_core::fit::cohens_d;
use anchorlab_core::util::mix_seed;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::HarnessError;

/// Anchors per probe draw.
pub const ANCHORS_PER_DRAW: usize = 8;
/// Minimum usable draws per base.
pub const MIN_OK_SAMPLES: u32 = 80;

const PROBE_STREAM: u64 = 3;

/// Mean and spread of the probed geometry for one base.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    /// Numeral base.
    pub base: u32,
    /// Mean pattern density over the draws.
    pub rho_mean: f64,
    /// Sample sd of the density.
    pub rho_sd: f64,
    /// Mean query-to-centroid distance.
    pub d_mean: f64,
    /// Sample sd of the distance.
    pub d_sd: f64,
    /// Draws that succeeded.
    pub samples: u32,
}

/// Effect size between two bases' density samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeEffect {
    /// First base.
    pub base_a: u32,
    /// Second base.
    pub base_b: u32,
    /// Cohen's d between the density samples.
    pub cohens_d: f64,
}

/// Full probe output.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// Per-base geometry, in config base order.
    pub rows: Vec<ProbeRow>,
    /// Pairwise density effect sizes, upper triangle in config order.
    pub effects: Vec<ProbeEffect>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Probes every configured base.
///
/// Each draw samples [`ANCHORS_PER_DRAW`] distinct exemplars, embeds their
/// completed texts, and measures density plus the distance from an ID query
/// embedding to the anchor centroid. Individual draws may fail (embedding
/// errors are counted, not fatal), but fewer than [`MIN_OK_SAMPLES`] usable
/// draws for a base abandons the probe.
pub fn run_density_probe<B: Backend + ?Sized>(
    config: &ExperimentConfig,
    backend: &B,
) -> Result<ProbeReport, HarnessError> {
    config.validate()?;
    if !backend.capabilities().supports_embeddings {
        return Err(HarnessError::config(
            "the selected backend does not support embeddings",
        ));
    }
    let mut rows = Vec::new();
    let mut density_samples: Vec<(u32, Vec<f64>)> = Vec::new();
    for &base in &config.bases {
        let bundle = synthesize_bundle(base, config.seed)?;
        let mut rhos = Vec::new();
        let mut dists = Vec::new();
        for draw in 0..config.probe_samples {
            let seed = mix_seed(&[config.seed, base as u64, draw as u64, PROBE_STREAM]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picked = sample(&mut rng, bundle.train_2d.len(), ANCHORS_PER_DRAW);
            let mut anchors = Vec::with_capacity(ANCHORS_PER_DRAW);
            let mut failed = false;
            for ix in picked.iter() {
                match backend.embed(&render_exemplar(&bundle.train_2d[ix])) {
                    Ok(v) => anchors.push(v),
                    Err(_) => {
                        failed = true;
                        break;
                    }
                }
            }
            if failed {
                continue;
            }
            let query_ix = draw as usize % bundle.id_2d.len();
            let query = match backend.embed(&render_problem(&bundle.id_2d[query_ix])) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let rho = pattern_density(&anchors)?;
            let centroid = EmbeddingVector::centroid(&anchors)?;
            let d = semantic_distance(&query, &centroid)?;
            rhos.push(rho);
            dists.push(d);
        }
        if (rhos.len() as u32) < MIN_OK_SAMPLES.min(config.probe_samples) {
            return Err(HarnessError::config(format!(
                "base {base}: only {} of {} probe draws succeeded",
                rhos.len(),
                config.probe_samples
            )));
        }
        let (rho_mean, rho_sd) = mean_sd(&rhos);
        let (d_mean, d_sd) = mean_sd(&dists);
        rows.push(ProbeRow {
            base,
            rho_mean,
            rho_sd,
            d_mean,
            d_sd,
            samples: rhos.len() as u32,
        });
        density_samples.push((base, rhos));
    }

    let mut effects = Vec::new();
    for i in 0..density_samples.len() {
        for j in i + 1..density_samples.len() {
            effects.push(ProbeEffect {
                base_a: density_samples[i].0,
                base_b: density_samples[j].0,
                cohens_d: cohens_d(&density_samples[i].1, &density_samples[j].1)?,
            });
        }
    }
    Ok(ProbeReport { rows, effects })
}
