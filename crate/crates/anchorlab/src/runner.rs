//! The few-shot experiment driver: for every (base, k) cell, prompt the
//! backend on the configured evaluation split (ID two-digit by default)
//! with freshly sampled two-digit exemplars and grade the responses. Seeds
//! derive from (run seed, base, k, item), so results are independent of
//! cell order and of the parallelism used to collect them.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anchorlab_core::arith::{grade, render_problem, synthesize_bundle, BaseProblem, DatasetBundle};
use anchorlab_core::backend::{Backend, GenerationRequest, Shot};
use anchorlab_core::util::mix_seed;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{BackendKind, EvalSplit, ExperimentConfig};
use crate::record::{AbortedCell, ItemRecord, RunHeader, RunRecord};
use crate::HarnessError;

/// Stream tags for per-item seed derivation.
const EXEMPLAR_STREAM: u64 = 1;
const REQUEST_STREAM: u64 = 2;

/// Execution counters for the budget invariant: one generate call per item,
/// with backend-internal retries tracked separately by the wire client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    /// Items attempted (= backend calls admitted by the runner).
    pub generate_calls: u64,
    /// Items that came back graded.
    pub items_recorded: u64,
    /// Cells abandoned after the backend gave up.
    pub cells_aborted: u64,
}

/// Samples `k` distinct training exemplars for one item.
fn draw_exemplars(bundle: &DatasetBundle, run_seed: u64, k: u32, item: u32) -> Vec<Shot> {
    if k == 0 {
        return Vec::new();
    }
    let seed = mix_seed(&[
        run_seed,
        bundle.base as u64,
        k as u64,
        item as u64,
        EXEMPLAR_STREAM,
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample(&mut rng, bundle.train_2d.len(), k as usize)
        .iter()
        .map(|ix| {
            let p = &bundle.train_2d[ix];
            Shot {
                input: render_problem(p),
                output: format!("{}_{}", p.answer, p.base),
            }
        })
        .collect()
}

/// Builds the generation request for one item.
fn item_request(
    bundle: &DatasetBundle,
    problem: &BaseProblem,
    run_seed: u64,
    k: u32,
    item: u32,
) -> GenerationRequest {
    let request_seed = mix_seed(&[
        run_seed,
        bundle.base as u64,
        k as u64,
        item as u64,
        REQUEST_STREAM,
    ]);
    GenerationRequest::new(&render_problem(problem))
        .with_shots(draw_exemplars(bundle, run_seed, k, item))
        .with_seed(request_seed)
}

/// The items the configured split selects for evaluation.
fn eval_items(bundle: &DatasetBundle, split: EvalSplit) -> &[BaseProblem] {
    match split {
        EvalSplit::Id2d => &bundle.id_2d,
        EvalSplit::Ood3 => bundle.ood_3d(),
        EvalSplit::Ood4 => bundle.ood_4d(),
    }
}

fn evaluate_item<B: Backend + Sync + ?Sized>(
    backend: &B,
    bundle: &DatasetBundle,
    config: &ExperimentConfig,
    k: u32,
    item: u32,
    measure_latency: bool,
) -> Result<ItemRecord, (u32, String)> {
    let problem = &eval_items(bundle, config.eval_split)[item as usize];
    let mut request = item_request(bundle, problem, config.seed, k, item);
    request.temperature = config.wire.temperature;
    request.max_tokens = config.wire.max_tokens;
    let started = Instant::now();
    let response = backend
        .generate(&request)
        .map_err(|e| (item, e.to_string()))?;
    let latency_ms = if measure_latency {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(ItemRecord {
        base: bundle.base,
        k,
        item,
        lhs: problem.lhs.clone(),
        rhs: problem.rhs.clone(),
        expected: problem.answer.clone(),
        response: response.clone(),
        correct: grade(&response, &problem.answer, bundle.base),
        latency_ms,
    })
}

/// Runs the full few-shot grid and returns the record plus its counters.
///
/// A backend failure on any item abandons that (base, k) cell — its partial
/// items are dropped and an aborted marker is recorded — while every other
/// cell proceeds. The in-process mock reports zero latency so that records
/// are byte-stable; wall time is only meaningful on the wire.
pub fn run_fewshot<B: Backend + Sync + ?Sized>(
    config: &ExperimentConfig,
    backend: &B,
) -> Result<(RunRecord, RunStats), HarnessError> {
    config.validate()?;
    let measure_latency = config.backend != BackendKind::Mock;
    let mut stats = RunStats::default();
    let mut items = Vec::new();
    let mut aborted = Vec::new();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel)
        .build()
        .map_err(|e| HarnessError::config(format!("thread pool: {e}")))?;

    for &base in &config.bases {
        let bundle = synthesize_bundle(base, config.seed)?;
        for &k in &config.k_grid {
            let results: Vec<Result<ItemRecord, (u32, String)>> = pool.install(|| {
                (0..config.items_per_cell)
                    .into_par_iter()
                    .map(|item| evaluate_item(backend, &bundle, config, k, item, measure_latency))
                    .collect()
            });
            stats.generate_calls += results.len() as u64;
            let mut cell_items = Vec::with_capacity(results.len());
            let mut failure: Option<(u32, String)> = None;
            for result in results {
                match result {
                    Ok(record) => cell_items.push(record),
                    Err(err) => {
                        // Keep the lowest-indexed failure for the marker.
                        if failure.as_ref().map_or(true, |f| err.0 < f.0) {
                            failure = Some(err);
                        }
                    }
                }
            }
            match failure {
                Some((item, detail)) => {
                    stats.cells_aborted += 1;
                    aborted.push(AbortedCell {
                        base,
                        k,
                        detail: format!("item {item}: {detail}"),
                    });
                }
                None => {
                    stats.items_recorded += cell_items.len() as u64;
                    items.extend(cell_items);
                }
            }
        }
    }

    items.sort_unstable_by_key(|i| (i.base, i.k, i.item));
    aborted.sort_unstable_by_key(|c| (c.base, c.k));
    let header = RunHeader {
        run_id: config.run_id(),
        timestamp_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
        config_digest: config.digest(),
    };
    Ok((
        RunRecord {
            header,
            items,
            aborted,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use anchorlab_core::backend::BackendError;
    use anchorlab_core::backend::Capabilities;
    use anchorlab_core::anchor::EmbeddingVector;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.bases = vec![8, 10];
        cfg.k_grid = vec![0, 2];
        cfg.items_per_cell = 25;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn runs_are_deterministic_and_order_independent() {
        let cfg = tiny_config();
        let mock = cfg.build_mock().unwrap();
        let (a, stats) = run_fewshot(&cfg, &mock).unwrap();
        let (b, _) = run_fewshot(&cfg, &mock).unwrap();
        assert_eq!(a.items, b.items);
        assert_eq!(stats.generate_calls, 2 * 2 * 25);
        assert_eq!(stats.items_recorded, 100);
        assert_eq!(stats.cells_aborted, 0);

        // Permuting bases and raising parallelism changes nothing per cell.
        let mut shuffled = cfg.clone();
        shuffled.bases = vec![10, 8];
        shuffled.parallel = 4;
        let mock2 = shuffled.build_mock().unwrap();
        let (c, _) = run_fewshot(&shuffled, &mock2).unwrap();
        assert_eq!(a.items, c.items, "seeds derive from (base, k, item)");
    }

    #[test]
    fn exemplars_are_distinct_fresh_draws_per_item() {
        let cfg = tiny_config();
        let bundle = synthesize_bundle(8, cfg.seed).unwrap();
        let a = draw_exemplars(&bundle, cfg.seed, 8, 0);
        assert_eq!(a.len(), 8);
        let mut inputs: Vec<&String> = a.iter().map(|s| &s.input).collect();
        inputs.sort();
        inputs.dedup();
        assert_eq!(inputs.len(), 8, "no repeated exemplar within an item");
        let b = draw_exemplars(&bundle, cfg.seed, 8, 1);
        assert_ne!(
            a.iter().map(|s| &s.input).collect::<Vec<_>>(),
            b.iter().map(|s| &s.input).collect::<Vec<_>>(),
            "each item draws its own exemplars"
        );
        assert!(draw_exemplars(&bundle, cfg.seed, 0, 0).is_empty());
    }

    #[test]
    fn zero_shot_accuracy_matches_the_law() {
        let mut cfg = tiny_config();
        cfg.bases = vec![8];
        cfg.k_grid = vec![0];
        cfg.items_per_cell = 250;
        let mock = cfg.build_mock().unwrap();
        let (record, _) = run_fewshot(&cfg, &mock).unwrap();
        let aggs = record.aggregates();
        assert_eq!(aggs.len(), 1);
        let p = mock.accuracy_law(8, 0).unwrap();
        let se = (p * (1.0 - p) / 250.0).sqrt();
        assert!(
            (aggs[0].accuracy - p).abs() < 4.0 * se,
            "accuracy {} vs law {p}",
            aggs[0].accuracy
        );
    }

    /// A backend that always fails generation.
    struct DownBackend;

    impl Backend for DownBackend {
        fn generate(&self, _: &GenerationRequest) -> Result<String, BackendError> {
            Err(BackendError::Exhausted {
                attempts: 3,
                detail: "connection refused".into(),
            })
        }

        fn embed(&self, _: &str) -> Result<EmbeddingVector, BackendError> {
            Err(BackendError::Unsupported {
                operation: "embed".into(),
            })
        }

        fn capabilities(&self) -> Capabilities {
            Capabilities {
                name: "down".into(),
                supports_embeddings: false,
                max_context: 0,
            }
        }
    }

    #[test]
    fn failing_cells_abort_with_markers_and_no_partial_items() {
        let cfg = tiny_config();
        let (record, stats) = run_fewshot(&cfg, &DownBackend).unwrap();
        assert!(record.items.is_empty());
        assert_eq!(record.aborted.len(), 4, "every cell aborts");
        assert_eq!(stats.cells_aborted, 4);
        assert!(record.aborted[0].detail.contains("item 0"));
        assert!(record.aborted[0].detail.contains("gave up"));
    }

    #[test]
    fn ood_splits_evaluate_longer_operands_with_2d_exemplars() {
        let mut cfg = tiny_config();
        cfg.bases = vec![8];
        cfg.k_grid = vec![2];
        cfg.items_per_cell = 10;
        cfg.eval_split = EvalSplit::Ood3;
        let mock = cfg.build_mock().unwrap();
        let (record, _) = run_fewshot(&cfg, &mock).unwrap();

        let bundle = synthesize_bundle(8, cfg.seed).unwrap();
        for (ix, item) in record.items.iter().enumerate() {
            let problem = &bundle.ood_3d()[ix];
            assert_eq!(item.lhs, problem.lhs);
            assert_eq!(item.expected, problem.answer);
            assert_eq!(item.lhs.len(), 3, "three-digit operands");
        }

        cfg.eval_split = EvalSplit::Ood4;
        let (record, _) = run_fewshot(&cfg, &mock).unwrap();
        assert_eq!(record.items[0].lhs.len(), 4, "four-digit operands");
        assert_eq!(record.items[0].expected, bundle.ood_4d()[0].answer);
    }
}
