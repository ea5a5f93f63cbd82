//! End-to-end acceptance suite: one test per release criterion, each
//! checked against an oracle computed here from first principles.
//!
//! Every test prints a single `criterion N: PASS/FAIL` line (visible with
//! `--nocapture`, and on failure) before asserting, so a run of this file
//! doubles as the release checklist.

use std::collections::BTreeMap;
use std::time::Instant;

use anchorlab::analyze::{fit_records, FitOptions};
use anchorlab::config::ExperimentConfig;
use anchorlab::record::RunRecord;
use anchorlab::report::write_aggregates;
use anchorlab::runner::run_fewshot;
use anchorlab::sweep::{run_threshold_sweep, SweepSettings};
use anchorlab_core::anchor::{
    anchor_text, anchoring_strength, critical_thresholds, estimate_anchoring_strength,
    pattern_density, semantic_distance, zero_shot_request, EmbeddingVector,
};
use anchorlab_core::arith::{base_add, render_problem, synthesize_bundle};
use anchorlab_core::backend::Backend;
use anchorlab_core::fit::{fit_shot_curve, AsymptoteMode, ShotCurve, ShotPoint};
use anchorlab_core::metrics::{
    entropy, jsd, kl_divergence, mutual_information, wasserstein_1d, Dist, JointDist,
};
use anchorlab_core::sim::{critical_threshold, success_curve, SimConfig};
use anchorlab_core::util::mix_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Prints the checklist line, then enforces it.
fn verdict(criterion: u32, ok: bool, detail: &str) {
    let word = if ok { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {word} — {detail}");
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// ---------------------------------------------------------------- criterion 1

/// Renders `value` in `base` without consulting the library under test.
fn oracle_numeral(mut value: u64, base: u64) -> String {
    const DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
    let mut out = Vec::new();
    loop {
        out.push(DIGITS[(value % base) as usize]);
        value /= base;
        if value == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

#[test]
fn criterion_1_base_addition_matches_brute_force() {
    let start = Instant::now();
    let mut pairs = 0u64;
    let mut mismatches = 0u64;
    for base in [8u64, 9, 10] {
        for lhs_value in base..base * base {
            for rhs_value in base..base * base {
                let lhs = oracle_numeral(lhs_value, base);
                let rhs = oracle_numeral(rhs_value, base);
                let expected = oracle_numeral(lhs_value + rhs_value, base);
                let got = base_add(base as u32, &lhs, &rhs).unwrap();
                if got != expected {
                    mismatches += 1;
                }
                pairs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0 && elapsed.as_secs_f64() < 1.0;
    verdict(
        1,
        ok,
        &format!(
            "{pairs} two-digit pairs over bases 8/9/10, {mismatches} mismatches, {:.3}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- criterion 2

/// Strictly positive random distribution of dimension `dim`.
fn random_dist(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut probs: Vec<f64> = (0..dim).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

fn oracle_entropy(probs: &[f64]) -> f64 {
    // Reverse-order accumulation so rounding differs from the library's.
    probs
        .iter()
        .rev()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

#[test]
fn criterion_2_information_metrics_match_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut worst: f64 = 0.0;
    let mut bound_violations = 0u32;
    const TOL: f64 = 1e-9;
    const LN_2: f64 = core::f64::consts::LN_2;

    for _ in 0..1000 {
        let dim = rng.gen_range(2..=16);
        let p_probs = random_dist(&mut rng, dim);
        let q_probs = random_dist(&mut rng, dim);
        let p = Dist::new(p_probs.clone()).unwrap();
        let q = Dist::new(q_probs.clone()).unwrap();

        // Entropy, from the definition with independent accumulation order.
        let h_gap = (entropy(&p) - oracle_entropy(&p_probs)).abs();

        // KL through the cross-entropy identity sum(p ln p) - sum(p ln q).
        let cross: f64 = p_probs.iter().zip(&q_probs).map(|(a, b)| a * b.ln()).sum();
        let kl_oracle = -oracle_entropy(&p_probs) - cross;
        let kl_gap = (kl_divergence(&p, &q).unwrap() - kl_oracle).abs();

        // JSD through the mixture-entropy identity H(m) - (H(p) + H(q)) / 2.
        let mix: Vec<f64> = p_probs
            .iter()
            .zip(&q_probs)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let jsd_oracle =
            oracle_entropy(&mix) - 0.5 * (oracle_entropy(&p_probs) + oracle_entropy(&q_probs));
        let jsd_value = jsd(&p, &q).unwrap();
        let jsd_gap = (jsd_value - jsd_oracle).abs();
        if !(0.0..=LN_2 + 1e-12).contains(&jsd_value) {
            bound_violations += 1;
        }

        // W1 on a shared strictly increasing support, via explicit CDFs.
        let mut support = Vec::with_capacity(dim);
        let mut x = rng.gen::<f64>();
        for _ in 0..dim {
            support.push(x);
            x += 0.1 + rng.gen::<f64>();
        }
        let ps = Dist::with_support(p_probs.clone(), support.clone()).unwrap();
        let qs = Dist::with_support(q_probs.clone(), support.clone()).unwrap();
        let mut w1_oracle = 0.0;
        let mut cdf_p = 0.0;
        let mut cdf_q = 0.0;
        for i in 0..dim - 1 {
            cdf_p += p_probs[i];
            cdf_q += q_probs[i];
            w1_oracle += (cdf_p - cdf_q).abs() * (support[i + 1] - support[i]);
        }
        let w1_gap = (wasserstein_1d(&ps, &qs).unwrap() - w1_oracle).abs();

        // MI through the entropy decomposition H(row) + H(col) - H(joint).
        let rows = rng.gen_range(2..=6);
        let cols = rng.gen_range(2..=6);
        let mut table = vec![vec![0.0; cols]; rows];
        let mut total = 0.0;
        for row in &mut table {
            for cell in row.iter_mut() {
                *cell = -rng.gen::<f64>().max(1e-12).ln();
                total += *cell;
            }
        }
        for row in &mut table {
            for cell in row.iter_mut() {
                *cell /= total;
            }
        }
        let joint = JointDist::new(table.clone()).unwrap();
        let row_marg: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let col_marg: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        let flat: Vec<f64> = table.iter().flatten().copied().collect();
        let mi_oracle = oracle_entropy(&row_marg) + oracle_entropy(&col_marg)
            - oracle_entropy(&flat);
        let mi_value = mutual_information(&joint);
        let mi_gap = (mi_value - mi_oracle).abs();
        if mi_value < 0.0 {
            bound_violations += 1;
        }

        worst = worst.max(h_gap).max(kl_gap).max(jsd_gap).max(w1_gap).max(mi_gap);
    }

    let ok = worst < TOL && bound_violations == 0;
    verdict(
        2,
        ok,
        &format!(
            "1000 draws per metric, worst |gap| {worst:.2e} (tol {TOL:.0e}), {bound_violations} bound violations"
        ),
    );
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_fit_recovers_known_landmarks() {
    let start = Instant::now();
    let grid = [1u32, 2, 4, 8, 16, 32];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);

    // Noise-free sweep over (a, g): landmarks must come back near-exactly.
    let mut worst_k50: f64 = 0.0;
    let mut worst_width: f64 = 0.0;
    for _ in 0..100 {
        let a = rng.gen_range(0.5..2.5);
        let g = rng.gen_range(0.8..2.5);
        let points = grid
            .iter()
            .map(|&k| ShotPoint {
                k,
                accuracy: sigmoid(g * (k as f64).ln() - a),
                n_items: 250,
            })
            .collect();
        let fit = fit_shot_curve(
            &ShotCurve::new(points).unwrap(),
            0.0,
            AsymptoteMode::FixedOne,
        )
        .unwrap();
        let k50_true = (a / g).exp();
        let width_true = ((a + 9f64.ln()) / g).exp() - ((a - 9f64.ln()) / g).exp();
        worst_k50 = worst_k50.max((fit.k50 / k50_true - 1.0).abs());
        worst_width = worst_width.max((fit.phase_width / width_true - 1.0).abs());
    }
    let clean_ok = worst_k50 <= 1e-3 && worst_width <= 5e-3;

    // Bernoulli noise at 250 items per cell: k50 within 10% in >= 90 of 100.
    let noisy_grid = [1u32, 2, 4, 8, 16, 32, 64];
    let (a, g) = (4.0f64, 2.0f64);
    let k50_true = (a / g).exp();
    let mut within = 0u32;
    for _ in 0..100 {
        let points = noisy_grid
            .iter()
            .map(|&k| {
                let p = sigmoid(g * (k as f64).ln() - a);
                let hits = (0..250).filter(|_| rng.gen::<f64>() < p).count();
                ShotPoint {
                    k,
                    accuracy: hits as f64 / 250.0,
                    n_items: 250,
                }
            })
            .collect();
        let recovered = ShotCurve::new(points)
            .and_then(|curve| fit_shot_curve(&curve, 0.0, AsymptoteMode::FixedOne));
        if let Ok(fit) = recovered {
            if (fit.k50 / k50_true - 1.0).abs() <= 0.10 {
                within += 1;
            }
        }
    }

    let elapsed = start.elapsed();
    let ok = clean_ok && within >= 90 && elapsed.as_secs_f64() < 30.0;
    verdict(
        3,
        ok,
        &format!(
            "noise-free worst k50 {:.2e} (tol 1e-3) width {:.2e} (tol 5e-3); noisy within 10% in {within}/100; {:.1}s",
            worst_k50,
            worst_width,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_transition_width_scales_with_evidence() {
    let start = Instant::now();
    let settings = SweepSettings {
        seed: 0xC4,
        ..SweepSettings::default()
    };
    let report = run_threshold_sweep(&settings).unwrap();
    let fit = report.scaling.expect("four grid points fit a slope");
    let elapsed = start.elapsed();
    let ok = (-0.65..=-0.35).contains(&fit.slope)
        && fit.r_squared >= 0.9
        && elapsed.as_secs_f64() < 300.0;
    verdict(
        4,
        ok,
        &format!(
            "n in {{25,100,400,1600}} at 2000 trials/point: slope {:.3} (want [-0.65, -0.35]), r^2 {:.4} (want >= 0.9), {:.1}s",
            fit.slope,
            fit.r_squared,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_success_brackets_the_critical_threshold() {
    let m = 8usize;
    let tau = 1.0;
    let delta = 0.1;
    let p_optimal = 0.95;
    let s_c = critical_threshold(m, tau, delta).unwrap();
    let template = SimConfig {
        m,
        tau,
        delta,
        n: 400,
        strengths: vec![0.0; m],
        noise_sigma: 20.0,
        p_optimal,
        seed: 0xC5,
        target: None,
    };
    let grid = [s_c - 3.0 / tau, s_c + 3.0 / tau];
    let curve = success_curve(&template, &grid, 5000).unwrap();
    let below = curve.points[0].success_rate;
    let above = curve.points[1].success_rate;
    let low_bound = 1.0 / m as f64 + 0.1;
    let high_bound = p_optimal - 0.1;
    let ok = below <= low_bound && above >= high_bound;
    verdict(
        5,
        ok,
        &format!(
            "at S_c - 3/tau success {below:.4} (want <= {low_bound:.3}); at S_c + 3/tau success {above:.4} (want >= {high_bound:.3}); 5000 trials each"
        ),
    );
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_mock_run_reproduces_reference_ordering() {
    let start = Instant::now();
    let master = 0xC6;
    let replicates = 20u64;

    let mut pooled: Option<RunRecord> = None;
    for r in 0..replicates {
        let mut config = ExperimentConfig::default();
        config.k_grid = vec![0, 1, 2, 3, 4, 6, 8, 12, 16];
        config.parallel = 4;
        config.seed = mix_seed(&[master, r]);
        let backend = config.build_mock().unwrap();
        let (record, _) = run_fewshot(&config, &backend).unwrap();
        assert!(record.aborted.is_empty(), "mock cells never abort");
        match &mut pooled {
            None => pooled = Some(record),
            Some(pool) => pool.items.extend(record.items),
        }
    }

    let options = FitOptions {
        floor: 0.0,
        mode: AsymptoteMode::FixedOne,
        resamples: 400,
        level: 0.68,
        seed: 7,
    };
    let report = fit_records(pooled.as_ref().unwrap(), &options).unwrap();
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    let by_base: BTreeMap<u32, (f64, f64)> = report
        .fits
        .iter()
        .map(|fit| (fit.base, (fit.boot.point.k50, fit.boot.point.phase_width)))
        .collect();
    let (k50_10, width_10) = by_base[&10];
    let (k50_8, width_8) = by_base[&8];
    let (k50_9, width_9) = by_base[&9];

    let targets = [(k50_10, 0.28), (k50_8, 1.83), (k50_9, 2.91)];
    let worst_dev = targets
        .iter()
        .map(|(local, target)| (local / target - 1.0).abs())
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed();
    let ok = k50_10 < k50_8
        && k50_8 < k50_9
        && width_10 < width_8
        && width_8 < width_9
        && worst_dev <= 0.15
        && elapsed.as_secs_f64() < 120.0;
    verdict(
        6,
        ok,
        &format!(
            "pooled {replicates}x250 items/cell: k50 base10 {k50_10:.3} < base8 {k50_8:.3} < base9 {k50_9:.3}, widths {width_10:.2} < {width_8:.2} < {width_9:.2}, worst k50 deviation {:.1}% (tol 15%), {:.1}s",
            100.0 * worst_dev,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_channel_threshold_ordering_never_violated() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut violations = 0u32;
    let draws = 10_000u32;
    for _ in 0..draws {
        let beta = rng.gen_range(0.0..10.0);
        let d_r = rng.gen_range(0.0..5.0);
        let rho = rng.gen_range(0.1..20.0);
        let rho_prime = rho * rng.gen_range(1.0..3.0);
        let rho_ext = rng.gen_range(0.0..10.0);
        let set = critical_thresholds(beta, d_r, rho, rho_prime, rho_ext).unwrap();
        if set.fine_tune > set.few_shot || set.rag > set.few_shot {
            violations += 1;
        }
    }
    let ok = violations == 0;
    verdict(
        7,
        ok,
        &format!("{draws} random parameter draws with rho' >= rho: {violations} ordering violations"),
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_strength_estimate_equals_manual_composition() {
    let config = ExperimentConfig::default();
    let backend = config.build_mock().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let mut exact = 0u32;
    let cases = 100u32;

    for case in 0..cases {
        let base = [8u32, 9, 10][case as usize % 3];
        let bundle = synthesize_bundle(base, 0).unwrap();
        let k = 2 + (case as usize % 9);
        let anchors: Vec<(String, String)> = (0..k)
            .map(|_| {
                let problem = &bundle.train_2d[rng.gen_range(0..bundle.train_2d.len())];
                (
                    render_problem(problem),
                    format!("{}_{}", problem.answer, base),
                )
            })
            .collect();
        let query = render_problem(&bundle.id_2d[case as usize % bundle.id_2d.len()]);

        let estimate =
            estimate_anchoring_strength(&backend, &query, &anchors, &config.params).unwrap();

        // The same pipeline, spelled out by hand.
        let response = backend.generate(&zero_shot_request(&query)).unwrap();
        let response_embedding = backend.embed(&response).unwrap();
        let anchor_embeddings: Vec<EmbeddingVector> = anchors
            .iter()
            .map(|(input, output)| backend.embed(&anchor_text(input, output)).unwrap())
            .collect();
        let rho_d = pattern_density(&anchor_embeddings).unwrap();
        let centroid = EmbeddingVector::centroid(&anchor_embeddings).unwrap();
        let d_r = semantic_distance(&response_embedding, &centroid).unwrap();
        let strength = anchoring_strength(&config.params, rho_d, d_r, anchors.len()).unwrap();

        if estimate.rho_d == rho_d
            && estimate.d_r == d_r
            && estimate.k == anchors.len()
            && estimate.strength == strength
        {
            exact += 1;
        }
    }

    let ok = exact == cases;
    verdict(
        8,
        ok,
        &format!("{exact}/{cases} randomized cases bit-identical to the manual composition"),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_persisted_record_replays_byte_for_byte() {
    let mut config = ExperimentConfig::default();
    config.seed = 0xC9;
    config.parallel = 4;
    let backend = config.build_mock().unwrap();
    let (record, _) = run_fewshot(&config, &backend).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("runrecord.jsonl");
    record.write_jsonl(&jsonl).unwrap();
    let emitted_csv = dir.path().join("aggregates.csv");
    write_aggregates(&emitted_csv, &record.aggregates()).unwrap();

    let replayed = RunRecord::read_jsonl(&jsonl).unwrap();
    let replayed_jsonl = dir.path().join("replayed.jsonl");
    replayed.write_jsonl(&replayed_jsonl).unwrap();
    let replayed_csv = dir.path().join("replayed.csv");
    write_aggregates(&replayed_csv, &replayed.aggregates()).unwrap();

    let csv_equal = std::fs::read(&emitted_csv).unwrap() == std::fs::read(&replayed_csv).unwrap();
    let jsonl_equal =
        std::fs::read(&jsonl).unwrap() == std::fs::read(&replayed_jsonl).unwrap();
    let ok = csv_equal && jsonl_equal;
    verdict(
        9,
        ok,
        &format!(
            "{} items round-tripped: aggregates byte-equal {csv_equal}, records byte-equal {jsonl_equal}",
            record.items.len()
        ),
    );
}
