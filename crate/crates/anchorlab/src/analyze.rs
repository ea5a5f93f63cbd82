//! Turns run records into fitted shot curves, plot rows, and comparisons
//! against the bundled reference tables.

use std::collections::BTreeMap;

use anchorlab_core::fit::{bootstrap_intervals, AsymptoteMode, BootstrapSummary, CellItems};
use anchorlab_core::util::mix_seed;

use crate::record::RunRecord;
use crate::reference::{fit_reference, probe_reference};
use crate::HarnessError;

/// Knobs of the fitting stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Guess-rate floor passed to the logistic fit.
    pub floor: f64,
    /// Whether the asymptote is pinned at 1 or estimated.
    pub mode: AsymptoteMode,
    /// Bootstrap resamples per base.
    pub resamples: u32,
    /// Central interval mass, e.g. `0.68`.
    pub level: f64,
    /// Master seed for the bootstrap streams.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            floor: 0.0,
            mode: AsymptoteMode::FixedOne,
            resamples: 400,
            level: 0.68,
            seed: 0,
        }
    }
}

/// One base's fit with bootstrap intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFit {
    /// Numeral base.
    pub base: u32,
    /// Point fit and intervals.
    pub boot: BootstrapSummary,
}

/// One observed-versus-predicted point for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    /// Numeral base.
    pub base: u32,
    /// Shot count.
    pub k: u32,
    /// Mean cell accuracy.
    pub observed: f64,
    /// Fitted accuracy at `k`; the floor at `k = 0`.
    pub predicted: f64,
}

/// Everything the fitting stage produces.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Per-base fits, ascending base; bases whose fit failed are absent.
    pub fits: Vec<BaseFit>,
    /// Observed and predicted accuracy per complete cell of fitted bases.
    pub plot: Vec<PlotRow>,
    /// Excluded cells and skipped bases, in report order.
    pub warnings: Vec<String>,
}

/// Item scores per cell, keyed by base then shot count, in item order.
type CellMap = BTreeMap<u32, BTreeMap<u32, Vec<f64>>>;

/// Groups item scores into cells and drops incomplete ones.
///
/// A cell is complete when it holds as many items as the largest cell in
/// the record; aborted cells carry no items and are reported from their
/// markers instead.
fn collect_cells(record: &RunRecord) -> (CellMap, Vec<String>) {
    let mut ordered: Vec<_> = record.items.iter().collect();
    ordered.sort_by_key(|r| (r.base, r.k, r.item));
    let mut cells: CellMap = BTreeMap::new();
    for row in ordered {
        cells
            .entry(row.base)
            .or_default()
            .entry(row.k)
            .or_default()
            .push(if row.correct { 1.0 } else { 0.0 });
    }
    let expected = cells
        .values()
        .flat_map(|by_k| by_k.values())
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    let mut warnings = Vec::new();
    for aborted in &record.aborted {
        warnings.push(format!(
            "cell (base {}, k {}) aborted: {}; excluded from fits",
            aborted.base, aborted.k, aborted.detail
        ));
    }
    for (&base, by_k) in &mut cells {
        by_k.retain(|&k, values| {
            let keep = values.len() == expected;
            if !keep {
                warnings.push(format!(
                    "cell (base {base}, k {k}) has {} of {expected} items; excluded from fits",
                    values.len()
                ));
            }
            keep
        });
    }
    cells.retain(|_, by_k| !by_k.is_empty());
    (cells, warnings)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Fits every base in the record, bootstrap intervals included.
///
/// Incomplete cells are excluded with a warning; a base whose fit fails is
/// skipped with a warning rather than failing the whole report.
pub fn fit_records(record: &RunRecord, options: &FitOptions) -> Result<FitReport, HarnessError> {
    let (cells, mut warnings) = collect_cells(record);
    let mut fits = Vec::new();
    let mut plot = Vec::new();
    for (&base, by_k) in &cells {
        let cell_items: Vec<CellItems> = by_k
            .iter()
            .map(|(&k, values)| CellItems {
                k,
                values: values.clone(),
            })
            .collect();
        let boot = match bootstrap_intervals(
            &cell_items,
            options.floor,
            options.mode,
            options.resamples,
            options.level,
            mix_seed(&[options.seed, base as u64]),
        ) {
            Ok(boot) => boot,
            Err(e) => {
                warnings.push(format!("base {base}: fit failed ({e}); row omitted"));
                continue;
            }
        };
        for (&k, values) in by_k {
            plot.push(PlotRow {
                base,
                k,
                observed: mean(values),
                predicted: if k == 0 {
                    boot.point.floor
                } else {
                    boot.point.predict(k as f64)
                },
            });
        }
        fits.push(BaseFit { base, boot });
    }
    Ok(FitReport {
        fits,
        plot,
        warnings,
    })
}

/// One metric of one base, side by side with its reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    /// Numeral base.
    pub base: u32,
    /// Which quantity is compared.
    pub metric: &'static str,
    /// Locally measured value.
    pub local: f64,
    /// Bundled reference value.
    pub reference: f64,
    /// Reference dispersion for context.
    pub tolerance: f64,
    /// `(local - reference) / reference`.
    pub deviation: f64,
}

fn compare_row(base: u32, metric: &'static str, local: f64, reference: f64, tol: f64) -> CompareRow {
    CompareRow {
        base,
        metric,
        local,
        reference,
        tolerance: tol,
        deviation: (local - reference) / reference,
    }
}

/// Fit landmarks of one base, as read back from a fits file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    /// Numeral base.
    pub base: u32,
    /// Half-rise shot count.
    pub k50: f64,
    /// 90%-rise shot count.
    pub k90: f64,
    /// `k90 - k10`.
    pub phase_width: f64,
}

/// Probe summary of one base, as read back from a probe file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalProbe {
    /// Numeral base.
    pub base: u32,
    /// Mean pattern density.
    pub rho: f64,
    /// Mean query-to-centroid distance.
    pub d_r: f64,
}

/// Lines up local fit landmarks with the reference table.
///
/// Bases without a reference row are an error; reference metrics a local
/// row cannot supply are simply absent from the output.
pub fn compare_fits(rows: &[LocalFit]) -> Result<Vec<CompareRow>, HarnessError> {
    let mut out = Vec::new();
    for row in rows {
        let reference = fit_reference(row.base)?;
        out.push(compare_row(
            row.base,
            "k50",
            row.k50,
            reference.k50,
            reference.k50_tol,
        ));
        out.push(compare_row(
            row.base,
            "k90",
            row.k90,
            reference.k90,
            reference.k90_tol,
        ));
        out.push(compare_row(
            row.base,
            "phase_width",
            row.phase_width,
            reference.width,
            reference.width_tol,
        ));
    }
    Ok(out)
}

/// Lines up local probe summaries with the reference table.
///
/// Reference distances are on their own reporting scale, so the `d_r`
/// deviation is informative rather than expected to be small.
pub fn compare_probe(rows: &[LocalProbe]) -> Result<Vec<CompareRow>, HarnessError> {
    let mut out = Vec::new();
    for row in rows {
        let reference = probe_reference(row.base)?;
        out.push(compare_row(
            row.base,
            "rho",
            row.rho,
            reference.rho,
            reference.rho_tol,
        ));
        out.push(compare_row(
            row.base,
            "d_r",
            row.d_r,
            reference.d_r,
            reference.d_r_tol,
        ));
    }
    Ok(out)
}
