//! CSV writers and readers for every file the harness emits.
//!
//! All floats go through plain `Display`, which prints the shortest string
//! that round-trips, so replaying the same records yields byte-identical
//! files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anchorlab_core::fit::{DeltaMatrix, InterferenceRun};

use crate::analyze::{BaseFit, LocalFit, LocalProbe, PlotRow};
use crate::probe::ProbeReport;
use crate::record::Aggregate;
use crate::sweep::SweepReport;
use crate::HarnessError;

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(BufWriter::new(file))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), HarnessError> {
    w.flush().map_err(|e| HarnessError::io(path, e))
}

macro_rules! out {
    ($w:expr, $path:expr, $($arg:tt)*) => {
        writeln!($w, $($arg)*).map_err(|e| HarnessError::io($path, e))?
    };
}

/// Writes `aggregates.csv`: one row per cell.
pub fn write_aggregates(path: &Path, rows: &[Aggregate]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    out!(w, path, "base,k,accuracy,n");
    for row in rows {
        out!(w, path, "{},{},{},{}", row.base, row.k, row.accuracy, row.n);
    }
    finish(w, path)
}

/// Writes `fits.csv`: one row per fitted base, intervals inline.
pub fn write_fits(path: &Path, fits: &[BaseFit]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    out!(
        w,
        path,
        "base,a,g,k50,k50_lo,k50_hi,k90,k90_lo,k90_hi,phase_width,width_lo,width_hi,asymptote,floor,rss,extrapolated"
    );
    for fit in fits {
        let p = &fit.boot.point;
        out!(
            w,
            path,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fit.base,
            p.a,
            p.g,
            p.k50,
            fit.boot.k50.lo,
            fit.boot.k50.hi,
            p.k90,
            fit.boot.k90.lo,
            fit.boot.k90.hi,
            p.phase_width,
            fit.boot.phase_width.lo,
            fit.boot.phase_width.hi,
            p.asymptote,
            p.floor,
            p.rss,
            p.extrapolated
        );
    }
    finish(w, path)
}

/// Writes `plotdata.csv`: observed and fitted accuracy per cell.
pub fn write_plot(path: &Path, rows: &[PlotRow]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    out!(w, path, "base,k,observed,predicted");
    for row in rows {
        out!(
            w,
            path,
            "{},{},{},{}",
            row.base,
            row.k,
            row.observed,
            row.predicted
        );
    }
    finish(w, path)
}

/// Writes `widths.csv`: every sweep point with its curve's width.
pub fn write_sweep(path: &Path, report: &SweepReport) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    out!(w, path, "n,s_star,trials,success_rate,width");
    for row in &report.rows {
        out!(
            w,
            path,
            "{},{},{},{},{}",
            row.n,
            row.s_star,
            row.trials,
            row.success_rate,
            row.width
        );
    }
    finish(w, path)
}

/// Writes `probe.csv`: per-base density and distance summaries.
pub fn write_probe(path: &Path, report: &ProbeReport) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    out!(w, path, "base,rho_mean,rho_sd,d_mean,d_sd,samples");
    for row in &report.rows {
        out!(
            w,
            path,
            "{},{},{},{},{},{}",
            row.base,
            row.rho_mean,
            row.rho_sd,
            row.d_mean,
            row.d_sd,
            row.samples
        );
    }
    finish(w, path)
}

/// Writes `effects.csv`: pairwise density separations.
pub fn write_effects(path: &Path, report: &ProbeReport) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    out!(w, path, "base_a,base_b,cohens_d");
    for effect in &report.effects {
        out!(
            w,
            path,
            "{},{},{}",
            effect.base_a,
            effect.base_b,
            effect.cohens_d
        );
    }
    finish(w, path)
}

/// Writes `interference.csv`: one row per (trained, evaluated) pair.
pub fn write_interference(path: &Path, matrix: &DeltaMatrix) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    out!(w, path, "trained_base,evaluated_base,delta_pp");
    for &trained in &matrix.bases {
        for &evaluated in &matrix.bases {
            let delta = matrix
                .get(trained, evaluated)
                .expect("matrix covers its own bases");
            out!(w, path, "{},{},{}", trained, evaluated, delta);
        }
    }
    finish(w, path)
}

/// A parsed CSV with a named header row.
struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Result<Self, HarnessError> {
        let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| HarnessError::io(path, e))?,
            None => {
                return Err(HarnessError::config(format!(
                    "{}: empty file, expected a header row",
                    path.display()
                )))
            }
        };
        let header: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line.map_err(|e| HarnessError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if fields.len() != header.len() {
                return Err(HarnessError::config(format!(
                    "{}: row {} has {} fields, header has {}",
                    path.display(),
                    idx + 2,
                    fields.len(),
                    header.len()
                )));
            }
            rows.push(fields);
        }
        Ok(Csv { header, rows })
    }

    fn column(&self, path: &Path, name: &str) -> Result<usize, HarnessError> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            HarnessError::config(format!("{}: missing column '{name}'", path.display()))
        })
    }
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    row: usize,
    name: &str,
    raw: &str,
) -> Result<T, HarnessError> {
    raw.parse().map_err(|_| {
        HarnessError::config(format!(
            "{}: row {}: bad {name} value '{raw}'",
            path.display(),
            row + 2
        ))
    })
}

/// Reads fit landmarks back from a `fits.csv`.
pub fn read_fits_csv(path: &Path) -> Result<Vec<LocalFit>, HarnessError> {
    let csv = Csv::read(path)?;
    let base = csv.column(path, "base")?;
    let k50 = csv.column(path, "k50")?;
    let k90 = csv.column(path, "k90")?;
    let width = csv.column(path, "phase_width")?;
    csv.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(LocalFit {
                base: parse_field(path, i, "base", &row[base])?,
                k50: parse_field(path, i, "k50", &row[k50])?,
                k90: parse_field(path, i, "k90", &row[k90])?,
                phase_width: parse_field(path, i, "phase_width", &row[width])?,
            })
        })
        .collect()
}

/// Reads probe summaries back from a `probe.csv`.
pub fn read_probe_csv(path: &Path) -> Result<Vec<LocalProbe>, HarnessError> {
    let csv = Csv::read(path)?;
    let base = csv.column(path, "base")?;
    let rho = csv.column(path, "rho_mean")?;
    let d_r = csv.column(path, "d_mean")?;
    csv.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(LocalProbe {
                base: parse_field(path, i, "base", &row[base])?,
                rho: parse_field(path, i, "rho_mean", &row[rho])?,
                d_r: parse_field(path, i, "d_mean", &row[d_r])?,
            })
        })
        .collect()
}

/// Reads before/after accuracy pairs for the interference matrix.
pub fn read_interference_pairs(path: &Path) -> Result<Vec<InterferenceRun>, HarnessError> {
    let csv = Csv::read(path)?;
    let trained = csv.column(path, "trained_base")?;
    let evaluated = csv.column(path, "evaluated_base")?;
    let before = csv.column(path, "accuracy_before")?;
    let after = csv.column(path, "accuracy_after")?;
    csv.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(InterferenceRun {
                trained_base: parse_field(path, i, "trained_base", &row[trained])?,
                evaluated_base: parse_field(path, i, "evaluated_base", &row[evaluated])?,
                accuracy_before: parse_field(path, i, "accuracy_before", &row[before])?,
                accuracy_after: parse_field(path, i, "accuracy_after", &row[after])?,
            })
        })
        .collect()
}
