//! Run records: one JSONL file per run, a header line followed by one line
//! per evaluated item (plus markers for any cells aborted by backend
//! failure). Aggregates are always recomputed from item rows, so a persisted
//! record replays to exactly the aggregates it shipped with.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// First line of a run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    /// Deterministic run identifier (config digest prefix + seed).
    pub run_id: String,
    /// Wall-clock start, milliseconds since the Unix epoch. The only
    /// non-reproducible field in the file.
    pub timestamp_ms: u64,
    /// SHA-256 digest of the effective config.
    pub config_digest: String,
}

/// One evaluated item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    /// Numeral base of the cell.
    pub base: u32,
    /// Shot count of the cell.
    pub k: u32,
    /// Item index within the cell.
    pub item: u32,
    /// Left operand numeral.
    pub lhs: String,
    /// Right operand numeral.
    pub rhs: String,
    /// Oracle answer numeral.
    pub expected: String,
    /// Verbatim backend response.
    pub response: String,
    /// Whether the response graded correct.
    pub correct: bool,
    /// Wall-clock call latency (0 for the in-process mock).
    pub latency_ms: u64,
}

/// Marker for a cell aborted after the retry budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedCell {
    /// Numeral base of the cell.
    pub base: u32,
    /// Shot count of the cell.
    pub k: u32,
    /// Why the cell was abandoned.
    pub detail: String,
}

/// Every line after the header is one of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordLine {
    /// An evaluated item.
    Item(ItemRecord),
    /// An aborted cell.
    Aborted {
        /// The marker payload.
        aborted: AbortedCell,
    },
}

/// A full run: header, items, and any aborted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// The header line.
    pub header: RunHeader,
    /// Item rows, sorted by (base, k, item).
    pub items: Vec<ItemRecord>,
    /// Cells abandoned mid-run.
    pub aborted: Vec<AbortedCell>,
}

/// One (base, k) accuracy cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// Numeral base.
    pub base: u32,
    /// Shot count.
    pub k: u32,
    /// Mean item correctness.
    pub accuracy: f64,
    /// Items behind the mean.
    pub n: u32,
}

impl RunRecord {
    /// Per-cell accuracies, sorted by (base, k).
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut cells: Vec<(u32, u32, u32, u32)> = Vec::new();
        for item in &self.items {
            match cells
                .iter_mut()
                .find(|(b, k, _, _)| *b == item.base && *k == item.k)
            {
                Some((_, _, correct, n)) => {
                    *correct += item.correct as u32;
                    *n += 1;
                }
                None => cells.push((item.base, item.k, item.correct as u32, 1)),
            }
        }
        cells.sort_unstable_by_key(|&(b, k, _, _)| (b, k));
        cells
            .into_iter()
            .map(|(base, k, correct, n)| Aggregate {
                base,
                k,
                accuracy: correct as f64 / n as f64,
                n,
            })
            .collect()
    }

    /// Writes the record as JSON lines.
    pub fn write_jsonl(&self, path: &Path) -> Result<(), HarnessError> {
        let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let fail = |e| HarnessError::io(path, e);
        let header = serde_json::to_string(&self.header).expect("header serializes");
        writeln!(out, "{header}").map_err(fail)?;
        for item in &self.items {
            let line = serde_json::to_string(item).expect("item serializes");
            writeln!(out, "{line}").map_err(fail)?;
        }
        for cell in &self.aborted {
            let line = serde_json::to_string(&RecordLine::Aborted {
                aborted: cell.clone(),
            })
            .expect("marker serializes");
            writeln!(out, "{line}").map_err(fail)?;
        }
        out.flush().map_err(fail)
    }

    /// Reads a record back from JSON lines.
    pub fn read_jsonl(path: &Path) -> Result<Self, HarnessError> {
        let file = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let bad = |detail: String| HarnessError::config(format!("{}: {detail}", path.display()));
        let first = lines
            .next()
            .ok_or_else(|| bad("empty run record".into()))?
            .map_err(|e| HarnessError::io(path, e))?;
        let header: RunHeader =
            serde_json::from_str(&first).map_err(|e| bad(format!("bad header: {e}")))?;
        let mut items = Vec::new();
        let mut aborted = Vec::new();
        for (ix, line) in lines.enumerate() {
            let line = line.map_err(|e| HarnessError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RecordLine = serde_json::from_str(&line)
                .map_err(|e| bad(format!("line {}: {e}", ix + 2)))?;
            match parsed {
                RecordLine::Item(item) => items.push(item),
                RecordLine::Aborted { aborted: cell } => aborted.push(cell),
            }
        }
        Ok(RunRecord {
            header,
            items,
            aborted,
        })
    }
}
