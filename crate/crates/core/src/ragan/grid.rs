//! Exhaustive hyperparameter search with a resumable journal.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{train, TrainConfig};
use super::RaganError;
use crate::ingest::PairedSample;

pub const TABLE_BATCH_SIZES: [usize; 4] = [5, 10, 15, 30];
pub const TABLE_DROPOUTS: [f64; 3] = [0.2, 0.3, 0.4];
pub const TABLE_LEARNING_RATES: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];
pub const TABLE_OPTIMIZERS: [&str; 1] = ["adamw"];
pub const TABLE_LAMBDAS: [f64; 4] = [10.0, 50.0, 100.0, 500.0];

/// Candidate values per hyperparameter. Cells are the Cartesian product,
/// enumerated with `batch_sizes` outermost and `lambdas` innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRanges {
    pub batch_sizes: Vec<usize>,
    pub dropouts: Vec<f64>,
    pub lr_g: Vec<f64>,
    pub lr_d: Vec<f64>,
    pub optimizers: Vec<String>,
    pub lambdas: Vec<f64>,
}

impl Default for GridRanges {
    fn default() -> Self {
        GridRanges::full()
    }
}

impl GridRanges {
    /// The complete search space.
    pub fn full() -> Self {
        GridRanges {
            batch_sizes: TABLE_BATCH_SIZES.to_vec(),
            dropouts: TABLE_DROPOUTS.to_vec(),
            lr_g: TABLE_LEARNING_RATES.to_vec(),
            lr_d: TABLE_LEARNING_RATES.to_vec(),
            optimizers: TABLE_OPTIMIZERS.iter().map(|s| s.to_string()).collect(),
            lambdas: TABLE_LAMBDAS.to_vec(),
        }
    }

    /// A one-cell grid holding `cfg`'s values.
    pub fn single(cfg: &TrainConfig) -> Self {
        GridRanges {
            batch_sizes: vec![cfg.batch_size],
            dropouts: vec![cfg.dropout],
            lr_g: vec![cfg.lr_g],
            lr_d: vec![cfg.lr_d],
            optimizers: vec!["adamw".into()],
            lambdas: vec![cfg.lambda],
        }
    }

    pub fn len(&self) -> usize {
        self.batch_sizes.len()
            * self.dropouts.len()
            * self.lr_g.len()
            * self.lr_d.len()
            * self.optimizers.len()
            * self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every value must come from the full search space.
    pub fn validate(&self) -> Result<(), RaganError> {
        if self.is_empty() {
            return Err(RaganError::Grid("every range needs at least one value".into()));
        }
        for b in &self.batch_sizes {
            if !TABLE_BATCH_SIZES.contains(b) {
                return Err(RaganError::Grid(format!("batch size {b} is not one of {TABLE_BATCH_SIZES:?}")));
            }
        }
        let check = |name: &str, vals: &[f64], allowed: &[f64]| -> Result<(), RaganError> {
            for v in vals {
                if !allowed.iter().any(|a| (a - v).abs() <= 1e-12 * a.abs().max(1.0)) {
                    return Err(RaganError::Grid(format!("{name} {v} is not one of {allowed:?}")));
                }
            }
            Ok(())
        };
        check("dropout", &self.dropouts, &TABLE_DROPOUTS)?;
        check("lr_g", &self.lr_g, &TABLE_LEARNING_RATES)?;
        check("lr_d", &self.lr_d, &TABLE_LEARNING_RATES)?;
        check("lambda", &self.lambdas, &TABLE_LAMBDAS)?;
        for o in &self.optimizers {
            if !TABLE_OPTIMIZERS.contains(&o.as_str()) {
                return Err(RaganError::Grid(format!("optimizer {o} is not one of {TABLE_OPTIMIZERS:?}")));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::with_capacity(self.len());
        for &batch_size in &self.batch_sizes {
            for &dropout in &self.dropouts {
                for &lr_g in &self.lr_g {
                    for &lr_d in &self.lr_d {
                        for optimizer in &self.optimizers {
                            for &lambda in &self.lambdas {
                                out.push(GridCell {
                                    index: out.len(),
                                    batch_size,
                                    dropout,
                                    lr_g,
                                    lr_d,
                                    optimizer: optimizer.clone(),
                                    lambda,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub optimizer: String,
    pub lambda: f64,
}

impl GridCell {
    /// Stable identifier used by the journal.
    pub fn key(&self) -> String {
        format!(
            "b{}_d{}_lg{}_ld{}_{}_l{}",
            self.batch_size, self.dropout, self.lr_g, self.lr_d, self.optimizer, self.lambda
        )
    }

    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            dropout: self.dropout,
            lr_g: self.lr_g,
            lr_d: self.lr_d,
            lambda: self.lambda,
            ..*base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub key: String,
    pub cell: GridCell,
    pub val_content: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Rank by validation content loss, ties by enumeration index.
pub fn rank(results: &mut [GridResult]) {
    results.sort_by(|a, b| a.val_content.total_cmp(&b.val_content).then(a.cell.index.cmp(&b.cell.index)));
}

pub const RESULTS_CSV_HEADER: &str =
    "rank,index,batch_size,dropout,lr_g,lr_d,optimizer,lambda,val_content,best_epoch,epochs_run";

/// `results` must already be ranked.
pub fn results_csv(results: &[GridResult]) -> String {
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    for (i, r) in results.iter().enumerate() {
        let c = &r.cell;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            c.index,
            c.batch_size,
            c.dropout,
            c.lr_g,
            c.lr_d,
            c.optimizer,
            c.lambda,
            r.val_content,
            r.best_epoch,
            r.epochs_run
        );
    }
    out
}

/// Completed cells recorded in a JSON-lines journal. A torn final line
/// (from an interrupted write) is ignored.
pub fn read_journal(path: &Path) -> Result<Vec<GridResult>, RaganError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(RaganError::Io { path: path.to_path_buf(), source }),
    };
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<GridResult>(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {}
            Err(e) => return Err(RaganError::Grid(format!("{}: line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn append_journal(path: &Path, r: &GridResult) -> Result<(), RaganError> {
    let io = |source| RaganError::Io { path: path.to_path_buf(), source };
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let mut line = serde_json::to_string(r).expect("result serializes");
    line.push('\n');
    f.write_all(line.as_bytes()).map_err(io)?;
    f.sync_data().map_err(io)
}

/// Train every cell of `ranges` (starting from `base` for the remaining
/// settings) and rank by validation content loss. With a journal, cells
/// already recorded there are not retrained, and each finished cell is
/// appended before moving on. `on_cell` receives each result and whether it
/// came from the journal.
pub fn grid_search(
    train_pairs: &[PairedSample],
    val_pairs: &[PairedSample],
    base: &TrainConfig,
    ranges: &GridRanges,
    journal: Option<&Path>,
    mut on_cell: impl FnMut(&GridResult, bool),
) -> Result<Vec<GridResult>, RaganError> {
    ranges.validate()?;
    let done = match journal {
        Some(p) => read_journal(p)?,
        None => Vec::new(),
    };
    let mut results = Vec::with_capacity(ranges.len());
    for cell in ranges.cells() {
        let key = cell.key();
        if let Some(r) = done.iter().find(|r| r.key == key) {
            on_cell(r, true);
            results.push(r.clone());
            continue;
        }
        let outcome = train(train_pairs, val_pairs, &cell.apply(base), |_| {})?;
        let r = GridResult {
            key,
            cell,
            val_content: outcome.best_val_content,
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.history.len(),
        };
        if let Some(p) = journal {
            append_journal(p, &r)?;
        }
        on_cell(&r, false);
        results.push(r);
    }
    rank(&mut results);
    Ok(results)
}

/// Pairs acquired on one day, for the single-day protocol.
pub fn day_subset(pairs: &[PairedSample], day: u8) -> Vec<PairedSample> {
    pairs.iter().filter(|p| p.day == day).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_size() {
        let g = GridRanges::full();
        assert_eq!(g.len(), 768);
        let cells = g.cells();
        assert_eq!(cells.len(), 768);
        let keys: std::collections::BTreeSet<String> = cells.iter().map(|c| c.key()).collect();
        assert_eq!(keys.len(), 768);
    }

    #[test]
    fn tuned_point_is_in_the_grid() {
        let d = TrainConfig::default();
        assert!(GridRanges::full().cells().iter().any(|c| {
            c.batch_size == d.batch_size
                && c.dropout == d.dropout
                && c.lr_g == d.lr_g
                && c.lr_d == d.lr_d
                && c.lambda == d.lambda
        }));
        assert!(GridRanges::single(&d).validate().is_ok());
    }

    #[test]
    fn out_of_table_values_rejected() {
        let mut g = GridRanges::single(&TrainConfig::default());
        g.batch_sizes = vec![7];
        assert!(g.validate().is_err());
        let mut g = GridRanges::single(&TrainConfig::default());
        g.lambdas = vec![1.0];
        assert!(g.validate().is_err());
        let mut g = GridRanges::single(&TrainConfig::default());
        g.optimizers = vec!["sgd".into()];
        assert!(g.validate().is_err());
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        let cells = GridRanges::full().cells();
        let mk = |i: usize, v: f64| GridResult {
            key: cells[i].key(),
            cell: cells[i].clone(),
            val_content: v,
            best_epoch: 1,
            epochs_run: 1,
        };
        let mut r = vec![mk(3, 0.2), mk(1, 0.1), mk(0, 0.2)];
        rank(&mut r);
        assert_eq!(r.iter().map(|x| x.cell.index).collect::<Vec<_>>(), vec![1, 0, 3]);
        assert!(results_csv(&r).starts_with(RESULTS_CSV_HEADER));
    }

    #[test]
    fn torn_journal_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.jsonl");
        let cell = GridRanges::full().cells()[0].clone();
        let r = GridResult { key: cell.key(), cell, val_content: 0.5, best_epoch: 2, epochs_run: 3 };
        append_journal(&p, &r).unwrap();
        let mut text = std::fs::read_to_string(&p).unwrap();
        text.push_str("{\"key\":\"b5");
        std::fs::write(&p, &text).unwrap();
        assert_eq!(read_journal(&p).unwrap(), vec![r]);
        assert!(read_journal(&dir.path().join("none")).unwrap().is_empty());
    }

    #[test]
    fn journal_floats_are_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.jsonl");
        let cell = GridRanges::full().cells()[0].clone();
        let r = GridResult { key: cell.key(), cell, val_content: 0.17085093324140999, best_epoch: 1, epochs_run: 1 };
        append_journal(&p, &r).unwrap();
        let back = read_journal(&p).unwrap();
        assert_eq!(back[0].val_content.to_bits(), r.val_content.to_bits());
    }
}
