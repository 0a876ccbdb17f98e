//! Threshold sweeps with cross-validation, and the report files they produce.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{fingerprint, AuctionRecord};
use crate::error::{Error, Result};
use crate::metrics::{MetricIndex, METRIC_COUNT};
use crate::optimizer::{
    apply_weights, evaluate_grid, fold_outcome, fold_partitions, pick, ChangeReport, Execution, Status, TradeoffThresholds,
    DEFAULT_GRID_STEP,
};
use crate::rerank::{select_with_fallback, PreparedAuction, Selection, WeightVector};
use crate::simplex::SimplexGrid;

/// `0, -0.05, ..., -0.5`.
pub fn default_theta1_grid() -> Vec<f64> {
    (0..=10).map(|i| -(i as f64) * 0.05).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub theta1_grid: Vec<f64>,
    pub theta_others: [f64; METRIC_COUNT - 1],
    pub folds: usize,
    pub grid_step: f64,
    pub seed: u64,
    pub reserve: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            theta1_grid: default_theta1_grid(),
            theta_others: [0.0; METRIC_COUNT - 1],
            folds: 10,
            grid_step: DEFAULT_GRID_STEP,
            seed: 42,
            reserve: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta1: f64,
    pub fold: usize,
    pub split: Split,
    pub status: Status,
    /// Summed rank score of the selected ads; absent when the fold fell back to the baseline.
    pub objective: Option<f64>,
    pub xi: [f64; METRIC_COUNT],
    pub weights: Option<[f64; METRIC_COUNT]>,
    pub composition: Option<[u32; METRIC_COUNT]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub seed: u64,
    pub grid_step: f64,
    pub folds: usize,
    pub dataset_fingerprint: String,
    pub n_auctions: usize,
    pub theta1_grid: Vec<f64>,
    pub theta_others: [f64; METRIC_COUNT - 1],
    pub reserve: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub metadata: SweepMetadata,
    /// Ordered by theta1 grid position, then fold, then train before test.
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn rows_for(&self, theta1_index: usize, split: Split) -> impl Iterator<Item = &SweepRow> {
        let per_theta = self.metadata.folds * 2;
        self.rows[theta1_index * per_theta..(theta1_index + 1) * per_theta]
            .iter()
            .filter(move |r| r.split == split)
    }
}

pub fn prepare_all(records: &[AuctionRecord<f64>], reserve: f64) -> Result<Vec<PreparedAuction<f64>>> {
    records.iter().map(|r| PreparedAuction::prepare(r, &reserve)).collect()
}

#[allow(clippy::too_many_arguments)]
fn row(
    theta1: f64,
    fold: usize,
    split: Split,
    status: Status,
    changes: &ChangeReport<f64>,
    objective: Option<f64>,
    weights: Option<&WeightVector<f64>>,
    composition: Option<[u32; METRIC_COUNT]>,
) -> SweepRow {
    SweepRow {
        theta1,
        fold,
        split,
        status,
        objective,
        xi: changes.xi,
        weights: weights.map(|w| *w.values()),
        composition,
    }
}

/// Runs the weight search for every `theta1` on every cross-validation fold.
pub fn run_sweep(records: &[AuctionRecord<f64>], config: &SweepConfig) -> Result<SweepReport> {
    if config.theta1_grid.is_empty() {
        return Err(Error::InvalidThresholds("theta1 grid is empty".into()));
    }
    let thresholds: Vec<TradeoffThresholds<f64>> = config
        .theta1_grid
        .iter()
        .map(|&t| TradeoffThresholds::from_parts(t, config.theta_others))
        .collect::<Result<_>>()?;
    let grid = SimplexGrid::from_step(METRIC_COUNT, config.grid_step)?;
    let prepared = prepare_all(records, config.reserve)?;
    let partitions = fold_partitions(prepared.len(), config.folds, config.seed)?;

    // rows[theta][fold] = (train, test)
    let mut table: Vec<Vec<(SweepRow, SweepRow)>> = vec![Vec::with_capacity(config.folds); thresholds.len()];
    for (fold, (train_idx, test_idx)) in partitions.iter().enumerate() {
        let train = pick(&prepared, train_idx);
        let test = pick(&prepared, test_idx);
        let in_fold = |theta1: f64| {
            move |e: Error| Error::InSweep {
                theta1,
                fold,
                source: Box::new(e),
            }
        };
        let evaluation = evaluate_grid(&train, &grid, Execution::Parallel).map_err(in_fold(config.theta1_grid[0]))?;
        for (ti, t) in thresholds.iter().enumerate() {
            let theta1 = config.theta1_grid[ti];
            let result = evaluation.select(t);
            let out = fold_outcome(fold, result, &train, &test, t).map_err(in_fold(theta1))?;
            let w = out.result.weights.as_ref();
            let c = out.result.composition;
            let status = out.result.status;
            table[ti].push((
                row(theta1, fold, Split::Train, status, &out.train, out.train_objective, w, c),
                row(theta1, fold, Split::Test, status, &out.test, out.test_objective, w, c),
            ));
        }
    }

    let rows = table.into_iter().flatten().flat_map(|(a, b)| [a, b]).collect();
    Ok(SweepReport {
        metadata: SweepMetadata {
            seed: config.seed,
            grid_step: config.grid_step,
            folds: config.folds,
            dataset_fingerprint: fingerprint(records),
            n_auctions: records.len(),
            theta1_grid: config.theta1_grid.clone(),
            theta_others: config.theta_others,
            reserve: config.reserve,
        },
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn xi_header() -> String {
    MetricIndex::ALL
        .iter()
        .map(|k| format!("xi_{}", k.name()))
        .collect::<Vec<_>>()
        .join(",")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Feasible => "feasible",
        Status::Infeasible => "infeasible",
    }
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = format!("theta1,fold,split,status,objective,{}\n", xi_header());
    for r in &report.rows {
        let xi: Vec<String> = r.xi.iter().map(f64::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.theta1,
            r.fold,
            r.split.as_str(),
            status_str(r.status),
            opt_num(r.objective),
            xi.join(",")
        );
    }
    out
}

/// Fold-averaged change ratios per (theta1, split), in theta1 grid order.
pub fn summary_csv(report: &SweepReport) -> String {
    let mut out = format!("theta1,split,folds,feasible_folds,{}\n", xi_header());
    for (ti, theta1) in report.metadata.theta1_grid.iter().enumerate() {
        for split in [Split::Train, Split::Test] {
            let rows: Vec<&SweepRow> = report.rows_for(ti, split).collect();
            let n = rows.len() as f64;
            let feasible = rows.iter().filter(|r| r.status == Status::Feasible).count();
            let means: Vec<String> = (0..METRIC_COUNT)
                .map(|k| (rows.iter().map(|r| r.xi[k]).sum::<f64>() / n).to_string())
                .collect();
            let _ = writeln!(out, "{},{},{},{},{}", theta1, split.as_str(), rows.len(), feasible, means.join(","));
        }
    }
    out
}

fn write_file(path: PathBuf, body: &str) -> Result<PathBuf> {
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `sweep.csv` + `summary.csv` and/or `sweep.json` into `out_dir`.
pub fn emit_report(report: &SweepReport, out_dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&ReportFormat::Csv) {
        written.push(write_file(out_dir.join("sweep.csv"), &sweep_csv(report))?);
        written.push(write_file(out_dir.join("summary.csv"), &summary_csv(report))?);
    }
    if formats.contains(&ReportFormat::Json) {
        let json = serde_json::to_string_pretty(report).expect("report serializes");
        written.push(write_file(out_dir.join("sweep.json"), &(json + "\n"))?);
    }
    Ok(written)
}

/// Result of applying fixed weights (or the highest-bid fallback) to a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub weights: Option<WeightVector<f64>>,
    pub changes: ChangeReport<f64>,
    pub objective: Option<f64>,
    pub revenue: f64,
    pub baseline_revenue: f64,
    pub selections: Vec<Selection<f64>>,
}

pub fn evaluate(records: &[AuctionRecord<f64>], weights: Option<&WeightVector<f64>>, reserve: f64) -> Result<Evaluation> {
    let prepared = prepare_all(records, reserve)?;
    let (changes, objective) = apply_weights(weights, &prepared)?;
    let selections: Vec<Selection<f64>> = prepared.iter().map(|a| select_with_fallback(weights, a)).collect();
    let revenue = selections.iter().map(|s| s.payment).sum();
    let baseline_revenue = prepared.iter().map(|a| a.baseline().payment).sum();
    Ok(Evaluation {
        weights: weights.cloned(),
        changes,
        objective,
        revenue,
        baseline_revenue,
        selections,
    })
}

pub fn selections_csv(selections: &[Selection<f64>]) -> String {
    let metrics = MetricIndex::ALL
        .iter()
        .map(|k| format!("x_{}", k.name()))
        .collect::<Vec<_>>()
        .join(",");
    let mut out = format!("auction_id,winner,rank_score,payment,{metrics}\n");
    for s in selections {
        let xs: Vec<String> = s.metric_vector.values().iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{},{},{},{},{}", s.auction_id, s.winner, s.rank_score, s.payment, xs.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, GeneratorConfig};

    fn tiny_report() -> SweepReport {
        let data = generate_dataset(&GeneratorConfig {
            n_auctions: 40,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let cfg = SweepConfig {
            theta1_grid: vec![0.0, -0.3],
            folds: 2,
            grid_step: 0.25,
            seed: 1,
            ..Default::default()
        };
        run_sweep(&data, &cfg).unwrap()
    }

    #[test]
    fn default_grid_has_eleven_points() {
        let g = default_theta1_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert!((g[10] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn report_row_layout() {
        let report = tiny_report();
        assert_eq!(report.rows.len(), 2 * 2 * 2);
        let order: Vec<(f64, usize, Split)> = report.rows.iter().map(|r| (r.theta1, r.fold, r.split)).collect();
        assert_eq!(order[0], (0.0, 0, Split::Train));
        assert_eq!(order[1], (0.0, 0, Split::Test));
        assert_eq!(order[2], (0.0, 1, Split::Train));
        assert_eq!(order[4], (-0.3, 0, Split::Train));
        let csv = sweep_csv(&report);
        assert_eq!(csv.lines().count(), 1 + 8);
        assert!(
            csv.starts_with("theta1,fold,split,status,objective,xi_revenue,xi_utility,xi_memorability,xi_ctr,xi_relevance,xi_saliency\n")
        );
        let summary = summary_csv(&report);
        let thetas: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(thetas, vec!["0", "0", "-0.3", "-0.3"]);
    }

    #[test]
    fn emit_is_repeatable() {
        let report = tiny_report();
        let dir = tempfile::tempdir().unwrap();
        let a = emit_report(&report, &dir.path().join("a"), &[ReportFormat::Csv, ReportFormat::Json]).unwrap();
        let b = emit_report(&report, &dir.path().join("b"), &[ReportFormat::Csv, ReportFormat::Json]).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let json: SweepReport = serde_json::from_str(&fs::read_to_string(dir.path().join("a/sweep.json")).unwrap()).unwrap();
        assert_eq!(json, report);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let data = generate_dataset(&GeneratorConfig {
            n_auctions: 4,
            ..Default::default()
        })
        .unwrap();
        let cfg = SweepConfig {
            theta1_grid: vec![],
            folds: 2,
            ..Default::default()
        };
        assert!(matches!(run_sweep(&data, &cfg), Err(Error::InvalidThresholds(_))));
        let cfg = SweepConfig {
            theta1_grid: vec![0.1],
            folds: 2,
            ..Default::default()
        };
        assert!(matches!(run_sweep(&data, &cfg), Err(Error::InvalidThresholds(_))));
    }

    #[test]
    fn evaluate_without_weights_is_baseline() {
        let data = generate_dataset(&GeneratorConfig {
            n_auctions: 10,
            ..Default::default()
        })
        .unwrap();
        let e = evaluate(&data, None, 0.0).unwrap();
        assert_eq!(e.changes, ChangeReport::zero(10));
        assert_eq!(e.revenue, e.baseline_revenue);
        let csv = selections_csv(&e.selections);
        assert_eq!(csv.lines().count(), 11);
    }
}
