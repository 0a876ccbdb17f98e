//! Constrained weight search.
//!
//! The search maximizes the summed rank score of the displayed ads over a
//! training set, subject to the weights lying on the simplex, the revenue
//! change ratio staying within `|theta_1|`, and every other metric's change
//! ratio reaching at least `theta_k`. Selection is an argmax, so the program
//! is discontinuous in the weights; it is solved exactly over a discretized
//! simplex.
//!
//! A weight vector only counts as a solution if it changes at least one
//! selection on the training set. Vectors that reproduce the highest-bid
//! outcome everywhere are the fallback, not a trade-off, and when nothing
//! else is admissible the result is reported as infeasible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::split_folds;
use crate::error::{Error, Result};
use crate::metrics::{MetricIndex, METRIC_COUNT};
use crate::rerank::{dot, select_winner, select_with_fallback, PreparedAuction, Selection, WeightVector};
use crate::scalar::Scalar;
use crate::simplex::{composition_array, SimplexGrid};

/// Default grid spacing: 53,130 weight vectors over six metrics.
pub const DEFAULT_GRID_STEP: f64 = 0.05;

/// Maximum revenue loss (`theta[0] <= 0`) and minimum gains (`theta[k] >= 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[T; METRIC_COUNT]", into = "[T; METRIC_COUNT]")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct TradeoffThresholds<T: Scalar>([T; METRIC_COUNT]);

impl<T: Scalar> TradeoffThresholds<T> {
    pub fn new(theta: [T; METRIC_COUNT]) -> Result<Self> {
        if let Some(k) = theta.iter().position(|t| !t.is_finite_value()) {
            return Err(Error::InvalidThresholds(format!("theta_{} is not finite", k + 1)));
        }
        if theta[0] > T::zero() {
            return Err(Error::InvalidThresholds(format!("theta_1 must be <= 0, got {:?}", theta[0])));
        }
        for (k, t) in theta.iter().enumerate().skip(1) {
            if *t < T::zero() {
                return Err(Error::InvalidThresholds(format!("theta_{} must be >= 0, got {t:?}", k + 1)));
            }
        }
        Ok(TradeoffThresholds(theta))
    }

    pub fn from_parts(revenue_loss: T, others: [T; METRIC_COUNT - 1]) -> Result<Self> {
        let mut theta = std::array::from_fn(|_| T::zero());
        theta[0] = revenue_loss;
        for (slot, t) in theta[1..].iter_mut().zip(others) {
            *slot = t;
        }
        Self::new(theta)
    }

    /// Revenue may drop by at most `|theta1|`; the other metrics may not drop.
    pub fn revenue_only(theta1: T) -> Result<Self> {
        Self::from_parts(theta1, std::array::from_fn(|_| T::zero()))
    }

    pub fn values(&self) -> &[T; METRIC_COUNT] {
        &self.0
    }

    /// Whether a vector of change ratios satisfies every bound (non-strict).
    pub fn admits(&self, xi: &[T; METRIC_COUNT]) -> bool {
        if xi[0].abs() > self.0[0].abs() {
            return false;
        }
        (1..METRIC_COUNT).all(|k| xi[k] >= self.0[k])
    }
}

impl<T: Scalar> TryFrom<[T; METRIC_COUNT]> for TradeoffThresholds<T> {
    type Error = Error;

    fn try_from(theta: [T; METRIC_COUNT]) -> Result<Self> {
        TradeoffThresholds::new(theta)
    }
}

impl<T: Scalar> From<TradeoffThresholds<T>> for [T; METRIC_COUNT] {
    fn from(t: TradeoffThresholds<T>) -> Self {
        t.0
    }
}

/// Relative change of each metric between proposed and baseline selections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport<T> {
    pub xi: [T; METRIC_COUNT],
    pub n_auctions: usize,
}

impl<T: Scalar> ChangeReport<T> {
    pub fn zero(n_auctions: usize) -> Self {
        ChangeReport {
            xi: std::array::from_fn(|_| T::zero()),
            n_auctions,
        }
    }

    pub fn get(&self, k: MetricIndex) -> &T {
        &self.xi[k.position()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct OptimizationResult<T: Scalar> {
    pub status: Status,
    pub weights: Option<WeightVector<T>>,
    /// Integer grid counts behind `weights`; they sum to the grid's divisions.
    pub composition: Option<[u32; METRIC_COUNT]>,
    pub objective: Option<T>,
    pub train_changes: Option<ChangeReport<T>>,
    pub candidates_evaluated: usize,
    /// Grid vectors satisfying every constraint, including ones that reproduce the baseline.
    pub admissible: usize,
    /// Admissible vectors that also change at least one selection.
    pub solutions: usize,
}

impl<T: Scalar> OptimizationResult<T> {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }
}

/// Relative change of metric `k`: `sum(x_prop - x_base) / sum(x_base)` for metric `k`.
pub fn change_ratio<T: Scalar>(k: MetricIndex, proposed: &[Selection<T>], baseline: &[Selection<T>]) -> Result<T> {
    if proposed.len() != baseline.len() || proposed.is_empty() {
        return Err(Error::MisalignedSelections(format!(
            "{} proposed vs {} baseline selections",
            proposed.len(),
            baseline.len()
        )));
    }
    let mut diff = T::zero();
    let mut base = T::zero();
    for (p, b) in proposed.iter().zip(baseline) {
        if p.auction_id != b.auction_id {
            return Err(Error::MisalignedSelections(format!(
                "auction `{}` paired with `{}`",
                p.auction_id, b.auction_id
            )));
        }
        diff = diff + (p.metric_vector[k].clone() - b.metric_vector[k].clone());
        base = base + b.metric_vector[k].clone();
    }
    if base.is_zero() {
        return Err(Error::DegenerateBaseline(k));
    }
    Ok(diff / base)
}

fn baseline_selections<T: Scalar>(auctions: &[PreparedAuction<T>]) -> Vec<Selection<T>> {
    auctions.iter().map(|a| select_with_fallback(None, a)).collect()
}

/// Change ratios of all metrics for `w` on `auctions`.
pub fn change_report<T: Scalar>(w: &WeightVector<T>, auctions: &[PreparedAuction<T>]) -> Result<ChangeReport<T>> {
    let proposed: Vec<Selection<T>> = auctions.iter().map(|a| select_winner(w, a)).collect();
    let baseline = baseline_selections(auctions);
    let mut xi = std::array::from_fn(|_| T::zero());
    for k in MetricIndex::ALL {
        xi[k.position()] = change_ratio(k, &proposed, &baseline)?;
    }
    Ok(ChangeReport {
        xi,
        n_auctions: auctions.len(),
    })
}

/// Checks the trade-off constraints for `w` on a training set.
pub fn feasible<T: Scalar>(
    w: &WeightVector<T>,
    train: &[PreparedAuction<T>],
    thresholds: &TradeoffThresholds<T>,
) -> Result<(bool, ChangeReport<T>)> {
    if train.is_empty() {
        return Err(Error::TooFewAuctions { auctions: 0, folds: 1 });
    }
    let report = change_report(w, train)?;
    Ok((thresholds.admits(&report.xi), report))
}

/// Sum over auctions of the selected ad's rank score.
pub fn objective<T: Scalar>(w: &WeightVector<T>, train: &[PreparedAuction<T>]) -> T {
    train.iter().fold(T::zero(), |acc, a| acc + select_winner(w, a).rank_score)
}

/// Outcome of one grid vector on a training set.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint<T> {
    pub composition: [u32; METRIC_COUNT],
    pub objective: T,
    pub xi: [T; METRIC_COUNT],
    /// Auctions whose selection differs from the highest bid.
    pub changed: usize,
}

/// Every grid vector evaluated on one training set.
///
/// Evaluation does not depend on the thresholds, so one evaluation serves
/// any number of threshold settings.
#[derive(Clone, Debug)]
pub struct GridEvaluation<T> {
    pub grid: SimplexGrid,
    pub points: Vec<GridPoint<T>>,
    pub n_auctions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Candidates of all auctions in one contiguous buffer.
struct FlatAuctions<T> {
    metrics: Vec<[T; METRIC_COUNT]>,
    ends: Vec<usize>,
}

impl<T: Scalar> FlatAuctions<T> {
    fn new(auctions: &[PreparedAuction<T>]) -> Self {
        let mut metrics = Vec::new();
        let mut ends = Vec::with_capacity(auctions.len());
        for a in auctions {
            metrics.extend(a.candidates().iter().map(|c| c.metrics.values().clone()));
            ends.push(metrics.len());
        }
        FlatAuctions { metrics, ends }
    }

    fn evaluate(&self, composition: [u32; METRIC_COUNT], total: u32, baseline_sum: &[T; METRIC_COUNT]) -> GridPoint<T> {
        let w: [T; METRIC_COUNT] = std::array::from_fn(|k| T::from_ratio(composition[k] as usize, total as usize));
        let mut objective = T::zero();
        let mut diff: [T; METRIC_COUNT] = std::array::from_fn(|_| T::zero());
        let mut changed = 0;
        let mut start = 0;
        for &end in &self.ends {
            let cands = &self.metrics[start..end];
            let mut best = 0;
            let mut best_score = dot(&w, &cands[0]);
            for (i, x) in cands.iter().enumerate().skip(1) {
                let s = dot(&w, x);
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            objective = objective + best_score;
            if best != 0 {
                changed += 1;
            }
            let (sel, base) = (&cands[best], &cands[0]);
            for k in 0..METRIC_COUNT {
                diff[k] = diff[k].clone() + (sel[k].clone() - base[k].clone());
            }
            start = end;
        }
        let xi = std::array::from_fn(|k| diff[k].clone() / baseline_sum[k].clone());
        GridPoint {
            composition,
            objective,
            xi,
            changed,
        }
    }
}

/// Evaluates every vector of `grid` on `train`.
pub fn evaluate_grid<T: Scalar>(train: &[PreparedAuction<T>], grid: &SimplexGrid, execution: Execution) -> Result<GridEvaluation<T>> {
    if grid.dims() != METRIC_COUNT {
        return Err(Error::InvalidWeights(format!(
            "grid has {} dims, expected {METRIC_COUNT}",
            grid.dims()
        )));
    }
    if train.is_empty() {
        return Err(Error::TooFewAuctions { auctions: 0, folds: 1 });
    }
    let mut baseline_sum: [T; METRIC_COUNT] = std::array::from_fn(|_| T::zero());
    for a in train {
        let x = a.baseline().metrics.values();
        for k in 0..METRIC_COUNT {
            baseline_sum[k] = baseline_sum[k].clone() + x[k].clone();
        }
    }
    if let Some(k) = baseline_sum.iter().position(|s| s.is_zero()) {
        return Err(Error::DegenerateBaseline(MetricIndex::ALL[k]));
    }

    let flat = FlatAuctions::new(train);
    let total = grid.divisions();
    let compositions: Vec<[u32; METRIC_COUNT]> = grid.compositions().map(|c| composition_array(&c)).collect();
    let points = match execution {
        Execution::Serial => compositions.into_iter().map(|c| flat.evaluate(c, total, &baseline_sum)).collect(),
        Execution::Parallel => compositions
            .into_par_iter()
            .map(|c| flat.evaluate(c, total, &baseline_sum))
            .collect(),
    };
    Ok(GridEvaluation {
        grid: *grid,
        points,
        n_auctions: train.len(),
    })
}

impl<T: Scalar> GridEvaluation<T> {
    /// Best admissible solution for `thresholds`: highest objective, ties to
    /// the lexicographically smallest composition.
    pub fn select(&self, thresholds: &TradeoffThresholds<T>) -> OptimizationResult<T> {
        let mut best: Option<&GridPoint<T>> = None;
        let mut admissible = 0;
        let mut solutions = 0;
        for p in &self.points {
            if !thresholds.admits(&p.xi) {
                continue;
            }
            admissible += 1;
            if p.changed == 0 {
                continue;
            }
            solutions += 1;
            // points are in lexicographic order, so only a strict improvement replaces
            if best.is_none_or(|b| p.objective > b.objective) {
                best = Some(p);
            }
        }
        match best {
            Some(p) => OptimizationResult {
                status: Status::Feasible,
                weights: Some(WeightVector::from_composition(&p.composition).expect("grid compositions are non-zero")),
                composition: Some(p.composition),
                objective: Some(p.objective.clone()),
                train_changes: Some(ChangeReport {
                    xi: p.xi.clone(),
                    n_auctions: self.n_auctions,
                }),
                candidates_evaluated: self.points.len(),
                admissible,
                solutions,
            },
            None => OptimizationResult {
                status: Status::Infeasible,
                weights: None,
                composition: None,
                objective: None,
                train_changes: None,
                candidates_evaluated: self.points.len(),
                admissible,
                solutions,
            },
        }
    }
}

pub fn optimize_weights_with<T: Scalar>(
    train: &[PreparedAuction<T>],
    thresholds: &TradeoffThresholds<T>,
    grid: &SimplexGrid,
    execution: Execution,
) -> Result<OptimizationResult<T>> {
    Ok(evaluate_grid(train, grid, execution)?.select(thresholds))
}

/// Solves the weight program on `train` over the simplex grid with spacing `step`.
pub fn optimize_weights<T: Scalar>(
    train: &[PreparedAuction<T>],
    thresholds: &TradeoffThresholds<T>,
    step: f64,
) -> Result<OptimizationResult<T>> {
    let grid = SimplexGrid::from_step(METRIC_COUNT, step)?;
    optimize_weights_with(train, thresholds, &grid, Execution::Parallel)
}

/// Change ratios and summed rank score of `weights` on `auctions`.
///
/// Without weights the highest-bid fallback applies: nothing changes, so
/// every ratio is zero and there is no objective.
pub fn apply_weights<T: Scalar>(
    weights: Option<&WeightVector<T>>,
    auctions: &[PreparedAuction<T>],
) -> Result<(ChangeReport<T>, Option<T>)> {
    match weights {
        None => Ok((ChangeReport::zero(auctions.len()), None)),
        Some(w) => Ok((change_report(w, auctions)?, Some(objective(w, auctions)))),
    }
}

/// One cross-validation fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldOutcome<T: Scalar> {
    pub fold: usize,
    pub result: OptimizationResult<T>,
    pub train: ChangeReport<T>,
    pub test: ChangeReport<T>,
    pub train_objective: Option<T>,
    pub test_objective: Option<T>,
}

/// Train/test partition of auction indices, both in ascending order.
pub fn fold_partitions(n: usize, folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let split = split_folds(n, folds, seed)?;
    Ok(split
        .iter()
        .map(|test| {
            let mut in_test = vec![false; n];
            for &i in test {
                in_test[i] = true;
            }
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            let test = (0..n).filter(|&i| in_test[i]).collect();
            (train, test)
        })
        .collect())
}

pub(crate) fn pick<T: Clone>(data: &[T], indices: &[usize]) -> Vec<T> {
    indices.iter().map(|&i| data[i].clone()).collect()
}

/// Evaluates a fold once the optimizer has run on its training part.
pub(crate) fn fold_outcome<T: Scalar>(
    fold: usize,
    result: OptimizationResult<T>,
    train: &[PreparedAuction<T>],
    test: &[PreparedAuction<T>],
    thresholds: &TradeoffThresholds<T>,
) -> Result<FoldOutcome<T>> {
    let weights = result.weights.as_ref();
    if let Some(w) = weights {
        // independent re-check through the selection path
        let (ok, report) = feasible(w, train, thresholds)?;
        if !ok || Some(&report) != result.train_changes.as_ref() {
            return Err(Error::Revalidation(format!("fold {fold}: weights {:?}", w.values())));
        }
    }
    let (train_changes, train_objective) = match (&result.train_changes, &result.objective) {
        (Some(c), Some(o)) => (c.clone(), Some(o.clone())),
        _ => (ChangeReport::zero(train.len()), None),
    };
    let (test_changes, test_objective) = apply_weights(weights, test)?;
    Ok(FoldOutcome {
        fold,
        result,
        train: train_changes,
        test: test_changes,
        train_objective,
        test_objective,
    })
}

/// k-fold cross-validation of the weight search at fixed thresholds.
pub fn cross_validate<T: Scalar>(
    dataset: &[PreparedAuction<T>],
    folds: usize,
    thresholds: &TradeoffThresholds<T>,
    step: f64,
    seed: u64,
) -> Result<Vec<FoldOutcome<T>>> {
    let grid = SimplexGrid::from_step(METRIC_COUNT, step)?;
    fold_partitions(dataset.len(), folds, seed)?
        .into_iter()
        .enumerate()
        .map(|(fold, (train_idx, test_idx))| {
            let train = pick(dataset, &train_idx);
            let test = pick(dataset, &test_idx);
            let result = optimize_weights_with(&train, thresholds, &grid, Execution::Parallel)?;
            fold_outcome(fold, result, &train, &test, thresholds)
        })
        .collect()
}
