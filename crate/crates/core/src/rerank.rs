//! Stage II: weighted linear re-ranking of the Stage I candidates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::auction::{bid_precedes, run_stage_one};
use crate::dataset::AuctionRecord;
use crate::error::{Error, Result};
use crate::metrics::{assemble_metric_vectors, MetricIndex, MetricVector, METRIC_COUNT};
use crate::scalar::Scalar;

/// Tolerance on `sum(w) == 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Metric weights on the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[T; METRIC_COUNT]", into = "[T; METRIC_COUNT]")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct WeightVector<T: Scalar>([T; METRIC_COUNT]);

impl<T: Scalar> WeightVector<T> {
    pub fn new(weights: [T; METRIC_COUNT]) -> Result<Self> {
        let mut total = T::zero();
        for (k, w) in weights.iter().enumerate() {
            if !w.is_finite_value() || *w < T::zero() || *w > T::one() {
                return Err(Error::InvalidWeights(format!("weight {} = {:?} outside [0, 1]", k + 1, w)));
            }
            total = total + w.clone();
        }
        let tol = T::from_f64(WEIGHT_SUM_TOLERANCE).expect("tolerance representable");
        if (total.clone() - T::one()).abs() > tol {
            return Err(Error::InvalidWeights(format!("weights sum to {total:?}, expected 1")));
        }
        Ok(WeightVector(weights))
    }

    /// Weights `counts[k] / sum(counts)`.
    pub fn from_composition(counts: &[u32; METRIC_COUNT]) -> Result<Self> {
        let total: u32 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidWeights("composition sums to zero".into()));
        }
        Ok(WeightVector(std::array::from_fn(|k| {
            T::from_ratio(counts[k] as usize, total as usize)
        })))
    }

    pub fn uniform() -> Self {
        WeightVector(std::array::from_fn(|_| T::from_ratio(1, METRIC_COUNT)))
    }

    pub fn unit(k: MetricIndex) -> Self {
        WeightVector(std::array::from_fn(|i| if i == k.position() { T::one() } else { T::zero() }))
    }

    pub fn values(&self) -> &[T; METRIC_COUNT] {
        &self.0
    }
}

impl<T: Scalar> TryFrom<[T; METRIC_COUNT]> for WeightVector<T> {
    type Error = Error;

    fn try_from(w: [T; METRIC_COUNT]) -> Result<Self> {
        WeightVector::new(w)
    }
}

impl<T: Scalar> From<WeightVector<T>> for [T; METRIC_COUNT] {
    fn from(w: WeightVector<T>) -> Self {
        w.0
    }
}

/// The ad displayed in one auction together with what it contributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection<T> {
    pub auction_id: String,
    pub winner: String,
    pub rank_score: T,
    pub metric_vector: MetricVector<T>,
    pub payment: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedCandidate<T> {
    pub advertiser_id: String,
    pub bid: T,
    pub payment: T,
    pub metrics: MetricVector<T>,
}

/// An auction after Stage I pricing and metric assembly.
///
/// Candidates are kept in tie-break order (bid descending, then id
/// ascending), so the first candidate is the baseline winner and the first
/// maximum of any rank score is the re-ranker's winner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedAuction<T> {
    pub auction_id: String,
    candidates: Vec<PreparedCandidate<T>>,
}

impl<T: Scalar> PreparedAuction<T> {
    pub fn prepare(record: &AuctionRecord<T>, reserve: &T) -> Result<Self> {
        let stage_one = run_stage_one(record, reserve)?;
        let vectors = assemble_metric_vectors(record, &stage_one)?;
        let bids = record.candidates.iter().map(|c| (c.advertiser_id.clone(), c.bid.clone())).collect();
        let payments = stage_one.per_candidate.into_iter().map(|(id, o)| (id, o.payment)).collect();
        Self::from_parts(record.auction_id.clone(), vectors, bids, payments)
    }

    /// Assembles an auction from per-candidate maps, which must share one key set.
    pub fn from_parts(
        auction_id: String,
        vectors: BTreeMap<String, MetricVector<T>>,
        bids: BTreeMap<String, T>,
        payments: BTreeMap<String, T>,
    ) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyAuction);
        }
        if !vectors.keys().eq(bids.keys()) || !vectors.keys().eq(payments.keys()) {
            return Err(Error::InconsistentCandidates(auction_id));
        }
        let mut candidates: Vec<PreparedCandidate<T>> = vectors
            .into_iter()
            .zip(bids.into_values().zip(payments.into_values()))
            .map(|((advertiser_id, metrics), (bid, payment))| PreparedCandidate {
                advertiser_id,
                bid,
                payment,
                metrics,
            })
            .collect();
        candidates.sort_by(|a, b| {
            if bid_precedes(&a.bid, &a.advertiser_id, &b.bid, &b.advertiser_id) {
                std::cmp::Ordering::Less
            } else if bid_precedes(&b.bid, &b.advertiser_id, &a.bid, &a.advertiser_id) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        Ok(PreparedAuction { auction_id, candidates })
    }

    pub fn candidates(&self) -> &[PreparedCandidate<T>] {
        &self.candidates
    }

    pub fn baseline(&self) -> &PreparedCandidate<T> {
        &self.candidates[0]
    }

    fn selection(&self, index: usize, score: T) -> Selection<T> {
        let c = &self.candidates[index];
        Selection {
            auction_id: self.auction_id.clone(),
            winner: c.advertiser_id.clone(),
            rank_score: score,
            metric_vector: c.metrics.clone(),
            payment: c.payment.clone(),
        }
    }
}

pub(crate) fn dot<T: Scalar>(w: &[T; METRIC_COUNT], x: &[T; METRIC_COUNT]) -> T {
    let mut acc = T::zero();
    for k in 0..METRIC_COUNT {
        acc = acc + w[k].clone() * x[k].clone();
    }
    acc
}

/// Index and score of the highest-ranked candidate (first maximum in tie-break order).
pub(crate) fn best_candidate<T: Scalar>(w: &[T; METRIC_COUNT], auction: &PreparedAuction<T>) -> (usize, T) {
    let mut best = 0;
    let mut best_score = dot(w, auction.candidates[0].metrics.values());
    for (i, c) in auction.candidates.iter().enumerate().skip(1) {
        let score = dot(w, c.metrics.values());
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    (best, best_score)
}

/// Weighted sum of the metric values.
pub fn rank_score<T: Scalar>(w: &WeightVector<T>, x: &MetricVector<T>) -> T {
    dot(w.values(), x.values())
}

/// Picks the candidate with the highest rank score.
///
/// Ties go to the higher bid, then to the smaller advertiser id.
pub fn select_winner<T: Scalar>(w: &WeightVector<T>, auction: &PreparedAuction<T>) -> Selection<T> {
    let (index, score) = best_candidate(w.values(), auction);
    auction.selection(index, score)
}

/// Re-ranks with `weights`, or reverts to the highest bid when there are none.
///
/// Fallback selections report their rank score under uniform weights.
pub fn select_with_fallback<T: Scalar>(weights: Option<&WeightVector<T>>, auction: &PreparedAuction<T>) -> Selection<T> {
    match weights {
        Some(w) => select_winner(w, auction),
        None => {
            let score = rank_score(&WeightVector::uniform(), &auction.baseline().metrics);
            auction.selection(0, score)
        }
    }
}
