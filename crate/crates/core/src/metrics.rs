//! Stage II inputs: the six per-candidate metric variables.
//!
//! Revenue and utility come from Stage I. Memorability, CTR, relevance and
//! saliency arrive as data (relevance may instead be scored here from raw
//! text). Every metric is min-max scaled across the candidates of a single
//! auction.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::auction::StageOneResult;
use crate::dataset::AuctionRecord;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const METRIC_COUNT: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricIndex {
    Revenue,
    Utility,
    Memorability,
    Ctr,
    Relevance,
    Saliency,
}

impl MetricIndex {
    pub const ALL: [MetricIndex; METRIC_COUNT] = [
        MetricIndex::Revenue,
        MetricIndex::Utility,
        MetricIndex::Memorability,
        MetricIndex::Ctr,
        MetricIndex::Relevance,
        MetricIndex::Saliency,
    ];

    /// Zero-based position in every metric array.
    pub fn position(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricIndex::Revenue => "revenue",
            MetricIndex::Utility => "utility",
            MetricIndex::Memorability => "memorability",
            MetricIndex::Ctr => "ctr",
            MetricIndex::Relevance => "relevance",
            MetricIndex::Saliency => "saliency",
        }
    }
}

impl fmt::Display for MetricIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (k={})", self.name(), self.position() + 1)
    }
}

/// Normalized metric values of one candidate, ordered as [`MetricIndex::ALL`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricVector<T>(pub [T; METRIC_COUNT]);

impl<T: Scalar> MetricVector<T> {
    pub fn splat(v: T) -> Self {
        MetricVector(std::array::from_fn(|_| v.clone()))
    }

    pub fn get(&self, k: MetricIndex) -> &T {
        &self.0[k.position()]
    }

    pub fn values(&self) -> &[T; METRIC_COUNT] {
        &self.0
    }
}

impl<T> Index<MetricIndex> for MetricVector<T> {
    type Output = T;

    fn index(&self, k: MetricIndex) -> &T {
        &self.0[k as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Relevance<T> {
    /// Precomputed similarity from an external model.
    Score(T),
    /// Raw page and ad text, scored with [`lexical_relevance`].
    Text { page_text: String, ad_text: String },
}

/// Externally supplied measurements for one candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawMetrics<T> {
    pub memorability: Option<T>,
    pub ctr: Option<T>,
    pub relevance: Option<Relevance<T>>,
    pub saliency: Option<T>,
}

impl<T> RawMetrics<T> {
    pub fn scored(memorability: T, ctr: T, relevance: T, saliency: T) -> Self {
        RawMetrics {
            memorability: Some(memorability),
            ctr: Some(ctr),
            relevance: Some(Relevance::Score(relevance)),
            saliency: Some(saliency),
        }
    }

    pub fn with_text(memorability: T, ctr: T, page_text: impl Into<String>, ad_text: impl Into<String>, saliency: T) -> Self {
        RawMetrics {
            memorability: Some(memorability),
            ctr: Some(ctr),
            relevance: Some(Relevance::Text {
                page_text: page_text.into(),
                ad_text: ad_text.into(),
            }),
            saliency: Some(saliency),
        }
    }
}

/// Min-max scales `values` into [0, 1]; a constant list maps to 0.5 everywhere.
pub fn normalize_per_auction<T: Scalar>(values: &[T]) -> Result<Vec<T>> {
    let labels: Vec<String> = (0..values.len()).map(|i| format!("#{i}")).collect();
    normalize_labeled(values, &labels, "value")
}

pub(crate) fn normalize_labeled<T: Scalar>(values: &[T], labels: &[String], metric: &str) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(Error::EmptyAuction);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite_value()) {
        return Err(Error::InvalidMetricValue {
            candidate: labels[i].clone(),
            metric: metric.to_string(),
        });
    }
    let mut lo = &values[0];
    let mut hi = &values[0];
    for v in &values[1..] {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    if lo == hi {
        return Ok(vec![T::half(); values.len()]);
    }
    let range = hi.clone() - lo.clone();
    Ok(values.iter().map(|v| (v.clone() - lo.clone()) / range.clone()).collect())
}

/// Lowercased alphanumeric tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn term_counts<S: AsRef<str>>(tokens: &[S]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_ref().to_lowercase()).or_insert(0) += 1;
    }
    counts
}

/// Cosine similarity of the term-frequency vectors of two token lists.
///
/// Returns 0 when either side is empty.
pub fn lexical_relevance<S: AsRef<str>>(page_tokens: &[S], ad_tokens: &[S]) -> f64 {
    let page = term_counts(page_tokens);
    let ad = term_counts(ad_tokens);
    if page.is_empty() || ad.is_empty() {
        return 0.0;
    }
    let dot: u64 = page.iter().filter_map(|(term, a)| ad.get(term).map(|b| a * b)).sum();
    let norm_page: u64 = page.values().map(|c| c * c).sum();
    let norm_ad: u64 = ad.values().map(|c| c * c).sum();
    // sqrt of the product keeps f(a, a) exactly 1
    let sim = dot as f64 / ((norm_page as f64) * (norm_ad as f64)).sqrt();
    sim.min(1.0)
}

fn require<T: Clone>(field: &Option<T>, candidate: &str, name: &str) -> Result<T> {
    field.clone().ok_or_else(|| Error::IncompleteCandidate {
        candidate: candidate.to_string(),
        reason: format!("missing {name}"),
    })
}

/// Builds the normalized metric vector of every candidate in `auction`.
pub fn assemble_metric_vectors<T: Scalar>(
    auction: &AuctionRecord<T>,
    stage_one: &StageOneResult<T>,
) -> Result<BTreeMap<String, MetricVector<T>>> {
    if auction.candidates.is_empty() {
        return Err(Error::EmptyAuction);
    }
    let n = auction.candidates.len();
    let labels: Vec<String> = auction.candidates.iter().map(|c| c.advertiser_id.clone()).collect();
    let mut columns: [Vec<T>; METRIC_COUNT] = std::array::from_fn(|_| Vec::with_capacity(n));

    for cand in &auction.candidates {
        let id = cand.advertiser_id.as_str();
        let outcome = stage_one.per_candidate.get(id).ok_or_else(|| Error::IncompleteCandidate {
            candidate: id.to_string(),
            reason: "no stage-one outcome".into(),
        })?;
        let raw = &cand.raw;
        let relevance = match require(&raw.relevance, id, "relevance")? {
            Relevance::Score(s) => s,
            Relevance::Text { page_text, ad_text } => {
                let score = lexical_relevance(&tokenize(&page_text), &tokenize(&ad_text));
                T::from_f64_value(score).ok_or_else(|| Error::InvalidMetricValue {
                    candidate: id.to_string(),
                    metric: "relevance".into(),
                })?
            }
        };
        columns[0].push(outcome.payment.clone());
        columns[1].push(outcome.utility.clone());
        columns[2].push(require(&raw.memorability, id, "memorability")?);
        columns[3].push(require(&raw.ctr, id, "ctr")?);
        columns[4].push(relevance);
        columns[5].push(require(&raw.saliency, id, "saliency")?);
    }
    if stage_one.per_candidate.len() != n {
        return Err(Error::InconsistentCandidates(auction.auction_id.clone()));
    }

    let mut normalized = Vec::with_capacity(METRIC_COUNT);
    for (k, column) in MetricIndex::ALL.iter().zip(columns.iter()) {
        normalized.push(normalize_labeled(column, &labels, k.name())?);
    }
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, MetricVector(std::array::from_fn(|k| normalized[k][i].clone()))))
        .collect())
}
