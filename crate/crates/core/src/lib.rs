//! Two-stage ad selection for real-time bidding.
//!
//! Stage I runs a second-price auction and prices every candidate. Stage II
//! re-ranks the candidates by a weighted sum of six normalized metrics
//! (publisher revenue, advertiser utility, memorability, CTR, contextual
//! relevance, saliency). The weights are found by exhaustive search over a
//! simplex grid, maximizing the summed rank score of the displayed ads while
//! bounding the revenue loss and requiring the other metrics not to fall
//! below their targets.
//!
//! All numeric code is generic over [`Scalar`]; the aliases at the crate
//! root fix it to `f64`, and the `Exact*` aliases to [`BigRational`].

pub mod auction;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod rerank;
pub mod scalar;
pub mod simplex;

pub use num_rational::BigRational;

pub use error::{Error, Result};
pub use metrics::{MetricIndex, METRIC_COUNT};
pub use optimizer::{Execution, Status};
pub use scalar::Scalar;
pub use simplex::SimplexGrid;

pub type Bid = auction::Bid<f64>;
pub type StageOneResult = auction::StageOneResult<f64>;
pub type RawMetrics = metrics::RawMetrics<f64>;
pub type MetricVector = metrics::MetricVector<f64>;
pub type Candidate = dataset::Candidate<f64>;
pub type AuctionRecord = dataset::AuctionRecord<f64>;
pub type WeightVector = rerank::WeightVector<f64>;
pub type Selection = rerank::Selection<f64>;
pub type PreparedAuction = rerank::PreparedAuction<f64>;
pub type TradeoffThresholds = optimizer::TradeoffThresholds<f64>;
pub type ChangeReport = optimizer::ChangeReport<f64>;
pub type OptimizationResult = optimizer::OptimizationResult<f64>;
pub type GridEvaluation = optimizer::GridEvaluation<f64>;

pub type ExactMetricVector = metrics::MetricVector<BigRational>;
pub type ExactAuctionRecord = dataset::AuctionRecord<BigRational>;
pub type ExactWeightVector = rerank::WeightVector<BigRational>;
pub type ExactPreparedAuction = rerank::PreparedAuction<BigRational>;
pub type ExactTradeoffThresholds = optimizer::TradeoffThresholds<BigRational>;
pub type ExactOptimizationResult = optimizer::OptimizationResult<BigRational>;
