//! Auction datasets: the record types, a seeded synthetic generator, JSONL
//! and CSV file formats, and fold splitting for cross-validation.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::auction::Bid;
use crate::error::{Error, Result};
use crate::metrics::{RawMetrics, Relevance};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate<T> {
    pub advertiser_id: String,
    pub bid: T,
    pub raw: RawMetrics<T>,
}

/// One auction: the advertisers competing for a single impression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuctionRecord<T> {
    pub auction_id: String,
    pub candidates: Vec<Candidate<T>>,
}

impl<T: Clone> AuctionRecord<T> {
    pub fn bids(&self) -> Vec<Bid<T>> {
        self.candidates
            .iter()
            .map(|c| Bid::new(c.advertiser_id.clone(), c.bid.clone()))
            .collect()
    }
}

impl AuctionRecord<f64> {
    /// Converts every numeric field to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Result<AuctionRecord<U>> {
        let conv = |v: f64, cand: &str, metric: &str| {
            U::from_f64_value(v).ok_or_else(|| Error::InvalidMetricValue {
                candidate: cand.to_string(),
                metric: metric.to_string(),
            })
        };
        let opt = |v: Option<f64>, cand: &str, metric: &str| v.map(|x| conv(x, cand, metric)).transpose();
        let candidates = self
            .candidates
            .iter()
            .map(|c| {
                let id = c.advertiser_id.as_str();
                let relevance = match &c.raw.relevance {
                    None => None,
                    Some(Relevance::Score(s)) => Some(Relevance::Score(conv(*s, id, "relevance")?)),
                    Some(Relevance::Text { page_text, ad_text }) => Some(Relevance::Text {
                        page_text: page_text.clone(),
                        ad_text: ad_text.clone(),
                    }),
                };
                Ok(Candidate {
                    advertiser_id: c.advertiser_id.clone(),
                    bid: conv(c.bid, id, "bid")?,
                    raw: RawMetrics {
                        memorability: opt(c.raw.memorability, id, "memorability")?,
                        ctr: opt(c.raw.ctr, id, "ctr")?,
                        relevance,
                        saliency: opt(c.raw.saliency, id, "saliency")?,
                    },
                })
            })
            .collect::<Result<_>>()?;
        Ok(AuctionRecord {
            auction_id: self.auction_id.clone(),
            candidates,
        })
    }
}

// ---------------------------------------------------------------------------
// Synthetic generator

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BidDistribution {
    LogNormal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_auctions: usize,
    pub min_candidates: usize,
    pub max_candidates: usize,
    pub bids: BidDistribution,
    pub ctr: BetaParams,
    pub memorability: UniformRange,
    pub relevance: UniformRange,
    pub saliency: UniformRange,
    /// Gaussian-copula correlation between a candidate's bid and its CTR.
    pub bid_ctr_correlation: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_auctions: 5_000,
            min_candidates: 3,
            max_candidates: 8,
            bids: BidDistribution::LogNormal { mu: 0.0, sigma: 1.0 },
            ctr: BetaParams { alpha: 2.0, beta: 8.0 },
            memorability: UniformRange { lo: 0.0, hi: 1.0 },
            relevance: UniformRange { lo: 0.0, hi: 1.0 },
            saliency: UniformRange { lo: 0.0, hi: 1.0 },
            bid_ctr_correlation: 0.0,
            seed: 42,
        }
    }
}

const ADVERTISER_POOL: usize = 200;

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

fn check_range(field: &'static str, r: &UniformRange, non_negative: bool) -> Result<()> {
    if !(r.lo.is_finite() && r.hi.is_finite() && r.lo < r.hi) {
        return Err(invalid(field, format!("need finite lo < hi, got [{}, {})", r.lo, r.hi)));
    }
    if non_negative && r.lo < 0.0 {
        return Err(invalid(field, "lower bound must be non-negative"));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_auctions == 0 {
            return Err(invalid("n_auctions", "must be at least 1"));
        }
        if self.min_candidates == 0 {
            return Err(invalid("min_candidates", "must be at least 1"));
        }
        if self.max_candidates < self.min_candidates {
            return Err(invalid("max_candidates", "must be >= min_candidates"));
        }
        if self.max_candidates > ADVERTISER_POOL {
            return Err(invalid(
                "max_candidates",
                format!("at most {ADVERTISER_POOL} advertisers per auction"),
            ));
        }
        match self.bids {
            BidDistribution::LogNormal { mu, sigma } => {
                if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
                    return Err(invalid("bids", "lognormal needs finite mu and sigma > 0"));
                }
            }
            BidDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                    return Err(invalid("bids", "uniform needs 0 < lo < hi"));
                }
            }
        }
        let BetaParams { alpha, beta } = self.ctr;
        if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
            return Err(invalid("ctr", "beta parameters must be positive"));
        }
        check_range("memorability", &self.memorability, false)?;
        check_range("relevance", &self.relevance, false)?;
        check_range("saliency", &self.saliency, true)?;
        if !(-1.0..=1.0).contains(&self.bid_ctr_correlation) {
            return Err(invalid("bid_ctr_correlation", "must lie in [-1, 1]"));
        }
        Ok(())
    }
}

/// Generates a synthetic dataset; identical configs give identical output.
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Vec<AuctionRecord<f64>>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::standard();
    let ctr_dist = Beta::new(cfg.ctr.alpha, cfg.ctr.beta).map_err(|e| invalid("ctr", e.to_string()))?;
    let rho = cfg.bid_ctr_correlation;
    let rho_c = (1.0 - rho * rho).max(0.0).sqrt();
    let width = cfg.n_auctions.saturating_sub(1).to_string().len().max(4);

    let mut out = Vec::with_capacity(cfg.n_auctions);
    for z in 0..cfg.n_auctions {
        let n = rng.random_range(cfg.min_candidates..=cfg.max_candidates);
        let mut ids: Vec<usize> = index::sample(&mut rng, ADVERTISER_POOL, n).into_vec();
        ids.sort_unstable();
        let candidates = ids
            .into_iter()
            .map(|adv| {
                let z_bid: f64 = rng.sample(StandardNormal);
                let z_noise: f64 = rng.sample(StandardNormal);
                let bid = match cfg.bids {
                    BidDistribution::LogNormal { mu, sigma } => (mu + sigma * z_bid).exp(),
                    BidDistribution::Uniform { lo, hi } => lo + (hi - lo) * std_normal.cdf(z_bid),
                };
                let z_ctr = rho * z_bid + rho_c * z_noise;
                let ctr = ctr_dist.inverse_cdf(std_normal.cdf(z_ctr)).clamp(0.0, 1.0);
                let memorability = rng.random_range(cfg.memorability.lo..cfg.memorability.hi);
                let relevance = rng.random_range(cfg.relevance.lo..cfg.relevance.hi);
                let saliency = rng.random_range(cfg.saliency.lo..cfg.saliency.hi);
                Candidate {
                    advertiser_id: format!("adv{adv:03}"),
                    bid,
                    raw: RawMetrics::scored(memorability, ctr, relevance, saliency),
                }
            })
            .collect();
        out.push(AuctionRecord {
            auction_id: format!("z{z:0width$}"),
            candidates,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// File formats

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" | "json" => Some(DatasetFormat::Jsonl),
            "csv" => Some(DatasetFormat::Csv),
            _ => None,
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(format!("unknown dataset format `{other}` (expected jsonl or csv)")),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct WireCandidate {
    advertiser_id: Option<String>,
    bid: Option<f64>,
    ctr: Option<f64>,
    memorability: Option<f64>,
    saliency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relevance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    page_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ad_text: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireAuction {
    auction_id: Option<String>,
    candidates: Option<Vec<WireCandidate>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    auction_id: String,
    advertiser_id: String,
    bid: Option<f64>,
    ctr: Option<f64>,
    memorability: Option<f64>,
    saliency: Option<f64>,
    relevance: Option<f64>,
}

struct Site<'a> {
    path: &'a str,
    line: u64,
}

impl Site<'_> {
    fn schema(&self, field: &str, reason: impl Into<String>) -> Error {
        Error::Schema {
            path: self.path.to_string(),
            line: self.line,
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    fn parse(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn number(&self, field: &str, v: Option<f64>) -> Result<f64> {
        let v = v.ok_or_else(|| self.schema(field, "missing"))?;
        if !v.is_finite() {
            return Err(self.schema(field, "must be finite"));
        }
        Ok(v)
    }
}

fn to_candidate(site: &Site, w: WireCandidate) -> Result<Candidate<f64>> {
    let advertiser_id = w
        .advertiser_id
        .filter(|s| !s.is_empty())
        .ok_or_else(|| site.schema("advertiser_id", "missing"))?;
    let bid = site.number("bid", w.bid)?;
    if bid < 0.0 {
        return Err(site.schema("bid", format!("must be non-negative, got {bid}")));
    }
    let ctr = site.number("ctr", w.ctr)?;
    if !(0.0..=1.0).contains(&ctr) {
        return Err(site.schema("ctr", format!("must lie in [0, 1], got {ctr}")));
    }
    let memorability = site.number("memorability", w.memorability)?;
    let saliency = site.number("saliency", w.saliency)?;
    if saliency < 0.0 {
        return Err(site.schema("saliency", format!("must be non-negative, got {saliency}")));
    }
    let relevance = match (w.relevance, w.page_text, w.ad_text) {
        (Some(score), None, None) => Relevance::Score(site.number("relevance", Some(score))?),
        (None, Some(page_text), Some(ad_text)) => Relevance::Text { page_text, ad_text },
        (None, None, None) => return Err(site.schema("relevance", "missing (give relevance or page_text + ad_text)")),
        (Some(_), _, _) => return Err(site.schema("relevance", "give either relevance or page_text + ad_text, not both")),
        (None, _, _) => return Err(site.schema("relevance", "page_text and ad_text must be given together")),
    };
    Ok(Candidate {
        advertiser_id,
        bid,
        raw: RawMetrics {
            memorability: Some(memorability),
            ctr: Some(ctr),
            relevance: Some(relevance),
            saliency: Some(saliency),
        },
    })
}

fn check_unique_advertisers(site: &Site, record: &AuctionRecord<f64>) -> Result<()> {
    let mut seen = HashSet::new();
    for c in &record.candidates {
        if !seen.insert(c.advertiser_id.as_str()) {
            return Err(site.schema(
                "advertiser_id",
                format!("duplicate advertiser `{}` in auction `{}`", c.advertiser_id, record.auction_id),
            ));
        }
    }
    Ok(())
}

fn load_jsonl(path: &Path) -> Result<Vec<AuctionRecord<f64>>> {
    let label = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let site = Site {
            path: &label,
            line: i as u64 + 1,
        };
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireAuction = serde_json::from_str(&line).map_err(|e| site.parse(e.to_string()))?;
        let auction_id = wire
            .auction_id
            .filter(|s| !s.is_empty())
            .ok_or_else(|| site.schema("auction_id", "missing"))?;
        let wire_candidates = wire.candidates.ok_or_else(|| site.schema("candidates", "missing"))?;
        if wire_candidates.is_empty() {
            return Err(site.schema("candidates", "auction has no candidates"));
        }
        let candidates = wire_candidates
            .into_iter()
            .map(|c| to_candidate(&site, c))
            .collect::<Result<Vec<_>>>()?;
        let record = AuctionRecord { auction_id, candidates };
        check_unique_advertisers(&site, &record)?;
        if !ids.insert(record.auction_id.clone()) {
            return Err(Error::DuplicateAuction(record.auction_id));
        }
        out.push(record);
    }
    Ok(out)
}

fn load_csv(path: &Path) -> Result<Vec<AuctionRecord<f64>>> {
    let label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: label.clone(),
                line: 1,
                message: format!("{other:?}"),
            },
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: label.clone(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    for required in ["auction_id", "advertiser_id", "bid", "ctr", "memorability", "saliency", "relevance"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Schema {
                path: label.clone(),
                line: 1,
                field: required.into(),
                reason: "missing column".into(),
            });
        }
    }

    let mut out: Vec<AuctionRecord<f64>> = Vec::new();
    let mut first_line: Vec<u64> = Vec::new();
    let mut index_of: HashMap<String, usize> = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                path: label.clone(),
                line,
                message: e.to_string(),
            }
        })?;
        let site = Site {
            path: &label,
            line: row.position().map(|p| p.line()).unwrap_or(0),
        };
        let parsed: CsvRow = row.deserialize(Some(&headers)).map_err(|e| site.parse(e.to_string()))?;
        if parsed.auction_id.is_empty() {
            return Err(site.schema("auction_id", "missing"));
        }
        let cand = to_candidate(
            &site,
            WireCandidate {
                advertiser_id: Some(parsed.advertiser_id),
                bid: parsed.bid,
                ctr: parsed.ctr,
                memorability: parsed.memorability,
                saliency: parsed.saliency,
                relevance: parsed.relevance,
                page_text: None,
                ad_text: None,
            },
        )?;
        match index_of.get(&parsed.auction_id) {
            // rows of one auction must be contiguous
            Some(&i) if i + 1 == out.len() => out[i].candidates.push(cand),
            Some(_) => return Err(Error::DuplicateAuction(parsed.auction_id)),
            None => {
                index_of.insert(parsed.auction_id.clone(), out.len());
                first_line.push(site.line);
                out.push(AuctionRecord {
                    auction_id: parsed.auction_id,
                    candidates: vec![cand],
                });
            }
        }
    }
    for (record, line) in out.iter().zip(first_line) {
        check_unique_advertisers(&Site { path: &label, line }, record)?;
    }
    Ok(out)
}

/// Reads and validates a dataset file.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<AuctionRecord<f64>>> {
    match format {
        DatasetFormat::Jsonl => load_jsonl(path),
        DatasetFormat::Csv => load_csv(path),
    }
}

fn wire_candidate(c: &Candidate<f64>) -> WireCandidate {
    let mut w = WireCandidate {
        advertiser_id: Some(c.advertiser_id.clone()),
        bid: Some(c.bid),
        ctr: c.raw.ctr,
        memorability: c.raw.memorability,
        saliency: c.raw.saliency,
        ..Default::default()
    };
    match &c.raw.relevance {
        Some(Relevance::Score(s)) => w.relevance = Some(*s),
        Some(Relevance::Text { page_text, ad_text }) => {
            w.page_text = Some(page_text.clone());
            w.ad_text = Some(ad_text.clone());
        }
        None => {}
    }
    w
}

/// Writes `records` as JSON lines to any writer.
pub fn write_jsonl<W: Write>(records: &[AuctionRecord<f64>], mut out: W) -> std::io::Result<()> {
    for r in records {
        let wire = WireAuction {
            auction_id: Some(r.auction_id.clone()),
            candidates: Some(r.candidates.iter().map(wire_candidate).collect()),
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_dataset(records: &[AuctionRecord<f64>], path: &Path, format: DatasetFormat) -> Result<()> {
    match format {
        DatasetFormat::Jsonl => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            write_jsonl(records, BufWriter::new(file)).map_err(|e| Error::io(path, e))
        }
        DatasetFormat::Csv => {
            let mut rows = Vec::new();
            for r in records {
                for c in &r.candidates {
                    let relevance = match &c.raw.relevance {
                        Some(Relevance::Score(s)) => Some(*s),
                        Some(Relevance::Text { .. }) => {
                            return Err(Error::Unsupported("text-pair relevance cannot be written as CSV".into()))
                        }
                        None => None,
                    };
                    rows.push(CsvRow {
                        auction_id: r.auction_id.clone(),
                        advertiser_id: c.advertiser_id.clone(),
                        bid: Some(c.bid),
                        ctr: c.raw.ctr,
                        memorability: c.raw.memorability,
                        saliency: c.raw.saliency,
                        relevance,
                    });
                }
            }
            let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Unsupported(format!("{other:?}")),
            })?;
            for row in &rows {
                writer
                    .serialize(row)
                    .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
            }
            writer.flush().map_err(|e| Error::io(path, e))
        }
    }
}

/// SHA-256 of the canonical JSONL encoding, hex encoded.
pub fn fingerprint(records: &[AuctionRecord<f64>]) -> String {
    let mut buf = Vec::new();
    write_jsonl(records, &mut buf).expect("writing to memory cannot fail");
    hex::encode(Sha256::digest(&buf))
}

/// Shuffles `0..n` with `seed` and cuts it into `k` contiguous folds whose
/// sizes differ by at most one (larger folds first).
pub fn split_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(invalid("folds", format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::TooFewAuctions { auctions: n, folds: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}
